use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

/// Distance under which an agent counts as arrived at its target.
pub const ARRIVAL_EPSILON_M: f64 = 0.05;
/// Smallest distance allowed between two formation slots.
pub const MIN_SLOT_SEPARATION_M: f64 = 0.5;
/// Slots available around one transmitter: 6 in the inner ring, 12 in the outer.
pub const FORMATION_CAPACITY: usize = 18;

const INNER_RING: usize = 6;
// Ring radii as fractions of the communication range (1.3 m and 2.6 m at 3 m).
const INNER_RADIUS_FRACTION: f64 = 1.3 / 3.0;
const OUTER_RADIUS_FRACTION: f64 = 2.6 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ORIGIN: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn distance_sq(self, other: Vec2) -> f64 {
        (self - other).norm_sq()
    }

    fn polar(radius: f64, angle: f64) -> Vec2 {
        Vec2::new(radius * libm::cos(angle), radius * libm::sin(angle))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("formation holds at most {FORMATION_CAPACITY} slots, {requested} requested")]
pub struct FormationCapacityError {
    pub requested: usize,
}

/// First `k` slots of the two-ring hexagonal formation around `center`.
///
/// The inner ring holds 6 slots at 60° spacing, the outer ring 12 slots at 30°
/// spacing, both strictly inside `comm_range`.
pub fn formation_slots(center: Vec2, k: usize, comm_range: f64) -> Result<Vec<Vec2>, FormationCapacityError> {
    if k > FORMATION_CAPACITY {
        return Err(FormationCapacityError { requested: k });
    }
    Ok((0..k).map(|i| center + formation_offset(i, comm_range)).collect())
}

/// Offset of slot `i` (`i < 18`) from the formation center.
pub fn formation_offset(i: usize, comm_range: f64) -> Vec2 {
    use core::f64::consts::PI;
    if i < INNER_RING {
        Vec2::polar(comm_range * INNER_RADIUS_FRACTION, i as f64 * PI / 3.0)
    } else {
        Vec2::polar(comm_range * OUTER_RADIUS_FRACTION, (i - INNER_RING) as f64 * PI / 6.0)
    }
}

/// Advances `from` towards `to` by at most `max_step`.
///
/// Returns the new position and whether it is within [`ARRIVAL_EPSILON_M`] of
/// the target.
pub fn move_towards(from: Vec2, to: Vec2, max_step: f64) -> (Vec2, bool) {
    let delta = to - from;
    let dist = delta.norm();
    if dist <= max_step {
        return (to, true);
    }
    let next = from + delta * (max_step / dist);
    (next, next.distance(to) <= ARRIVAL_EPSILON_M)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_slot_is_on_inner_ring() {
        let slots = formation_slots(Vec2::new(1.0, 1.0), 1, 3.0).unwrap();
        assert_eq!(slots.len(), 1);
        assert!((slots[0].distance(Vec2::new(1.0, 1.0)) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn capacity_is_enforced() {
        assert_eq!(
            formation_slots(Vec2::ORIGIN, 19, 3.0),
            Err(FormationCapacityError { requested: 19 })
        );
        assert!(formation_slots(Vec2::ORIGIN, 0, 3.0).unwrap().is_empty());
    }

    #[test]
    fn zero_distance_arrives_in_place() {
        let p = Vec2::new(2.0, -1.0);
        assert_eq!(move_towards(p, p, 0.1), (p, true));
    }

    #[test]
    fn short_hop_is_captured() {
        let (p, arrived) = move_towards(Vec2::ORIGIN, Vec2::new(0.04, 0.0), 0.1);
        assert!(arrived);
        assert_eq!(p, Vec2::new(0.04, 0.0));
    }

    #[test]
    fn one_metre_takes_ten_steps() {
        let target = Vec2::new(0.6, 0.8);
        let mut p = Vec2::ORIGIN;
        let mut steps = 0;
        loop {
            let (next, arrived) = move_towards(p, target, 0.1);
            assert!(next.distance(p) <= 0.1 + 1e-12);
            p = next;
            steps += 1;
            if arrived {
                break;
            }
        }
        assert_eq!(steps, 10);
    }
}
