use super::geometry::Vec2;

/// When a frame becomes readable by its receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum LatencyMode {
    /// Every frame is readable at the step after emission, so a packet and its
    /// acknowledgement cost two steps.
    #[default]
    ArgosFaithful,
    /// A frame is readable in the same step by receivers that have not run yet
    /// this step, and at the next step by the others.
    Optimistic,
}

impl LatencyMode {
    /// Steps between emitting a frame and reading the reply to it, for a
    /// sender scheduled before its receivers.
    pub fn round_trip_steps(self) -> u64 {
        match self {
            LatencyMode::ArgosFaithful => 2,
            LatencyMode::Optimistic => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub control_step_ms: u32,
    pub comm_range_m: f64,
    pub max_speed_mps: f64,
    /// Probability that a packet frame is lost for one receiver.
    pub failure_rate: f64,
    pub packet_size_bytes: u32,
    pub latency_mode: LatencyMode,
    /// Side of the square placement arena; `None` derives it from the swarm size.
    pub arena_side_m: Option<f64>,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            control_step_ms: 100,
            comm_range_m: 3.0,
            max_speed_mps: 1.0,
            failure_rate: 0.0,
            packet_size_bytes: 12_500,
            latency_mode: LatencyMode::ArgosFaithful,
            arena_side_m: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("failure rate {0} is outside [0, 1)")]
    FailureRate(f64),
    #[error("`{0}` must be positive")]
    NonPositive(&'static str),
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..1.0).contains(&self.failure_rate) {
            return Err(ConfigError::FailureRate(self.failure_rate));
        }
        let positive = |v: f64, name| if v > 0.0 && v.is_finite() { Ok(()) } else { Err(ConfigError::NonPositive(name)) };
        positive(f64::from(self.control_step_ms), "control_step_ms")?;
        positive(self.comm_range_m, "comm_range_m")?;
        positive(self.max_speed_mps, "max_speed_mps")?;
        positive(f64::from(self.packet_size_bytes), "packet_size_bytes")?;
        if let Some(side) = self.arena_side_m {
            positive(side, "arena_side_m")?;
        }
        Ok(())
    }

    /// Distance covered in one control step at full speed.
    pub fn step_advance_m(&self) -> f64 {
        self.max_speed_mps * f64::from(self.control_step_ms) / 1000.0
    }

    /// Arena side for `n` drones: the configured value, or
    /// `max(6 m, 0.45 * sqrt(n) * comm_range)`.
    pub fn arena_side_for(&self, n: usize) -> f64 {
        self.arena_side_m
            .unwrap_or_else(|| f64::max(6.0, 0.45 * libm::sqrt(n as f64) * self.comm_range_m))
    }

    /// Steps needed to cross the arena diagonal for a swarm of `n` drones.
    /// Used as slack on deadlines that cover a journey.
    pub fn travel_budget_steps(&self, n: usize) -> u64 {
        let side = self.arena_side_for(n);
        let diagonal = Vec2::new(side, side).norm();
        libm::ceil(diagonal / self.step_advance_m()) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = WorldConfig::default();
        c.validate().unwrap();
        assert!((c.step_advance_m() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn failure_rate_must_be_below_one() {
        let c = WorldConfig {
            failure_rate: 1.0,
            ..WorldConfig::default()
        };
        assert_eq!(c.validate(), Err(ConfigError::FailureRate(1.0)));
    }

    #[test]
    fn arena_grows_with_swarm() {
        let c = WorldConfig::default();
        assert_eq!(c.arena_side_for(1), 6.0);
        assert!((c.arena_side_for(100) - 13.5).abs() < 1e-12);
        // 30 m side, 42.4 m diagonal at 0.1 m per step
        assert_eq!(
            WorldConfig {
                arena_side_m: Some(30.0),
                ..c
            }
            .travel_budget_steps(1),
            425
        );
    }
}
