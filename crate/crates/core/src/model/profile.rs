//! Synthetic SqueezeNet-shaped fixture.
//!
//! The layer widths are not SqueezeNet 1.1's. They were chosen by a small
//! integer search over (squeeze, expand) channel pairs so that the serialized
//! patches for 0, 4, 6 and 7 frozen fire modules land in the middle of the
//! 240, 192, 128 and 64 packet bins at 12.5 kB per packet:
//!
//! | frozen | patch bytes | packets |
//! |--------|-------------|---------|
//! | 0      | 2 993 998   | 240     |
//! | 4      | 2 393 624   | 192     |
//! | 6      | 1 595 198   | 128     |
//! | 7      |   795 558   | 64      |
//!
//! The search fixed a 64-channel 3x3 stem and a 5-class 1x1 classifier, then
//! picked fire 7/8 widths against the 64 and 128 bins, fire 5/6 against the
//! 192 bin and finally fire 1-4 against the 240 bin, minimizing the summed
//! distance to the bin centers. The full model serializes to 2 993 882 bytes.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{FreezeSpec, NamedTensorModel, Tensor};
use crate::rng::SimRng;

/// `(squeeze, expand)` channels of the eight fire modules, shallowest first.
pub const SQUEEZENET_FIRE_CHANNELS: [(u32, u32); 8] = [
    (8, 88),
    (24, 88),
    (32, 128),
    (44, 128),
    (40, 184),
    (52, 184),
    (72, 240),
    (68, 240),
];

const STEM_CHANNELS: u32 = 64;
const CLASSES: u32 = 5;
/// torchvision's `features` indices of the fire modules.
const FIRE_INDICES: [u32; 8] = [3, 4, 6, 7, 9, 10, 11, 12];
const PROFILE_SEED: u64 = 0x5157_2e2e_4e45_5431;

fn conv(rng: &mut SimRng, out: &mut Vec<Tensor>, prefix: &str, cout: u32, cin: u32, k: u32) {
    let fan_in = f64::from(cin * k * k);
    let bound = 1.0 / libm::sqrt(fan_in);
    let mut draw = |n: usize| -> Vec<f32> { (0..n).map(|_| rng.uniform(-bound, bound) as f32).collect() };
    let weight = draw((cout * cin * k * k) as usize);
    let bias = draw(cout as usize);
    out.push(Tensor {
        name: format!("{prefix}.weight"),
        shape: vec![cout, cin, k, k],
        data: weight,
    });
    out.push(Tensor {
        name: format!("{prefix}.bias"),
        shape: vec![cout],
        data: bias,
    });
}

/// Returns the fixture model and the freeze spec over its eight fire modules
/// (nothing frozen; use [`FreezeSpec::with_frozen`] to vary it).
pub fn synthetic_squeezenet_profile() -> (NamedTensorModel, FreezeSpec) {
    let mut rng = SimRng::new(PROFILE_SEED);
    let mut tensors = Vec::new();
    conv(&mut rng, &mut tensors, "features.0", STEM_CHANNELS, 3, 3);

    let mut cin = STEM_CHANNELS;
    let mut module_names = Vec::new();
    for (&idx, &(squeeze, expand)) in FIRE_INDICES.iter().zip(&SQUEEZENET_FIRE_CHANNELS) {
        let prefix = format!("features.{idx}");
        conv(&mut rng, &mut tensors, &format!("{prefix}.squeeze"), squeeze, cin, 1);
        conv(&mut rng, &mut tensors, &format!("{prefix}.expand1x1"), expand, squeeze, 1);
        conv(&mut rng, &mut tensors, &format!("{prefix}.expand3x3"), expand, squeeze, 3);
        module_names.push(prefix);
        cin = 2 * expand;
    }
    conv(&mut rng, &mut tensors, "classifier.1", CLASSES, cin, 1);

    let model = NamedTensorModel::from_tensors(tensors).expect("profile tensors are well formed");
    let spec = FreezeSpec {
        frozen_prefix_count: 0,
        module_names,
        classifier_name: String::from("classifier"),
    };
    (model, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::codec::model_encoded_len;
    use crate::model::{generate_patch, simulate_update, DEFAULT_PACKET_SIZE};

    #[test]
    fn ladder_matches_documented_sizes() {
        let (model, spec) = synthetic_squeezenet_profile();
        assert_eq!(model_encoded_len(&model), 2_993_882);
        for (frozen, bytes, packets) in [(0, 2_993_998, 240), (4, 2_393_624, 192), (6, 1_595_198, 128), (7, 795_558, 64)] {
            let new = simulate_update(&model, &spec.with_frozen(frozen), 1).unwrap();
            let patch = generate_patch(&model, &new).unwrap();
            assert_eq!(patch.payload_bytes(), bytes, "frozen {frozen}");
            assert_eq!(patch.packet_count(DEFAULT_PACKET_SIZE), packets);
        }
    }
}
