use proptest::prelude::*;
use swarmupdate_core::model::{
    apply_patch, decode_model, decode_patch, encode_model, encode_patch, generate_patch, simulate_update,
    synthetic_squeezenet_profile, FreezeSpec, NamedTensorModel, PatchError, Tensor, DEFAULT_PACKET_SIZE,
};

const MB: f64 = 1_000_000.0;

fn tensor(name: String, shape: Vec<u32>, fill: &[f32]) -> Tensor {
    let n: usize = shape.iter().map(|&d| d as usize).product();
    let data = (0..n).map(|i| fill[i % fill.len()]).collect();
    Tensor::new(name, shape, data).unwrap()
}

fn value() -> impl Strategy<Value = f32> {
    prop_oneof![
        8 => -10.0f32..10.0,
        1 => Just(0.0f32),
        1 => Just(-0.0f32),
        1 => Just(f32::MIN_POSITIVE / 4.0),
    ]
}

fn shape() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(1u32..5, 0..3)
}

/// A model with a stem, `modules` convolutional modules of one or two tensors
/// each and a classifier, together with a freeze spec and an update seed.
fn model_and_spec() -> impl Strategy<Value = (NamedTensorModel, FreezeSpec, u64, bool)> {
    (1usize..6)
        .prop_flat_map(|modules| {
            (
                Just(modules),
                prop::collection::vec((shape(), prop::option::of(shape())), modules),
                shape(),
                shape(),
                prop::collection::vec(value(), 1..16),
                0..=modules,
                any::<u64>(),
                any::<bool>(),
            )
        })
        .prop_map(|(modules, module_shapes, stem, head, fill, frozen, seed, append)| {
            let mut tensors = vec![tensor("stem.weight".into(), stem, &fill)];
            for (i, (w, b)) in module_shapes.into_iter().enumerate() {
                tensors.push(tensor(format!("fire{i}.weight"), w, &fill));
                if let Some(b) = b {
                    tensors.push(tensor(format!("fire{i}.bias"), b, &fill));
                }
            }
            tensors.push(tensor("classifier.weight".into(), head, &fill));
            let spec = FreezeSpec {
                frozen_prefix_count: frozen,
                module_names: (0..modules).map(|i| format!("fire{i}")).collect(),
                classifier_name: "classifier".into(),
            };
            (NamedTensorModel::from_tensors(tensors).unwrap(), spec, seed, append)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn patches_round_trip_bit_exactly((old, spec, seed, append) in model_and_spec()) {
        let mut new = simulate_update(&old, &spec, seed).unwrap();
        if append {
            new.push(tensor("extra.weight".into(), vec![3], &[1.5, -0.0, 2.5])).unwrap();
        }
        let patch = generate_patch(&old, &new).unwrap();
        let bytes = encode_patch(&patch);
        prop_assert_eq!(bytes.len() as u64, patch.payload_bytes());
        let decoded = decode_patch(&bytes).unwrap();
        let rebuilt = apply_patch(&old, &decoded).unwrap();
        prop_assert!(rebuilt.bit_eq(&new));
        prop_assert_eq!(rebuilt.digest(), new.digest());
    }

    #[test]
    fn any_altered_base_is_rejected(
        (old, spec, seed, _) in model_and_spec(),
        pick in any::<prop::sample::Index>(),
        bit in 0u32..32,
    ) {
        let new = simulate_update(&old, &spec, seed).unwrap();
        let patch = generate_patch(&old, &new).unwrap();
        let mut tensors = old.tensors().to_vec();
        let t = pick.index(tensors.len());
        let v = &mut tensors[t].data[0];
        *v = f32::from_bits(v.to_bits() ^ (1 << bit));
        let altered = NamedTensorModel::from_tensors(tensors).unwrap();
        let rejected = matches!(apply_patch(&altered, &patch), Err(PatchError::WrongBase { .. }));
        prop_assert!(rejected);
    }

    #[test]
    fn models_survive_save_and_load((model, _, _, _) in model_and_spec()) {
        let loaded = decode_model(&encode_model(&model)).unwrap();
        prop_assert!(loaded.bit_eq(&model));
    }
}

fn ladder_patch_bytes(frozen: usize) -> u64 {
    let (model, spec) = synthetic_squeezenet_profile();
    let new = simulate_update(&model, &spec.with_frozen(frozen), 11).unwrap();
    generate_patch(&model, &new).unwrap().payload_bytes()
}

#[test]
fn packet_ladder_is_exact() {
    for (frozen, packets) in [(0, 240), (4, 192), (6, 128), (7, 64)] {
        let bytes = ladder_patch_bytes(frozen);
        assert_eq!(bytes.div_ceil(DEFAULT_PACKET_SIZE), packets, "frozen {frozen}");
    }
}

#[test]
fn deepest_freeze_patch_is_under_a_megabyte() {
    let mb = ladder_patch_bytes(7) as f64 / MB;
    assert!((0.75..=0.85).contains(&mb), "{mb} MB");
}

#[test]
fn half_frozen_patch_size() {
    let mb = ladder_patch_bytes(4) as f64 / MB;
    assert!((2.35..=2.45).contains(&mb), "{mb} MB");
}

// 240 packets of 12.5 kB need more than 2.9875 MB, so the exact packet ladder
// and this window cannot both hold.
#[test]
#[ignore = "size window is incompatible with the exact 240-packet ladder"]
fn base_model_size_window() {
    let (model, _) = synthetic_squeezenet_profile();
    let mb = encode_model(&model).len() as f64 / MB;
    assert!((2.85..=2.95).contains(&mb), "{mb} MB");
}

// 128 packets allow at most 1.6 MB; the ladder's patch lands at 1.595 MB.
#[test]
#[ignore = "size window is incompatible with the exact 128-packet ladder"]
fn three_quarters_frozen_patch_size() {
    let mb = ladder_patch_bytes(6) as f64 / MB;
    assert!((1.45..=1.55).contains(&mb), "{mb} MB");
}
