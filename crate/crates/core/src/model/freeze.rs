use alloc::string::String;
use alloc::vec::Vec;

use super::NamedTensorModel;
use crate::rng::SimRng;

/// Which parts of a model stay fixed during an update.
///
/// `module_names` are parameter-name prefixes of the convolutional modules,
/// shallowest first. The first `frozen_prefix_count` of them are frozen.
/// Parameters that belong to no module and are not the classifier (the stem)
/// sit in front of the first module and freeze together with it. The
/// classifier is always re-initialized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreezeSpec {
    pub frozen_prefix_count: usize,
    pub module_names: Vec<String>,
    pub classifier_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FreezeError {
    #[error("frozen prefix {count} exceeds the {modules} known modules")]
    PrefixTooLong { count: usize, modules: usize },
    #[error("module `{0}` matches no parameter in the model")]
    UnknownModule(String),
    #[error("classifier `{0}` matches no parameter in the model")]
    UnknownClassifier(String),
    #[error("classifier `{0}` is also listed as a module")]
    ClassifierListedAsModule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Stem,
    Module(usize),
    Classifier,
}

/// `name` belongs to `prefix` if it equals it or continues it after a `.`.
fn under(name: &str, prefix: &str) -> bool {
    name.strip_prefix(prefix)
        .is_some_and(|rest| rest.is_empty() || rest.starts_with('.'))
}

impl FreezeSpec {
    pub fn module_count(&self) -> usize {
        self.module_names.len()
    }

    pub fn with_frozen(&self, frozen_prefix_count: usize) -> Self {
        FreezeSpec {
            frozen_prefix_count,
            ..self.clone()
        }
    }

    fn role(&self, name: &str) -> Role {
        if under(name, &self.classifier_name) {
            return Role::Classifier;
        }
        self.module_names
            .iter()
            .position(|m| under(name, m))
            .map_or(Role::Stem, Role::Module)
    }

    fn is_frozen(&self, role: Role) -> bool {
        match role {
            Role::Stem => self.frozen_prefix_count > 0,
            Role::Module(i) => i < self.frozen_prefix_count,
            Role::Classifier => false,
        }
    }

    pub fn validate(&self, model: &NamedTensorModel) -> Result<(), FreezeError> {
        if self.frozen_prefix_count > self.module_names.len() {
            return Err(FreezeError::PrefixTooLong {
                count: self.frozen_prefix_count,
                modules: self.module_names.len(),
            });
        }
        if self.module_names.iter().any(|m| m == &self.classifier_name) {
            return Err(FreezeError::ClassifierListedAsModule(self.classifier_name.clone()));
        }
        for m in &self.module_names {
            if !model.iter().any(|t| under(&t.name, m)) {
                return Err(FreezeError::UnknownModule(m.clone()));
            }
        }
        if !model.iter().any(|t| under(&t.name, &self.classifier_name)) {
            return Err(FreezeError::UnknownClassifier(self.classifier_name.clone()));
        }
        Ok(())
    }

    /// Names of the parameters that an update under this spec leaves untouched.
    pub fn frozen_parameters<'a>(&'a self, model: &'a NamedTensorModel) -> impl Iterator<Item = &'a str> + 'a {
        model
            .iter()
            .filter(|t| self.is_frozen(self.role(&t.name)))
            .map(|t| t.name.as_str())
    }
}

/// Relative noise applied to trainable tensors.
const TRAINED_NOISE: f64 = 0.01;
/// Noise scale used when a trainable tensor is identically zero.
const ZERO_TENSOR_NOISE: f64 = 1e-4;
/// Bound of the uniform re-initialization of the classifier.
const CLASSIFIER_INIT: f64 = 0.05;

/// Deterministic stand-in for retraining `model` under `spec`.
///
/// Frozen tensors are copied bit for bit. Trainable module tensors receive
/// Gaussian noise with standard deviation 1% of the tensor RMS. The classifier
/// is redrawn uniformly in `[-0.05, 0.05]`.
pub fn simulate_update(model: &NamedTensorModel, spec: &FreezeSpec, seed: u64) -> Result<NamedTensorModel, FreezeError> {
    spec.validate(model)?;
    let mut rng = SimRng::new(seed);
    let mut out = model.clone();
    for (tensor, original) in out.entries.iter_mut().zip(model.iter()) {
        match spec.role(&original.name) {
            role if spec.is_frozen(role) => {}
            Role::Classifier => {
                for v in &mut tensor.data {
                    *v = rng.uniform(-CLASSIFIER_INIT, CLASSIFIER_INIT) as f32;
                }
            }
            Role::Stem | Role::Module(_) => {
                let n = original.data.len().max(1) as f64;
                let rms = libm::sqrt(original.data.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>() / n);
                let sigma = if rms > 0.0 { TRAINED_NOISE * rms } else { ZERO_TENSOR_NOISE };
                for v in &mut tensor.data {
                    *v = (f64::from(*v) + sigma * rng.normal()) as f32;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Tensor;
    use alloc::vec;

    fn toy() -> (NamedTensorModel, FreezeSpec) {
        let model = NamedTensorModel::from_tensors([
            Tensor::new("stem.weight", vec![4], vec![0.1, -0.2, 0.3, -0.4]).unwrap(),
            Tensor::new("m1.weight", vec![4], vec![0.5, 0.6, -0.7, 0.8]).unwrap(),
            Tensor::new("m1.bias", vec![2], vec![0.0, 0.0]).unwrap(),
            Tensor::new("m10.weight", vec![2], vec![1.0, 2.0]).unwrap(),
            Tensor::new("m2.weight", vec![4], vec![1.5, -1.6, 1.7, 1.8]).unwrap(),
            Tensor::new("head.weight", vec![3], vec![0.9, 0.9, 0.9]).unwrap(),
        ])
        .unwrap();
        let spec = FreezeSpec {
            frozen_prefix_count: 0,
            module_names: vec!["m1".into(), "m10".into(), "m2".into()],
            classifier_name: "head".into(),
        };
        (model, spec)
    }

    #[test]
    fn prefix_matching_respects_dot_boundaries() {
        let (_, spec) = toy();
        assert_eq!(spec.role("m1.weight"), Role::Module(0));
        assert_eq!(spec.role("m10.weight"), Role::Module(1));
        assert_eq!(spec.role("head.weight"), Role::Classifier);
        assert_eq!(spec.role("stem.weight"), Role::Stem);
    }

    #[test]
    fn all_frozen_changes_only_the_classifier() {
        let (model, spec) = toy();
        let new = simulate_update(&model, &spec.with_frozen(3), 7).unwrap();
        for (a, b) in model.iter().zip(new.iter()) {
            if a.name.starts_with("head") {
                assert!(!a.bit_eq(b));
                assert!(b.data.iter().all(|v| v.abs() <= 0.05));
            } else {
                assert!(a.bit_eq(b), "{} changed", a.name);
            }
        }
    }

    #[test]
    fn nothing_frozen_changes_every_tensor() {
        let (model, spec) = toy();
        let new = simulate_update(&model, &spec, 7).unwrap();
        for (a, b) in model.iter().zip(new.iter()) {
            assert!(!a.bit_eq(b), "{} unchanged", a.name);
        }
    }

    #[test]
    fn stem_freezes_with_first_module() {
        let (model, spec) = toy();
        let spec = spec.with_frozen(1);
        let new = simulate_update(&model, &spec, 3).unwrap();
        let frozen: Vec<_> = spec.frozen_parameters(&model).collect();
        assert_eq!(frozen, vec!["stem.weight", "m1.weight", "m1.bias"]);
        assert!(model.get("stem.weight").unwrap().bit_eq(new.get("stem.weight").unwrap()));
        assert!(!model.get("m10.weight").unwrap().bit_eq(new.get("m10.weight").unwrap()));
    }

    #[test]
    fn update_is_deterministic_per_seed() {
        let (model, spec) = toy();
        let a = simulate_update(&model, &spec, 11).unwrap();
        let b = simulate_update(&model, &spec, 11).unwrap();
        let c = simulate_update(&model, &spec, 12).unwrap();
        assert!(a.bit_eq(&b));
        assert!(!a.bit_eq(&c));
    }

    #[test]
    fn unknown_names_are_configuration_errors() {
        let (model, mut spec) = toy();
        spec.module_names.push("missing".into());
        assert_eq!(
            simulate_update(&model, &spec, 0),
            Err(FreezeError::UnknownModule("missing".into()))
        );
        let (model, mut spec) = toy();
        spec.classifier_name = "fc".into();
        assert_eq!(
            simulate_update(&model, &spec, 0),
            Err(FreezeError::UnknownClassifier("fc".into()))
        );
        let (model, spec) = toy();
        assert!(matches!(
            simulate_update(&model, &spec.with_frozen(4), 0),
            Err(FreezeError::PrefixTooLong { count: 4, modules: 3 })
        ));
    }
}
