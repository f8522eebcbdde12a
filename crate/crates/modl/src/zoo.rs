//! The reference model zoo and the target model.
//!
//! Six heterogeneous references stand in for six CNN backbones; diversity
//! comes from width, depth, activation, and init seed. Only the single
//! target model is deployed after training, so its parameter count is the
//! one that matters at inference time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Activation, ModelSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zoo {
    pub references: Vec<ModelSpec>,
    pub target: ModelSpec,
}

impl Zoo {
    pub fn validate(&self) -> Result<()> {
        if self.references.is_empty() {
            return Err(Error::contract("zoo needs at least one reference model"));
        }
        let mut names = std::collections::HashSet::new();
        for spec in self.references.iter().chain(std::iter::once(&self.target)) {
            spec.validate()?;
            if !names.insert(spec.name.clone()) {
                return Err(Error::contract(format!("duplicate model name `{}`", spec.name)));
            }
        }
        let (d, c) = (self.target.input_dim, self.target.output_dim);
        for r in &self.references {
            if r.input_dim != d || r.output_dim != c {
                return Err(Error::contract(format!(
                    "reference `{}` is {}->{} but the target is {}->{}",
                    r.name, r.input_dim, r.output_dim, d, c
                )));
            }
        }
        Ok(())
    }

    /// Total parameter count across all references (the ensemble cost).
    pub fn ensemble_param_count(&self) -> usize {
        self.references.iter().map(|r| r.param_count()).sum()
    }

    /// Hash over every spec in the zoo; keys the stage-1 cache.
    pub fn hash(&self) -> u64 {
        let mut h = crate::bytes::Fnv1a::new();
        for r in &self.references {
            h.update_u64(r.hash());
        }
        h.update_u64(self.target.hash());
        h.finish()
    }
}

/// The default zoo: six references with pairwise-distinct layouts plus a
/// compact single-hidden-layer target, all deterministic for given
/// dimensions. Everything is tanh: the relu stand-ins train noticeably worse
/// on this kind of data and would pollute the soft labels. The deployed
/// target is deliberately the smallest model in the room; the references are
/// never shipped.
pub fn default_zoo(input_dim: usize, classes: usize) -> Result<Zoo> {
    if input_dim == 0 || classes == 0 {
        return Err(Error::contract("default_zoo needs positive dimensions"));
    }
    let layouts: [(&str, Vec<usize>, u64); 6] = [
        ("ref-64", vec![64], 101),
        ("ref-128", vec![128], 102),
        ("ref-64x64", vec![64, 64], 103),
        ("ref-128x64", vec![128, 64], 104),
        ("ref-256", vec![256], 105),
        ("ref-64x32x16", vec![64, 32, 16], 106),
    ];
    let references = layouts
        .into_iter()
        .map(|(name, hidden, seed)| {
            ModelSpec::new(name, input_dim, hidden, classes, Activation::Tanh, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let target = ModelSpec::new(
        "target-64",
        input_dim,
        vec![64],
        classes,
        Activation::Tanh,
        1001,
    )?;
    let zoo = Zoo { references, target };
    zoo.validate()?;
    Ok(zoo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_zoo_shape() {
        let zoo = default_zoo(32, 5).unwrap();
        assert_eq!(zoo.references.len(), 6);
        let mut names: Vec<&str> = zoo
            .references
            .iter()
            .map(|r| r.name.as_str())
            .chain(std::iter::once(zoo.target.name.as_str()))
            .collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 7);
    }

    #[test]
    fn default_zoo_is_deterministic() {
        assert_eq!(default_zoo(16, 3).unwrap(), default_zoo(16, 3).unwrap());
    }

    #[test]
    fn reference_param_counts_differ_pairwise() {
        let zoo = default_zoo(32, 5).unwrap();
        let counts: Vec<usize> = zoo.references.iter().map(|r| r.param_count()).collect();
        for i in 0..counts.len() {
            for j in i + 1..counts.len() {
                assert_ne!(counts[i], counts[j], "{} vs {}", i, j);
            }
        }
    }

    #[test]
    fn target_is_cheaper_than_the_ensemble() {
        let zoo = default_zoo(32, 5).unwrap();
        let target = zoo.target.param_count();
        let ensemble = zoo.ensemble_param_count();
        assert!(target < ensemble, "{target} vs {ensemble}");
        let min_ref = zoo.references.iter().map(|r| r.param_count()).min().unwrap();
        assert!(ensemble >= 6 * min_ref);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut zoo = default_zoo(8, 2).unwrap();
        zoo.references[1].name = zoo.references[0].name.clone();
        assert!(zoo.validate().is_err());
    }
}
