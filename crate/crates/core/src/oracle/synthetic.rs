//! Synthetic oracle with per-layer quality contributions, optional pairwise
//! coupling terms and Gaussian evaluation noise drawn deterministically from
//! `(architecture, seed)`.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EvalOracle, EvalRequest, EvalResult, OracleError};
use crate::real::{as_f64, rf};
use crate::seeds;
use crate::space::SearchSpace;
use crate::Real;

/// Pairwise quality interaction between the options of two layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingTerm<F: Real> {
    pub layer_a: usize,
    pub layer_b: usize,
    /// `table[option_a][option_b]` added to the quality sum.
    pub table: Vec<Vec<F>>,
}

/// Specification of the synthetic oracle. With `noise_sigma == 0` and no
/// coupling the quality is a plain per-layer sum, so better prefixes stay
/// better under any identical suffix change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOracleSpec<F: Real> {
    /// `quality[layer][option]` contribution to validation accuracy.
    pub quality: Vec<Vec<F>>,
    #[serde(default = "Vec::new")]
    pub coupling: Vec<CouplingTerm<F>>,
    pub noise_sigma: F,
    pub train_seconds_per_eval: F,
}

impl<F: Real> SyntheticOracleSpec<F> {
    pub fn decomposable(quality: Vec<Vec<F>>, noise_sigma: F, train_seconds_per_eval: F) -> Self {
        SyntheticOracleSpec {
            quality,
            coupling: vec![],
            noise_sigma,
            train_seconds_per_eval,
        }
    }

    /// The same spec with noise switched off.
    pub fn noise_free(&self) -> Self {
        let mut spec = self.clone();
        spec.noise_sigma = F::zero();
        spec
    }
}

pub struct SyntheticOracle<F: Real> {
    space: SearchSpace,
    spec: SyntheticOracleSpec<F>,
}

impl<F: Real> SyntheticOracle<F> {
    pub fn new(space: SearchSpace, spec: SyntheticOracleSpec<F>) -> Result<Self, OracleError> {
        if spec.quality.len() != space.num_layers() {
            return Err(OracleError::BadSpec(format!(
                "quality has {} rows, space has {} layers",
                spec.quality.len(),
                space.num_layers()
            )));
        }
        for (i, row) in spec.quality.iter().enumerate() {
            if row.len() != space.layer(i).len() {
                return Err(OracleError::BadSpec(format!(
                    "quality row {i} has {} entries, layer has {} options",
                    row.len(),
                    space.layer(i).len()
                )));
            }
        }
        for (i, term) in spec.coupling.iter().enumerate() {
            if term.layer_a >= space.num_layers() || term.layer_b >= space.num_layers() {
                return Err(OracleError::BadSpec(format!(
                    "coupling term {i} references a missing layer"
                )));
            }
            let (na, nb) = (
                space.layer(term.layer_a).len(),
                space.layer(term.layer_b).len(),
            );
            if term.table.len() != na || term.table.iter().any(|r| r.len() != nb) {
                return Err(OracleError::BadSpec(format!(
                    "coupling term {i} table must be {na} x {nb}"
                )));
            }
        }
        if spec.noise_sigma < F::zero() || !spec.noise_sigma.is_finite() {
            return Err(OracleError::BadSpec("noise_sigma must be >= 0".into()));
        }
        if spec.train_seconds_per_eval < F::zero() {
            return Err(OracleError::BadSpec(
                "train_seconds_per_eval must be >= 0".into(),
            ));
        }
        Ok(SyntheticOracle { space, spec })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn spec(&self) -> &SyntheticOracleSpec<F> {
        &self.spec
    }
}

impl<F: Real> EvalOracle<F> for SyntheticOracle<F> {
    fn evaluate(&self, req: &EvalRequest) -> Result<EvalResult<F>, OracleError> {
        self.space.validate_architecture(&req.arch)?;
        let mut quality = F::zero();
        for (layer, &choice) in req.arch.choices.iter().enumerate() {
            quality = quality + self.spec.quality[layer][choice];
        }
        for term in &self.spec.coupling {
            quality = quality
                + term.table[req.arch.choices[term.layer_a]][req.arch.choices[term.layer_b]];
        }
        if self.spec.noise_sigma > F::zero() {
            let z = standard_normal(&req.arch.choices, req.seed);
            quality = quality + self.spec.noise_sigma * rf(z);
        }
        let validation = clamp_unit(quality);
        Ok(EvalResult {
            validation_accuracy: validation,
            test_accuracy: None,
            train_seconds: self.spec.train_seconds_per_eval,
            cost_metrics: Default::default(),
        })
    }
}

fn clamp_unit<F: Real>(x: F) -> F {
    let x64 = as_f64(x);
    rf(x64.clamp(0.0, 1.0))
}

/// Standard-normal draw keyed by `(choices, seed)`: same inputs, same draw.
fn standard_normal(choices: &[usize], seed: u64) -> f64 {
    let key = seeds::hash_choices(choices) ^ seeds::mix64(seed);
    let mut rng = StdRng::seed_from_u64(key);
    rng.sample(StandardNormal)
}
