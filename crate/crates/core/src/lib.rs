//! Layer-wise architecture search as budget-constrained combinatorial
//! optimization.
//!
//! A model is a tuple of per-layer options with additive costs. The engine
//! searches layer by layer, keeping for every layer a bounded store of the
//! best evaluated candidates bucketized by cost, so the number of candidates
//! ever trained is `O(H * |S| * L)` instead of `O(|S|^L)`. The crate also
//! ships the exhaustive dynamic-programming variant used for exactness
//! checks, a brute-force enumerator, baseline searchers (random search,
//! regularized evolution under the MNAS combined objective), evaluation
//! oracles (tabular benchmark files and a decomposable synthetic oracle with
//! deterministic training noise), and the retention/trajectory statistics
//! used to compare search algorithms across seeds.
//!
//! Accuracy-like quantities are generic over the [`Real`] scalar (`f32` or
//! `f64`); costs are exact scaled integers ([`space::Cost`]) so bucket keys
//! and feasibility tests are deterministic.

pub mod analysis;
pub mod baselines;
pub mod engine;
pub mod oracle;
pub mod space;

mod real;
mod seeds;

pub use real::Real;

/// Scalar used by the CLI and the experiment harness.
pub type DefaultReal = f64;

/// Common non-generic instantiations.
pub type EvalResult64 = oracle::EvalResult<DefaultReal>;
pub type SearchResult64 = engine::SearchResult<DefaultReal>;
pub type SyntheticOracle64 = oracle::SyntheticOracle<DefaultReal>;
