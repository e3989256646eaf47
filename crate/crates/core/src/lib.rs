//! Information-theoretic limits for sparse support recovery.
//!
//! The crate evaluates error-probability upper bounds, mutual-information
//! sample-complexity thresholds and SNR cutoffs for the correlated and
//! noisy-data Gaussian linear models, computes exact Gallager-type exponents
//! for finite-alphabet observation models, and benchmarks practical decoders
//! (exhaustive ML, lasso, reweighted lasso, OMP) against those limits with
//! seeded Monte Carlo sweeps.

pub mod bounds;
pub mod decoders;
pub mod error;
pub mod exponent;
pub mod harness;
pub mod io;
pub mod model;
pub mod rng;
pub mod special;

pub use bounds::{BoundResult, Criterion, SampleComplexityResult};
pub use decoders::{DecoderOutput, LassoSettings};
pub use error::{Error, Result};
pub use exponent::{DiscreteChannelModel, ExponentCurve};
pub use harness::{DecoderKind, SuccessMetric, SweepCurve, SweepSpec, SweepVar};
pub use model::{CoeffModel, Dataset, ProblemConfig, SupportSet};
