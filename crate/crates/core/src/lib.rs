//! Near-critical multivariate growth processes `X_{n+1} = M X_n + g(X_n) + ξ_n`.
//!
//! * [`spectral`]: primitivity, Perron-Frobenius data and the ray decomposition.
//! * [`engine`]: the process contract and trajectory simulation.
//! * [`models`]: bisexual and multitype Galton-Watson processes, synthetic models.
//! * [`criteria`]: numerical recurrence/transience classification and condition audits.
//! * [`montecarlo`]: ensembles, phase sweeps and direction-of-divergence statistics.

pub mod criteria;
pub mod engine;
mod error;
pub mod models;
pub mod montecarlo;
pub mod rng;
pub mod spectral;

pub use engine::{noise_probe, simulate, step, MomentEstimates, ProcessModel, StopReason, StopRule, Trajectory};
pub use error::{Error, Result};
pub use models::{BisexualModel, MultitypeModel, NoiseLaw, OffspringFamily, SyntheticModel};
pub use rng::RandomStream;
pub use spectral::{assert_critical, check_primitive, decompose, perron_frobenius, NonNegativeMatrix, SpectralData};
