//! Concrete model families.

mod bisexual;
mod multitype;
mod pmf;
mod synthetic;

pub use bisexual::{bisexual_drift_asymptotic, bisexual_step, bisexual_threshold, mating, BisexualModel, OffspringFamily};
pub use multitype::MultitypeModel;
pub use synthetic::{NoiseLaw, SyntheticModel};
