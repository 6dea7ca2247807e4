//! Permutation-invariant neural quantum states for the long-range transverse
//! field Ising ring.
//!
//! * [`model`]: Hamiltonian parameters, distance sums and spin configurations.
//! * [`ansatz`]: the `K`-weight network `log ψ = Σₖ f(Wₖ M)`.
//! * [`sampler`]: exact enumeration, sector sums and Metropolis chains.
//! * [`observables`]: local energy, energy, fluctuations and magnetization.
//! * [`trainer`]: stochastic reconfiguration.
//! * [`exact_diag`]: Lanczos, dense and Dicke-sector reference energies.
//! * [`analytic`]: closed forms for the product state `e^{W M}`.

pub mod analytic;
pub mod ansatz;
pub mod exact_diag;
pub mod model;
pub mod observables;
pub mod sampler;
pub mod trainer;

pub use analytic::{AnalyticError, ScalingFit, ScalingForm, Sigma2Limit, SystemSize};
pub use ansatz::{Activation, AnsatzError, AnsatzParams};
pub use exact_diag::{EdError, EdMethod, EdResult};
pub use model::{ModelError, ModelSpec, SpinConfig};
pub use observables::{EnergyStats, EstimatorKind, LocalEnergyTerms, ObservableError, StateBranch};
pub use sampler::{EstimatedValue, SamplerConfig, SamplerError, SamplingMode};
pub use trainer::{TrainError, TrainRecord, TrainRun, TrainerConfig};
