//! Learning and evaluating linear optimal-stopping policies from simulated
//! trajectories.
//!
//! The pipeline is: simulate price paths ([`process`]), turn them into
//! knock-out max-call rewards ([`payoff`]), materialize basis features
//! ([`basis`]), then fit either a least-squares Monte Carlo policy ([`lsm`])
//! or a randomized-policy backward optimization ([`rpo`]) and score it with
//! the deterministic and randomized sample-average objectives ([`policy`]).
//! [`bounds`] holds the closed-form generalization bounds and
//! [`experiment`] drives replicated train/test benchmarks.

pub mod basis;
pub mod bounds;
pub mod error;
pub mod experiment;
pub mod io;
pub mod lsm;
pub mod payoff;
pub mod policy;
pub mod process;
pub mod reduce;
pub mod rpo;

pub use basis::{BasisFamily, BasisSpec, FeatureTensor, Standardizer};
pub use bounds::{BoundInputs, NormType};
pub use error::{Error, Result};
pub use lsm::{LsmFit, LsmWeights};
pub use payoff::RewardSet;
pub use policy::{StopTime, ThresholdForm, WeightMatrix};
pub use process::{GbmModel, TrajectorySet};
pub use rpo::{AdamConfig, RpoFit, StageProblem, StageReport};
