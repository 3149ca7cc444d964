//! Automatic utility specification for multinomial logit models via
//! automatic relevance determination and doubly stochastic variational
//! inference.

pub mod ard;
pub mod data;
pub mod error;
pub mod eval;
pub mod mnl;
pub mod reduce;
pub mod space;
pub mod synthetic;

pub use ard::{fit as fit_ard, ArdFit, GroupLayout, LambdaEstimate, TrainingConfig, VariationalState};
pub use data::{load_dataset, split_dataset, split_rows, ChoiceDataset, DatasetSchema, SplitMode};
pub use error::{Error, Result};
pub use eval::{evaluate, recovery, EvalReport, RecoveryReport};
pub use mnl::{fit_mle, MnlCoefficients};
pub use space::{build_catalog, materialize, CandidateCatalog, CandidateGroup, DesignTensor, SpaceConfig};
pub use synthetic::{generate, TrueSpecification};
