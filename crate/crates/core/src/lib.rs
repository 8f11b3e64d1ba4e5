//! HomOpt: homotopy over additive-model surrogates as an augmentation layer
//! for black-box hyperparameter search.
//!
//! A [`driver::run`] loop wraps any base [`samplers::Sampler`]. After a
//! warm-up it interleaves base proposals with jittered copies of the
//! incumbent and with minimizers tracked from an old surrogate to a new one.
//!
//! ```
//! use homopt::{run, Builtin, BuiltinObjective, DriverConfig};
//!
//! let objective = BuiltinObjective::new(Builtin::GramacyLee);
//! let config = DriverConfig { max_trials: 40, seed: 7, ..DriverConfig::default() };
//! let outcome = run(&objective, &config).unwrap();
//! assert_eq!(outcome.history.len(), 40);
//! ```

pub mod driver;
pub mod error;
pub mod gam;
pub mod homotopy;
pub mod metrics;
pub mod neldermead;
pub mod objectives;
pub mod parallel;
pub mod process;
pub mod rng;
pub mod samplers;
pub mod space;

pub use driver::{run, run_with_observer, Branch, DriverConfig, RunOutcome, Trial, TrialEvent, TrialHistory};
pub use error::*;
pub use gam::{GamConfig, GamSurrogate};
pub use homotopy::{eval_homotopy, track_path, HomotopyConfig, HomotopyPath};
pub use metrics::{percent_improvement, regret, ImprovementSummary, RegretTrace};
pub use neldermead::{minimize, NmConfig, NmResult};
pub use objectives::{Builtin, BuiltinObjective, ExternalObjective, Objective};
pub use process::CommandSpec;
pub use samplers::{Sampler, SamplerConfig};
pub use space::{Assignment, Bounds, ParamKind, ParamSpec, ParamValue, ParamVector, SearchSpace};
