//! Mutual-information feature selection for regression.
//!
//! Features are scored with a k-nearest-neighbor MI estimator. The neighbor
//! count is tuned by contrasting K-fold distributions of each feature's MI
//! with those of a permuted copy ([`tuner`]), and a greedy forward search
//! ([`forward`]) stops once the best candidate no longer beats the 95th
//! percentile of its permutation null.
//!
//! ```no_run
//! use mifs::{data, forward, rng, tuner};
//!
//! let mut rng = rng::seeded(7);
//! let ds = data::friedman_generate(100, data::FriedmanVariant::Plain, &mut rng)?;
//! let k = tuner::select_k(&ds, &tuner::TunerConfig::default(), &mut rng)?.k_star;
//! let trace = forward::forward_select(&ds, &forward::ForwardConfig::new(k), &mut rng)?;
//! println!("selected {:?}", trace.selected);
//! # Ok::<(), mifs::Error>(())
//! ```

pub mod data;
mod error;
pub mod estimator;
pub mod eval;
pub mod forward;
pub mod resampling;
pub mod rng;
pub mod tuner;

pub use data::{Dataset, DatasetMeta};
pub use error::{Error, Result};
pub use estimator::{estimate_mi, KsgConfig, MiEstimate, MiQuery};
pub use eval::{knn_rmse, EvalReport};
pub use forward::{forward_select, max_mi_subset, ForwardConfig, ForwardTrace, StopReason};
pub use resampling::{MiDistribution, PValue};
pub use tuner::{select_k, KSelection, TunerConfig};
