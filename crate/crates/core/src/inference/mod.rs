//! Batch variational Bayes for the phone loop.

mod estep;
mod mstep;
mod stats;
mod train;

pub use estep::{estep, estep_detailed, estep_with, EStepResult};
pub(crate) use estep::forced_unit_estep;
pub use mstep::{mstep, update_normal_gamma};
pub(crate) use mstep::update_unit;
pub use stats::{merge_stats, SuffStats};
pub use train::{corpus_estep, elbo, train, train_with_observer, EpochRecord, Schedule, TrainOutput};
