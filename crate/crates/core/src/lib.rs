//! Unsupervised acoustic unit discovery with a Bayesian phone-loop HMM.
//!
//! The crate trains a truncated Dirichlet-process phone loop by batch
//! variational Bayes, optionally starting from an informative prior fitted on
//! a labeled corpus of another language, decodes unit alignments and
//! lattices, scores them against reference alignments, and segments unit
//! sequences into words with a bigram hierarchical Pitman-Yor model.

pub mod corpus;
pub mod decode;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod prior;
pub mod seed;
pub mod special;
pub mod synthetic;
pub mod wordseg;

pub use corpus::{FeatureSequence, Manifest, PreprocessOptions, TimedLabelSequence};
pub use decode::{emit_lattice, viterbi_align, Lattice, UnitAlignment};
pub use error::{AudError, Result};
pub use evaluation::{boundary_prf, nmi, Prf};
pub use inference::{elbo, estep, merge_stats, mstep, train, EStepResult, Schedule, SuffStats};
pub use model::{init_posterior, DataSummary, HyperParams, PhoneLoopPosterior};
pub use prior::{fit_informative_prior, seed_from_prior, AcousticPrior};
pub use wordseg::{gibbs_segment, GibbsParams, Segmentation, SegmentationState};
