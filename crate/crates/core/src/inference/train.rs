//! Batch variational Bayes training loop.

use std::time::Instant;

use rayon::prelude::*;

use super::estep::{estep_with, EStepResult};
use super::mstep::mstep;
use crate::corpus::FeatureSequence;
use crate::error::{AudError, Result};
use crate::model::{kl_to_prior, ExpectedParams, PhoneLoopPosterior};

/// Stopping rule of the training loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub max_epochs: usize,
    /// Stop once `|L_new - L_old| <= rel_tol * |L_old|`.
    pub rel_tol: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { max_epochs: 50, rel_tol: 1e-5 }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub elbo: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub posterior: PhoneLoopPosterior,
    /// ELBO of the initialization followed by one value per epoch.
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
}

/// Evidence lower bound of `post` given E-step results computed under it.
pub fn elbo(post: &PhoneLoopPosterior, prior: &PhoneLoopPosterior, agg: &EStepResult) -> Result<f64> {
    Ok(agg.log_norm - kl_to_prior(post, prior)?)
}

/// E-step over the whole corpus. Utterances run in parallel; results are
/// merged in corpus order so the sum does not depend on the thread count.
pub fn corpus_estep(post: &PhoneLoopPosterior, corpus: &[FeatureSequence]) -> Result<EStepResult> {
    let ep = ExpectedParams::new(post);
    let parts: Vec<EStepResult> = corpus
        .par_iter()
        .map(|f| estep_with(&ep, f).map_err(|e| e.for_utterance(&f.utt_id)))
        .collect::<Result<_>>()?;
    let mut acc = EStepResult::zero(post.n_units(), post.n_components(), post.dim());
    for p in &parts {
        acc.merge_into(p)?;
    }
    Ok(acc)
}

/// Train from `init` under `prior`.
pub fn train(
    corpus: &[FeatureSequence],
    prior: &PhoneLoopPosterior,
    init: &PhoneLoopPosterior,
    schedule: &Schedule,
) -> Result<TrainOutput> {
    train_with_observer(corpus, prior, init, schedule, |_| {})
}

/// [`train`] with a callback after the initialization (epoch 0) and after
/// every epoch.
pub fn train_with_observer<F: FnMut(&EpochRecord)>(
    corpus: &[FeatureSequence],
    prior: &PhoneLoopPosterior,
    init: &PhoneLoopPosterior,
    schedule: &Schedule,
    mut observer: F,
) -> Result<TrainOutput> {
    if corpus.is_empty() {
        return Err(AudError::Data("training corpus is empty".into()));
    }
    if !prior.same_structure(init) {
        return Err(AudError::Shape("prior and initial posterior differ in K, M or dimension".into()));
    }
    if !(schedule.rel_tol >= 0.0) {
        return Err(AudError::Config(format!("relative tolerance {} must be non-negative", schedule.rel_tol)));
    }
    prior.validate()?;
    init.validate()?;
    let start = Instant::now();

    let mut post = init.clone();
    let mut agg = corpus_estep(&post, corpus)?;
    let mut current = elbo(&post, prior, &agg)?;
    let mut trace = vec![current];
    observer(&EpochRecord { epoch: 0, elbo: current, elapsed_s: start.elapsed().as_secs_f64() });

    let mut converged = false;
    for epoch in 1..=schedule.max_epochs {
        let next = mstep(prior, &agg.stats)?;
        let next_agg = corpus_estep(&next, corpus)?;
        let value = elbo(&next, prior, &next_agg)?;
        if !value.is_finite() {
            return Err(AudError::InternalState(format!("ELBO became {value} at epoch {epoch}")));
        }
        trace.push(value);
        observer(&EpochRecord { epoch, elbo: value, elapsed_s: start.elapsed().as_secs_f64() });
        let delta = (value - current).abs();
        post = next;
        agg = next_agg;
        let done = delta <= schedule.rel_tol * current.abs();
        current = value;
        if done {
            converged = true;
            break;
        }
    }
    Ok(TrainOutput { posterior: post, elbo_trace: trace, converged })
}
