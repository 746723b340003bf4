//! Forward-backward over the composite phone-loop graph.
//!
//! Graph states are `(unit k, state s)` flattened to `k * 3 + s`. A path
//! enters a unit at state 0 (scored by E[ln w_k]), walks the three states
//! left to right with self-loops, and leaves from state 2 through the
//! advance arc, after which any unit may be entered. Every utterance ends
//! with an exit from some unit's last state.

use super::stats::SuffStats;
use crate::corpus::FeatureSequence;
use crate::error::{AudError, Result};
use crate::model::{ExpectedParams, FrameScores, PhoneLoopPosterior, ADVANCE, N_STATES, SELF_LOOP};
use crate::special::log_add_exp;

const NEG_INF: f64 = f64::NEG_INFINITY;

/// Output of one utterance's E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct EStepResult {
    pub stats: SuffStats,
    /// Log normalizer of the forward pass (the utterance's ELBO data term).
    pub log_norm: f64,
}

impl EStepResult {
    pub fn zero(n_units: usize, n_components: usize, dim: usize) -> Self {
        Self { stats: SuffStats::zeros(n_units, n_components, dim), log_norm: 0.0 }
    }

    pub fn merge_into(&mut self, other: &Self) -> Result<()> {
        self.stats.merge_into(&other.stats)?;
        self.log_norm += other.log_norm;
        Ok(())
    }
}

/// Arc scores of the (sub)graph a pass runs on.
pub(crate) struct LoopView<'a> {
    pub log_unit: &'a [f64],
    pub log_trans: &'a [[[f64; 2]; N_STATES]],
    /// Whether a new unit may start after one ends. Off for supervised
    /// passes over a single labeled interval.
    pub reentry: bool,
}

impl LoopView<'_> {
    fn n_units(&self) -> usize {
        self.log_unit.len()
    }
}

/// Forward and backward log messages of one utterance.
pub(crate) struct Messages {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// `exit[t]`: log mass of leaving some unit after frame t.
    pub exit: Vec<f64>,
    /// `entry[t]`: log mass of entering some unit at frame t, including the
    /// emission at t and everything after it.
    pub entry: Vec<f64>,
    pub log_norm: f64,
}

pub(crate) fn forward_backward(view: &LoopView<'_>, sc: &FrameScores) -> Messages {
    let (t_len, k_len) = (sc.n_frames, view.n_units());
    let s_len = k_len * N_STATES;
    let mut alpha = vec![NEG_INF; t_len * s_len];
    let mut beta = vec![NEG_INF; t_len * s_len];
    let mut exit = vec![NEG_INF; t_len];
    let mut entry = vec![NEG_INF; t_len];
    let lt = view.log_trans;
    let lu = view.log_unit;

    for k in 0..k_len {
        alpha[k * N_STATES] = lu[k] + sc.emit(0, k * N_STATES);
    }
    let exit_at = |alpha: &[f64], t: usize| {
        let mut acc = NEG_INF;
        for k in 0..k_len {
            acc = log_add_exp(acc, alpha[t * s_len + k * N_STATES + 2] + lt[k][2][ADVANCE]);
        }
        acc
    };
    exit[0] = exit_at(&alpha, 0);
    for t in 1..t_len {
        let (prev, cur) = alpha.split_at_mut(t * s_len);
        let prev = &prev[(t - 1) * s_len..];
        let reenter = if view.reentry { exit[t - 1] } else { NEG_INF };
        for k in 0..k_len {
            let b = k * N_STATES;
            let a0 = log_add_exp(prev[b] + lt[k][0][SELF_LOOP], reenter + lu[k]);
            let a1 = log_add_exp(prev[b + 1] + lt[k][1][SELF_LOOP], prev[b] + lt[k][0][ADVANCE]);
            let a2 = log_add_exp(prev[b + 2] + lt[k][2][SELF_LOOP], prev[b + 1] + lt[k][1][ADVANCE]);
            cur[b] = a0 + sc.emit(t, b);
            cur[b + 1] = a1 + sc.emit(t, b + 1);
            cur[b + 2] = a2 + sc.emit(t, b + 2);
        }
        exit[t] = exit_at(&alpha, t);
    }
    let log_norm = exit[t_len - 1];

    let last = t_len - 1;
    for k in 0..k_len {
        beta[last * s_len + k * N_STATES + 2] = lt[k][2][ADVANCE];
    }
    let entry_at = |beta: &[f64], t: usize| {
        let mut acc = NEG_INF;
        for k in 0..k_len {
            let b = k * N_STATES;
            acc = log_add_exp(acc, lu[k] + sc.emit(t, b) + beta[t * s_len + b]);
        }
        acc
    };
    entry[last] = entry_at(&beta, last);
    for t in (0..last).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * s_len);
        let cur = &mut cur[t * s_len..];
        let reenter = if view.reentry { entry[t + 1] } else { NEG_INF };
        for k in 0..k_len {
            let b = k * N_STATES;
            let stay = |s: usize| sc.emit(t + 1, b + s) + next[b + s];
            cur[b] = log_add_exp(lt[k][0][SELF_LOOP] + stay(0), lt[k][0][ADVANCE] + stay(1));
            cur[b + 1] = log_add_exp(lt[k][1][SELF_LOOP] + stay(1), lt[k][1][ADVANCE] + stay(2));
            cur[b + 2] = log_add_exp(lt[k][2][SELF_LOOP] + stay(2), lt[k][2][ADVANCE] + reenter);
        }
        entry[t] = entry_at(&beta, t);
    }

    Messages { alpha, beta, exit, entry, log_norm }
}

/// Add one utterance's expected statistics to `stats`, writing units at
/// `unit_offset..unit_offset + view.n_units()`.
pub(crate) fn accumulate(
    view: &LoopView<'_>,
    sc: &FrameScores,
    msg: &Messages,
    f: &FeatureSequence,
    stats: &mut SuffStats,
    unit_offset: usize,
) {
    let (t_len, k_len) = (sc.n_frames, view.n_units());
    let s_len = k_len * N_STATES;
    let (m, dim) = (stats.n_components, stats.dim);
    let z = msg.log_norm;
    let lt = view.log_trans;
    let lu = view.log_unit;
    let state0 = unit_offset * N_STATES;

    for t in 0..t_len {
        let x = f.frame(t);
        for s in 0..s_len {
            let lg = msg.alpha[t * s_len + s] + msg.beta[t * s_len + s] - z;
            if lg == NEG_INF {
                continue;
            }
            let gamma = lg.exp();
            let emit = sc.emit(t, s);
            for (c, &score) in sc.comp(t, s).iter().enumerate() {
                let r = gamma * (score - emit).exp();
                let ci = (state0 + s) * m + c;
                stats.counts[ci] += r;
                let row = ci * dim;
                for d in 0..dim {
                    let rx = r * x[d];
                    stats.sum[row + d] += rx;
                    stats.sumsq[row + d] += rx * x[d];
                }
            }
        }
    }

    for k in 0..k_len {
        let b = k * N_STATES;
        stats.entries[unit_offset + k] += (msg.alpha[b] + msg.beta[b] - z).exp();
    }
    for t in 0..t_len - 1 {
        let cur = t * s_len;
        let nxt = (t + 1) * s_len;
        for k in 0..k_len {
            let b = k * N_STATES;
            let tr = &mut stats.trans[state0 + b..state0 + b + N_STATES];
            for s in 0..N_STATES {
                let a = msg.alpha[cur + b + s];
                if a == NEG_INF {
                    continue;
                }
                let stay = lt[k][s][SELF_LOOP] + sc.emit(t + 1, b + s) + msg.beta[nxt + b + s];
                tr[s][SELF_LOOP] += (a + stay - z).exp();
                let go = if s + 1 < N_STATES {
                    sc.emit(t + 1, b + s + 1) + msg.beta[nxt + b + s + 1]
                } else if view.reentry {
                    msg.entry[t + 1]
                } else {
                    NEG_INF
                };
                tr[s][ADVANCE] += (a + lt[k][s][ADVANCE] + go - z).exp();
            }
            if view.reentry {
                let enter = msg.exit[t] + lu[k] + sc.emit(t + 1, b) + msg.beta[nxt + b];
                stats.entries[unit_offset + k] += (enter - z).exp();
            }
        }
    }
    let last = (t_len - 1) * s_len;
    for k in 0..k_len {
        let b = k * N_STATES;
        stats.trans[state0 + b + 2][ADVANCE] += (msg.alpha[last + b + 2] + lt[k][2][ADVANCE] - z).exp();
    }
    stats.total_frames += t_len as f64;
}

fn check_utterance(ep: &ExpectedParams, f: &FeatureSequence) -> Result<()> {
    if f.dim() != ep.dim {
        return Err(AudError::Shape(format!(
            "utterance {} has dimension {}, model expects {}",
            f.utt_id,
            f.dim(),
            ep.dim
        )));
    }
    if f.n_frames() < N_STATES {
        return Err(AudError::inference(&f.utt_id, format!("{} frames cannot cover one unit", f.n_frames())));
    }
    Ok(())
}

/// E-step with precomputed expected parameters.
pub fn estep_with(ep: &ExpectedParams, f: &FeatureSequence) -> Result<EStepResult> {
    estep_detailed(ep, f).map(|(r, _)| r)
}

/// E-step that also returns the per-frame state posteriors
/// (`T × 3K`, row-major).
pub fn estep_detailed(ep: &ExpectedParams, f: &FeatureSequence) -> Result<(EStepResult, Vec<f64>)> {
    check_utterance(ep, f)?;
    let sc = ep.frame_scores(f)?;
    let view = LoopView { log_unit: &ep.log_unit, log_trans: &ep.log_trans, reentry: true };
    let msg = forward_backward(&view, &sc);
    if !msg.log_norm.is_finite() {
        return Err(AudError::inference(&f.utt_id, format!("forward pass underflowed (log normalizer {})", msg.log_norm)));
    }
    let mut stats = SuffStats::zeros(ep.n_units, ep.n_components, ep.dim);
    accumulate(&view, &sc, &msg, f, &mut stats, 0);
    let occupancy = msg
        .alpha
        .iter()
        .zip(&msg.beta)
        .map(|(a, b)| (a + b - msg.log_norm).exp())
        .collect();
    Ok((EStepResult { stats, log_norm: msg.log_norm }, occupancy))
}

/// Forward-backward on one utterance under the expected log-parameters of
/// `post`.
pub fn estep(post: &PhoneLoopPosterior, f: &FeatureSequence) -> Result<EStepResult> {
    estep_with(&ExpectedParams::new(post), f)
}

/// Supervised pass: frames of `f` are exactly one traversal of unit `unit`.
pub(crate) fn forced_unit_estep(
    ep: &ExpectedParams,
    unit: usize,
    f: &FeatureSequence,
    stats: &mut SuffStats,
) -> Result<f64> {
    check_utterance(ep, f)?;
    let sc = ep.frame_scores_for_units(f, unit..unit + 1)?;
    let zero = [0.0];
    let view = LoopView {
        log_unit: &zero,
        log_trans: &ep.log_trans[unit..unit + 1],
        reentry: false,
    };
    let msg = forward_backward(&view, &sc);
    if !msg.log_norm.is_finite() {
        return Err(AudError::inference(&f.utt_id, "forced alignment has no valid path"));
    }
    accumulate(&view, &sc, &msg, f, stats, unit);
    Ok(msg.log_norm)
}
