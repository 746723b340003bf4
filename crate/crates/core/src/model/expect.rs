//! Expectations of log-parameters under the variational posterior.

use super::{GmmState, NormalGamma, PhoneLoopPosterior, UnitPosterior, N_STATES};
use crate::corpus::FeatureSequence;
use crate::error::{AudError, Result};
use crate::special::{digamma, log_sum_exp, LN_2PI};

/// E[ln w_k] = ψ(α_k) − ψ(Σα) for w ~ Dirichlet(α).
pub fn expected_log_weights(alpha: &[f64]) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        return Err(AudError::Domain("empty Dirichlet".into()));
    }
    if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(AudError::Domain(format!("Dirichlet concentration must be positive, got {a}")));
    }
    let total = digamma(alpha.iter().sum());
    Ok(alpha.iter().map(|&a| digamma(a) - total).collect())
}

/// E_q[ln N(x | μ, 1/λ)] summed over dimensions, with per-dimension value
/// 0.5·(E[ln λ] − ln 2π − E[λ](x−m)² − 1/κ).
pub fn expected_frame_loglik(g: &NormalGamma, x: &[f64]) -> Result<f64> {
    if g.dim() != x.len() {
        return Err(AudError::Shape(format!("frame has dimension {}, model has {}", x.len(), g.dim())));
    }
    Ok((0..x.len())
        .map(|d| {
            let e_log_prec = digamma(g.shape[d]) - g.rate[d].ln();
            let e_prec = g.shape[d] / g.rate[d];
            0.5 * (e_log_prec - LN_2PI - e_prec * (x[d] - g.mean[d]).powi(2) - 1.0 / g.kappa[d])
        })
        .sum())
}

fn log_dirichlet_mean(alpha: &[f64]) -> Vec<f64> {
    let total = digamma(alpha.iter().sum());
    alpha.iter().map(|&a| digamma(a) - total).collect()
}

/// Expected log-parameters of a phone loop, laid out for the dynamic
/// programs. States are indexed `k * 3 + s`; components `state * M + c`.
#[derive(Debug, Clone)]
pub struct ExpectedParams {
    pub n_units: usize,
    pub n_components: usize,
    pub dim: usize,
    pub log_unit: Vec<f64>,
    pub log_trans: Vec<[[f64; 2]; N_STATES]>,
    comp_const: Vec<f64>,
    comp_prec: Vec<f64>,
    comp_mean: Vec<f64>,
}

impl ExpectedParams {
    pub fn new(post: &PhoneLoopPosterior) -> Self {
        Self::from_units(&post.units, Some(&post.unit_alpha))
    }

    /// With `unit_alpha = None` the unit-entry scores are zero, for passes
    /// where the unit sequence is given.
    pub fn from_units(units: &[UnitPosterior], unit_alpha: Option<&[f64]>) -> Self {
        let m = units[0].n_components();
        let dim = units[0].dim();
        let log_unit = unit_alpha.map_or_else(|| vec![0.0; units.len()], log_dirichlet_mean);
        let mut log_trans = Vec::with_capacity(units.len());
        let mut comp_const = Vec::with_capacity(units.len() * N_STATES * m);
        let mut comp_prec = Vec::with_capacity(units.len() * N_STATES * m * dim);
        let mut comp_mean = Vec::with_capacity(units.len() * N_STATES * m * dim);
        for u in units {
            let mut lt = [[0.0; 2]; N_STATES];
            for (s, row) in lt.iter_mut().enumerate() {
                let e = log_dirichlet_mean(&u.trans_alpha[s]);
                *row = [e[0], e[1]];
            }
            log_trans.push(lt);
            for GmmState { mix_alpha, components } in &u.states {
                let lmix = log_dirichlet_mean(mix_alpha);
                for (c, g) in components.iter().enumerate() {
                    let mut k = lmix[c];
                    for d in 0..dim {
                        k += 0.5 * (digamma(g.shape[d]) - g.rate[d].ln() - LN_2PI - 1.0 / g.kappa[d]);
                        comp_prec.push(g.shape[d] / g.rate[d]);
                        comp_mean.push(g.mean[d]);
                    }
                    comp_const.push(k);
                }
            }
        }
        Self {
            n_units: units.len(),
            n_components: m,
            dim,
            log_unit,
            log_trans,
            comp_const,
            comp_prec,
            comp_mean,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_units * N_STATES
    }

    /// E[ln π_c] + E[ln N(x | component)] for component `idx`.
    #[inline]
    pub fn component_score(&self, idx: usize, x: &[f64]) -> f64 {
        let base = idx * self.dim;
        let prec = &self.comp_prec[base..base + self.dim];
        let mean = &self.comp_mean[base..base + self.dim];
        let mut q = 0.0;
        for d in 0..self.dim {
            let z = x[d] - mean[d];
            q += prec[d] * z * z;
        }
        self.comp_const[idx] - 0.5 * q
    }

    /// Component and state emission scores for every frame of `f`.
    pub fn frame_scores(&self, f: &FeatureSequence) -> Result<FrameScores> {
        if f.dim() != self.dim {
            return Err(AudError::Shape(format!(
                "utterance {} has dimension {}, model expects {}",
                f.utt_id,
                f.dim(),
                self.dim
            )));
        }
        self.frame_scores_for_units(f, 0..self.n_units)
    }

    /// Scores restricted to a contiguous range of units (all frames).
    pub fn frame_scores_for_units(&self, f: &FeatureSequence, units: std::ops::Range<usize>) -> Result<FrameScores> {
        let m = self.n_components;
        let n_states = units.len() * N_STATES;
        let t_len = f.n_frames();
        let mut comp = vec![0.0; t_len * n_states * m];
        let mut emit = vec![0.0; t_len * n_states];
        let first_state = units.start * N_STATES;
        for (t, x) in f.frames().enumerate() {
            for s in 0..n_states {
                let row = &mut comp[(t * n_states + s) * m..(t * n_states + s + 1) * m];
                for (c, v) in row.iter_mut().enumerate() {
                    *v = self.component_score((first_state + s) * m + c, x);
                }
                emit[t * n_states + s] = if m == 1 { row[0] } else { log_sum_exp(row) };
            }
        }
        Ok(FrameScores { n_frames: t_len, n_states, n_components: m, comp, emit })
    }
}

/// Per-frame scores: `comp[(t * S + s) * M + c]` and `emit[t * S + s]`.
#[derive(Debug, Clone)]
pub struct FrameScores {
    pub n_frames: usize,
    pub n_states: usize,
    pub n_components: usize,
    pub comp: Vec<f64>,
    pub emit: Vec<f64>,
}

impl FrameScores {
    #[inline]
    pub fn emit(&self, t: usize, s: usize) -> f64 {
        self.emit[t * self.n_states + s]
    }

    #[inline]
    pub fn comp(&self, t: usize, s: usize) -> &[f64] {
        let i = (t * self.n_states + s) * self.n_components;
        &self.comp[i..i + self.n_components]
    }
}
