//! Conjugate posterior updates from expected statistics.

use super::stats::SuffStats;
use crate::error::{AudError, Result};
use crate::model::{GmmState, NormalGamma, PhoneLoopPosterior, UnitPosterior, N_STATES};

/// Counts below this are treated as "no data" and leave the prior as is.
const MIN_COUNT: f64 = 1e-8;

/// Normal-Gamma update for one component from its zeroth, first and second
/// order statistics.
pub fn update_normal_gamma(prior: &NormalGamma, n: f64, sum: &[f64], sumsq: &[f64]) -> Result<NormalGamma> {
    if n < 0.0 || !n.is_finite() {
        return Err(AudError::Domain(format!("component count {n} is negative or non-finite")));
    }
    if n < MIN_COUNT {
        return Ok(prior.clone());
    }
    let dim = prior.dim();
    let mut out = prior.clone();
    for d in 0..dim {
        let (k0, m0, a0, b0) = (prior.kappa[d], prior.mean[d], prior.shape[d], prior.rate[d]);
        let kappa = k0 + n;
        let xbar = sum[d] / n;
        let scatter = (sumsq[d] - sum[d] * sum[d] / n).max(0.0);
        out.kappa[d] = kappa;
        out.mean[d] = (k0 * m0 + sum[d]) / kappa;
        out.shape[d] = a0 + 0.5 * n;
        out.rate[d] = b0 + 0.5 * scatter + k0 * n * (xbar - m0).powi(2) / (2.0 * kappa);
    }
    Ok(out)
}

/// Posterior of unit `k` given the statistics, starting from `prior`.
pub(crate) fn update_unit(prior: &UnitPosterior, stats: &SuffStats, k: usize) -> Result<UnitPosterior> {
    let (m, dim) = (stats.n_components, stats.dim);
    let mut out = prior.clone();
    for s in 0..N_STATES {
        let state = k * N_STATES + s;
        let GmmState { mix_alpha, components } = &mut out.states[s];
        for c in 0..m {
            let ci = state * m + c;
            let n = stats.counts[ci];
            let row = ci * dim..(ci + 1) * dim;
            components[c] = update_normal_gamma(&prior.states[s].components[c], n, &stats.sum[row.clone()], &stats.sumsq[row])?;
            mix_alpha[c] = prior.states[s].mix_alpha[c] + n;
        }
        for a in 0..2 {
            let n = stats.trans[state][a];
            if n < 0.0 || !n.is_finite() {
                return Err(AudError::Domain(format!("transition count {n} is negative or non-finite")));
            }
            out.trans_alpha[s][a] = prior.trans_alpha[s][a] + n;
        }
    }
    Ok(out)
}

/// Posterior given the prior and the corpus statistics.
pub fn mstep(prior: &PhoneLoopPosterior, stats: &SuffStats) -> Result<PhoneLoopPosterior> {
    if stats.n_units != prior.n_units() || stats.n_components != prior.n_components() || stats.dim != prior.dim() {
        return Err(AudError::Shape(format!(
            "statistics of shape (K={}, M={}, D={}) do not match the model (K={}, M={}, D={})",
            stats.n_units,
            stats.n_components,
            stats.dim,
            prior.n_units(),
            prior.n_components(),
            prior.dim()
        )));
    }
    if stats.entries.iter().chain(&stats.counts).any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(AudError::Domain("sufficient statistics contain a negative or non-finite count".into()));
    }
    let units = (0..prior.n_units())
        .map(|k| update_unit(&prior.units[k], stats, k))
        .collect::<Result<Vec<_>>>()?;
    let unit_alpha = prior.unit_alpha.iter().zip(&stats.entries).map(|(a, n)| a + n).collect();
    Ok(PhoneLoopPosterior { units, unit_alpha, hyper: prior.hyper.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ng(mean: f64, kappa: f64, shape: f64, rate: f64) -> NormalGamma {
        NormalGamma { mean: vec![mean], kappa: vec![kappa], shape: vec![shape], rate: vec![rate] }
    }

    #[test]
    fn normal_gamma_update_matches_hand_values() {
        // Data {1, 2, 3}: n=3, sum=6, sumsq=14, scatter=2, xbar=2.
        let post = update_normal_gamma(&ng(0.0, 1.0, 1.0, 1.0), 3.0, &[6.0], &[14.0]).unwrap();
        assert!((post.kappa[0] - 4.0).abs() < 1e-12);
        assert!((post.mean[0] - 1.5).abs() < 1e-12);
        assert!((post.shape[0] - 2.5).abs() < 1e-12);
        // 1 + 0.5 * 2 + 1 * 3 * 4 / 8
        assert!((post.rate[0] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn single_observation() {
        let post = update_normal_gamma(&ng(0.0, 1.0, 1.0, 1.0), 1.0, &[2.0], &[4.0]).unwrap();
        assert_eq!((post.mean[0], post.kappa[0], post.shape[0], post.rate[0]), (1.0, 2.0, 1.5, 2.0));
    }

    #[test]
    fn update_equals_sequential_bayes() {
        // Updating with all data at once equals updating point by point.
        let xs = [0.3, -1.2, 2.5, 0.7];
        let p0 = ng(0.1, 0.5, 2.0, 1.5);
        let mut seq = p0.clone();
        for x in xs {
            seq = update_normal_gamma(&seq, 1.0, &[x], &[x * x]).unwrap();
        }
        let sum: f64 = xs.iter().sum();
        let sumsq: f64 = xs.iter().map(|x| x * x).sum();
        let batch = update_normal_gamma(&p0, 4.0, &[sum], &[sumsq]).unwrap();
        for (a, b) in [(seq.mean[0], batch.mean[0]), (seq.kappa[0], batch.kappa[0]), (seq.shape[0], batch.shape[0]), (seq.rate[0], batch.rate[0])] {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_count_keeps_prior() {
        let p = ng(0.4, 1.0, 1.0, 2.0);
        assert_eq!(update_normal_gamma(&p, 0.0, &[0.0], &[0.0]).unwrap(), p);
    }

    #[test]
    fn negative_count_is_a_domain_error() {
        let err = update_normal_gamma(&ng(0.0, 1.0, 1.0, 1.0), -0.5, &[0.0], &[0.0]).unwrap_err();
        assert!(matches!(err, AudError::Domain(_)));
    }
}
