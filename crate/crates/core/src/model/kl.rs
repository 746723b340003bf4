//! Closed-form KL divergences between posterior and prior blocks.

use super::{NormalGamma, PhoneLoopPosterior, UnitPosterior};
use crate::error::{AudError, Result};
use crate::special::{digamma, ln_gamma};

/// KL(Dir(q) || Dir(p)).
pub fn kl_dirichlet(q: &[f64], p: &[f64]) -> f64 {
    debug_assert_eq!(q.len(), p.len());
    let (sq, sp): (f64, f64) = (q.iter().sum(), p.iter().sum());
    let dsq = digamma(sq);
    let mut kl = ln_gamma(sq) - ln_gamma(sp);
    for (&a, &b) in q.iter().zip(p) {
        kl += ln_gamma(b) - ln_gamma(a) + (a - b) * (digamma(a) - dsq);
    }
    kl
}

/// KL(q || p) for diagonal Normal-Gamma distributions, summed over
/// dimensions: a Gamma KL on the precision plus the expected Gaussian KL on
/// the mean given the precision.
pub fn kl_normal_gamma(q: &NormalGamma, p: &NormalGamma) -> f64 {
    (0..q.dim())
        .map(|d| {
            let (m1, k1, a1, b1) = (q.mean[d], q.kappa[d], q.shape[d], q.rate[d]);
            let (m0, k0, a0, b0) = (p.mean[d], p.kappa[d], p.shape[d], p.rate[d]);
            let kl_gamma = (a1 - a0) * digamma(a1) - ln_gamma(a1) + ln_gamma(a0) + a0 * (b1.ln() - b0.ln())
                + a1 * (b0 - b1) / b1;
            let kl_mean = 0.5 * ((k1 / k0).ln() + k0 / k1 - 1.0 + k0 * (a1 / b1) * (m1 - m0).powi(2));
            kl_gamma + kl_mean
        })
        .sum()
}

/// KL of the acoustic and transition parameters of one unit.
pub fn kl_unit(q: &UnitPosterior, p: &UnitPosterior) -> f64 {
    let mut kl = 0.0;
    for (qt, pt) in q.trans_alpha.iter().zip(&p.trans_alpha) {
        kl += kl_dirichlet(qt, pt);
    }
    for (qs, ps) in q.states.iter().zip(&p.states) {
        kl += kl_dirichlet(&qs.mix_alpha, &ps.mix_alpha);
        for (qc, pc) in qs.components.iter().zip(&ps.components) {
            kl += kl_normal_gamma(qc, pc);
        }
    }
    kl
}

/// Sum of the family-wise KL terms between a posterior and its prior.
pub fn kl_to_prior(posterior: &PhoneLoopPosterior, prior: &PhoneLoopPosterior) -> Result<f64> {
    if !posterior.same_structure(prior) {
        return Err(AudError::Shape(format!(
            "posterior (K={}, M={}, D={}) and prior (K={}, M={}, D={}) differ in structure",
            posterior.n_units(),
            posterior.n_components(),
            posterior.dim(),
            prior.n_units(),
            prior.n_components(),
            prior.dim()
        )));
    }
    let mut kl = kl_dirichlet(&posterior.unit_alpha, &prior.unit_alpha);
    for (q, p) in posterior.units.iter().zip(&prior.units) {
        kl += kl_unit(q, p);
    }
    Ok(kl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{vague_prior, DataSummary, HyperParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn prior() -> PhoneLoopPosterior {
        let h = HyperParams { n_units: 3, n_components: 2, ..Default::default() };
        vague_prior(&h, &DataSummary { mean: vec![0.0, 1.0], variance: vec![1.0, 4.0] }).unwrap()
    }

    #[test]
    fn identical_blocks_have_zero_kl() {
        let p = prior();
        assert_eq!(kl_to_prior(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn dirichlet_reference_value() {
        // ln Γ(4) − 2 ln Γ(2) − ln Γ(2) + 2·(ψ(2) − ψ(4)), with ψ(4) − ψ(2) = 1/2 + 1/3
        let expected = 6f64.ln() - 2.0 * (0.5 + 1.0 / 3.0);
        let kl = kl_dirichlet(&[2.0, 2.0], &[1.0, 1.0]);
        assert!((kl - expected).abs() < 1e-12);
        assert!((kl - 0.1250).abs() < 1e-3);
    }

    #[test]
    fn normal_gamma_kl_matches_sampling_estimate() {
        // E_q[ln q − ln p] by Monte Carlo, log densities written out directly.
        use rand_distr::{Distribution, Gamma, Normal};
        let q = NormalGamma { mean: vec![0.3], kappa: vec![3.0], shape: vec![4.0], rate: vec![2.0] };
        let p = NormalGamma { mean: vec![-0.2], kappa: vec![1.0], shape: vec![2.0], rate: vec![3.0] };
        let log_ng = |g: &NormalGamma, mu: f64, lam: f64| {
            let (m, k, a, b) = (g.mean[0], g.kappa[0], g.shape[0], g.rate[0]);
            a * b.ln() - ln_gamma(a) + (a - 1.0) * lam.ln() - b * lam + 0.5 * (k * lam).ln()
                - 0.5 * (2.0 * std::f64::consts::PI).ln()
                - 0.5 * k * lam * (mu - m).powi(2)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gamma = Gamma::new(4.0, 0.5).unwrap();
        let n = 400_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let lam: f64 = gamma.sample(&mut rng);
            let mu = Normal::new(0.3, (1.0 / (3.0 * lam)).sqrt()).unwrap().sample(&mut rng);
            let v = log_ng(&q, mu, lam) - log_ng(&p, mu, lam);
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let closed = kl_normal_gamma(&q, &p);
        assert!((closed - mean).abs() < 5.0 * se, "closed {closed} mc {mean} se {se}");
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = prior();
        let mut b = prior();
        b.units.pop();
        b.unit_alpha.pop();
        assert!(matches!(kl_to_prior(&a, &b), Err(AudError::Shape(_))));
    }

    #[test]
    fn any_single_perturbed_field_gives_positive_kl() {
        let p = prior();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..200 {
            let mut q = p.clone();
            let k = rng.random_range(0..q.n_units());
            let factor = rng.random_range(0.5..2.0);
            let bump = rng.random_range(-1.0..1.0);
            match trial % 7 {
                0 => q.unit_alpha[k] *= factor,
                1 => q.units[k].trans_alpha[rng.random_range(0..3)][rng.random_range(0..2)] *= factor,
                2 => q.units[k].states[rng.random_range(0..3)].mix_alpha[rng.random_range(0..2)] *= factor,
                3 => q.units[k].states[0].components[1].mean[1] += bump,
                4 => q.units[k].states[1].components[0].kappa[0] *= factor,
                5 => q.units[k].states[2].components[0].shape[1] *= factor,
                _ => q.units[k].states[2].components[1].rate[0] *= factor,
            }
            if q == p {
                continue;
            }
            let kl = kl_to_prior(&q, &p).unwrap();
            assert!(kl > 0.0, "trial {trial}: kl {kl}");
        }
    }
}
