use crate::error::{AudError, Result};
use crate::model::N_STATES;

/// Expected sufficient statistics of the phone loop.
///
/// Indexing: state `k * 3 + s`, component `state * M + c`, and per-dimension
/// vectors `component * D + d`. `trans[state]` holds `[self, advance]`
/// counts, `entries[k]` the expected number of times unit `k` is entered.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    pub n_units: usize,
    pub n_components: usize,
    pub dim: usize,
    pub counts: Vec<f64>,
    pub sum: Vec<f64>,
    pub sumsq: Vec<f64>,
    pub trans: Vec<[f64; 2]>,
    pub entries: Vec<f64>,
    pub total_frames: f64,
}

impl SuffStats {
    pub fn zeros(n_units: usize, n_components: usize, dim: usize) -> Self {
        let n_comp = n_units * N_STATES * n_components;
        Self {
            n_units,
            n_components,
            dim,
            counts: vec![0.0; n_comp],
            sum: vec![0.0; n_comp * dim],
            sumsq: vec![0.0; n_comp * dim],
            trans: vec![[0.0; 2]; n_units * N_STATES],
            entries: vec![0.0; n_units],
            total_frames: 0.0,
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_units == other.n_units && self.n_components == other.n_components && self.dim == other.dim
    }

    pub fn merge_into(&mut self, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return Err(AudError::Shape(format!(
                "cannot merge statistics of shape (K={}, M={}, D={}) and (K={}, M={}, D={})",
                self.n_units, self.n_components, self.dim, other.n_units, other.n_components, other.dim
            )));
        }
        let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.counts, &other.counts);
        add(&mut self.sum, &other.sum);
        add(&mut self.sumsq, &other.sumsq);
        add(&mut self.entries, &other.entries);
        for (a, b) in self.trans.iter_mut().zip(&other.trans) {
            a[0] += b[0];
            a[1] += b[1];
        }
        self.total_frames += other.total_frames;
        Ok(())
    }

    /// Counts are non-negative and component counts add up to the frames.
    pub fn check(&self, tol: f64) -> Result<()> {
        let negative = self
            .counts
            .iter()
            .chain(&self.entries)
            .chain(self.trans.iter().flatten())
            .any(|v| *v < 0.0 || !v.is_finite());
        if negative || self.total_frames < 0.0 {
            return Err(AudError::Domain("sufficient statistics contain a negative or non-finite count".into()));
        }
        let total: f64 = self.counts.iter().sum();
        if (total - self.total_frames).abs() > tol * self.total_frames.max(1.0) {
            return Err(AudError::InternalState(format!(
                "component counts sum to {total}, expected {}",
                self.total_frames
            )));
        }
        Ok(())
    }
}

/// Fieldwise sum of two statistics of the same shape.
pub fn merge_stats(a: &SuffStats, b: &SuffStats) -> Result<SuffStats> {
    let mut out = a.clone();
    out.merge_into(b)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stats(rng: &mut ChaCha8Rng) -> SuffStats {
        let mut s = SuffStats::zeros(2, 2, 3);
        for v in s.counts.iter_mut().chain(s.sum.iter_mut()).chain(s.sumsq.iter_mut()).chain(s.entries.iter_mut()) {
            *v = rng.random_range(0.0..10.0);
        }
        for t in &mut s.trans {
            *t = [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)];
        }
        s.total_frames = s.counts.iter().sum();
        s
    }

    fn max_abs_diff(a: &SuffStats, b: &SuffStats) -> f64 {
        let flat = |s: &SuffStats| {
            let mut v = s.counts.clone();
            v.extend(&s.sum);
            v.extend(&s.sumsq);
            v.extend(&s.entries);
            v.extend(s.trans.iter().flatten());
            v.push(s.total_frames);
            v
        };
        flat(a).iter().zip(flat(b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random_stats(&mut rng);
        assert_eq!(merge_stats(&x, &SuffStats::zeros(2, 2, 3)).unwrap(), x);
    }

    #[test]
    fn merge_is_commutative() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = (random_stats(&mut rng), random_stats(&mut rng));
        assert_eq!(merge_stats(&a, &b).unwrap(), merge_stats(&b, &a).unwrap());
    }

    #[test]
    fn seven_element_association_orders_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<_> = (0..7).map(|_| random_stats(&mut rng)).collect();
        let left = xs.iter().skip(1).fold(xs[0].clone(), |acc, x| merge_stats(&acc, x).unwrap());
        let right = xs.iter().rev().skip(1).fold(xs[6].clone(), |acc, x| merge_stats(x, &acc).unwrap());
        let tree = {
            let ab = merge_stats(&xs[0], &xs[1]).unwrap();
            let cd = merge_stats(&xs[2], &xs[3]).unwrap();
            let ef = merge_stats(&xs[4], &xs[5]).unwrap();
            merge_stats(&merge_stats(&ab, &cd).unwrap(), &merge_stats(&ef, &xs[6]).unwrap()).unwrap()
        };
        assert!(max_abs_diff(&left, &right) < 1e-12);
        assert!(max_abs_diff(&left, &tree) < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(matches!(merge_stats(&SuffStats::zeros(2, 1, 1), &SuffStats::zeros(3, 1, 1)), Err(AudError::Shape(_))));
    }

    proptest! {
        #[test]
        fn monoid_laws(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, b, c) = (random_stats(&mut rng), random_stats(&mut rng), random_stats(&mut rng));
            let ab_c = merge_stats(&merge_stats(&a, &b).unwrap(), &c).unwrap();
            let a_bc = merge_stats(&a, &merge_stats(&b, &c).unwrap()).unwrap();
            prop_assert!(max_abs_diff(&ab_c, &a_bc) < 1e-12);
            prop_assert_eq!(merge_stats(&a, &b).unwrap(), merge_stats(&b, &a).unwrap());
        }
    }
}
