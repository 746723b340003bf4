//! Shared fixtures: random phone-loop models and an exhaustive path
//! enumerator that scores paths straight from the posterior.
#![allow(dead_code)]

use aud_core::model::{expected_frame_loglik, expected_log_weights, ADVANCE, SELF_LOOP};
use aud_core::{init_posterior, DataSummary, FeatureSequence, HyperParams, PhoneLoopPosterior};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_model(k: usize, m: usize, dim: usize, seed: u64) -> PhoneLoopPosterior {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let summary = DataSummary {
        mean: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        variance: (0..dim).map(|_| rng.random_range(0.5..2.0)).collect(),
    };
    let hyper = HyperParams { n_units: k, n_components: m, perturb_scale: 1.0, ..Default::default() };
    let mut post = init_posterior(&hyper, &summary, seed).unwrap();
    for a in &mut post.unit_alpha {
        *a = rng.random_range(0.2..3.0);
    }
    for u in &mut post.units {
        for row in &mut u.trans_alpha {
            *row = [rng.random_range(0.2..3.0), rng.random_range(0.2..3.0)];
        }
        for st in &mut u.states {
            for a in &mut st.mix_alpha {
                *a = rng.random_range(0.2..3.0);
            }
            for g in &mut st.components {
                for d in 0..dim {
                    g.kappa[d] = rng.random_range(0.5..4.0);
                    g.shape[d] = rng.random_range(1.0..4.0);
                    g.rate[d] = rng.random_range(0.5..3.0);
                }
            }
        }
    }
    post
}

pub fn random_features(t: usize, dim: usize, seed: u64) -> FeatureSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let data = (0..t * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    FeatureSequence::new("u", dim, 10.0, data).unwrap()
}

/// Scores computed straight from the posterior, independently of the
/// dynamic programs' precomputed tables.
pub struct Oracle {
    pub k: usize,
    pub lu: Vec<f64>,
    pub lt: Vec<[[f64; 2]; 3]>,
    /// comp[t][state][c]
    pub comp: Vec<Vec<Vec<f64>>>,
}

impl Oracle {
    pub fn new(post: &PhoneLoopPosterior, f: &FeatureSequence) -> Self {
        let lu = expected_log_weights(&post.unit_alpha).unwrap();
        let lt = post
            .units
            .iter()
            .map(|u| {
                let mut out = [[0.0; 2]; 3];
                for s in 0..3 {
                    let e = expected_log_weights(&u.trans_alpha[s]).unwrap();
                    out[s] = [e[0], e[1]];
                }
                out
            })
            .collect();
        let comp = (0..f.n_frames())
            .map(|t| {
                post.units
                    .iter()
                    .flat_map(|u| u.states.iter())
                    .map(|st| {
                        let lw = expected_log_weights(&st.mix_alpha).unwrap();
                        st.components
                            .iter()
                            .zip(&lw)
                            .map(|(g, w)| w + expected_frame_loglik(g, f.frame(t)).unwrap())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { k: post.n_units(), lu, lt, comp }
    }

    pub fn emit(&self, t: usize, s: usize) -> f64 {
        let v = &self.comp[t][s];
        let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
    }

    /// Every valid state path with its log score.
    pub fn paths(&self, t_len: usize) -> Vec<(Vec<usize>, f64)> {
        let mut out = Vec::new();
        for k in 0..self.k {
            let s0 = k * 3;
            self.extend(vec![s0], self.lu[k] + self.emit(0, s0), t_len, &mut out);
        }
        out
    }

    fn extend(&self, path: Vec<usize>, score: f64, t_len: usize, out: &mut Vec<(Vec<usize>, f64)>) {
        let t = path.len();
        let cur = *path.last().unwrap();
        let (k, s) = (cur / 3, cur % 3);
        if t == t_len {
            if s == 2 {
                out.push((path, score + self.lt[k][2][ADVANCE]));
            }
            return;
        }
        let mut next = vec![(cur, self.lt[k][s][SELF_LOOP])];
        if s < 2 {
            next.push((cur + 1, self.lt[k][s][ADVANCE]));
        } else {
            for j in 0..self.k {
                next.push((j * 3, self.lt[k][2][ADVANCE] + self.lu[j]));
            }
        }
        for (n, w) in next {
            let mut p = path.clone();
            p.push(n);
            self.extend(p, score + w + self.emit(t, n), t_len, out);
        }
    }
}

pub fn log_sum(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}


/// Split a state path into `(unit, start, end)` segments.
pub fn path_segments(path: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut out: Vec<(usize, usize, usize)> = Vec::new();
    for (t, &s) in path.iter().enumerate() {
        let entered = t == 0 || (s % 3 == 0 && path[t - 1] != s);
        if entered {
            out.push((s / 3, t, t));
        } else {
            out.last_mut().unwrap().2 = t;
        }
    }
    out
}
