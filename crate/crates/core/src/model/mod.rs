//! The Bayesian phone-loop model family.
//!
//! Every parameter block carries a conjugate posterior: Normal-Gamma per
//! Gaussian dimension, Dirichlet for state-mixture weights, per-state
//! transitions and the unit weights. The prior has the same shape as the
//! posterior, so a [`PhoneLoopPosterior`] doubles as a prior.

mod expect;
mod io;
mod kl;

pub use expect::{expected_frame_loglik, expected_log_weights, ExpectedParams, FrameScores};
pub use io::{read_model, write_model, ModelFile};
pub(crate) use io::{parse_hyper, parse_unit_block, write_hyper, write_unit_block, Tokens};
pub use kl::{kl_dirichlet, kl_normal_gamma, kl_to_prior, kl_unit};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::corpus::FeatureSequence;
use crate::error::{AudError, Result};
use crate::seed::{stream_rng, STREAM_INIT};

/// States per acoustic unit.
pub const N_STATES: usize = 3;
/// Index of the self-loop arc in a state's transition Dirichlet.
pub const SELF_LOOP: usize = 0;
/// Index of the advance arc (leaving the unit from the last state).
pub const ADVANCE: usize = 1;

/// Diagonal Normal-Gamma: per dimension, precision λ ~ Gamma(shape, rate)
/// and mean μ | λ ~ N(mean, 1/(kappa·λ)).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalGamma {
    pub mean: Vec<f64>,
    pub kappa: Vec<f64>,
    pub shape: Vec<f64>,
    pub rate: Vec<f64>,
}

impl NormalGamma {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mean.len();
        if d == 0 || self.kappa.len() != d || self.shape.len() != d || self.rate.len() != d {
            return Err(AudError::Shape("Normal-Gamma fields have inconsistent lengths".into()));
        }
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !self.mean.iter().all(|x| x.is_finite()) || !positive(&self.kappa) || !positive(&self.shape) || !positive(&self.rate) {
            return Err(AudError::Domain("Normal-Gamma parameters must be finite with kappa, shape, rate > 0".into()));
        }
        Ok(())
    }
}

/// Posterior over one emitting state: a Dirichlet over mixture weights and
/// one Normal-Gamma per Gaussian component.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmState {
    pub mix_alpha: Vec<f64>,
    pub components: Vec<NormalGamma>,
}

/// Three-state left-to-right unit. `trans_alpha[s]` is the Dirichlet over
/// `[SELF_LOOP, ADVANCE]` for state `s`; advancing from the last state exits
/// the unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPosterior {
    pub states: [GmmState; N_STATES],
    pub trans_alpha: [[f64; 2]; N_STATES],
}

impl UnitPosterior {
    pub fn n_components(&self) -> usize {
        self.states[0].mix_alpha.len()
    }

    pub fn dim(&self) -> usize {
        self.states[0].components[0].dim()
    }

    pub fn validate(&self, m: usize, dim: usize) -> Result<()> {
        for st in &self.states {
            if st.mix_alpha.len() != m || st.components.len() != m {
                return Err(AudError::Shape(format!("expected {m} mixture components per state")));
            }
            if st.mix_alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                return Err(AudError::Domain("mixture concentrations must be positive".into()));
            }
            for c in &st.components {
                c.validate()?;
                if c.dim() != dim {
                    return Err(AudError::Shape(format!("component dimension {} != model dimension {dim}", c.dim())));
                }
            }
        }
        if self.trans_alpha.iter().flatten().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(AudError::Domain("transition concentrations must be positive".into()));
        }
        Ok(())
    }

    /// The uninformative unit implied by `hyper`.
    pub fn vague(hyper: &HyperParams) -> Self {
        let comp = NormalGamma {
            mean: hyper.prior_mean.clone(),
            kappa: hyper.prior_kappa.clone(),
            shape: hyper.prior_shape.clone(),
            rate: hyper.prior_rate.clone(),
        };
        let state = GmmState {
            mix_alpha: vec![hyper.alpha_mix; hyper.n_components],
            components: vec![comp; hyper.n_components],
        };
        Self {
            states: [state.clone(), state.clone(), state],
            trans_alpha: [[hyper.alpha_trans; 2]; N_STATES],
        }
    }

    /// Shift every Gaussian location by an independent draw with standard
    /// deviation `scale·sqrt(rate/shape)` (the prior variance guess).
    pub fn perturb<R: Rng>(&mut self, scale: f64, rng: &mut R) {
        for st in &mut self.states {
            for c in &mut st.components {
                for d in 0..c.mean.len() {
                    let eps: f64 = rng.sample(StandardNormal);
                    let sd = (c.rate[d] / c.shape[d]).sqrt();
                    c.mean[d] += scale * sd * eps;
                }
            }
        }
    }
}

/// Model configuration and prior hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Truncation level: number of acoustic units.
    pub n_units: usize,
    /// Gaussians per state.
    pub n_components: usize,
    /// Total concentration of the unit-weight Dirichlet; each unit gets γ/K.
    pub gamma: f64,
    pub alpha_mix: f64,
    pub alpha_trans: f64,
    pub prior_mean: Vec<f64>,
    pub prior_kappa: Vec<f64>,
    pub prior_shape: Vec<f64>,
    pub prior_rate: Vec<f64>,
    pub seed: u64,
    /// Multiplier on the symmetry-breaking perturbation; 0 disables it.
    pub perturb_scale: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            n_units: 50,
            n_components: 2,
            gamma: 1.0,
            alpha_mix: 1.0,
            alpha_trans: 1.0,
            prior_mean: Vec::new(),
            prior_kappa: Vec::new(),
            prior_shape: Vec::new(),
            prior_rate: Vec::new(),
            seed: 0,
            perturb_scale: 1.0,
        }
    }
}

impl HyperParams {
    pub fn dim(&self) -> usize {
        self.prior_mean.len()
    }

    /// Vague prior worth one pseudo-observation: kappa0 = a0 = 1, m0 the
    /// corpus mean and b0 the corpus per-dimension variance.
    pub fn with_vague_prior(mut self, summary: &DataSummary) -> Result<Self> {
        if let Some(d) = summary.variance.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(AudError::DegenerateData(format!(
                "dimension {d} has variance {} across the corpus",
                summary.variance[d]
            )));
        }
        let dim = summary.mean.len();
        self.prior_mean = summary.mean.clone();
        self.prior_kappa = vec![1.0; dim];
        self.prior_shape = vec![1.0; dim];
        self.prior_rate = summary.variance.clone();
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 || self.n_components == 0 {
            return Err(AudError::Config("K and M must be at least 1".into()));
        }
        for (name, v) in [("gamma", self.gamma), ("alpha_mix", self.alpha_mix), ("alpha_trans", self.alpha_trans)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(AudError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.perturb_scale >= 0.0 && self.perturb_scale.is_finite()) {
            return Err(AudError::Config("perturb_scale must be non-negative".into()));
        }
        NormalGamma {
            mean: self.prior_mean.clone(),
            kappa: self.prior_kappa.clone(),
            shape: self.prior_shape.clone(),
            rate: self.prior_rate.clone(),
        }
        .validate()
        .map_err(|e| AudError::Config(format!("prior hyperparameters: {e}")))
    }
}

/// Per-dimension mean and (population) variance over all frames of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSummary {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl DataSummary {
    pub fn from_corpus(corpus: &[FeatureSequence]) -> Result<Self> {
        let first = corpus
            .first()
            .ok_or_else(|| AudError::DegenerateData("empty corpus".into()))?;
        let dim = first.dim();
        let mut n = 0.0;
        let mut sum = vec![0.0; dim];
        for f in corpus {
            if f.dim() != dim {
                return Err(AudError::Shape(format!("utterance {} has dimension {}, expected {dim}", f.utt_id, f.dim())));
            }
            for x in f.frames() {
                for (s, v) in sum.iter_mut().zip(x) {
                    *s += v;
                }
            }
            n += f.n_frames() as f64;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let mut sq = vec![0.0; dim];
        for f in corpus {
            for x in f.frames() {
                for d in 0..dim {
                    sq[d] += (x[d] - mean[d]).powi(2);
                }
            }
        }
        Ok(Self {
            mean,
            variance: sq.iter().map(|s| s / n).collect(),
        })
    }
}

/// Variational posterior (or prior) over all phone-loop parameters: the
/// acoustic part (units) and the unit-weight Dirichlet.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoneLoopPosterior {
    pub units: Vec<UnitPosterior>,
    pub unit_alpha: Vec<f64>,
    pub hyper: HyperParams,
}

impl PhoneLoopPosterior {
    /// The prior implied by `hyper`: every unit vague, unit weights γ/K.
    pub fn prior(hyper: &HyperParams) -> Result<Self> {
        hyper.validate()?;
        let k = hyper.n_units;
        Ok(Self {
            units: vec![UnitPosterior::vague(hyper); k],
            unit_alpha: vec![hyper.gamma / k as f64; k],
            hyper: hyper.clone(),
        })
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_components(&self) -> usize {
        self.hyper.n_components
    }

    pub fn dim(&self) -> usize {
        self.hyper.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.units.is_empty() || self.unit_alpha.len() != self.units.len() {
            return Err(AudError::Shape(format!(
                "{} units but {} unit concentrations",
                self.units.len(),
                self.unit_alpha.len()
            )));
        }
        if self.unit_alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(AudError::Domain("unit concentrations must be positive".into()));
        }
        for u in &self.units {
            u.validate(self.hyper.n_components, self.dim())?;
        }
        Ok(())
    }

    /// Same K, M and dimension.
    pub fn same_structure(&self, other: &Self) -> bool {
        self.units.len() == other.units.len()
            && self.unit_alpha.len() == other.unit_alpha.len()
            && self.n_components() == other.n_components()
            && self.dim() == other.dim()
    }

    /// Perturb the Gaussian locations of units `from..K` using the
    /// initialization stream of `seed`.
    pub fn perturb_units_from(&mut self, from: usize, seed: u64) {
        let scale = self.hyper.perturb_scale;
        let mut rng = stream_rng(seed, STREAM_INIT, 0);
        for u in self.units.iter_mut().skip(from) {
            u.perturb(scale, &mut rng);
        }
    }
}

/// Vague prior over the phone loop for a corpus with the given summary.
pub fn vague_prior(hyper: &HyperParams, summary: &DataSummary) -> Result<PhoneLoopPosterior> {
    PhoneLoopPosterior::prior(&hyper.clone().with_vague_prior(summary)?)
}

/// Initial posterior: the vague prior with every Gaussian location perturbed
/// from the seeded generator.
pub fn init_posterior(hyper: &HyperParams, summary: &DataSummary, seed: u64) -> Result<PhoneLoopPosterior> {
    let mut hyper = hyper.clone();
    hyper.seed = seed;
    let mut post = vague_prior(&hyper, summary)?;
    post.perturb_units_from(0, seed);
    Ok(post)
}
