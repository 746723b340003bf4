//! Informative prior over acoustic units, fitted on a labeled corpus.
//!
//! Each source phone gets its own unit. Phone boundaries are taken from the
//! labels, so a labeled interval is forced to be one traversal of its
//! phone's three-state sub-HMM; states and mixture components inside the
//! interval stay latent and are marginalized by forward-backward. The fitted
//! posteriors then serve both as prior and as initialization for training
//! on the target corpus.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{FeatureSequence, TimedLabelSequence};
use crate::error::{AudError, Result};
use crate::inference::{forced_unit_estep, update_unit, Schedule, SuffStats};
use crate::model::{kl_unit, parse_hyper, parse_unit_block, write_hyper, write_unit_block, ExpectedParams, HyperParams, PhoneLoopPosterior, Tokens, UnitPosterior};
use crate::seed::{stream_rng, STREAM_PRIOR};

pub const PRIOR_MAGIC: &str = "AUDP";
pub const PRIOR_VERSION: u32 = 1;

/// Fitted per-phone posteriors plus the vague unit used for everything else.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticPrior {
    pub units: HashMap<String, UnitPosterior>,
    pub vague_unit: UnitPosterior,
    /// Phones in first-occurrence order; unit `i` of a seeded model is
    /// `label_order[i]`.
    pub label_order: Vec<String>,
    /// Hyperparameters the fit ran with (carries the vague prior).
    pub hyper: HyperParams,
    /// Lower bound after each supervised iteration, starting at the
    /// initialization.
    pub elbo_trace: Vec<f64>,
}

impl AcousticPrior {
    pub fn n_phones(&self) -> usize {
        self.label_order.len()
    }

    pub fn unit(&self, label: &str) -> Option<&UnitPosterior> {
        self.units.get(label)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{PRIOR_MAGIC} {PRIOR_VERSION}\n");
        write_hyper(&mut out, &self.hyper);
        let _ = writeln!(out, "phones {}", self.label_order.len());
        out.push_str("vague\n");
        write_unit_block(&mut out, &self.vague_unit);
        for (i, label) in self.label_order.iter().enumerate() {
            let _ = writeln!(out, "phone {i} {label}");
            write_unit_block(&mut out, &self.units[label]);
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tok = Tokens::new(text);
        let version = tok.line(PRIOR_MAGIC).map_err(|_| AudError::format("magic", "not an AUDP prior file"))?;
        if version != [PRIOR_VERSION.to_string().as_str()] {
            return Err(AudError::format("version", format!("unsupported prior version {version:?}")));
        }
        let hyper = parse_hyper(&mut tok)?;
        let (m, dim) = (hyper.n_components, hyper.dim());
        let n = tok.uint("phones")? as usize;
        tok.line("vague")?;
        let vague_unit = parse_unit_block(&mut tok, m, dim)?;
        let mut units = HashMap::with_capacity(n);
        let mut label_order = Vec::with_capacity(n);
        for i in 0..n {
            let rest = tok.indexed("phone", i)?;
            let [label] = rest[..] else {
                return Err(AudError::format("phone", "expected `phone <index> <label>`"));
            };
            if units.contains_key(label) {
                return Err(AudError::format("phone", format!("duplicate phone label {label:?}")));
            }
            units.insert(label.to_string(), parse_unit_block(&mut tok, m, dim)?);
            label_order.push(label.to_string());
        }
        tok.line("end")?;
        Ok(Self { units, vague_unit, label_order, hyper, elbo_trace: Vec::new() })
    }
}

pub fn read_prior(path: impl AsRef<Path>) -> Result<AcousticPrior> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| AudError::io(path, e))?;
    AcousticPrior::from_text(&text)
}

pub fn write_prior(path: impl AsRef<Path>, prior: &AcousticPrior) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, prior.to_text()).map_err(|e| AudError::io(path, e))
}

/// One labeled interval as a frame range of an utterance.
struct Segment {
    utt: usize,
    start: usize,
    end: usize,
    phone: usize,
}

fn collect_segments(
    labeled: &[(FeatureSequence, TimedLabelSequence)],
) -> Result<(Vec<String>, Vec<Segment>)> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut order = Vec::new();
    let mut segments = Vec::new();
    for (u, (f, labels)) in labeled.iter().enumerate() {
        if f.utt_id != labels.utt_id {
            return Err(AudError::Data(format!(
                "features of {} paired with labels of {}",
                f.utt_id, labels.utt_id
            )));
        }
        let shift = f.frame_shift_ms;
        if let Some(last) = labels.entries.last() {
            // Labels running more than a frame past the audio mean the two
            // disagree on the frame rate.
            if last.end_s > f.duration_s() + shift / 1000.0 + 1e-9 {
                return Err(AudError::format(
                    "frame_shift_ms",
                    format!(
                        "labels of {} end at {} s but the features cover {} s at {} ms per frame",
                        f.utt_id,
                        last.end_s,
                        f.duration_s(),
                        shift
                    ),
                ));
            }
        }
        for (iv, entry) in labels.frame_intervals(shift, f.n_frames()).iter().zip(&labels.entries) {
            if iv.len() < 3 {
                return Err(AudError::Data(format!(
                    "utterance {}: interval {:.3}-{:.3} s ({}) spans {} frames, at least 3 are needed",
                    f.utt_id,
                    entry.start_s,
                    entry.end_s,
                    entry.label,
                    iv.len()
                )));
            }
            let phone = *index.entry(iv.label).or_insert_with(|| {
                order.push(iv.label.to_string());
                order.len() - 1
            });
            segments.push(Segment { utt: u, start: iv.start, end: iv.end, phone });
        }
    }
    Ok((order, segments))
}

fn slice(f: &FeatureSequence, start: usize, end: usize) -> Result<FeatureSequence> {
    let d = f.dim();
    FeatureSequence::new(f.utt_id.clone(), d, f.frame_shift_ms, f.data()[start * d..end * d].to_vec())
}

/// Supervised variational Bayes on a labeled corpus.
///
/// `hyper` must carry the vague prior (see [`HyperParams::with_vague_prior`]);
/// `hyper.n_units` is ignored. Components of each state start from the vague
/// prior shifted by the seeded perturbation so that M > 1 mixtures can split.
pub fn fit_informative_prior(
    labeled: &[(FeatureSequence, TimedLabelSequence)],
    hyper: &HyperParams,
    schedule: &Schedule,
) -> Result<AcousticPrior> {
    let vague_unit = UnitPosterior::vague(hyper);
    vague_unit.validate(hyper.n_components, hyper.dim())?;
    if let Some((f, _)) = labeled.iter().find(|(f, _)| f.dim() != hyper.dim()) {
        return Err(AudError::Shape(format!(
            "utterance {} has dimension {}, prior expects {}",
            f.utt_id,
            f.dim(),
            hyper.dim()
        )));
    }
    let (label_order, segments) = collect_segments(labeled)?;
    let n_phones = label_order.len();
    let mut elbo_trace = Vec::new();
    if n_phones == 0 {
        return Ok(AcousticPrior {
            units: HashMap::new(),
            vague_unit,
            label_order,
            hyper: hyper.clone(),
            elbo_trace,
        });
    }

    let pieces = segments
        .iter()
        .map(|s| slice(&labeled[s.utt].0, s.start, s.end).map(|f| (s.phone, f)))
        .collect::<Result<Vec<_>>>()?;

    let mut rng = stream_rng(hyper.seed, STREAM_PRIOR, 0);
    let mut phones: Vec<UnitPosterior> = (0..n_phones)
        .map(|_| {
            let mut u = vague_unit.clone();
            u.perturb(hyper.perturb_scale, &mut rng);
            u
        })
        .collect();

    let (m, dim) = (hyper.n_components, hyper.dim());
    let pass = |phones: &[UnitPosterior]| -> Result<(SuffStats, f64)> {
        let ep = ExpectedParams::from_units(phones, None);
        let parts = pieces
            .par_iter()
            .map(|(p, f)| {
                let mut st = SuffStats::zeros(n_phones, m, dim);
                let ll = forced_unit_estep(&ep, *p, f, &mut st)?;
                Ok((st, ll))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut stats = SuffStats::zeros(n_phones, m, dim);
        let mut ll = 0.0;
        for (st, l) in &parts {
            stats.merge_into(st)?;
            ll += l;
        }
        Ok((stats, ll))
    };
    let bound = |phones: &[UnitPosterior], ll: f64| ll - phones.iter().map(|u| kl_unit(u, &vague_unit)).sum::<f64>();

    let (mut stats, ll) = pass(&phones)?;
    let mut current = bound(&phones, ll);
    elbo_trace.push(current);
    for _ in 0..schedule.max_epochs {
        let mut next = (0..n_phones)
            .map(|p| update_unit(&vague_unit, &stats, p))
            .collect::<Result<Vec<_>>>()?;
        std::mem::swap(&mut phones, &mut next);
        let (next_stats, ll) = pass(&phones)?;
        let value = bound(&phones, ll);
        elbo_trace.push(value);
        stats = next_stats;
        let done = (value - current).abs() <= schedule.rel_tol * current.abs();
        current = value;
        if done {
            break;
        }
    }

    let units = label_order.iter().cloned().zip(phones).collect();
    Ok(AcousticPrior { units, vague_unit, label_order, hyper: hyper.clone(), elbo_trace })
}

/// Prior and initial posterior for training on the target corpus.
///
/// Units `0..P` take the fitted phones (in label order) with uninformative
/// transitions, units `P..K` the vague unit. The initial posterior equals
/// the prior except that units `P..K` are perturbed exactly as
/// [`crate::model::init_posterior`] would.
pub fn seed_from_prior(p: &AcousticPrior, hyper: &HyperParams) -> Result<(PhoneLoopPosterior, PhoneLoopPosterior)> {
    let n_phones = p.n_phones();
    if hyper.n_units < n_phones {
        return Err(AudError::Config(format!(
            "the prior has {n_phones} phones but only {} units were requested; raise K to at least {n_phones}",
            hyper.n_units
        )));
    }
    if hyper.n_components != p.hyper.n_components {
        return Err(AudError::Config(format!(
            "the prior has {} Gaussians per state but M = {} was requested",
            p.hyper.n_components, hyper.n_components
        )));
    }
    let model_hyper = HyperParams {
        prior_mean: p.hyper.prior_mean.clone(),
        prior_kappa: p.hyper.prior_kappa.clone(),
        prior_shape: p.hyper.prior_shape.clone(),
        prior_rate: p.hyper.prior_rate.clone(),
        ..hyper.clone()
    };
    model_hyper.validate()?;
    let mut prior = PhoneLoopPosterior {
        units: Vec::with_capacity(hyper.n_units),
        unit_alpha: vec![hyper.gamma / hyper.n_units as f64; hyper.n_units],
        hyper: model_hyper,
    };
    for label in &p.label_order {
        let mut u = p.units[label].clone();
        u.trans_alpha = p.vague_unit.trans_alpha;
        prior.units.push(u);
    }
    prior.units.resize(hyper.n_units, p.vague_unit.clone());
    prior.validate()?;
    let mut init = prior.clone();
    init.perturb_units_from(n_phones, hyper.seed);
    Ok((prior, init))
}
