//! Synthetic corpora with known ground truth.
//!
//! The acoustic generator samples from a phone loop with well-separated
//! Gaussian state means and geometric state durations, so the generating
//! unit of every frame is known. The word generator concatenates words of a
//! small random lexicon, so the true word boundaries are known.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::corpus::{FeatureSequence, LabelEntry, TimedLabelSequence};
use crate::error::{AudError, Result};
use crate::model::N_STATES;
use crate::seed::{stream_rng, STREAM_SYNTH};
use crate::wordseg::UnitSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticSpec {
    pub n_units: usize,
    pub dim: usize,
    pub n_utterances: usize,
    /// Utterances are extended unit by unit until they reach this length.
    pub min_frames: usize,
    /// Standard deviation of the state means around the origin.
    pub mean_spread: f64,
    /// Standard deviation of the frames around their state mean.
    pub noise_sd: f64,
    /// Self-loop probability of every state.
    pub stay_prob: f64,
    pub frame_shift_ms: f64,
    /// Seed of the state means; corpora sharing it share their units.
    pub means_seed: u64,
    /// Seed of the unit sequences, durations and noise.
    pub seed: u64,
}

impl Default for AcousticSpec {
    fn default() -> Self {
        Self {
            n_units: 5,
            dim: 3,
            n_utterances: 100,
            min_frames: 60,
            mean_spread: 4.0,
            noise_sd: 1.0,
            stay_prob: 0.5,
            frame_shift_ms: 10.0,
            means_seed: 1,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AcousticCorpus {
    pub features: Vec<FeatureSequence>,
    /// Generating unit of every frame.
    pub frame_units: Vec<Vec<usize>>,
    /// Unit segments as time-aligned labels `p<k>`.
    pub labels: Vec<TimedLabelSequence>,
    /// `means[k][s]`: mean vector of state `s` of unit `k`.
    pub means: Vec<Vec<Vec<f64>>>,
}

impl AcousticCorpus {
    pub fn labeled(&self) -> Vec<(FeatureSequence, TimedLabelSequence)> {
        self.features.iter().cloned().zip(self.labels.iter().cloned()).collect()
    }
}

pub fn acoustic_corpus(spec: &AcousticSpec) -> Result<AcousticCorpus> {
    if spec.n_units == 0 || spec.dim == 0 || !(0.0..1.0).contains(&spec.stay_prob) {
        return Err(AudError::Config(format!("invalid synthetic corpus spec {spec:?}")));
    }
    let mut mrng = stream_rng(spec.means_seed, STREAM_SYNTH, 0);
    let means: Vec<Vec<Vec<f64>>> = (0..spec.n_units)
        .map(|_| {
            (0..N_STATES)
                .map(|_| (0..spec.dim).map(|_| spec.mean_spread * mrng.sample::<f64, _>(StandardNormal)).collect())
                .collect()
        })
        .collect();

    let mut out = AcousticCorpus { features: Vec::new(), frame_units: Vec::new(), labels: Vec::new(), means };
    for u in 0..spec.n_utterances {
        let mut rng = stream_rng(spec.seed, STREAM_SYNTH, u as u64 + 1);
        let utt_id = format!("utt{u:04}");
        let mut data = Vec::new();
        let mut units = Vec::new();
        let mut entries = Vec::new();
        while units.len() < spec.min_frames {
            let k = rng.random_range(0..spec.n_units);
            let start = units.len();
            for s in 0..N_STATES {
                loop {
                    for d in 0..spec.dim {
                        let e: f64 = rng.sample(StandardNormal);
                        data.push(out.means[k][s][d] + spec.noise_sd * e);
                    }
                    units.push(k);
                    if rng.random::<f64>() >= spec.stay_prob {
                        break;
                    }
                }
            }
            let t = |f: usize| f as f64 * spec.frame_shift_ms / 1000.0;
            entries.push(LabelEntry { start_s: t(start), end_s: t(units.len()), label: format!("p{k}") });
        }
        out.features.push(FeatureSequence::new(utt_id.clone(), spec.dim, spec.frame_shift_ms, data)?);
        out.labels.push(TimedLabelSequence { utt_id, entries });
        out.frame_units.push(units);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordSpec {
    pub n_sentences: usize,
    pub lexicon_size: usize,
    pub alphabet_size: usize,
    pub min_word_len: usize,
    pub max_word_len: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub seed: u64,
}

impl Default for WordSpec {
    fn default() -> Self {
        Self {
            n_sentences: 200,
            lexicon_size: 6,
            alphabet_size: 10,
            min_word_len: 2,
            max_word_len: 5,
            min_words: 3,
            max_words: 8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WordCorpus {
    pub sequences: Vec<UnitSequence>,
    /// Unit positions of the internal word boundaries of each sentence.
    pub boundaries: Vec<Vec<usize>>,
    pub lexicon: Vec<Vec<u32>>,
}

pub fn word_corpus(spec: &WordSpec) -> Result<WordCorpus> {
    let ok = spec.lexicon_size > 0
        && spec.alphabet_size > 0
        && (1..=spec.max_word_len).contains(&spec.min_word_len)
        && (1..=spec.max_words).contains(&spec.min_words);
    if !ok {
        return Err(AudError::Config(format!("invalid synthetic word spec {spec:?}")));
    }
    let mut rng = stream_rng(spec.seed, STREAM_SYNTH, u64::MAX);
    let mut lexicon: Vec<Vec<u32>> = Vec::with_capacity(spec.lexicon_size);
    let mut attempts = 0;
    while lexicon.len() < spec.lexicon_size {
        attempts += 1;
        if attempts > 10_000 {
            return Err(AudError::Config("cannot draw a lexicon of distinct words".into()));
        }
        let len = rng.random_range(spec.min_word_len..=spec.max_word_len);
        let w: Vec<u32> = (0..len).map(|_| rng.random_range(0..spec.alphabet_size as u32)).collect();
        if !lexicon.contains(&w) {
            lexicon.push(w);
        }
    }
    let mut sequences = Vec::with_capacity(spec.n_sentences);
    let mut boundaries = Vec::with_capacity(spec.n_sentences);
    for i in 0..spec.n_sentences {
        let n_words = rng.random_range(spec.min_words..=spec.max_words);
        let mut units = Vec::new();
        let mut b = Vec::new();
        for j in 0..n_words {
            if j > 0 {
                b.push(units.len());
            }
            units.extend_from_slice(&lexicon[rng.random_range(0..lexicon.len())]);
        }
        sequences.push(UnitSequence { utt_id: format!("s{i:04}"), units });
        boundaries.push(b);
    }
    Ok(WordCorpus { sequences, boundaries, lexicon })
}
