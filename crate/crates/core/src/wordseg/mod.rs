//! Word segmentation of unit sequences with a bigram hierarchical
//! Pitman-Yor model and a unigram spelling model, trained by blocked Gibbs
//! sampling.
//!
//! Segmentation text, one utterance per line, words separated by spaces and
//! units within a word by commas:
//!
//! ```text
//! utt1	3,7 2 9,9,4
//! ```

mod gibbs;
mod restaurant;
mod state;

use std::collections::HashMap;
use std::fmt::Write as _;

pub use gibbs::{anneal_exponent, gibbs_segment, gibbs_segment_with_observer, GibbsParams};
pub use restaurant::{crp_predictive, PYRestaurant, WordId};
pub use state::{LevelParams, SegmentationState, SpellingModel};

use crate::corpus::{frame_to_time, TimedLabelSequence};
use crate::decode::UnitAlignment;
use crate::error::{AudError, Result};
use crate::evaluation::{boundary_prf, Prf};

/// A unit sequence split into words, stored as word lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub utt_id: String,
    pub units: Vec<u32>,
    pub word_lengths: Vec<usize>,
}

impl Segmentation {
    pub fn new(utt_id: impl Into<String>, units: Vec<u32>, word_lengths: Vec<usize>) -> Result<Self> {
        let utt_id = utt_id.into();
        if word_lengths.contains(&0) {
            return Err(AudError::Data(format!("utterance {utt_id}: empty word in segmentation")));
        }
        let total: usize = word_lengths.iter().sum();
        if total != units.len() || units.is_empty() {
            return Err(AudError::Shape(format!(
                "utterance {utt_id}: words cover {total} units, the sequence has {}",
                units.len()
            )));
        }
        Ok(Self { utt_id, units, word_lengths })
    }

    /// The whole sequence as one word.
    pub fn single_word(utt_id: impl Into<String>, units: Vec<u32>) -> Result<Self> {
        let n = units.len();
        Self::new(utt_id, units, vec![n])
    }

    pub fn n_words(&self) -> usize {
        self.word_lengths.len()
    }

    pub fn words(&self) -> impl Iterator<Item = &[u32]> {
        let mut start = 0;
        self.word_lengths.iter().map(move |&l| {
            let w = &self.units[start..start + l];
            start += l;
            w
        })
    }

    /// Unit positions after which a word ends, excluding the last unit.
    pub fn boundary_positions(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.word_lengths.len().saturating_sub(1));
        let mut pos = 0;
        for l in &self.word_lengths[..self.word_lengths.len() - 1] {
            pos += l;
            out.push(pos);
        }
        out
    }
}

/// Unit sequence of one utterance, the input of the segmenter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitSequence {
    pub utt_id: String,
    pub units: Vec<u32>,
}

impl From<&UnitAlignment> for UnitSequence {
    fn from(a: &UnitAlignment) -> Self {
        Self { utt_id: a.utt_id.clone(), units: a.segments.iter().map(|s| s.unit as u32).collect() }
    }
}

/// Times (s) of the internal word boundaries: the end of each word's last
/// unit segment.
pub fn word_boundaries_to_times(seg: &Segmentation, align: &UnitAlignment, frame_shift_ms: f64) -> Result<Vec<f64>> {
    if seg.units.len() != align.segments.len() {
        return Err(AudError::Shape(format!(
            "utterance {}: segmentation has {} units but the alignment has {} segments",
            seg.utt_id,
            seg.units.len(),
            align.segments.len()
        )));
    }
    Ok(seg
        .boundary_positions()
        .iter()
        .map(|&p| frame_to_time(align.segments[p - 1].end + 1, frame_shift_ms))
        .collect())
}

pub fn format_segmentations(segs: &[Segmentation], header: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in header {
        let _ = writeln!(out, "#{k}={v}");
    }
    for s in segs {
        let words: Vec<String> = s
            .words()
            .map(|w| w.iter().map(u32::to_string).collect::<Vec<_>>().join(","))
            .collect();
        let _ = writeln!(out, "{}\t{}", s.utt_id, words.join(" "));
    }
    out
}

pub fn parse_segmentations(text: &str) -> Result<Vec<Segmentation>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| AudError::format("segmentation", format!("line {}: {msg}", i + 1));
        let (utt, rest) = line.split_once('\t').ok_or_else(|| bad("expected utt_id<TAB>words"))?;
        let mut units = Vec::new();
        let mut lengths = Vec::new();
        for word in rest.split_whitespace() {
            let before = units.len();
            for u in word.split(',') {
                units.push(u.parse::<u32>().map_err(|_| bad(&format!("bad unit id {u:?}")))?);
            }
            lengths.push(units.len() - before);
        }
        out.push(Segmentation::new(utt, units, lengths)?);
    }
    Ok(out)
}

/// Corpus-level word boundary scores.
#[derive(Debug, Clone, PartialEq)]
pub struct WordReport {
    pub boundary: Prf,
    pub n_utterances: usize,
    pub tol_ms: f64,
    pub per_utterance: Vec<(String, Prf)>,
}

impl WordReport {
    pub fn to_tsv(&self, per_utterance: bool) -> String {
        let b = &self.boundary;
        let mut out = String::from("metric\tvalue\n");
        for (k, v) in [("boundary_precision", b.precision), ("boundary_recall", b.recall), ("boundary_f_score", b.f_score)] {
            let _ = writeln!(out, "{k}\t{v:.6}");
        }
        for (k, v) in [("boundary_tp", b.tp), ("boundary_fp", b.fp), ("boundary_fn", b.fn_), ("utterances", self.n_utterances)] {
            let _ = writeln!(out, "{k}\t{v}");
        }
        let _ = writeln!(out, "tol_ms\t{}", self.tol_ms);
        if per_utterance {
            out.push_str("\nutt_id\tprecision\trecall\tf_score\n");
            for (u, p) in &self.per_utterance {
                let _ = writeln!(out, "{u}\t{:.6}\t{:.6}\t{:.6}", p.precision, p.recall, p.f_score);
            }
        }
        out
    }
}

/// Score word boundaries of segmented utterances against reference word
/// intervals.
pub fn evaluate_words(
    segs: &[Segmentation],
    aligns: &[UnitAlignment],
    references: &[TimedLabelSequence],
    frame_shift_ms: f64,
    tol_ms: f64,
) -> Result<WordReport> {
    let align_by: HashMap<&str, &UnitAlignment> = aligns.iter().map(|a| (a.utt_id.as_str(), a)).collect();
    let ref_by: HashMap<&str, &TimedLabelSequence> = references.iter().map(|r| (r.utt_id.as_str(), r)).collect();
    let mut total = Prf::from_counts(0, 0, 0);
    let mut per_utterance = Vec::with_capacity(segs.len());
    for s in segs {
        let a = align_by
            .get(s.utt_id.as_str())
            .ok_or_else(|| AudError::Data(format!("no alignment for utterance {}", s.utt_id)))?;
        let r = ref_by
            .get(s.utt_id.as_str())
            .ok_or_else(|| AudError::Data(format!("no reference words for utterance {}", s.utt_id)))?;
        let hyp = word_boundaries_to_times(s, a, frame_shift_ms)?;
        let p = boundary_prf(&r.boundaries(), &hyp, tol_ms)?;
        total = total.merge(&p);
        per_utterance.push((s.utt_id.clone(), p));
    }
    Ok(WordReport { boundary: total, n_utterances: segs.len(), tol_ms, per_utterance })
}
