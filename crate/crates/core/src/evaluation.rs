//! Intrinsic scores: boundary precision/recall/F, normalized mutual
//! information between units and phones, and average unit duration.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use crate::corpus::TimedLabelSequence;
use crate::decode::UnitAlignment;
use crate::error::{AudError, Result};

/// Slack added to the tolerance so that boundaries exactly `tol` apart
/// match despite rounding in the time arithmetic.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Prf {
    /// Rates from counts. Precision is 0 when there are no hypotheses and
    /// recall is 0 when there are no references.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f_score = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { precision, recall, f_score, tp, fp, fn_ }
    }

    /// Pool the counts of two scores.
    pub fn merge(&self, other: &Prf) -> Prf {
        Prf::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

fn check_sorted(name: &str, times: &[f64]) -> Result<()> {
    if let Some(i) = times.windows(2).position(|w| !(w[0] <= w[1])) {
        return Err(AudError::Contract(format!(
            "{name} boundaries are not sorted at position {} ({} then {})",
            i + 1,
            times[i],
            times[i + 1]
        )));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(AudError::Contract(format!("{name} boundary {t} is negative or not finite")));
    }
    Ok(())
}

/// Score hypothesized boundary times (s) against reference times.
///
/// A hypothesis within `tol_ms` of a reference boundary is a hit; each
/// boundary on either side is used at most once. Matching walks both lists
/// in time order and pairs the earliest compatible boundaries, which yields
/// the largest possible number of hits and treats both lists alike, so
/// swapping them swaps precision and recall.
pub fn boundary_prf(reference: &[f64], hypothesis: &[f64], tol_ms: f64) -> Result<Prf> {
    if !(tol_ms >= 0.0) {
        return Err(AudError::Domain(format!("tolerance {tol_ms} ms must be non-negative")));
    }
    check_sorted("reference", reference)?;
    check_sorted("hypothesis", hypothesis)?;
    let tol = tol_ms / 1000.0 + TIME_EPS;
    let (mut i, mut j, mut tp) = (0, 0, 0);
    while i < reference.len() && j < hypothesis.len() {
        let (r, h) = (reference[i], hypothesis[j]);
        if h < r - tol {
            j += 1;
        } else if r < h - tol {
            i += 1;
        } else {
            tp += 1;
            i += 1;
            j += 1;
        }
    }
    Ok(Prf::from_counts(tp, hypothesis.len() - tp, reference.len() - tp))
}

/// Co-occurrence counts of reference labels and hypothesis labels.
#[derive(Debug, Clone)]
pub struct ContingencyTable<R, H> {
    refs: HashMap<R, usize>,
    hyps: HashMap<H, usize>,
    /// `counts[r][h]`, indices in order of first appearance.
    counts: Vec<Vec<u64>>,
    total: u64,
}

impl<R: Eq + Hash + Clone, H: Eq + Hash + Clone> Default for ContingencyTable<R, H> {
    fn default() -> Self {
        Self { refs: HashMap::new(), hyps: HashMap::new(), counts: Vec::new(), total: 0 }
    }
}

impl<R: Eq + Hash + Clone, H: Eq + Hash + Clone> ContingencyTable<R, H> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, r: &R, h: &H) {
        let n_refs = self.refs.len();
        let ri = *self.refs.entry(r.clone()).or_insert(n_refs);
        let n_hyps = self.hyps.len();
        let hi = *self.hyps.entry(h.clone()).or_insert(n_hyps);
        if ri == self.counts.len() {
            self.counts.push(Vec::new());
        }
        let row = &mut self.counts[ri];
        if row.len() <= hi {
            row.resize(hi + 1, 0);
        }
        row[hi] += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `100 · I(H; R) / H(R)`, clamped to [0, 100].
    pub fn nmi(&self) -> Result<f64> {
        if self.total == 0 {
            return Err(AudError::DegenerateReference("no labeled frames to score".into()));
        }
        let n = self.total as f64;
        let n_hyps = self.hyps.len();
        let ref_marg: Vec<f64> = self.counts.iter().map(|row| row.iter().sum::<u64>() as f64).collect();
        let mut hyp_marg = vec![0.0; n_hyps];
        for row in &self.counts {
            for (h, c) in row.iter().enumerate() {
                hyp_marg[h] += *c as f64;
            }
        }
        let h_ref: f64 = ref_marg.iter().filter(|c| **c > 0.0).map(|c| -(c / n) * (c / n).ln()).sum();
        if h_ref <= 0.0 {
            return Err(AudError::DegenerateReference(
                "the reference uses a single label, so its entropy is zero".into(),
            ));
        }
        let mut mi = 0.0;
        for (r, row) in self.counts.iter().enumerate() {
            for (h, &c) in row.iter().enumerate() {
                if c > 0 {
                    let p = c as f64 / n;
                    mi += p * (c as f64 * n / (ref_marg[r] * hyp_marg[h])).ln();
                }
            }
        }
        Ok((100.0 * mi / h_ref).clamp(0.0, 100.0))
    }
}

/// Frame-level NMI (percent) of a hypothesis labeling against a reference.
pub fn nmi<R: Eq + Hash + Clone, H: Eq + Hash + Clone>(reference: &[R], hypothesis: &[H]) -> Result<f64> {
    if reference.len() != hypothesis.len() {
        return Err(AudError::Shape(format!(
            "reference has {} frames, hypothesis {}",
            reference.len(),
            hypothesis.len()
        )));
    }
    if reference.is_empty() {
        return Err(AudError::Shape("cannot score empty label sequences".into()));
    }
    let mut table = ContingencyTable::new();
    for (r, h) in reference.iter().zip(hypothesis) {
        table.add(r, h);
    }
    table.nmi()
}

/// Mean segment duration in seconds.
pub fn avg_unit_duration(aligns: &[UnitAlignment], frame_shift_ms: f64) -> Result<f64> {
    let (n, frames) = aligns
        .iter()
        .flat_map(|a| &a.segments)
        .fold((0usize, 0usize), |(n, f), s| (n + 1, f + s.n_frames()));
    if n == 0 {
        return Err(AudError::Domain("no segments to average".into()));
    }
    Ok(frames as f64 / n as f64 * frame_shift_ms / 1000.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceScore {
    pub utt_id: String,
    pub boundary: Prf,
    /// `None` when the utterance's reference has a single label.
    pub nmi: Option<f64>,
}

/// Corpus-level unit discovery scores.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitReport {
    pub boundary: Prf,
    pub nmi: f64,
    pub avg_unit_duration_s: f64,
    pub n_utterances: usize,
    pub n_frames: u64,
    pub per_utterance: Vec<UtteranceScore>,
}

impl UnitReport {
    /// `metric<TAB>value` rows, optionally followed by one row per utterance.
    pub fn to_tsv(&self, per_utterance: bool) -> String {
        let mut out = String::from("metric\tvalue\n");
        let b = &self.boundary;
        for (k, v) in [
            ("boundary_precision", b.precision),
            ("boundary_recall", b.recall),
            ("boundary_f_score", b.f_score),
            ("nmi", self.nmi),
            ("avg_unit_duration_s", self.avg_unit_duration_s),
        ] {
            let _ = writeln!(out, "{k}\t{v:.6}");
        }
        for (k, v) in [("boundary_tp", b.tp), ("boundary_fp", b.fp), ("boundary_fn", b.fn_), ("utterances", self.n_utterances)] {
            let _ = writeln!(out, "{k}\t{v}");
        }
        let _ = writeln!(out, "frames\t{}", self.n_frames);
        if per_utterance {
            out.push_str("\nutt_id\tprecision\trecall\tf_score\tnmi\n");
            for u in &self.per_utterance {
                let nmi = u.nmi.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
                let _ = writeln!(
                    out,
                    "{}\t{:.6}\t{:.6}\t{:.6}\t{nmi}",
                    u.utt_id, u.boundary.precision, u.boundary.recall, u.boundary.f_score
                );
            }
        }
        out
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let b = &self.boundary;
        format!(
            "utterances: {}\nframes: {}\nboundary P/R/F: {:.2} / {:.2} / {:.2} % (tp {}, fp {}, fn {})\nNMI: {:.2} %\naverage unit duration: {:.3} s\n",
            self.n_utterances,
            self.n_frames,
            100.0 * b.precision,
            100.0 * b.recall,
            100.0 * b.f_score,
            b.tp,
            b.fp,
            b.fn_,
            self.nmi,
            self.avg_unit_duration_s
        )
    }
}

/// Score alignments against reference phone labels. Every alignment needs
/// a reference; frames outside every reference interval are left out of the
/// NMI table.
pub fn evaluate_units(
    aligns: &[UnitAlignment],
    references: &[TimedLabelSequence],
    frame_shift_ms: f64,
    tol_ms: f64,
) -> Result<UnitReport> {
    let by_id: HashMap<&str, &TimedLabelSequence> = references.iter().map(|r| (r.utt_id.as_str(), r)).collect();
    let mut table = ContingencyTable::<String, usize>::new();
    let mut boundary = Prf::from_counts(0, 0, 0);
    let mut per_utterance = Vec::with_capacity(aligns.len());
    for a in aligns {
        let r = by_id
            .get(a.utt_id.as_str())
            .ok_or_else(|| AudError::Data(format!("no reference labels for utterance {}", a.utt_id)))?;
        let score = boundary_prf(&r.boundaries(), &a.boundary_times(frame_shift_ms), tol_ms)?;
        boundary = boundary.merge(&score);
        let units = a.frame_units();
        let labels = r.frame_labels(frame_shift_ms, units.len());
        let mut utt_table = ContingencyTable::<&str, usize>::new();
        for (l, u) in labels.iter().zip(&units) {
            if let Some(l) = l {
                table.add(&l.to_string(), u);
                utt_table.add(l, u);
            }
        }
        per_utterance.push(UtteranceScore { utt_id: a.utt_id.clone(), boundary: score, nmi: utt_table.nmi().ok() });
    }
    Ok(UnitReport {
        boundary,
        nmi: table.nmi()?,
        avg_unit_duration_s: avg_unit_duration(aligns, frame_shift_ms)?,
        n_utterances: aligns.len(),
        n_frames: table.total(),
        per_utterance,
    })
}
