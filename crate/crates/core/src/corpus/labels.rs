use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{AudError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabelEntry {
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

/// Time-aligned labels of one utterance, sorted and non-overlapping.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedLabelSequence {
    pub utt_id: String,
    pub entries: Vec<LabelEntry>,
}

/// A labeled interval converted to the half-open frame range `start..end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameInterval<'a> {
    pub start: usize,
    pub end: usize,
    pub label: &'a str,
}

impl FrameInterval<'_> {
    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TimedLabelSequence {
    /// Internal boundary times: every interval edge except the utterance
    /// start and end.
    pub fn boundaries(&self) -> Vec<f64> {
        let (Some(first), Some(last)) = (self.entries.first(), self.entries.last()) else {
            return Vec::new();
        };
        let (lo, hi) = (first.start_s, last.end_s);
        let mut out: Vec<f64> = self
            .entries
            .iter()
            .flat_map(|e| [e.start_s, e.end_s])
            .filter(|&t| t > lo && t < hi)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        out
    }

    /// Convert intervals to frame ranges. A frame straddling a boundary
    /// belongs to the earlier interval; ranges are clipped to `n_frames`
    /// and may come out empty.
    pub fn frame_intervals(&self, frame_shift_ms: f64, n_frames: usize) -> Vec<FrameInterval<'_>> {
        let mut next_free = 0usize;
        self.entries
            .iter()
            .map(|e| {
                let start = super::time_to_frame(e.start_s, frame_shift_ms)
                    .max(next_free)
                    .min(n_frames);
                let end = ((e.end_s * 1000.0 / frame_shift_ms) - 1e-6).ceil().max(0.0) as usize;
                let end = end.clamp(start, n_frames);
                next_free = end;
                FrameInterval { start, end, label: &e.label }
            })
            .collect()
    }

    /// Per-frame label, `None` for frames outside every interval.
    pub fn frame_labels(&self, frame_shift_ms: f64, n_frames: usize) -> Vec<Option<&str>> {
        let mut out = vec![None; n_frames];
        for iv in self.frame_intervals(frame_shift_ms, n_frames) {
            for slot in &mut out[iv.start..iv.end] {
                *slot = Some(iv.label);
            }
        }
        out
    }
}

struct Row {
    line: usize,
    entry: LabelEntry,
}

pub fn parse_labels(text: &str) -> Result<Vec<TimedLabelSequence>> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Row>> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 4 {
            return Err(AudError::format(
                format!("labels line {line}"),
                format!("expected 4 tab-separated columns, got {}", cols.len()),
            ));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| AudError::format(format!("labels line {line}"), format!("bad {what} {s:?}")))
        };
        let (utt, start_s, end_s, label) = (cols[0], parse(cols[1], "start")?, parse(cols[2], "end")?, cols[3]);
        if start_s < 0.0 {
            return Err(AudError::Data(format!("{utt} line {line}: negative start time {start_s}")));
        }
        if end_s <= start_s {
            return Err(AudError::Data(format!(
                "{utt} line {line}: end {end_s} is not after start {start_s}"
            )));
        }
        if label.trim().is_empty() {
            return Err(AudError::Data(format!("{utt} line {line}: empty label")));
        }
        if !groups.contains_key(utt) {
            order.push(utt.to_string());
        }
        groups.entry(utt.to_string()).or_default().push(Row {
            line,
            entry: LabelEntry { start_s, end_s, label: label.to_string() },
        });
    }
    order
        .into_iter()
        .map(|utt| {
            let mut rows = groups.remove(&utt).unwrap_or_default();
            rows.sort_by(|a, b| a.entry.start_s.total_cmp(&b.entry.start_s));
            for w in rows.windows(2) {
                if w[1].entry.start_s < w[0].entry.end_s {
                    return Err(AudError::Data(format!(
                        "{utt} line {}: interval [{}, {}] overlaps [{}, {}] from line {}",
                        w[1].line,
                        w[1].entry.start_s,
                        w[1].entry.end_s,
                        w[0].entry.start_s,
                        w[0].entry.end_s,
                        w[0].line
                    )));
                }
            }
            Ok(TimedLabelSequence {
                utt_id: utt,
                entries: rows.into_iter().map(|r| r.entry).collect(),
            })
        })
        .collect()
}

/// Load a label TSV (`utt_id<TAB>start_s<TAB>end_s<TAB>label`), grouped by
/// utterance in first-occurrence order and sorted by start time.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<TimedLabelSequence>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| AudError::io(path, e))?;
    parse_labels(&text)
}
