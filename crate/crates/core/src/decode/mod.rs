//! Viterbi alignments and segment lattices, plus their text formats.
//!
//! Alignment TSV, one segment per line (frames inclusive):
//!
//! ```text
//! #frame_shift_ms=10
//! utt1	0	5	3
//! utt1	6	11	0
//! ```
//!
//! Lattice text, one block per utterance, scores as negative natural logs
//! with 9 significant digits:
//!
//! ```text
//! LATTICE	utt1	12
//! ARC	0	5	3	4.12345678e1
//! ```

mod lattice;
mod viterbi;

use std::collections::HashMap;
use std::fmt::Write as _;

pub use lattice::emit_lattice;
pub use viterbi::{viterbi_align, viterbi_decode};

use crate::corpus::frame_to_time;
use crate::error::{AudError, Result};

/// One unit occurrence covering frames `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub unit: usize,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn n_frames(&self) -> usize {
        self.end + 1 - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitAlignment {
    pub utt_id: String,
    pub segments: Vec<Segment>,
}

impl UnitAlignment {
    pub fn n_frames(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end + 1)
    }

    pub fn units(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.unit).collect()
    }

    /// Unit id of every frame.
    pub fn frame_units(&self) -> Vec<usize> {
        self.segments.iter().flat_map(|s| std::iter::repeat_n(s.unit, s.n_frames())).collect()
    }

    /// Times (s) of the boundaries between consecutive segments; the
    /// utterance edges are not included.
    pub fn boundary_times(&self, frame_shift_ms: f64) -> Vec<f64> {
        self.segments
            .iter()
            .take(self.segments.len().saturating_sub(1))
            .map(|s| frame_to_time(s.end + 1, frame_shift_ms))
            .collect()
    }

    /// Segments tile `0..n_frames` and each spans at least three frames.
    pub fn validate(&self) -> Result<()> {
        let mut next = 0;
        for s in &self.segments {
            if s.start != next || s.end < s.start {
                return Err(AudError::Data(format!(
                    "utterance {}: segment {}-{} does not start at frame {next}",
                    self.utt_id, s.start, s.end
                )));
            }
            if s.n_frames() < 3 {
                return Err(AudError::Data(format!(
                    "utterance {}: segment {}-{} is shorter than 3 frames",
                    self.utt_id, s.start, s.end
                )));
            }
            next = s.end + 1;
        }
        if self.segments.is_empty() {
            return Err(AudError::Data(format!("utterance {} has no segments", self.utt_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub start: usize,
    pub end: usize,
    pub unit: usize,
    /// Negative log score.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub utt_id: String,
    pub n_frames: usize,
    /// Sorted by `(start, end, unit)`.
    pub arcs: Vec<Arc>,
}

impl Lattice {
    /// Lowest-cost tiling of the utterance by arcs, as an alignment.
    pub fn best_path(&self) -> Option<(UnitAlignment, f64)> {
        let n = self.n_frames;
        let mut cost = vec![f64::INFINITY; n + 1];
        let mut back: Vec<Option<&Arc>> = vec![None; n + 1];
        cost[0] = 0.0;
        // Arcs are sorted by start, and every arc into frame `start` ends
        // before it, so one pass in order settles each prefix.
        for a in &self.arcs {
            let c = cost[a.start] + a.score;
            if c < cost[a.end + 1] {
                cost[a.end + 1] = c;
                back[a.end + 1] = Some(a);
            }
        }
        if !cost[n].is_finite() {
            return None;
        }
        let mut segments = Vec::new();
        let mut at = n;
        while at > 0 {
            let a = back[at]?;
            segments.push(Segment { unit: a.unit, start: a.start, end: a.end });
            at = a.start;
        }
        segments.reverse();
        Some((UnitAlignment { utt_id: self.utt_id.clone(), segments }, cost[n]))
    }
}

pub fn format_alignments(aligns: &[UnitAlignment], header: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in header {
        let _ = writeln!(out, "#{k}={v}");
    }
    for a in aligns {
        for s in &a.segments {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", a.utt_id, s.start, s.end, s.unit);
        }
    }
    out
}

/// Alignments plus the `#key=value` header lines of an alignment file.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentFile {
    pub header: Vec<(String, String)>,
    pub alignments: Vec<UnitAlignment>,
}

impl AlignmentFile {
    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn frame_shift_ms(&self) -> Result<f64> {
        let v = self
            .header_value("frame_shift_ms")
            .ok_or_else(|| AudError::format("frame_shift_ms", "alignment file has no #frame_shift_ms header"))?;
        match v.parse::<f64>() {
            Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
            _ => Err(AudError::format("frame_shift_ms", format!("bad frame shift {v:?}"))),
        }
    }

    pub fn by_utt(&self) -> HashMap<&str, &UnitAlignment> {
        self.alignments.iter().map(|a| (a.utt_id.as_str(), a)).collect()
    }
}

/// Parse an alignment TSV. Rows of one utterance must be consecutive.
pub fn parse_alignments(text: &str) -> Result<AlignmentFile> {
    let mut header = Vec::new();
    let mut out: Vec<UnitAlignment> = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                header.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(AudError::format("alignment", format!("line {line_no}: expected 4 columns, found {}", cols.len())));
        }
        let num = |field: &str, s: &str| {
            s.parse::<usize>()
                .map_err(|_| AudError::format(field, format!("line {line_no}: bad value {s:?}")))
        };
        let seg = Segment { start: num("start_frame", cols[1])?, end: num("end_frame", cols[2])?, unit: num("unit_id", cols[3])? };
        match out.last_mut() {
            Some(a) if a.utt_id == cols[0] => a.segments.push(seg),
            _ => {
                if seen.insert(cols[0].to_string(), ()).is_some() {
                    return Err(AudError::format("alignment", format!("line {line_no}: rows of {} are not contiguous", cols[0])));
                }
                out.push(UnitAlignment { utt_id: cols[0].to_string(), segments: vec![seg] });
            }
        }
    }
    for a in &out {
        a.validate()?;
    }
    Ok(AlignmentFile { header, alignments: out })
}

pub fn format_lattices(lattices: &[Lattice]) -> String {
    let mut out = String::new();
    for l in lattices {
        let _ = writeln!(out, "LATTICE\t{}\t{}", l.utt_id, l.n_frames);
        for a in &l.arcs {
            let _ = writeln!(out, "ARC\t{}\t{}\t{}\t{:.8e}", a.start, a.end, a.unit, a.score);
        }
    }
    out
}

pub fn parse_lattices(text: &str) -> Result<Vec<Lattice>> {
    let mut out: Vec<Lattice> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let bad = |field: &str| AudError::format(field, format!("line {line_no}: malformed {line:?}"));
        match cols[0] {
            "LATTICE" if cols.len() == 3 => out.push(Lattice {
                utt_id: cols[1].to_string(),
                n_frames: cols[2].parse().map_err(|_| bad("n_frames"))?,
                arcs: Vec::new(),
            }),
            "ARC" if cols.len() == 5 => {
                let l = out.last_mut().ok_or_else(|| bad("ARC"))?;
                l.arcs.push(Arc {
                    start: cols[1].parse().map_err(|_| bad("start"))?,
                    end: cols[2].parse().map_err(|_| bad("end"))?,
                    unit: cols[3].parse().map_err(|_| bad("unit_id"))?,
                    score: cols[4].parse().map_err(|_| bad("score"))?,
                });
            }
            _ => return Err(bad("lattice")),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn align() -> UnitAlignment {
        UnitAlignment {
            utt_id: "u".into(),
            segments: vec![
                Segment { unit: 2, start: 0, end: 3 },
                Segment { unit: 0, start: 4, end: 8 },
                Segment { unit: 2, start: 9, end: 11 },
            ],
        }
    }

    #[test]
    fn alignment_text_round_trips() {
        let text = format_alignments(&[align()], &[("frame_shift_ms", "10".into()), ("seed", "7".into())]);
        let back = parse_alignments(&text).unwrap();
        assert_eq!(back.alignments, vec![align()]);
        assert_eq!(back.frame_shift_ms().unwrap(), 10.0);
        assert_eq!(back.header_value("seed"), Some("7"));
    }

    #[test]
    fn boundaries_skip_edges() {
        let b = align().boundary_times(10.0);
        assert_eq!(b.len(), 2);
        assert!((b[0] - 0.04).abs() < 1e-12 && (b[1] - 0.09).abs() < 1e-12);
        assert_eq!(align().frame_units(), vec![2, 2, 2, 2, 0, 0, 0, 0, 0, 2, 2, 2]);
    }

    #[test]
    fn gaps_and_short_segments_are_rejected() {
        assert!(parse_alignments("u\t0\t2\t0\nu\t4\t8\t1\n").is_err());
        assert!(parse_alignments("u\t0\t1\t0\n").is_err());
        assert!(parse_alignments("u\t0\t2\t0\nv\t0\t2\t0\nu\t3\t5\t0\n").is_err());
        assert!(parse_alignments("u\t0\tx\t0\n").is_err());
    }

    #[test]
    fn lattice_text_round_trips_to_nine_digits() {
        let l = Lattice {
            utt_id: "u".into(),
            n_frames: 6,
            arcs: vec![Arc { start: 0, end: 2, unit: 1, score: 12.345678912345 }, Arc { start: 3, end: 5, unit: 0, score: -0.5 }],
        };
        let text = format_lattices(&[l.clone()]);
        assert!(text.starts_with("LATTICE\tu\t6\nARC\t0\t2\t1\t1.23456789e1\n"), "{text}");
        let back = parse_lattices(&text).unwrap();
        assert_eq!(back[0].arcs.len(), 2);
        assert!((back[0].arcs[0].score - 12.3456789).abs() < 1e-9);
        let (best, cost) = back[0].best_path().unwrap();
        assert_eq!(best.units(), vec![1, 0]);
        assert!((cost - (12.3456789 - 0.5)).abs() < 1e-9);
    }
}
