//! Segment lattices.
//!
//! A segment `(start, end, k)` scores `w = E[ln w_k]` plus the best path
//! through unit `k`'s three states over frames `start..=end`, including the
//! final exit arc. Summing `w` over a tiling of the utterance gives the score
//! of the corresponding best state path, so prefix/suffix maxima over
//! segments reproduce the Viterbi score and let each segment be pruned
//! against the 1-best.

use super::viterbi::viterbi_decode;
use super::{Arc, Lattice};
use crate::corpus::FeatureSequence;
use crate::error::{AudError, Result};
use crate::model::{ExpectedParams, FrameScores, ADVANCE, N_STATES, SELF_LOOP};

const NEG_INF: f64 = f64::NEG_INFINITY;

/// Call `visit(end, k, w)` for every segment starting at `start` that spans
/// at least three frames.
fn segments_from(ep: &ExpectedParams, sc: &FrameScores, start: usize, mut visit: impl FnMut(usize, usize, f64)) {
    let t_len = sc.n_frames;
    for k in 0..ep.n_units {
        let b = k * N_STATES;
        let lt = &ep.log_trans[k];
        let mut v = [sc.emit(start, b), NEG_INF, NEG_INF];
        for end in start + 1..t_len {
            let e = |s: usize| sc.emit(end, b + s);
            v = [
                v[0] + lt[0][SELF_LOOP] + e(0),
                (v[1] + lt[1][SELF_LOOP]).max(v[0] + lt[0][ADVANCE]) + e(1),
                (v[2] + lt[2][SELF_LOOP]).max(v[1] + lt[1][ADVANCE]) + e(2),
            ];
            if end >= start + 2 {
                visit(end, k, ep.log_unit[k] + v[2] + lt[2][ADVANCE]);
            }
        }
    }
}

/// Lattice of every segment lying on some path within `beam` (natural log
/// units) of the best path. Arc scores are `-w`, so the scores along a path
/// sum to minus its log score.
pub fn emit_lattice(ep: &ExpectedParams, f: &FeatureSequence, beam: f64) -> Result<Lattice> {
    if !(beam > 0.0) {
        return Err(AudError::Config(format!("lattice beam must be positive, got {beam}")));
    }
    let (best_align, _) = viterbi_decode(ep, f)?;
    let sc = ep.frame_scores(f)?;
    let t_len = sc.n_frames;

    // prefix[i]: best score of frames 0..i ending with an exit; suffix[i]:
    // best score of frames i.. starting with an entry.
    let mut prefix = vec![NEG_INF; t_len + 1];
    prefix[0] = 0.0;
    for s in 0..t_len {
        let p = prefix[s];
        if p == NEG_INF {
            continue;
        }
        segments_from(ep, &sc, s, |e, _, w| prefix[e + 1] = prefix[e + 1].max(p + w));
    }
    let mut suffix = vec![NEG_INF; t_len + 1];
    suffix[t_len] = 0.0;
    for s in (0..t_len).rev() {
        let mut acc = NEG_INF;
        segments_from(ep, &sc, s, |e, _, w| acc = acc.max(w + suffix[e + 1]));
        suffix[s] = acc;
    }
    let best = prefix[t_len];
    if !best.is_finite() {
        return Err(AudError::inference(&f.utt_id, "no valid unit path"));
    }

    let mut arcs = Vec::new();
    for s in 0..t_len {
        if prefix[s] == NEG_INF {
            continue;
        }
        segments_from(ep, &sc, s, |e, k, w| {
            let on_best = best_align.segments.iter().any(|g| g.start == s && g.end == e && g.unit == k);
            let total = prefix[s] + w + suffix[e + 1];
            if on_best || (total.is_finite() && total >= best - beam) {
                arcs.push(Arc { start: s, end: e, unit: k, score: -w });
            }
        });
    }
    // Within a start frame segments come out unit by unit; order by end.
    arcs.sort_by_key(|a| (a.start, a.end, a.unit));
    Ok(Lattice { utt_id: f.utt_id.clone(), n_frames: t_len, arcs })
}
