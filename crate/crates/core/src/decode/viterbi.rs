use super::{Segment, UnitAlignment};
use crate::corpus::FeatureSequence;
use crate::error::{AudError, Result};
use crate::model::{ExpectedParams, PhoneLoopPosterior, ADVANCE, N_STATES, SELF_LOOP};

const NEG_INF: f64 = f64::NEG_INFINITY;
const FROM_SELF: i32 = -1;
const FROM_PREV_STATE: i32 = -2;

/// Best alignment and its log score under the expected log-parameters.
pub fn viterbi_decode(ep: &ExpectedParams, f: &FeatureSequence) -> Result<(UnitAlignment, f64)> {
    if f.n_frames() < N_STATES {
        return Err(AudError::inference(&f.utt_id, format!("{} frames cannot cover one unit", f.n_frames())));
    }
    let sc = ep.frame_scores(f)?;
    let (t_len, k_len) = (sc.n_frames, ep.n_units);
    let s_len = k_len * N_STATES;
    let lt = &ep.log_trans;
    let lu = &ep.log_unit;

    let mut delta = vec![NEG_INF; s_len];
    let mut next = vec![NEG_INF; s_len];
    // Backpointers: FROM_SELF, FROM_PREV_STATE, or the unit that was left
    // just before entering state 0.
    let mut bp = vec![FROM_SELF; t_len * s_len];
    for k in 0..k_len {
        delta[k * N_STATES] = lu[k] + sc.emit(0, k * N_STATES);
    }
    for t in 1..t_len {
        let (mut exit_val, mut exit_unit) = (NEG_INF, 0usize);
        for j in 0..k_len {
            let v = delta[j * N_STATES + 2] + lt[j][2][ADVANCE];
            if v > exit_val {
                (exit_val, exit_unit) = (v, j);
            }
        }
        let row = &mut bp[t * s_len..(t + 1) * s_len];
        for k in 0..k_len {
            let b = k * N_STATES;
            for s in 0..N_STATES {
                let mut best = delta[b + s] + lt[k][s][SELF_LOOP];
                let mut from = FROM_SELF;
                let other = if s == 0 {
                    exit_val + lu[k]
                } else {
                    delta[b + s - 1] + lt[k][s - 1][ADVANCE]
                };
                if other > best {
                    best = other;
                    from = if s == 0 { exit_unit as i32 } else { FROM_PREV_STATE };
                }
                next[b + s] = best + sc.emit(t, b + s);
                row[b + s] = from;
            }
        }
        std::mem::swap(&mut delta, &mut next);
    }

    let (mut score, mut unit) = (NEG_INF, 0usize);
    for k in 0..k_len {
        let v = delta[k * N_STATES + 2] + lt[k][2][ADVANCE];
        if v > score {
            (score, unit) = (v, k);
        }
    }
    if !score.is_finite() {
        return Err(AudError::inference(&f.utt_id, "no valid unit path"));
    }

    let mut segments = Vec::new();
    let mut state = unit * N_STATES + 2;
    let mut end = t_len - 1;
    for t in (1..t_len).rev() {
        match bp[t * s_len + state] {
            FROM_SELF => {}
            FROM_PREV_STATE => state -= 1,
            j => {
                segments.push(Segment { unit: state / N_STATES, start: t, end });
                end = t - 1;
                state = j as usize * N_STATES + 2;
            }
        }
    }
    debug_assert_eq!(state % N_STATES, 0);
    segments.push(Segment { unit: state / N_STATES, start: 0, end });
    segments.reverse();
    Ok((UnitAlignment { utt_id: f.utt_id.clone(), segments }, score))
}

/// 1-best unit alignment of one utterance.
pub fn viterbi_align(post: &PhoneLoopPosterior, f: &FeatureSequence) -> Result<UnitAlignment> {
    viterbi_decode(&ExpectedParams::new(post), f).map(|(a, _)| a)
}
