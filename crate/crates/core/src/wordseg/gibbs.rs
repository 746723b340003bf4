use rand::seq::SliceRandom;

use super::state::{LevelParams, SegmentationState, SpellingModel};
use super::{Segmentation, UnitSequence};
use crate::error::{AudError, Result};
use crate::seed::{stream_rng, STREAM_WORDSEG};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsParams {
    pub levels: LevelParams,
    pub p_stop: f64,
    pub max_word_len: usize,
    pub sweeps: usize,
    pub seed: u64,
    /// Temper word probabilities, cooling from temperature 10 to 1.
    pub anneal: bool,
    /// Unit alphabet size of the spelling model; `None` uses the largest
    /// unit id in the corpus plus one.
    pub alphabet_size: Option<usize>,
}

impl Default for GibbsParams {
    fn default() -> Self {
        Self {
            levels: LevelParams::default(),
            p_stop: 0.5,
            max_word_len: 10,
            sweeps: 100,
            seed: 0,
            anneal: false,
            alphabet_size: None,
        }
    }
}

/// Number of temperature stages of the annealing schedule.
const ANNEAL_STAGES: usize = 10;

/// Exponent applied to word probabilities in sweep `i` (0-based) of `n`:
/// the sweeps are split into ten equal stages run at temperatures
/// 10, 9, ..., 1, and the exponent is the inverse temperature.
pub fn anneal_exponent(i: usize, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let stage = (i.min(n - 1) * ANNEAL_STAGES / n) as f64;
    1.0 / (ANNEAL_STAGES as f64 - stage)
}

/// Segment every sequence of `corpus`.
pub fn gibbs_segment(corpus: &[UnitSequence], params: &GibbsParams) -> Result<(Vec<Segmentation>, SegmentationState)> {
    gibbs_segment_with_observer(corpus, params, |_, _| Ok(()))
}

/// [`gibbs_segment`] calling `observer(sweep, state)` after every sweep
/// (sweep numbers start at 1).
pub fn gibbs_segment_with_observer<F>(
    corpus: &[UnitSequence],
    params: &GibbsParams,
    mut observer: F,
) -> Result<(Vec<Segmentation>, SegmentationState)>
where
    F: FnMut(usize, &SegmentationState) -> Result<()>,
{
    if corpus.is_empty() {
        return Err(AudError::Data("nothing to segment: the corpus is empty".into()));
    }
    if let Some(u) = corpus.iter().find(|u| u.units.is_empty()) {
        return Err(AudError::Data(format!("utterance {} has no units", u.utt_id)));
    }
    if params.max_word_len == 0 {
        return Err(AudError::Config("maximum word length must be at least 1".into()));
    }
    let observed = corpus.iter().flat_map(|u| &u.units).max().map_or(0, |m| *m as usize + 1);
    let alphabet = params.alphabet_size.unwrap_or(observed);
    if alphabet < observed {
        return Err(AudError::Config(format!(
            "alphabet size {alphabet} is smaller than the largest unit id {}",
            observed - 1
        )));
    }
    let spelling = SpellingModel::new(alphabet, params.p_stop)?;
    let mut state = SegmentationState::new(params.levels, spelling)?;
    let mut rng = stream_rng(params.seed, STREAM_WORDSEG, 0);

    for (i, u) in corpus.iter().enumerate() {
        state.seat(i, Segmentation::single_word(&u.utt_id, u.units.clone())?, &mut rng)?;
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    for sweep in 0..params.sweeps {
        let beta = if params.anneal { anneal_exponent(sweep, params.sweeps) } else { 1.0 };
        order.shuffle(&mut rng);
        for &i in &order {
            let u = &corpus[i];
            state.unseat(i, &mut rng)?;
            let seg = state
                .sample_segmentation(&u.utt_id, &u.units, params.max_word_len, beta, &mut rng)
                .map_err(|e| e.for_utterance(&u.utt_id))?;
            state.seat(i, seg, &mut rng)?;
        }
        observer(sweep + 1, &state)?;
    }
    let segs = (0..corpus.len())
        .map(|i| state.segmentation(i).cloned().expect("every utterance is seated between sweeps"))
        .collect();
    Ok((segs, state))
}
