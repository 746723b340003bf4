//! Bigram hierarchical Pitman-Yor word model over unit sequences and its
//! blocked forward-filtering backward-sampling step.

use std::collections::HashMap;

use rand::Rng;

use super::restaurant::{PYRestaurant, WordId};
use super::Segmentation;
use crate::error::{AudError, Result};
use crate::special::log_sum_exp;

/// Context id of the sentence start.
const BOS: WordId = WordId::MAX;

/// Geometric-length, uniform-unit spelling model: the base measure of the
/// unigram restaurant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpellingModel {
    pub alphabet_size: usize,
    pub p_stop: f64,
}

impl SpellingModel {
    pub fn new(alphabet_size: usize, p_stop: f64) -> Result<Self> {
        if alphabet_size == 0 {
            return Err(AudError::Domain("the unit alphabet is empty".into()));
        }
        if !(p_stop > 0.0 && p_stop < 1.0) {
            return Err(AudError::Domain(format!("stop probability {p_stop} must lie in (0, 1)")));
        }
        Ok(Self { alphabet_size, p_stop })
    }

    /// `p_stop · (1 - p_stop)^(len-1) · A^-len`.
    pub fn prob(&self, len: usize) -> f64 {
        self.log_prob(len).exp()
    }

    pub fn log_prob(&self, len: usize) -> f64 {
        let n = len as f64;
        self.p_stop.ln() + (n - 1.0) * (1.0 - self.p_stop).ln() - n * (self.alphabet_size as f64).ln()
    }
}

/// Pitman-Yor parameters of both levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelParams {
    pub d_bigram: f64,
    pub theta_bigram: f64,
    pub d_unigram: f64,
    pub theta_unigram: f64,
}

impl Default for LevelParams {
    fn default() -> Self {
        Self { d_bigram: 0.5, theta_bigram: 1.0, d_unigram: 0.5, theta_unigram: 1.0 }
    }
}

/// Word model plus the current segmentation of every utterance.
#[derive(Debug, Clone)]
pub struct SegmentationState {
    levels: LevelParams,
    spelling: SpellingModel,
    unigram: PYRestaurant,
    bigrams: HashMap<WordId, PYRestaurant>,
    vocab: HashMap<Vec<u32>, WordId>,
    spellings: Vec<Vec<u32>>,
    /// Current segmentation per utterance; `None` while unseated.
    segs: Vec<Option<Segmentation>>,
}

impl SegmentationState {
    pub fn new(levels: LevelParams, spelling: SpellingModel) -> Result<Self> {
        let unigram = PYRestaurant::new(levels.d_unigram, levels.theta_unigram)?;
        PYRestaurant::new(levels.d_bigram, levels.theta_bigram)?;
        Ok(Self {
            levels,
            spelling,
            unigram,
            bigrams: HashMap::new(),
            vocab: HashMap::new(),
            spellings: Vec::new(),
            segs: Vec::new(),
        })
    }

    pub fn spelling(&self) -> &SpellingModel {
        &self.spelling
    }

    pub fn unigram(&self) -> &PYRestaurant {
        &self.unigram
    }

    pub fn vocabulary_size(&self) -> usize {
        self.spellings.len()
    }

    pub fn segmentations(&self) -> impl Iterator<Item = &Segmentation> {
        self.segs.iter().flatten()
    }

    pub fn segmentation(&self, idx: usize) -> Option<&Segmentation> {
        self.segs.get(idx).and_then(|s| s.as_ref())
    }

    fn intern(&mut self, word: &[u32]) -> WordId {
        if let Some(id) = self.vocab.get(word) {
            return *id;
        }
        let id = self.spellings.len() as WordId;
        self.vocab.insert(word.to_vec(), id);
        self.spellings.push(word.to_vec());
        id
    }

    fn unigram_prob(&self, id: Option<WordId>, len: usize) -> f64 {
        let base = self.spelling.prob(len);
        match id {
            Some(w) => self.unigram.predictive(w, base),
            None => self.unigram.predictive_unseen(base),
        }
    }

    /// Predictive probability of `word` after context `prev` (None = start).
    pub fn bigram_prob(&self, prev: Option<&[u32]>, word: &[u32]) -> f64 {
        let id = self.vocab.get(word).copied();
        let p1 = self.unigram_prob(id, word.len());
        let ctx = match prev {
            None => Some(BOS),
            Some(p) => self.vocab.get(p).copied(),
        };
        match (ctx.and_then(|c| self.bigrams.get(&c)), id) {
            (Some(r), Some(w)) => r.predictive(w, p1),
            (Some(r), None) => r.predictive_unseen(p1),
            (None, _) => p1,
        }
    }

    fn add_word<R: Rng>(&mut self, ctx: WordId, word: &[u32], rng: &mut R) -> Result<()> {
        let w = self.intern(word);
        let p1 = self.unigram_prob(Some(w), word.len());
        let levels = self.levels;
        let r = match self.bigrams.entry(ctx) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(PYRestaurant::new(levels.d_bigram, levels.theta_bigram)?),
        };
        if r.add_customer(w, p1, rng) {
            let base = self.spelling.prob(word.len());
            self.unigram.add_customer(w, base, rng);
        }
        Ok(())
    }

    fn remove_word<R: Rng>(&mut self, ctx: WordId, word: &[u32], rng: &mut R) -> Result<()> {
        let w = *self
            .vocab
            .get(word)
            .ok_or_else(|| AudError::InternalState(format!("word {word:?} was never seated")))?;
        let r = self
            .bigrams
            .get_mut(&ctx)
            .ok_or_else(|| AudError::InternalState(format!("no bigram restaurant for context {ctx}")))?;
        let closed = r.remove_customer(w, rng)?;
        if r.is_empty() {
            self.bigrams.remove(&ctx);
        }
        if closed {
            self.unigram.remove_customer(w, rng)?;
        }
        Ok(())
    }

    /// Seat every word of `seg` as utterance `idx`.
    pub fn seat<R: Rng>(&mut self, idx: usize, seg: Segmentation, rng: &mut R) -> Result<()> {
        if self.segs.len() <= idx {
            self.segs.resize(idx + 1, None);
        }
        if self.segs[idx].is_some() {
            return Err(AudError::InternalState(format!("utterance {idx} is already seated")));
        }
        let mut ctx = BOS;
        for word in seg.words() {
            self.add_word(ctx, word, rng)?;
            ctx = self.vocab[word];
        }
        self.segs[idx] = Some(seg);
        Ok(())
    }

    /// Remove the words of utterance `idx` and return its segmentation.
    pub fn unseat<R: Rng>(&mut self, idx: usize, rng: &mut R) -> Result<Segmentation> {
        let seg = self
            .segs
            .get_mut(idx)
            .and_then(Option::take)
            .ok_or_else(|| AudError::InternalState(format!("utterance {idx} is not seated")))?;
        let mut ctx = BOS;
        for word in seg.words() {
            self.remove_word(ctx, word, rng)?;
            ctx = self.vocab[word];
        }
        Ok(seg)
    }

    /// Customers per (context, word) pair over all bigram restaurants, with
    /// words spelled out; the sentence start context is `None`.
    pub fn bigram_counts(&self) -> Vec<(Option<Vec<u32>>, Vec<u32>, u64)> {
        let spell = |w: WordId| self.spellings[w as usize].clone();
        let mut out: Vec<_> = self
            .bigrams
            .iter()
            .flat_map(|(ctx, r)| {
                let ctx = (*ctx != BOS).then(|| spell(*ctx));
                r.customer_counts().into_iter().map(move |(w, c)| (ctx.clone(), spell(w), c))
            })
            .collect();
        out.sort();
        out
    }

    /// Recount every restaurant from the seated segmentations and compare
    /// with the incremental state.
    pub fn audit(&self) -> Result<()> {
        self.unigram.check()?;
        let mut bigram_counts: HashMap<(WordId, WordId), u64> = HashMap::new();
        for seg in self.segmentations() {
            let mut ctx = BOS;
            for word in seg.words() {
                let w = *self
                    .vocab
                    .get(word)
                    .ok_or_else(|| AudError::InternalState(format!("word {word:?} is not in the vocabulary")))?;
                *bigram_counts.entry((ctx, w)).or_default() += 1;
                ctx = w;
            }
        }
        let mut seated: HashMap<(WordId, WordId), u64> = HashMap::new();
        let mut unigram_from_tables: HashMap<WordId, u64> = HashMap::new();
        for (ctx, r) in &self.bigrams {
            r.check()?;
            for (w, c) in r.customer_counts() {
                seated.insert((*ctx, w), c);
            }
            for (w, t) in r.table_counts() {
                *unigram_from_tables.entry(w).or_default() += t;
            }
        }
        if seated != bigram_counts {
            return Err(AudError::InternalState("bigram customers differ from the segmentations".into()));
        }
        if self.unigram.customer_counts() != unigram_from_tables {
            return Err(AudError::InternalState("unigram customers differ from the bigram tables".into()));
        }
        Ok(())
    }

    fn check_units(&self, units: &[u32]) -> Result<()> {
        if units.is_empty() {
            return Err(AudError::Domain("cannot segment an empty unit sequence".into()));
        }
        if let Some(u) = units.iter().find(|u| **u as usize >= self.spelling.alphabet_size) {
            return Err(AudError::Domain(format!(
                "unit {u} is outside the alphabet of size {}",
                self.spelling.alphabet_size
            )));
        }
        Ok(())
    }

    /// Log probabilities of every word/predecessor pair of a sentence under
    /// the current (fixed) predictive distributions, raised to `beta`.
    /// `lp[t][k][j]`: word `units[t-k..t]` after the word of length `j`
    /// ending at `t-k` (`j = 0` is the sentence start).
    fn word_scores(&self, units: &[u32], max_len: usize, beta: f64) -> Vec<Vec<Vec<f64>>> {
        let n = units.len();
        let mut lp = vec![Vec::new(); n + 1];
        for t in 1..=n {
            let kmax = max_len.min(t);
            lp[t] = vec![Vec::new(); kmax + 1];
            for k in 1..=kmax {
                let s = t - k;
                let word = &units[s..t];
                lp[t][k] = if s == 0 {
                    vec![beta * self.bigram_prob(None, word).ln()]
                } else {
                    let mut row = vec![f64::NEG_INFINITY; max_len.min(s) + 1];
                    for j in 1..row.len() {
                        row[j] = beta * self.bigram_prob(Some(&units[s - j..s]), word).ln();
                    }
                    row
                };
            }
        }
        lp
    }

    /// Forward messages: `alpha[t][k]` is the log probability of the prefix
    /// `units[..t]` with last word of length `k`.
    fn forward(lp: &[Vec<Vec<f64>>], n: usize) -> Vec<Vec<f64>> {
        let mut alpha: Vec<Vec<f64>> = vec![vec![0.0]; n + 1];
        for t in 1..=n {
            let kmax = lp[t].len() - 1;
            let mut row = vec![f64::NEG_INFINITY; kmax + 1];
            for k in 1..=kmax {
                let s = t - k;
                let terms: Vec<f64> = alpha[s].iter().zip(&lp[t][k]).map(|(a, l)| a + l).collect();
                row[k] = log_sum_exp(&terms);
            }
            alpha[t] = row;
        }
        alpha
    }

    /// Log of the total probability of all segmentations of `units` with
    /// words of at most `max_len` units.
    pub fn log_normalizer(&self, units: &[u32], max_len: usize) -> Result<f64> {
        self.check_units(units)?;
        let lp = self.word_scores(units, max_len.max(1), 1.0);
        let alpha = Self::forward(&lp, units.len());
        Ok(log_sum_exp(&alpha[units.len()][1..]))
    }

    /// Log probability of one segmentation under the current predictive
    /// distributions (the target the sampler draws from).
    pub fn segmentation_log_prob(&self, seg: &Segmentation) -> f64 {
        let mut prev: Option<&[u32]> = None;
        let mut total = 0.0;
        for word in seg.words() {
            total += self.bigram_prob(prev, word).ln();
            prev = Some(word);
        }
        total
    }

    /// Draw a segmentation of `units` given the current state, with word
    /// probabilities raised to `beta` (1 for exact sampling).
    pub fn sample_segmentation<R: Rng>(
        &self,
        utt_id: &str,
        units: &[u32],
        max_len: usize,
        beta: f64,
        rng: &mut R,
    ) -> Result<Segmentation> {
        self.check_units(units)?;
        if max_len == 0 {
            return Err(AudError::Config("maximum word length must be at least 1".into()));
        }
        let n = units.len();
        let lp = self.word_scores(units, max_len, beta);
        let alpha = Self::forward(&lp, n);
        let mut lengths = Vec::new();
        let mut t = n;
        let mut weights: Vec<f64> = alpha[n].clone();
        weights[0] = f64::NEG_INFINITY;
        loop {
            let k = sample_log_weights(&weights, rng)
                .ok_or_else(|| AudError::inference(utt_id, "segmentation lattice has no mass"))?;
            lengths.push(k);
            let s = t - k;
            if s == 0 {
                break;
            }
            // Predecessor length j given the chosen word.
            weights = alpha[s].iter().zip(&lp[t][k]).map(|(a, l)| a + l).collect();
            t = s;
        }
        lengths.reverse();
        Segmentation::new(utt_id, units.to_vec(), lengths)
    }
}

/// Index drawn in proportion to `exp(w)`.
fn sample_log_weights<R: Rng>(w: &[f64], rng: &mut R) -> Option<usize> {
    let mx = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return None;
    }
    let probs: Vec<f64> = w.iter().map(|x| (x - mx).exp()).collect();
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last = Some(i);
            if u < *p {
                return Some(i);
            }
            u -= p;
        }
    }
    last
}
