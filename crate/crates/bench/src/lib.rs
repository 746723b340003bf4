//! Shared fixtures for the benchmarks.

use aud_core::synthetic::{acoustic_corpus, word_corpus, AcousticCorpus, AcousticSpec, WordCorpus, WordSpec};
use aud_core::{init_posterior, DataSummary, HyperParams, PhoneLoopPosterior};

pub fn acoustic(n_utterances: usize) -> AcousticCorpus {
    acoustic_corpus(&AcousticSpec { n_utterances, min_frames: 200, dim: 13, ..Default::default() })
        .expect("valid synthetic spec")
}

pub fn model(corpus: &AcousticCorpus, n_units: usize, n_components: usize) -> PhoneLoopPosterior {
    let summary = DataSummary::from_corpus(&corpus.features).expect("non-empty corpus");
    let hyper = HyperParams { n_units, n_components, ..Default::default() };
    init_posterior(&hyper, &summary, 1).expect("valid hyperparameters")
}

pub fn words(n_sentences: usize) -> WordCorpus {
    word_corpus(&WordSpec { n_sentences, ..Default::default() }).expect("valid synthetic spec")
}
