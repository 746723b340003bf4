use aud_core::corpus::{parse_labels, TimedLabelSequence};
use aud_core::inference::{train, update_normal_gamma, Schedule};
use aud_core::model::{init_posterior, vague_prior};
use aud_core::prior::{fit_informative_prior, seed_from_prior, AcousticPrior};
use aud_core::{AudError, DataSummary, FeatureSequence, HyperParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hyper(m: usize, dim: usize) -> HyperParams {
    let summary = DataSummary { mean: vec![0.0; dim], variance: vec![1.0; dim] };
    HyperParams { n_units: 4, n_components: m, seed: 5, ..Default::default() }
        .with_vague_prior(&summary)
        .unwrap()
}

fn labels(utt: &str, rows: &[(f64, f64, &str)]) -> TimedLabelSequence {
    let text: String = rows.iter().map(|(s, e, l)| format!("{utt}\t{s}\t{e}\t{l}\n")).collect();
    parse_labels(&text).unwrap().remove(0)
}

/// Utterance of `values.len()` one-dimensional frames at 10 ms.
fn feats(utt: &str, values: &[f64]) -> FeatureSequence {
    FeatureSequence::new(utt, 1, 10.0, values.to_vec()).unwrap()
}

#[test]
fn empty_corpus_gives_only_the_vague_unit() {
    let h = hyper(2, 3);
    let p = fit_informative_prior(&[], &h, &Schedule::default()).unwrap();
    assert_eq!(p.n_phones(), 0);
    assert!(p.units.is_empty());
    assert_eq!(p.vague_unit, aud_core::model::UnitPosterior::vague(&h));
}

#[test]
fn three_frame_intervals_reduce_to_the_conjugate_update() {
    // Two intervals of exactly three frames: state s sees frame s of each.
    let x = [1.0, 5.0, 9.0, 2.0, 6.0, 11.0];
    let corpus = vec![(feats("a", &x), labels("a", &[(0.0, 0.03, "p"), (0.03, 0.06, "p")]))];
    let h = hyper(1, 1);
    let p = fit_informative_prior(&corpus, &h, &Schedule::default()).unwrap();
    let unit = p.unit("p").unwrap();
    let vague = &p.vague_unit;
    for s in 0..3 {
        let (a, b) = (x[s], x[s + 3]);
        let want = update_normal_gamma(&vague.states[s].components[0], 2.0, &[a + b], &[a * a + b * b]).unwrap();
        let got = &unit.states[s].components[0];
        assert!((got.mean[0] - want.mean[0]).abs() < 1e-9);
        assert!((got.kappa[0] - want.kappa[0]).abs() < 1e-9);
        assert!((got.shape[0] - want.shape[0]).abs() < 1e-9);
        assert!((got.rate[0] - want.rate[0]).abs() < 1e-9);
        // Posterior mean is a convex combination of m0 and the state mean.
        let emp = 0.5 * (a + b);
        let m0 = vague.states[s].components[0].mean[0];
        let (lo, hi) = (m0.min(emp), m0.max(emp));
        assert!(got.mean[0] >= lo && got.mean[0] <= hi);
        // The forced path also pins the transition counts: no self-loops.
        assert!((unit.trans_alpha[s][0] - vague.trans_alpha[s][0]).abs() < 1e-9);
        assert!((unit.trans_alpha[s][1] - vague.trans_alpha[s][1] - 2.0).abs() < 1e-9);
    }
}

#[test]
fn longer_interval_lies_between_prior_and_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..30).map(|t| if t < 10 { 3.0 } else if t < 20 { 6.0 } else { 9.0 } + rng.random_range(-0.1..0.1)).collect();
    let f = feats("a", &x);
    let summary = DataSummary::from_corpus(std::slice::from_ref(&f)).unwrap();
    let h = HyperParams { n_components: 1, seed: 2, ..Default::default() }.with_vague_prior(&summary).unwrap();
    let m0 = summary.mean[0];
    let corpus = vec![(f, labels("a", &[(0.0, 0.3, "p")]))];
    let p = fit_informative_prior(&corpus, &h, &Schedule::default()).unwrap();
    let unit = p.unit("p").unwrap();
    let means: Vec<f64> = (0..3).map(|s| unit.states[s].components[0].mean[0]).collect();
    assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
    for (s, want) in [3.0, 6.0, 9.0].iter().enumerate() {
        let (lo, hi) = (m0.min(*want) - 0.2, m0.max(*want) + 0.2);
        assert!(means[s] >= lo && means[s] <= hi, "{means:?}");
    }
}

#[test]
fn phones_do_not_share_statistics() {
    let a_frames: Vec<f64> = (0..12).map(|t| (t as f64 * 0.7).sin()).collect();
    let build = |b_offset: f64| {
        let mut x = a_frames.clone();
        x.extend((0..9).map(|t| b_offset + t as f64 * 0.1));
        let l = labels("u", &[(0.0, 0.12, "A"), (0.12, 0.21, "B")]);
        vec![(feats("u", &x), l)]
    };
    let h = hyper(2, 1);
    let p1 = fit_informative_prior(&build(5.0), &h, &Schedule::default()).unwrap();
    let p2 = fit_informative_prior(&build(-40.0), &h, &Schedule::default()).unwrap();
    assert_eq!(p1.unit("A"), p2.unit("A"));
    assert_ne!(p1.unit("B"), p2.unit("B"));
    assert_eq!(p1.label_order, vec!["A", "B"]);
}

#[test]
fn short_interval_is_a_data_error_naming_the_utterance() {
    let corpus = vec![(feats("utt7", &[0.0; 10]), labels("utt7", &[(0.0, 0.08, "a"), (0.08, 0.1, "b")]))];
    match fit_informative_prior(&corpus, &hyper(1, 1), &Schedule::default()) {
        Err(AudError::Data(msg)) => assert!(msg.contains("utt7") && msg.contains("0.080"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn labels_beyond_the_features_are_a_format_error() {
    let corpus = vec![(feats("u", &[0.0; 10]), labels("u", &[(0.0, 0.5, "a")]))];
    assert!(matches!(
        fit_informative_prior(&corpus, &hyper(1, 1), &Schedule::default()),
        Err(AudError::Format { .. })
    ));
}

#[test]
fn supervised_bound_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut corpus = Vec::new();
    for u in 0..4 {
        let x: Vec<f64> = (0..40).map(|t| (t / 10) as f64 + rng.random_range(-0.3..0.3)).collect();
        let id = format!("u{u}");
        corpus.push((feats(&id, &x), labels(&id, &[(0.0, 0.2, "a"), (0.2, 0.4, "b")])));
    }
    let p = fit_informative_prior(&corpus, &hyper(2, 1), &Schedule { max_epochs: 20, rel_tol: 0.0 }).unwrap();
    assert_eq!(p.elbo_trace.len(), 21);
    for w in p.elbo_trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-6, "{} -> {}", w[0], w[1]);
    }
}

fn small_prior() -> AcousticPrior {
    let x: Vec<f64> = (0..18).map(|t| (t / 6) as f64).collect();
    let corpus = vec![(feats("u", &x), labels("u", &[(0.0, 0.09, "a"), (0.09, 0.18, "b")]))];
    fit_informative_prior(&corpus, &hyper(1, 1), &Schedule::default()).unwrap()
}

#[test]
fn serialization_round_trips() {
    let p = small_prior();
    let back = AcousticPrior::from_text(&p.to_text()).unwrap();
    assert_eq!(back.units, p.units);
    assert_eq!(back.vague_unit, p.vague_unit);
    assert_eq!(back.label_order, p.label_order);
    assert_eq!(back.hyper, p.hyper);
    assert!(AcousticPrior::from_text("AUDM 1\n").is_err());
}

#[test]
fn seeding_places_phones_first() {
    let p = small_prior();
    let h = HyperParams { n_units: 2, n_components: 1, seed: 3, ..Default::default() };
    let (prior, init) = seed_from_prior(&p, &h).unwrap();
    for (k, label) in p.label_order.iter().enumerate() {
        assert_eq!(init.units[k].states, p.units[label].states);
        assert_eq!(prior.units[k].states, p.units[label].states);
        assert_eq!(prior.units[k].trans_alpha, p.vague_unit.trans_alpha);
    }
    assert_eq!(prior.unit_alpha, vec![0.5, 0.5]);
    assert_eq!(init, prior);
}

#[test]
fn leftover_units_are_vague_and_perturbed() {
    let p = small_prior();
    let h = HyperParams { n_units: 5, n_components: 1, seed: 3, ..Default::default() };
    let (prior, init) = seed_from_prior(&p, &h).unwrap();
    for k in 2..5 {
        assert_eq!(prior.units[k], p.vague_unit);
        assert_ne!(init.units[k], p.vague_unit);
    }
}

#[test]
fn no_phones_matches_uninformative_initialization() {
    let summary = DataSummary { mean: vec![0.3, -0.2], variance: vec![1.5, 0.4] };
    let h = HyperParams { n_units: 6, n_components: 2, seed: 21, ..Default::default() }.with_vague_prior(&summary).unwrap();
    let p = fit_informative_prior(&[], &h, &Schedule::default()).unwrap();
    let (prior, init) = seed_from_prior(&p, &h).unwrap();
    assert_eq!(prior, vague_prior(&h, &summary).unwrap());
    assert_eq!(init, init_posterior(&h, &summary, 21).unwrap());
}

#[test]
fn too_few_units_is_a_config_error() {
    let p = small_prior();
    let h = HyperParams { n_units: 1, n_components: 1, ..Default::default() };
    match seed_from_prior(&p, &h) {
        Err(AudError::Config(msg)) => assert!(msg.contains("raise K")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn zero_epochs_keep_the_warm_start() {
    let p = small_prior();
    let h = HyperParams { n_units: 3, n_components: 1, seed: 3, ..Default::default() };
    let (prior, init) = seed_from_prior(&p, &h).unwrap();
    let corpus = vec![feats("t", &[0.0, 1.0, 2.0, 1.0, 0.5])];
    let out = train(&corpus, &prior, &init, &Schedule { max_epochs: 0, rel_tol: 1e-5 }).unwrap();
    assert_eq!(out.posterior, init);
}
