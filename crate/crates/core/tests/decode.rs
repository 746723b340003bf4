mod common;

use std::collections::BTreeSet;

use aud_core::decode::{emit_lattice, viterbi_align, viterbi_decode};
use aud_core::estep;
use aud_core::model::ExpectedParams;
use common::{path_segments, random_features, random_model, Oracle};

#[test]
fn k1_t3_single_segment() {
    let post = random_model(1, 1, 2, 1);
    let a = viterbi_align(&post, &random_features(3, 2, 1)).unwrap();
    assert_eq!(a.segments.len(), 1);
    assert_eq!((a.segments[0].unit, a.segments[0].start, a.segments[0].end), (0, 0, 2));
}

#[test]
fn viterbi_matches_path_enumeration() {
    for seed in 0..40u64 {
        let (k, m, t_len) = (1 + (seed % 2) as usize, 1 + (seed / 2 % 2) as usize, 3 + (seed % 4) as usize);
        let post = random_model(k, m, 2, seed + 11);
        let f = random_features(t_len, 2, seed + 11);
        let oracle = Oracle::new(&post, &f);
        let paths = oracle.paths(t_len);
        let (best_path, best) = paths
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(p, s)| (p.clone(), *s))
            .unwrap();
        let (align, score) = viterbi_decode(&ExpectedParams::new(&post), &f).unwrap();
        assert!((score - best).abs() < 1e-8, "seed {seed}: {score} vs {best}");
        let got: Vec<_> = align.segments.iter().map(|s| (s.unit, s.start, s.end)).collect();
        assert_eq!(got, path_segments(&best_path), "seed {seed}");
    }
}

#[test]
fn k2_m1_t6_example() {
    let post = random_model(2, 1, 3, 99);
    let f = random_features(6, 3, 99);
    let oracle = Oracle::new(&post, &f);
    let best = oracle.paths(6).iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (_, score) = viterbi_decode(&ExpectedParams::new(&post), &f).unwrap();
    assert!((score - best).abs() < 1e-8);
}

#[test]
fn alignments_tile_the_utterance() {
    for seed in 0..10 {
        let post = random_model(4, 2, 3, seed);
        let f = random_features(40 + seed as usize, 3, seed);
        let a = viterbi_align(&post, &f).unwrap();
        a.validate().unwrap();
        assert_eq!(a.n_frames(), f.n_frames());
    }
}

#[test]
fn ties_prefer_lower_unit_and_longer_segment() {
    // Two identical units with symmetric transitions: every tiling of the
    // same shape ties, so the decoder must pick unit 0 and a single segment.
    let mut post = random_model(2, 1, 2, 5);
    post.units[1] = post.units[0].clone();
    post.unit_alpha = vec![1.0, 1.0];
    for u in &mut post.units {
        u.trans_alpha = [[1.0, 1.0]; 3];
    }
    let f = aud_core::FeatureSequence::new("u", 2, 10.0, vec![0.0; 18]).unwrap();
    let a = viterbi_align(&post, &f).unwrap();
    assert!(a.segments.iter().all(|s| s.unit == 0), "{a:?}");
}

#[test]
fn viterbi_score_is_below_log_norm() {
    for seed in 0..5 {
        let post = random_model(3, 2, 2, seed);
        let f = random_features(25, 2, seed);
        let (_, score) = viterbi_decode(&ExpectedParams::new(&post), &f).unwrap();
        let z = estep(&post, &f).unwrap().log_norm;
        assert!(score < z, "{score} >= {z}");
    }
}

#[test]
fn infinite_beam_lattice_holds_every_reachable_segment() {
    for seed in 0..6u64 {
        let post = random_model(2, 1 + (seed % 2) as usize, 2, seed + 40);
        let f = random_features(6 + (seed % 2) as usize, 2, seed + 40);
        let oracle = Oracle::new(&post, &f);
        let want: BTreeSet<(usize, usize, usize)> = oracle
            .paths(f.n_frames())
            .iter()
            .flat_map(|(p, _)| path_segments(p))
            .map(|(k, s, e)| (s, e, k))
            .collect();
        let lat = emit_lattice(&ExpectedParams::new(&post), &f, f64::INFINITY).unwrap();
        let got: BTreeSet<(usize, usize, usize)> = lat.arcs.iter().map(|a| (a.start, a.end, a.unit)).collect();
        assert_eq!(got, want, "seed {seed}");
        assert!(lat.arcs.iter().all(|a| a.score.is_finite()));
    }
}

#[test]
fn tiny_beam_keeps_exactly_the_best_path() {
    for seed in 0..5 {
        let post = random_model(3, 2, 2, seed);
        let f = random_features(30, 2, seed);
        let ep = ExpectedParams::new(&post);
        let (align, _) = viterbi_decode(&ep, &f).unwrap();
        let lat = emit_lattice(&ep, &f, 1e-300).unwrap();
        let got: Vec<_> = lat.arcs.iter().map(|a| (a.unit, a.start, a.end)).collect();
        let want: Vec<_> = align.segments.iter().map(|s| (s.unit, s.start, s.end)).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn lattice_best_path_reproduces_viterbi() {
    for seed in 0..5 {
        let post = random_model(3, 2, 2, seed + 7);
        let f = random_features(35, 2, seed + 7);
        let ep = ExpectedParams::new(&post);
        let (align, score) = viterbi_decode(&ep, &f).unwrap();
        for beam in [0.5, 5.0, 50.0] {
            let lat = emit_lattice(&ep, &f, beam).unwrap();
            let (best, cost) = lat.best_path().unwrap();
            assert_eq!(best.segments, align.segments);
            assert!((cost + score).abs() < 1e-8);
            let sorted = lat.arcs.windows(2).all(|w| (w[0].start, w[0].end) <= (w[1].start, w[1].end));
            assert!(sorted);
        }
    }
}

#[test]
fn wider_beam_never_drops_arcs() {
    let post = random_model(3, 1, 2, 3);
    let f = random_features(30, 2, 3);
    let ep = ExpectedParams::new(&post);
    let mut prev: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for beam in [0.1, 1.0, 3.0, 10.0, 30.0] {
        let cur: BTreeSet<_> = emit_lattice(&ep, &f, beam).unwrap().arcs.iter().map(|a| (a.start, a.end, a.unit)).collect();
        assert!(prev.is_subset(&cur));
        prev = cur;
    }
}

#[test]
fn k1_lattice_contains_the_forced_alignment() {
    let post = random_model(1, 2, 2, 8);
    let f = random_features(12, 2, 8);
    let ep = ExpectedParams::new(&post);
    let (align, _) = viterbi_decode(&ep, &f).unwrap();
    let lat = emit_lattice(&ep, &f, 1.0).unwrap();
    for s in &align.segments {
        assert!(lat.arcs.iter().any(|a| (a.start, a.end, a.unit) == (s.start, s.end, s.unit)));
    }
}

#[test]
fn bad_inputs_are_errors() {
    let post = random_model(2, 1, 2, 1);
    let ep = ExpectedParams::new(&post);
    let f = random_features(5, 2, 1);
    assert!(emit_lattice(&ep, &f, 0.0).is_err());
    assert!(viterbi_align(&post, &random_features(5, 3, 1)).is_err());
}
