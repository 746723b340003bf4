//! Synthetic corpora written to disk in the formats the binary reads, and a
//! helper to run the binary.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aud_core::corpus::write_features;
use aud_core::synthetic::{acoustic_corpus, AcousticCorpus, AcousticSpec};

pub struct Corpus {
    pub manifest: PathBuf,
    pub phones: PathBuf,
    pub words: PathBuf,
    pub data: AcousticCorpus,
}

/// Write features, a manifest, phone labels and word labels (pairs of
/// consecutive phones) for `spec` under `dir/name`.
pub fn write_corpus(dir: &Path, name: &str, spec: &AcousticSpec) -> Corpus {
    let data = acoustic_corpus(spec).unwrap();
    let root = dir.join(name);
    fs::create_dir_all(root.join("feats")).unwrap();
    let mut manifest = format!("#frame_shift_ms={}\n", spec.frame_shift_ms);
    let mut phones = String::new();
    let mut words = String::new();
    for (f, labels) in data.features.iter().zip(&data.labels) {
        let rel = format!("feats/{}.audf", f.utt_id);
        write_features(root.join(&rel), f).unwrap();
        let _ = writeln!(manifest, "{}\t{rel}", f.utt_id);
        for e in &labels.entries {
            let _ = writeln!(phones, "{}\t{}\t{}\t{}", f.utt_id, e.start_s, e.end_s, e.label);
        }
        for (i, pair) in labels.entries.chunks(2).enumerate() {
            let (start, end) = (pair[0].start_s, pair[pair.len() - 1].end_s);
            let _ = writeln!(words, "{}\t{start}\t{end}\tw{i}", f.utt_id);
        }
    }
    let c = Corpus {
        manifest: root.join("manifest.tsv"),
        phones: root.join("phones.tsv"),
        words: root.join("words.tsv"),
        data,
    };
    fs::write(&c.manifest, manifest).unwrap();
    fs::write(&c.phones, phones).unwrap();
    fs::write(&c.words, words).unwrap();
    c
}

pub fn aud(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aud")).arg("--quiet").args(args).output().unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[track_caller]
pub fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(&o));
    o
}
