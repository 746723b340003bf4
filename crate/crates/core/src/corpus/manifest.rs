use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::features::{read_features, FeatureSequence};
use crate::error::{AudError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub path: PathBuf,
}

/// Ordered list of utterances sharing one frame shift.
///
/// Text form: a first line `#frame_shift_ms=<value>`, then one
/// `utt_id<TAB>path` line per utterance. Relative paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub frame_shift_ms: f64,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .map(|(_, l)| l.trim())
            .ok_or_else(|| AudError::format("manifest header", "empty manifest"))?;
        let value = header
            .strip_prefix("#frame_shift_ms=")
            .ok_or_else(|| AudError::format("manifest header", format!("expected #frame_shift_ms=<value>, got {header:?}")))?;
        let frame_shift_ms: f64 = value
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| *v > 0.0 && v.is_finite())
            .ok_or_else(|| AudError::format("frame_shift_ms", format!("bad value {value:?}")))?;

        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (i, line) in lines {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (utt_id, path) = line.split_once('\t').ok_or_else(|| {
                AudError::format(format!("manifest line {}", i + 1), "expected utt_id<TAB>path")
            })?;
            if !seen.insert(utt_id.to_string()) {
                return Err(AudError::Data(format!("duplicate utterance id {utt_id} at manifest line {}", i + 1)));
            }
            let path = PathBuf::from(path.trim());
            let path = if path.is_absolute() { path } else { base_dir.join(path) };
            entries.push(ManifestEntry { utt_id: utt_id.to_string(), path });
        }
        Ok(Self { frame_shift_ms, entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| AudError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let m = Self::parse(&text, base)?;
        if let Some(missing) = m.entries.iter().find(|e| !e.path.is_file()) {
            return Err(AudError::Data(format!(
                "utterance {}: feature file {} does not exist",
                missing.utt_id,
                missing.path.display()
            )));
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#frame_shift_ms={}\n", self.frame_shift_ms);
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}", e.utt_id, e.path.display());
        }
        out
    }

    /// Read every utterance, checking the frame shift and dimension agree.
    pub fn read_all(&self) -> Result<Vec<FeatureSequence>> {
        let mut out: Vec<FeatureSequence> = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let mut f = read_features(&e.path).map_err(|err| err.for_utterance(&e.utt_id))?;
            f.utt_id = e.utt_id.clone();
            if (f.frame_shift_ms as f32) != (self.frame_shift_ms as f32) {
                return Err(AudError::format(
                    "frame_shift_ms",
                    format!(
                        "utterance {} has frame shift {} ms, manifest declares {} ms",
                        e.utt_id, f.frame_shift_ms, self.frame_shift_ms
                    ),
                ));
            }
            if let Some(first) = out.first() {
                if first.dim() != f.dim() {
                    return Err(AudError::Shape(format!(
                        "utterance {} has dimension {}, expected {}",
                        e.utt_id,
                        f.dim(),
                        first.dim()
                    )));
                }
            }
            out.push(f);
        }
        Ok(out)
    }
}

/// Load a manifest and all of its feature files.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<(Manifest, Vec<FeatureSequence>)> {
    let m = Manifest::load(path)?;
    let feats = m.read_all()?;
    Ok((m, feats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_features;

    #[test]
    fn parses_header_and_relative_paths() {
        let m = Manifest::parse("#frame_shift_ms=10\nu1\ta.audf\nu2\t/abs/b.audf\n", Path::new("/data")).unwrap();
        assert_eq!(m.frame_shift_ms, 10.0);
        assert_eq!(m.entries[0].path, PathBuf::from("/data/a.audf"));
        assert_eq!(m.entries[1].path, PathBuf::from("/abs/b.audf"));
    }

    #[test]
    fn rejects_duplicates_and_missing_header() {
        assert!(Manifest::parse("u1\ta\n", Path::new(".")).is_err());
        assert!(Manifest::parse("#frame_shift_ms=10\nu1\ta\nu1\tb\n", Path::new(".")).is_err());
    }

    #[test]
    fn frame_shift_mismatch_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let f = FeatureSequence::new("x", 1, 25.0, vec![0.0, 1.0, 2.0]).unwrap();
        write_features(dir.path().join("x.audf"), &f).unwrap();
        std::fs::write(dir.path().join("m.tsv"), "#frame_shift_ms=10\nx\tx.audf\n").unwrap();
        let err = load_corpus(dir.path().join("m.tsv")).unwrap_err();
        assert!(matches!(err, AudError::Format { .. }), "{err}");
    }

    #[test]
    fn missing_file_is_reported_at_load() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.tsv"), "#frame_shift_ms=10\nx\tnope.audf\n").unwrap();
        let err = Manifest::load(dir.path().join("m.tsv")).unwrap_err().to_string();
        assert!(err.contains("nope.audf"));
    }
}
