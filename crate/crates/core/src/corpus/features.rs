use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::error::{AudError, Result};

pub const AUDF_MAGIC: &[u8; 4] = b"AUDF";
pub const AUDF_VERSION: u32 = 1;

/// One left-to-right unit needs at least this many emitting frames.
pub const MIN_FRAMES: usize = 3;

/// A T×D matrix of frame features, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub utt_id: String,
    pub frame_shift_ms: f64,
    dim: usize,
    n_frames: usize,
    data: Vec<f64>,
}

impl FeatureSequence {
    pub fn new(
        utt_id: impl Into<String>,
        dim: usize,
        frame_shift_ms: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        let utt_id = utt_id.into();
        if dim == 0 {
            return Err(AudError::format("dim", "feature dimension must be positive"));
        }
        if !(frame_shift_ms > 0.0 && frame_shift_ms.is_finite()) {
            return Err(AudError::format(
                "frame_shift_ms",
                format!("must be a positive finite value, got {frame_shift_ms}"),
            ));
        }
        if data.len() % dim != 0 {
            return Err(AudError::Shape(format!(
                "{} values do not fill rows of dimension {dim}",
                data.len()
            )));
        }
        let n_frames = data.len() / dim;
        if n_frames < MIN_FRAMES {
            return Err(AudError::Data(format!(
                "{utt_id}: utterance shorter than 3 frames ({n_frames})"
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(AudError::Data(format!(
                "{utt_id}: non-finite value at frame {}, column {}",
                i / dim,
                i % dim
            )));
        }
        Ok(Self {
            utt_id,
            frame_shift_ms,
            dim,
            n_frames,
            data,
        })
    }

    pub fn from_rows(
        utt_id: impl Into<String>,
        frame_shift_ms: f64,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(AudError::Shape("ragged feature rows".into()));
        }
        Self::new(utt_id, dim, frame_shift_ms, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.n_frames as f64 * self.frame_shift_ms / 1000.0
    }
}

fn read_u32(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(buf[at..at + 4].try_into().unwrap())
}

fn read_f32(buf: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(buf[at..at + 4].try_into().unwrap())
}

/// Decode an AUDF byte buffer.
pub fn decode_features(utt_id: &str, bytes: &[u8]) -> Result<FeatureSequence> {
    const HEADER: usize = 20;
    if bytes.len() < HEADER {
        return Err(AudError::format("header", format!("{} bytes, need 20", bytes.len())));
    }
    if &bytes[0..4] != AUDF_MAGIC {
        return Err(AudError::format("magic", format!("expected \"AUDF\", got {:?}", &bytes[0..4])));
    }
    let version = read_u32(bytes, 4);
    if version != AUDF_VERSION {
        return Err(AudError::format("version", format!("unsupported version {version}")));
    }
    let dim = read_u32(bytes, 8) as usize;
    let n_frames = read_u32(bytes, 12) as usize;
    let frame_shift_ms = read_f32(bytes, 16);
    if dim == 0 {
        return Err(AudError::format("dim", "dimension is zero"));
    }
    let expected = n_frames
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER))
        .ok_or_else(|| AudError::format("n_frames", "size overflow"))?;
    if bytes.len() != expected {
        return Err(AudError::format(
            "n_frames",
            format!(
                "header declares {n_frames}x{dim} values ({expected} bytes) but file has {} bytes",
                bytes.len()
            ),
        ));
    }
    if !(frame_shift_ms > 0.0 && frame_shift_ms.is_finite()) {
        return Err(AudError::format(
            "frame_shift_ms",
            format!("must be positive, got {frame_shift_ms}"),
        ));
    }
    let data: Vec<f64> = bytes[HEADER..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    FeatureSequence::new(utt_id, dim, frame_shift_ms as f64, data)
}

pub fn encode_features(f: &FeatureSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + f.data.len() * 4);
    out.extend_from_slice(AUDF_MAGIC);
    out.extend_from_slice(&AUDF_VERSION.to_le_bytes());
    out.extend_from_slice(&(f.dim as u32).to_le_bytes());
    out.extend_from_slice(&(f.n_frames as u32).to_le_bytes());
    out.extend_from_slice(&(f.frame_shift_ms as f32).to_le_bytes());
    for v in &f.data {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

/// Read an AUDF file. The utterance id defaults to the file stem.
pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let utt_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| AudError::io(path, e))?;
    decode_features(&utt_id, &bytes)
}

/// Write an AUDF file. Values are narrowed to `f32`.
pub fn write_features(path: impl AsRef<Path>, f: &FeatureSequence) -> Result<()> {
    let path = path.as_ref();
    let write = || -> io::Result<()> {
        let mut file = fs::File::create(path)?;
        file.write_all(&encode_features(f))?;
        file.sync_all()
    };
    write().map_err(|e| AudError::io(path, e))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PreprocessOptions {
    pub mean_normalize: bool,
    pub deltas: bool,
}

const DELTA_WINDOW: usize = 2;

/// Regression deltas over a ±2 frame window with edge replication.
fn deltas(data: &[f64], n_frames: usize, dim: usize) -> Vec<f64> {
    let denom: f64 = 2.0 * (1..=DELTA_WINDOW).map(|th| (th * th) as f64).sum::<f64>();
    let last = n_frames as isize - 1;
    let at = |t: isize, d: usize| data[t.clamp(0, last) as usize * dim + d];
    let mut out = vec![0.0; data.len()];
    for t in 0..n_frames as isize {
        for d in 0..dim {
            let mut acc = 0.0;
            for th in 1..=DELTA_WINDOW as isize {
                acc += th as f64 * (at(t + th, d) - at(t - th, d));
            }
            out[t as usize * dim + d] = acc / denom;
        }
    }
    out
}

/// Mean normalization of the static coefficients, then optional delta and
/// delta-delta expansion (output dimension 3×D).
pub fn preprocess(f: &FeatureSequence, opts: PreprocessOptions) -> FeatureSequence {
    let (t, d) = (f.n_frames, f.dim);
    let mut statics = f.data.clone();
    if opts.mean_normalize {
        for col in 0..d {
            let mean = (0..t).map(|i| statics[i * d + col]).sum::<f64>() / t as f64;
            for i in 0..t {
                statics[i * d + col] -= mean;
            }
        }
    }
    if !opts.deltas {
        return FeatureSequence {
            data: statics,
            ..f.clone()
        };
    }
    let delta = deltas(&statics, t, d);
    let delta2 = deltas(&delta, t, d);
    let mut data = Vec::with_capacity(t * d * 3);
    for i in 0..t {
        data.extend_from_slice(&statics[i * d..(i + 1) * d]);
        data.extend_from_slice(&delta[i * d..(i + 1) * d]);
        data.extend_from_slice(&delta2[i * d..(i + 1) * d]);
    }
    FeatureSequence {
        utt_id: f.utt_id.clone(),
        frame_shift_ms: f.frame_shift_ms,
        dim: 3 * d,
        n_frames: t,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(dim: usize, data: Vec<f64>) -> FeatureSequence {
        FeatureSequence::new("u", dim, 10.0, data).unwrap()
    }

    #[test]
    fn decode_enumerated_values() {
        let f = seq(2, (0..6).map(f64::from).collect());
        let back = decode_features("u", &encode_features(&f)).unwrap();
        assert_eq!(back.frame(0), &[0.0, 1.0]);
        assert_eq!(back.frame(1), &[2.0, 3.0]);
        assert_eq!(back.frame(2), &[4.0, 5.0]);
    }

    #[test]
    fn rejects_short_utterance() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"AUDF");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&10f32.to_le_bytes());
        bytes.extend_from_slice(&1f32.to_le_bytes());
        bytes.extend_from_slice(&2f32.to_le_bytes());
        let err = decode_features("u", &bytes).unwrap_err().to_string();
        assert!(err.contains("utterance shorter than 3 frames"), "{err}");
    }

    #[test]
    fn format_errors_name_the_field() {
        let good = encode_features(&seq(1, vec![1.0, 2.0, 3.0]));
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_features("u", &bad), Err(AudError::Format { field, .. }) if field == "magic"));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_features("u", &bad), Err(AudError::Format { field, .. }) if field == "version"));
        let mut bad = good.clone();
        bad[8] = 2;
        assert!(matches!(decode_features("u", &bad), Err(AudError::Format { field, .. }) if field == "n_frames"));
    }

    #[test]
    fn non_finite_value_reports_position() {
        let mut bytes = encode_features(&seq(2, vec![0.0; 6]));
        let at = 20 + (1 * 2 + 1) * 4;
        bytes[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = decode_features("u", &bytes).unwrap_err().to_string();
        assert!(err.contains("frame 1, column 1"), "{err}");
    }

    #[test]
    fn constant_sequence_preprocesses_to_zero() {
        let f = seq(2, vec![3.5; 14]);
        let out = preprocess(&f, PreprocessOptions { mean_normalize: true, deltas: true });
        assert_eq!(out.dim(), 6);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_delta_is_slope_in_interior() {
        let f = seq(1, (0..7).map(f64::from).collect());
        let out = preprocess(&f, PreprocessOptions { mean_normalize: false, deltas: true });
        for t in 2..5 {
            assert_eq!(out.frame(t)[1], 1.0);
            assert_eq!(out.frame(t)[0], t as f64);
        }
    }

    #[test]
    fn mean_normalize_column() {
        let f = seq(1, vec![1.0, 2.0, 3.0]);
        let out = preprocess(&f, PreprocessOptions { mean_normalize: true, deltas: false });
        assert_eq!(out.data(), &[-1.0, 0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn round_trip_is_byte_identical(vals in prop::collection::vec(-1e6f32..1e6, 3..60), dim in 1usize..4) {
            let n = vals.len() / dim * dim;
            prop_assume!(n / dim >= 3);
            let f = seq(dim, vals[..n].iter().map(|&v| v as f64).collect());
            let bytes = encode_features(&f);
            let back = decode_features("u", &bytes).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(encode_features(&back), bytes);
        }

        #[test]
        fn mean_normalization_is_idempotent(vals in prop::collection::vec(-100.0f64..100.0, 6..40)) {
            let n = vals.len() / 2 * 2;
            let f = seq(2, vals[..n].to_vec());
            let opts = PreprocessOptions { mean_normalize: true, deltas: false };
            let once = preprocess(&f, opts);
            let twice = preprocess(&once, opts);
            for col in 0..2 {
                let mean: f64 = once.frames().map(|r| r[col]).sum::<f64>() / once.n_frames() as f64;
                prop_assert!(mean.abs() < 1e-10);
            }
            for (a, b) in once.data().iter().zip(twice.data()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn ramp_delta_equals_slope(slope in -5.0f64..5.0, offset in -10.0f64..10.0, t in 5usize..30) {
            let f = seq(1, (0..t).map(|i| offset + slope * i as f64).collect());
            let out = preprocess(&f, PreprocessOptions { mean_normalize: false, deltas: true });
            for i in 2..t - 2 {
                prop_assert!((out.frame(i)[1] - slope).abs() < 1e-9);
            }
        }
    }
}
