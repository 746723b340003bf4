//! Feature files, dataset manifests and time-aligned label files.

mod features;
mod labels;
mod manifest;

pub use features::{
    preprocess, read_features, write_features, FeatureSequence, PreprocessOptions, AUDF_MAGIC,
    AUDF_VERSION, MIN_FRAMES,
};
pub use labels::{load_labels, parse_labels, FrameInterval, LabelEntry, TimedLabelSequence};
pub use manifest::{load_corpus, Manifest, ManifestEntry};

/// Frame index containing time `time_s` for a frame shift given in
/// milliseconds.
pub fn time_to_frame(time_s: f64, frame_shift_ms: f64) -> usize {
    // Nudge by a tiny amount so 0.03 s at 10 ms lands on frame 3, not 2.
    let x = time_s * 1000.0 / frame_shift_ms;
    (x + 1e-6).floor().max(0.0) as usize
}

/// Start time in seconds of frame `frame`.
pub fn frame_to_time(frame: usize, frame_shift_ms: f64) -> f64 {
    frame as f64 * frame_shift_ms / 1000.0
}
