//! Audio analysis: extract an annotated beat timeline from a waveform.
//!
//! The pipeline is a spectral novelty function (log-compressed magnitude
//! STFT, half-wave-rectified spectral flux, local-average subtraction)
//! followed by thresholded peak picking, then per-beat annotation with
//! loudness (dBFS) and a chroma-template chord label.
//!
//! Chord labeling is deliberately simple: per-segment chroma correlated
//! against the 24 major/minor triad templates, not a sequence model.

mod chroma;
mod novelty;
pub mod synth;
mod wav;

pub use chroma::{chord_label, chroma_vector};
pub use novelty::{detect_beats, spectral_novelty};
pub use wav::load_wav;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MusicError {
    #[error("cannot read {path}: {message}")]
    UnreadableFile { path: String, message: String },
    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("expected mono or stereo audio, got {0} channels")]
    ChannelCount(u16),
    #[error("audio is empty")]
    EmptySignal,
    #[error("signal has {got} samples but one analysis frame needs {needed}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid analysis parameter: {0}")]
    BadParameter(String),
    #[error("beat time {t} s outside signal duration {duration} s")]
    BeatOutOfRange { t: f64, duration: f64 },
}

/// Mono waveform with samples in [-1, 1].
#[derive(Debug, Clone)]
pub struct AudioSignal {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, MusicError> {
        if samples.is_empty() {
            return Err(MusicError::EmptySignal);
        }
        if sample_rate == 0 {
            return Err(MusicError::BadParameter("sample rate must be positive".into()));
        }
        Ok(AudioSignal { samples, sample_rate })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Non-negative novelty sequence, peak-normalized to 1.
#[derive(Debug, Clone)]
pub struct NoveltyCurve {
    pub values: Vec<f64>,
    /// Frames per second (sample_rate / hop).
    pub frame_rate: f64,
    /// Time of frame 0. Spectral flux detects energy as it enters the
    /// analysis window, so frames are attributed to the window interval
    /// they summarize rather than the window start.
    pub t_offset: f64,
    /// Pre-normalization flux maximum; a gauge of onset strength.
    pub raw_max: f64,
}

impl NoveltyCurve {
    pub fn time_of(&self, index: usize) -> f64 {
        self.t_offset + index as f64 / self.frame_rate
    }

    pub fn index_near(&self, t: f64) -> usize {
        let idx = ((t - self.t_offset) * self.frame_rate).round();
        (idx.max(0.0) as usize).min(self.values.len().saturating_sub(1))
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.values[self.index_near(t)]
    }
}

/// One annotated synchronization point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beat {
    /// Beat time (s).
    pub t: f64,
    /// Novelty at the beat, in [0, 1].
    pub novelty: f64,
    /// Loudness around the beat, decibels relative to full scale (<= 0).
    pub dbfs: f64,
    /// Best-matching triad label, e.g. "C:maj", or none for silence.
    pub chord: Option<String>,
}

/// Ordered annotated beat times; the synchronization contract consumed by
/// the choreographer and the score compiler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatTimeline {
    pub duration: f64,
    pub beats: Vec<Beat>,
}

impl BeatTimeline {
    pub fn times(&self) -> Vec<f64> {
        self.beats.iter().map(|b| b.t).collect()
    }

    /// Whether `t` coincides with a beat (within `tol` seconds).
    pub fn contains_time(&self, t: f64, tol: f64) -> bool {
        self.beats.iter().any(|b| (b.t - t).abs() <= tol)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("beat timeline serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let timeline: BeatTimeline = serde_json::from_str(text)?;
        Ok(timeline)
    }
}

/// Analysis parameters; defaults give ~86 novelty frames per second at
/// 44.1 kHz.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicParams {
    /// STFT frame length (power of two, >= 256).
    pub frame: usize,
    /// STFT hop (0 < hop <= frame).
    pub hop: usize,
    /// Logarithmic compression strength: ln(1 + compression * |X|).
    pub compression: f64,
    /// Local-average subtraction window (s).
    pub local_avg_window: f64,
    /// Peak threshold as a fraction of the novelty maximum.
    pub threshold: f64,
    /// Minimum beat gap (s); 0.25 caps detection at 240 BPM.
    pub min_gap: f64,
}

impl Default for MusicParams {
    fn default() -> Self {
        MusicParams {
            frame: 2048,
            hop: 512,
            compression: 1000.0,
            local_avg_window: 0.5,
            threshold: 0.3,
            min_gap: 0.25,
        }
    }
}

/// Loudness window half-width around each beat (s).
const LOUDNESS_HALF_WINDOW: f64 = 0.1;
/// Clamp for silent windows (dBFS).
const SILENCE_DBFS: f64 = -120.0;

/// Annotates beat times with novelty, loudness, and a chord label for the
/// inter-beat segment starting at each beat.
pub fn annotate_beats(
    signal: &AudioSignal,
    beat_times: &[f64],
    novelty: &NoveltyCurve,
) -> Result<BeatTimeline, MusicError> {
    let duration = signal.duration();
    for pair in beat_times.windows(2) {
        if pair[1] <= pair[0] {
            return Err(MusicError::BadParameter(format!(
                "beat times must be strictly increasing ({} then {})",
                pair[0], pair[1]
            )));
        }
    }
    let sr = signal.sample_rate as f64;
    let mut beats = Vec::with_capacity(beat_times.len());
    for (i, &t) in beat_times.iter().enumerate() {
        if !(0.0..=duration).contains(&t) {
            return Err(MusicError::BeatOutOfRange { t, duration });
        }
        let lo = (((t - LOUDNESS_HALF_WINDOW) * sr).max(0.0)) as usize;
        let hi = (((t + LOUDNESS_HALF_WINDOW) * sr) as usize).min(signal.samples.len());
        let window = &signal.samples[lo..hi.max(lo + 1).min(signal.samples.len())];
        let rms = (window.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>()
            / window.len().max(1) as f64)
            .sqrt();
        let dbfs = if rms > 0.0 { (20.0 * rms.log10()).max(SILENCE_DBFS) } else { SILENCE_DBFS };

        let segment_end = beat_times.get(i + 1).copied().unwrap_or(duration);
        let chord = chord_label(signal, t, segment_end);

        beats.push(Beat { t, novelty: novelty.value_at(t), dbfs, chord });
    }
    Ok(BeatTimeline { duration, beats })
}

/// Full analysis pipeline: novelty, peak picking, start-anchor insertion,
/// annotation. A beat at t = 0 is prepended when the first detected peak
/// is later than 1 s (or nothing was detected), so every performance has
/// a defined start anchor.
pub fn analyze(signal: &AudioSignal, params: &MusicParams) -> Result<BeatTimeline, MusicError> {
    let novelty = spectral_novelty(signal, params.frame, params.hop, params.compression, params.local_avg_window)?;
    let mut times = detect_beats(&novelty, params.min_gap, params.threshold)?;
    if times.first().map_or(true, |&t| t > 1.0) {
        times.insert(0, 0.0);
    }
    annotate_beats(signal, &times, &novelty)
}
