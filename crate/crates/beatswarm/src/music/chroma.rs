//! Chroma extraction and major/minor triad template matching.

use super::AudioSignal;
use rustfft::{num_complex::Complex, FftPlanner};

const PITCH_CLASSES: [&str; 12] =
    ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];
const CHROMA_FRAME: usize = 4096;
const CHROMA_F_LO: f64 = 55.0;
const CHROMA_F_HI: f64 = 4000.0;

/// 12-bin pitch-class energy over a time window, C first.
pub fn chroma_vector(signal: &AudioSignal, t_start: f64, t_end: f64) -> [f64; 12] {
    let sr = signal.sample_rate as f64;
    let lo = ((t_start * sr).max(0.0) as usize).min(signal.samples.len());
    let hi = ((t_end * sr) as usize).min(signal.samples.len());
    let mut chroma = [0.0f64; 12];
    if hi <= lo {
        return chroma;
    }
    let segment = &signal.samples[lo..hi];

    let frame = CHROMA_FRAME.min(segment.len().next_power_of_two());
    let frame = frame.min(segment.len()).max(64);
    let hop = frame / 2;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(frame);
    let window: Vec<f64> = (0..frame)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / frame as f64).cos()))
        .collect();

    let mut buf = vec![Complex::new(0.0, 0.0); frame];
    let mut start = 0;
    while start + frame <= segment.len() {
        for i in 0..frame {
            buf[i] = Complex::new(segment[start + i] as f64 * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (bin, value) in buf.iter().take(frame / 2 + 1).enumerate() {
            let freq = bin as f64 * sr / frame as f64;
            if !(CHROMA_F_LO..=CHROMA_F_HI).contains(&freq) {
                continue;
            }
            // MIDI pitch with A4 = 440 Hz at 69, C classes at p % 12
            let pitch = 69.0 + 12.0 * (freq / 440.0).log2();
            let class = (pitch.round() as i64).rem_euclid(12) as usize;
            chroma[class] += value.norm();
        }
        if start + hop + frame > segment.len() && start + frame < segment.len() {
            start = segment.len() - frame;
        } else {
            start += hop;
        }
    }
    chroma
}

/// Best-matching major/minor triad for the window, e.g. `C:maj`, or
/// `None` when the window is essentially silent.
pub fn chord_label(signal: &AudioSignal, t_start: f64, t_end: f64) -> Option<String> {
    let chroma = chroma_vector(signal, t_start, t_end);
    let mass: f64 = chroma.iter().sum();
    let norm = chroma.iter().map(|v| v * v).sum::<f64>().sqrt();
    if mass < 1e-6 || norm < 1e-12 {
        return None;
    }

    let mut best = (f64::NEG_INFINITY, 0usize, true);
    for root in 0..12 {
        for (is_major, third) in [(true, 4usize), (false, 3usize)] {
            // binary triad template: root, third, fifth
            let mut score = 0.0;
            for offset in [0, third, 7] {
                score += chroma[(root + offset) % 12];
            }
            // cosine similarity against the 3-element template
            let cosine = score / (norm * 3.0f64.sqrt());
            if cosine > best.0 {
                best = (cosine, root, is_major);
            }
        }
    }
    let quality = if best.2 { "maj" } else { "min" };
    Some(format!("{}:{}", PITCH_CLASSES[best.1], quality))
}
