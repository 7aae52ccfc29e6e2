//! Small signal generators for demos, fixtures, and tests.

use super::AudioSignal;

/// Sum of sine tones with the given (frequency Hz, amplitude) pairs.
pub fn tone_mix(tones: &[(f64, f64)], seconds: f64, sample_rate: u32) -> AudioSignal {
    let n = (seconds * sample_rate as f64) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            tones
                .iter()
                .map(|&(f, a)| a * (2.0 * std::f64::consts::PI * f * t).sin())
                .sum::<f64>() as f32
        })
        .collect();
    AudioSignal { samples, sample_rate }
}

/// Silence with short bright clicks (4 ms decaying 3 kHz bursts) at the
/// given times.
pub fn clicks_at(times: &[f64], seconds: f64, sample_rate: u32) -> AudioSignal {
    let sr = sample_rate as f64;
    let n = (seconds * sr) as usize;
    let mut samples = vec![0.0f32; n];
    let burst = (0.004 * sr) as usize;
    for &t in times {
        let start = (t * sr) as usize;
        for j in 0..burst {
            if start + j >= n {
                break;
            }
            let tau = j as f64 / sr;
            let env = (-tau / 0.001).exp();
            samples[start + j] +=
                (0.8 * env * (2.0 * std::f64::consts::PI * 3000.0 * tau).sin()) as f32;
        }
    }
    AudioSignal { samples, sample_rate }
}

/// Regular click track: `count` clicks at the given BPM starting at
/// `first_beat` seconds.
pub fn click_track(bpm: f64, first_beat: f64, count: usize, seconds: f64, sample_rate: u32) -> AudioSignal {
    let period = 60.0 / bpm;
    let times: Vec<f64> = (0..count).map(|i| first_beat + period * i as f64).collect();
    clicks_at(&times, seconds, sample_rate)
}

/// Writes a signal as a 16-bit PCM WAV file.
pub fn write_wav(signal: &AudioSignal, path: &std::path::Path) -> Result<(), hound::Error> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &signal.samples {
        writer.write_sample((s.clamp(-1.0, 1.0) * 32767.0) as i16)?;
    }
    writer.finalize()
}
