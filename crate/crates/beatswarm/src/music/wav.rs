//! PCM WAV decoding via `hound`, with stereo downmix.

use super::{AudioSignal, MusicError};
use std::path::Path;

/// Loads a PCM WAV file (integer or 32-bit float encodings). Stereo is
/// downmixed to mono by averaging; samples are normalized to [-1, 1].
pub fn load_wav(path: &Path) -> Result<AudioSignal, MusicError> {
    let reader = hound::WavReader::open(path).map_err(|e| MusicError::UnreadableFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(MusicError::ChannelCount(spec.channels));
    }

    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(|e| decode_error(path, e))?,
        (hound::SampleFormat::Int, bits) if bits <= 32 => {
            let scale = 1.0 / (1i64 << (bits - 1)) as f32;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<Result<_, _>>()
                .map_err(|e| decode_error(path, e))?
        }
        (format, bits) => {
            return Err(MusicError::UnsupportedEncoding(format!("{format:?} at {bits} bits")))
        }
    };

    let samples = if spec.channels == 2 {
        interleaved.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect()
    } else {
        interleaved
    };
    AudioSignal::new(samples, spec.sample_rate)
}

fn decode_error(path: &Path, e: hound::Error) -> MusicError {
    MusicError::UnreadableFile { path: path.display().to_string(), message: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, spec: hound::WavSpec, frames: &[Vec<i16>]) {
        let mut writer = hound::WavWriter::create(path, spec).unwrap();
        for frame in frames {
            for &s in frame {
                writer.write_sample(s).unwrap();
            }
        }
        writer.finalize().unwrap();
    }

    #[test]
    fn silence_loads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("silence.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 44100,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        write(&path, spec, &vec![vec![0i16]; 44100]);
        let signal = load_wav(&path).unwrap();
        assert_eq!(signal.samples.len(), 44100);
        assert!(signal.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn identical_stereo_channels_downmix_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let frames: Vec<Vec<i16>> = (0..100).map(|i| vec![(i * 100) as i16; 2]).collect();
        write(&path, spec, &frames);
        let signal = load_wav(&path).unwrap();
        for (i, &s) in signal.samples.iter().enumerate() {
            let expected = (i as f32 * 100.0) / 32768.0;
            assert!((s - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn full_scale_square_wave_hits_pcm_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("square.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let frames: Vec<Vec<i16>> =
            (0..64).map(|i| vec![if i % 2 == 0 { i16::MAX } else { i16::MIN }]).collect();
        write(&path, spec, &frames);
        let signal = load_wav(&path).unwrap();
        let expected_hi = 32767.0 / 32768.0;
        for (i, &s) in signal.samples.iter().enumerate() {
            let expected = if i % 2 == 0 { expected_hi } else { -1.0 };
            assert!((s - expected).abs() < 1e-7, "sample {i}: {s} vs {expected}");
        }
    }

    #[test]
    fn missing_file_is_an_error() {
        assert!(matches!(
            load_wav(Path::new("/nonexistent/nope.wav")),
            Err(MusicError::UnreadableFile { .. })
        ));
    }

    #[test]
    fn float_wav_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("float.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut writer = hound::WavWriter::create(&path, spec).unwrap();
        for i in 0..256 {
            writer.write_sample((i as f32 / 256.0).sin()).unwrap();
        }
        writer.finalize().unwrap();
        let signal = load_wav(&path).unwrap();
        assert_eq!(signal.samples.len(), 256);
        assert!((signal.samples[100] - (100f32 / 256.0).sin()).abs() < 1e-7);
    }
}
