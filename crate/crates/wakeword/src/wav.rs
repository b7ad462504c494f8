//! Mono 16 kHz 16-bit PCM WAV reading and writing.
//!
//! Samples are held as `f32` in [-1, 1). Writing is deterministic: the same
//! samples always produce byte-identical files.

use std::path::Path;

use crate::{Error, Result, SAMPLE_RATE};

/// Read a mono 16-bit PCM WAV file, returning samples scaled to [-1, 1).
pub fn read(path: &Path) -> Result<Vec<f32>> {
    let mut reader = hound::WavReader::open(path).map_err(|e| Error::Wav {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.sample_rate != SAMPLE_RATE || spec.bits_per_sample != 16 {
        return Err(Error::Wav {
            path: path.to_path_buf(),
            msg: format!(
                "expected mono 16 kHz 16-bit PCM, got {} ch {} Hz {} bit",
                spec.channels, spec.sample_rate, spec.bits_per_sample
            ),
        });
    }
    let samples: std::result::Result<Vec<i16>, _> = reader.samples::<i16>().collect();
    let samples = samples.map_err(|e| Error::Wav {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    Ok(samples.iter().map(|&s| s as f32 / 32768.0).collect())
}

/// Read `num_samples` starting at `offset` samples into the file.
pub fn read_segment(path: &Path, offset: usize, num_samples: usize) -> Result<Vec<f32>> {
    let all = read(path)?;
    if offset >= all.len() {
        return Err(Error::Wav {
            path: path.to_path_buf(),
            msg: format!("segment offset {offset} beyond file length {}", all.len()),
        });
    }
    let end = (offset + num_samples).min(all.len());
    Ok(all[offset..end].to_vec())
}

/// Duration of a WAV file in seconds, from the header.
pub fn duration_s(path: &Path) -> Result<f64> {
    let reader = hound::WavReader::open(path).map_err(|e| Error::Wav {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    Ok(reader.duration() as f64 / reader.spec().sample_rate as f64)
}

/// Write samples as mono 16 kHz 16-bit PCM, clamping to [-1, 1).
pub fn write(path: &Path, samples: &[f32]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| Error::Wav {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0 - 1.0 / 32768.0) * 32768.0).round() as i16;
        writer.write_sample(v).map_err(|e| Error::Wav {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    }
    writer.finalize().map_err(|e| Error::Wav {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    Ok(())
}
