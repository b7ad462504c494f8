//! 40-dimensional MFCC extraction from 16 kHz PCM.
//!
//! Fixed frontend: 25 ms Hamming-windowed frames, 10 ms shift, pre-emphasis
//! 0.97, 512-point FFT, 40 mel bins spanning 20 Hz - 7800 Hz, orthonormal
//! DCT-II keeping all 40 cepstra, dither off. Frame count is deterministic:
//! `T = 1 + floor((num_samples - 400) / 160)` (edge-snipping).

use std::io::{Read as _, Write as _};
use std::path::Path;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result, SAMPLE_RATE};

pub const FRAME_LENGTH: usize = 400; // 25 ms at 16 kHz
pub const FRAME_SHIFT: usize = 160; // 10 ms
pub const NUM_CEPS: usize = 40;
const NUM_MEL: usize = 40;
const FFT_SIZE: usize = 512;
const LOW_FREQ: f64 = 20.0;
const HIGH_FREQ: f64 = 7800.0;
const PREEMPH: f64 = 0.97;
const ENERGY_FLOOR: f64 = 1e-10;

/// T x 40 matrix of MFCC frames.
pub type FeatureMatrix = Array2<f32>;

#[derive(Debug, Clone)]
pub struct MfccConfig {
    /// Per-utterance cepstral mean normalization (off by default; the
    /// streaming variant refuses it).
    pub cepstral_mean_norm: bool,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            cepstral_mean_norm: false,
        }
    }
}

/// Number of frames produced for `num_samples` input samples.
pub fn num_frames(num_samples: usize) -> usize {
    if num_samples < FRAME_LENGTH {
        0
    } else {
        1 + (num_samples - FRAME_LENGTH) / FRAME_SHIFT
    }
}

struct Frontend {
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    window: Vec<f64>,
    /// filters[m] = (first_bin, weights)
    filters: Vec<(usize, Vec<f64>)>,
    dct: Vec<Vec<f64>>, // [k][m]
}

fn mel(f: f64) -> f64 {
    1127.0 * (1.0 + f / 700.0).ln()
}

impl Frontend {
    fn new() -> Self {
        let fft = FftPlanner::new().plan_fft_forward(FFT_SIZE);
        let window: Vec<f64> = (0..FRAME_LENGTH)
            .map(|n| {
                0.54 - 0.46
                    * (2.0 * std::f64::consts::PI * n as f64 / (FRAME_LENGTH - 1) as f64).cos()
            })
            .collect();
        let num_bins = FFT_SIZE / 2 + 1;
        let mel_lo = mel(LOW_FREQ);
        let mel_hi = mel(HIGH_FREQ);
        let centers: Vec<f64> = (0..NUM_MEL + 2)
            .map(|i| mel_lo + (mel_hi - mel_lo) * i as f64 / (NUM_MEL + 1) as f64)
            .collect();
        let bin_mel: Vec<f64> = (0..num_bins)
            .map(|b| mel(b as f64 * SAMPLE_RATE as f64 / FFT_SIZE as f64))
            .collect();
        let mut filters = Vec::with_capacity(NUM_MEL);
        for m in 0..NUM_MEL {
            let (left, center, right) = (centers[m], centers[m + 1], centers[m + 2]);
            let mut first = None;
            let mut weights = Vec::new();
            for (b, &bm) in bin_mel.iter().enumerate() {
                let w = if bm > left && bm < center {
                    (bm - left) / (center - left)
                } else if bm >= center && bm < right {
                    (right - bm) / (right - center)
                } else {
                    continue;
                };
                if first.is_none() {
                    first = Some(b);
                }
                weights.push(w);
            }
            filters.push((first.unwrap_or(0), weights));
        }
        let norm0 = (1.0 / NUM_MEL as f64).sqrt();
        let norm = (2.0 / NUM_MEL as f64).sqrt();
        let dct = (0..NUM_CEPS)
            .map(|k| {
                (0..NUM_MEL)
                    .map(|m| {
                        let c = (std::f64::consts::PI * k as f64 * (m as f64 + 0.5)
                            / NUM_MEL as f64)
                            .cos();
                        if k == 0 { norm0 * c } else { norm * c }
                    })
                    .collect()
            })
            .collect();
        Frontend {
            fft,
            window,
            filters,
            dct,
        }
    }

    /// Log mel energies of the frame starting at sample `start`.
    /// `prev` is the sample before `start` (pre-emphasis history).
    fn log_mel(&self, samples: &[f64]) -> [f64; NUM_MEL] {
        debug_assert_eq!(samples.len(), FRAME_LENGTH + 1); // one history sample
        let mut buf = vec![Complex64::new(0.0, 0.0); FFT_SIZE];
        for n in 0..FRAME_LENGTH {
            let x = samples[n + 1] - PREEMPH * samples[n];
            buf[n] = Complex64::new(x * self.window[n], 0.0);
        }
        self.fft.process(&mut buf);
        let power: Vec<f64> = buf[..FFT_SIZE / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr())
            .collect();
        let mut out = [0.0; NUM_MEL];
        for (m, (first, weights)) in self.filters.iter().enumerate() {
            let e: f64 = weights
                .iter()
                .zip(&power[*first..])
                .map(|(w, p)| w * p)
                .sum();
            out[m] = e.max(ENERGY_FLOOR).ln();
        }
        out
    }

    fn cepstra(&self, log_mel: &[f64; NUM_MEL]) -> [f64; NUM_CEPS] {
        let mut out = [0.0; NUM_CEPS];
        for (k, row) in self.dct.iter().enumerate() {
            out[k] = row.iter().zip(log_mel.iter()).map(|(d, e)| d * e).sum();
        }
        out
    }
}

thread_local! {
    static FRONTEND: Frontend = Frontend::new();
}

fn frame_samples(audio: &[f32], t: usize) -> Vec<f64> {
    // FRAME_LENGTH samples plus the pre-emphasis history sample; the sample
    // before the very first one is taken as 0.
    let start = t * FRAME_SHIFT;
    let mut v = Vec::with_capacity(FRAME_LENGTH + 1);
    if start == 0 {
        v.push(0.0);
    } else {
        v.push(audio[start - 1] as f64);
    }
    v.extend(audio[start..start + FRAME_LENGTH].iter().map(|&x| x as f64));
    v
}

/// Compute MFCC features for a whole utterance.
pub fn compute_mfcc(audio: &[f32], cfg: &MfccConfig) -> Result<FeatureMatrix> {
    let t_total = num_frames(audio.len());
    if t_total == 0 {
        return Err(Error::Features(format!(
            "audio too short: {} samples < one frame ({FRAME_LENGTH})",
            audio.len()
        )));
    }
    let mut feats = Array2::zeros((t_total, NUM_CEPS));
    FRONTEND.with(|fe| {
        for t in 0..t_total {
            let lm = fe.log_mel(&frame_samples(audio, t));
            let c = fe.cepstra(&lm);
            for (k, &v) in c.iter().enumerate() {
                feats[(t, k)] = v as f32;
            }
        }
    });
    if cfg.cepstral_mean_norm {
        for k in 0..NUM_CEPS {
            let mut col = feats.column_mut(k);
            let mean = col.iter().copied().sum::<f32>() / t_total as f32;
            col.iter_mut().for_each(|v| *v -= mean);
        }
    }
    Ok(feats)
}

/// Pre-DCT log mel energies (for diagnostics and tests).
pub fn compute_log_mel(audio: &[f32]) -> Result<Array2<f64>> {
    let t_total = num_frames(audio.len());
    if t_total == 0 {
        return Err(Error::Features("audio too short".into()));
    }
    let mut out = Array2::zeros((t_total, NUM_MEL));
    FRONTEND.with(|fe| {
        for t in 0..t_total {
            let lm = fe.log_mel(&frame_samples(audio, t));
            for (m, &v) in lm.iter().enumerate() {
                out[(t, m)] = v;
            }
        }
    });
    Ok(out)
}

/// Streaming MFCC: emits frames as soon as their samples are available,
/// bit-identical to [`compute_mfcc`] on the same sample sequence.
pub struct MfccStream {
    samples: Vec<f32>,
    next_frame: usize,
}

impl MfccStream {
    pub fn new(cfg: &MfccConfig) -> Result<Self> {
        if cfg.cepstral_mean_norm {
            return Err(Error::Features(
                "per-utterance mean normalization is not available in streaming mode".into(),
            ));
        }
        Ok(MfccStream {
            samples: Vec::new(),
            next_frame: 0,
        })
    }

    /// Append samples, returning every newly complete frame.
    pub fn push(&mut self, samples: &[f32]) -> Vec<[f32; NUM_CEPS]> {
        self.samples.extend_from_slice(samples);
        let available = num_frames(self.samples.len());
        let mut frames = Vec::new();
        FRONTEND.with(|fe| {
            while self.next_frame < available {
                let lm = fe.log_mel(&frame_samples(&self.samples, self.next_frame));
                let c = fe.cepstra(&lm);
                let mut row = [0.0f32; NUM_CEPS];
                for (k, &v) in c.iter().enumerate() {
                    row[k] = v as f32;
                }
                frames.push(row);
                self.next_frame += 1;
            }
        });
        frames
    }
}

const ARCHIVE_MAGIC: &[u8; 8] = b"WWFEAT01";

/// Write a feature archive: magic header, then per record the utterance id
/// (u32 length + UTF-8 bytes), T, dim, and row-major little-endian f32 data.
pub fn write_archive(path: &Path, records: &[(String, FeatureMatrix)]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(ARCHIVE_MAGIC).map_err(io)?;
    for (id, feats) in records {
        w.write_all(&(id.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(id.as_bytes()).map_err(io)?;
        w.write_all(&(feats.nrows() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(feats.ncols() as u32).to_le_bytes()).map_err(io)?;
        for &v in feats.iter() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

pub fn read_archive(path: &Path) -> Result<Vec<(String, FeatureMatrix)>> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = std::io::Cursor::new(&data[..]);
    let mut magic = [0u8; 8];
    cur.read_exact(&mut magic)
        .map_err(|_| Error::Features(format!("{}: truncated header", path.display())))?;
    if &magic != ARCHIVE_MAGIC {
        return Err(Error::Features(format!("{}: bad magic", path.display())));
    }
    let mut records = Vec::new();
    loop {
        let mut len = [0u8; 4];
        match cur.read_exact(&mut len) {
            Ok(()) => {}
            Err(_) => break,
        }
        let id_len = u32::from_le_bytes(len) as usize;
        let mut id = vec![0u8; id_len];
        cur.read_exact(&mut id)
            .map_err(|_| Error::Features(format!("{}: truncated record", path.display())))?;
        let mut dims = [0u8; 8];
        cur.read_exact(&mut dims)
            .map_err(|_| Error::Features(format!("{}: truncated record", path.display())))?;
        let t = u32::from_le_bytes(dims[..4].try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(dims[4..].try_into().unwrap()) as usize;
        let mut values = vec![0f32; t * d];
        for v in values.iter_mut() {
            let mut b = [0u8; 4];
            cur.read_exact(&mut b)
                .map_err(|_| Error::Features(format!("{}: truncated data", path.display())))?;
            *v = f32::from_le_bytes(b);
        }
        let id = String::from_utf8(id)
            .map_err(|_| Error::Features(format!("{}: non-UTF-8 utterance id", path.display())))?;
        records.push((
            id,
            Array2::from_shape_vec((t, d), values)
                .map_err(|e| Error::Features(e.to_string()))?,
        ));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, secs: f64, amp: f32) -> Vec<f32> {
        (0..(secs * SAMPLE_RATE as f64) as usize)
            .map(|n| {
                amp * (2.0 * std::f64::consts::PI * freq * n as f64 / SAMPLE_RATE as f64).sin()
                    as f32
            })
            .collect()
    }

    #[test]
    fn frame_count_formula() {
        // independent frame-slicing oracle: count windows of 400 samples
        // advancing by 160 that fit entirely
        for n in [400usize, 401, 559, 560, 561, 16000, 12345] {
            let mut count = 0;
            let mut start = 0;
            while start + FRAME_LENGTH <= n {
                count += 1;
                start += FRAME_SHIFT;
            }
            assert_eq!(num_frames(n), count, "n={n}");
        }
        assert_eq!(num_frames(16000), 98);
        assert_eq!(num_frames(399), 0);
    }

    #[test]
    fn too_short_errors() {
        assert!(compute_mfcc(&[0.0; 399], &MfccConfig::default()).is_err());
    }

    #[test]
    fn zero_audio_constant_rows() {
        let feats = compute_mfcc(&[0.0; 1600], &MfccConfig::default()).unwrap();
        assert_eq!(feats.dim(), (8, 40));
        let first = feats.row(0).to_owned();
        for row in feats.rows() {
            for (a, b) in row.iter().zip(first.iter()) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn tone_peaks_in_bracketing_mel_filter() {
        let audio = tone(440.0, 0.5, 0.8);
        let lm = compute_log_mel(&audio).unwrap();
        let mid = lm.row(lm.nrows() / 2);
        let argmax = mid
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        // find the filter whose center frequency brackets 440 Hz
        let mel_lo = mel(LOW_FREQ);
        let mel_hi = mel(HIGH_FREQ);
        let target = mel(440.0);
        let expected = (0..NUM_MEL)
            .min_by(|&a, &b| {
                let ca = mel_lo + (mel_hi - mel_lo) * (a + 1) as f64 / (NUM_MEL + 1) as f64;
                let cb = mel_lo + (mel_hi - mel_lo) * (b + 1) as f64 / (NUM_MEL + 1) as f64;
                (ca - target).abs().partial_cmp(&(cb - target).abs()).unwrap()
            })
            .unwrap();
        assert!((argmax as i64 - expected as i64).abs() <= 1, "{argmax} vs {expected}");

        // independent DFT oracle: energy near 440 Hz dominates the spectrum
        let frame: Vec<f64> = audio[1600..2000].iter().map(|&x| x as f64).collect();
        let bin_hz = SAMPLE_RATE as f64 / 400.0;
        let mut best = (0usize, 0.0f64);
        for k in 1..200 {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &x) in frame.iter().enumerate() {
                let ph = 2.0 * std::f64::consts::PI * k as f64 * n as f64 / 400.0;
                re += x * ph.cos();
                im -= x * ph.sin();
            }
            let p = re * re + im * im;
            if p > best.1 {
                best = (k, p);
            }
        }
        assert!((best.0 as f64 * bin_hz - 440.0).abs() < bin_hz);
    }

    #[test]
    fn shift_invariance_one_frame() {
        let audio = tone(300.0, 0.3, 0.5);
        let feats = compute_mfcc(&audio, &MfccConfig::default()).unwrap();
        let mut padded = vec![0.0f32; FRAME_SHIFT];
        padded.extend_from_slice(&audio);
        let feats_p = compute_mfcc(&padded, &MfccConfig::default()).unwrap();
        assert_eq!(feats_p.nrows(), feats.nrows() + 1);
        for t in 1..feats.nrows() {
            for k in 0..NUM_CEPS {
                assert!(
                    (feats[(t, k)] - feats_p[(t + 1, k)]).abs() < 1e-5,
                    "frame {t} cep {k}"
                );
            }
        }
    }

    #[test]
    fn scaling_moves_only_c0() {
        let audio = tone(500.0, 0.3, 0.3);
        let doubled: Vec<f32> = audio.iter().map(|&x| x * 2.0).collect();
        let a = compute_mfcc(&audio, &MfccConfig::default()).unwrap();
        let b = compute_mfcc(&doubled, &MfccConfig::default()).unwrap();
        // power scales by 4 -> every log mel energy shifts by ln 4 -> only the
        // DCT's constant row (c0) moves, by sqrt(40) * ln 4
        let expected_c0_shift = (NUM_MEL as f64).sqrt() * 4.0f64.ln();
        for t in 0..a.nrows() {
            assert!(
                ((b[(t, 0)] - a[(t, 0)]) as f64 - expected_c0_shift).abs() < 1e-3,
                "t={t}"
            );
            for k in 1..NUM_CEPS {
                assert!((b[(t, k)] - a[(t, k)]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn cmn_zero_column_means() {
        let audio = tone(700.0, 0.4, 0.4);
        let cfg = MfccConfig {
            cepstral_mean_norm: true,
        };
        let feats = compute_mfcc(&audio, &cfg).unwrap();
        for k in 0..NUM_CEPS {
            let mean: f32 = feats.column(k).iter().sum::<f32>() / feats.nrows() as f32;
            assert!(mean.abs() < 1e-5);
        }
    }

    #[test]
    fn streaming_matches_batch_bit_exact() {
        let audio = tone(620.0, 0.37, 0.6);
        let batch = compute_mfcc(&audio, &MfccConfig::default()).unwrap();
        let mut stream = MfccStream::new(&MfccConfig::default()).unwrap();
        let mut rows = Vec::new();
        for chunk in audio.chunks(111) {
            rows.extend(stream.push(chunk));
        }
        assert_eq!(rows.len(), batch.nrows());
        for (t, row) in rows.iter().enumerate() {
            for k in 0..NUM_CEPS {
                assert_eq!(row[k], batch[(t, k)], "t={t} k={k}");
            }
        }
    }

    #[test]
    fn archive_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.ark");
        let a = compute_mfcc(&tone(440.0, 0.1, 0.5), &MfccConfig::default()).unwrap();
        let b = compute_mfcc(&tone(880.0, 0.15, 0.5), &MfccConfig::default()).unwrap();
        write_archive(&path, &[("u1".into(), a.clone()), ("u2".into(), b.clone())]).unwrap();
        let back = read_archive(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, "u1");
        assert_eq!(back[0].1, a);
        assert_eq!(back[1].1, b);
    }
}
