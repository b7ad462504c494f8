//! Synthetic desk-scale corpus: the wake word is a fixed three-tone melodic
//! pattern embedded in noise; negatives are random tone sequences that never
//! contain the pattern, pure noise, and near-miss distractors (the same
//! tones in the wrong order, or only two of the three).
//!
//! Everything is a pure function of the seed, so two runs produce
//! byte-identical WAV files and manifests. [`pattern_correlation`] provides
//! the independent check that the wake template appears in every positive
//! and in no negative.

use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::corpus::{Manifest, ManifestEntry, UtteranceLabel};
use crate::{wav, Error, Result, SAMPLE_RATE};

/// The wake word's three tones, in order (C5, E5, G5).
pub const WAKE_TONES: [f64; 3] = [523.25, 659.25, 783.99];
const TONE_S: f64 = 0.30;
const GAP_S: f64 = 0.02;
/// Slightly above the negative tone range so the pattern is acoustically
/// salient; the frequency triple is still the cue that separates it from the
/// detuned distractors.
const PATTERN_AMP: f32 = 0.35;
/// Tones negatives may use: deliberately close to the wake tones on the
/// scale so the model has hard negatives to discriminate against, without
/// reusing the wake tones themselves.
const PALETTE: [f64; 7] = [440.0, 493.88, 587.33, 698.46, 880.0, 932.33, 1046.5];
/// Wake tones shifted up by one semitone; distractor negatives use 2-of-3
/// subsets so hard negatives share most of the pattern's contour and timing
/// without reusing its exact tones.
const DETUNED_WAKE: [f64; 3] = [554.37, 698.46, 830.61];

fn tone(freq: f64, dur_s: f64, amp: f32, phase: f64) -> Vec<f32> {
    let n = (dur_s * SAMPLE_RATE as f64).round() as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE as f64;
            // Hann envelope avoids clicks at tone boundaries
            let env = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos());
            (amp as f64 * env * (2.0 * std::f64::consts::PI * freq * t + phase).sin()) as f32
        })
        .collect()
}

fn tone_sequence(freqs: &[f64], amp: f32, phases: &[f64]) -> Vec<f32> {
    let gap = vec![0.0f32; (GAP_S * SAMPLE_RATE as f64).round() as usize];
    let mut out = Vec::new();
    for (i, &f) in freqs.iter().enumerate() {
        if i > 0 {
            out.extend_from_slice(&gap);
        }
        out.extend(tone(f, TONE_S, amp, phases[i]));
    }
    out
}

/// The fixed wake template (identical waveform in every positive, up to a
/// per-utterance gain).
pub fn wake_pattern() -> Vec<f32> {
    tone_sequence(&WAKE_TONES, PATTERN_AMP, &[0.0, 0.0, 0.0])
}

/// Maximum normalized cross-correlation of `pattern` against any window of
/// `audio` (FFT-accelerated; returns a value in [0, 1]).
pub fn pattern_correlation(audio: &[f32], pattern: &[f32]) -> f64 {
    let l = pattern.len();
    if audio.len() < l || l == 0 {
        return 0.0;
    }
    let n = (audio.len() + l).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex<f64>> = audio
        .iter()
        .map(|&v| Complex::new(v as f64, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    // reversed pattern turns convolution into correlation
    let mut p: Vec<Complex<f64>> = pattern
        .iter()
        .rev()
        .map(|&v| Complex::new(v as f64, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    fft.process(&mut a);
    fft.process(&mut p);
    for (x, y) in a.iter_mut().zip(&p) {
        *x *= y;
    }
    ifft.process(&mut a);
    let scale = 1.0 / n as f64;
    // prefix sums of squared audio for window energies
    let mut prefix_sq = vec![0.0f64; audio.len() + 1];
    for (i, &v) in audio.iter().enumerate() {
        prefix_sq[i + 1] = prefix_sq[i] + (v as f64) * (v as f64);
    }
    let pat_norm = pattern.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
    let mut best: f64 = 0.0;
    for start in 0..=(audio.len() - l) {
        // correlation at offset `start` lands at index start + l - 1
        let num = a[start + l - 1].re * scale;
        let win = (prefix_sq[start + l] - prefix_sq[start]).sqrt();
        if win > 1e-12 && pat_norm > 1e-12 {
            best = best.max(num / (win * pat_norm));
        }
    }
    best
}

fn white_noise(rng: &mut ChaCha8Rng, n: usize, amp: f32) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(-amp..amp)).collect()
}

fn lognormal(rng: &mut ChaCha8Rng, median: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random_range(1e-12..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    let g = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    (median.ln() + sigma * g).exp().clamp(lo, hi)
}

fn add_into(dst: &mut [f32], src: &[f32], offset: usize) {
    for (i, &v) in src.iter().enumerate() {
        if offset + i < dst.len() {
            dst[offset + i] += v;
        }
    }
}

/// Random tone sequence that never contains the wake pattern, including
/// perceptual copies: the 40-filter mel bank cannot resolve tones closer
/// than roughly 100 Hz in this range, so a consecutive triple whose tones
/// all sit within 100 Hz of the respective wake tones would effectively BE
/// the pattern to the feature frontend.
fn negative_tone_seq(rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let m = rng.random_range(2..=6usize);
        let freqs: Vec<f64> = (0..m)
            .map(|_| PALETTE[rng.random_range(0..PALETTE.len())])
            .collect();
        let has_pattern = freqs.windows(3).any(|w| {
            w.iter()
                .zip(WAKE_TONES.iter())
                .all(|(a, b)| (a - b).abs() < 100.0)
        });
        if !has_pattern {
            return freqs;
        }
    }
}

/// Near-miss distractor: the detuned pattern, or two of its three tones.
fn distractor_tones(rng: &mut ChaCha8Rng) -> Vec<f64> {
    // 2-of-3 partial patterns only: a full detuned triple is so close to the
    // wake pattern that training it as freetext content squeezes the margin
    // the wake states need, destabilizing convergence
    let pairs = [[0usize, 1], [1, 2], [0, 2]];
    let p = pairs[rng.random_range(0..pairs.len())];
    p.iter().map(|&i| DETUNED_WAKE[i]).collect()
}

fn synth_positive(rng: &mut ChaCha8Rng) -> Vec<f32> {
    let dur = lognormal(rng, 2.0, 0.2, 1.4, 3.2);
    let n = (dur * SAMPLE_RATE as f64).round() as usize;
    let bg_amp: f32 = rng.random_range(0.01..0.03);
    let mut audio = white_noise(rng, n, bg_amp);
    let pattern = wake_pattern();
    let gain: f32 = rng.random_range(0.7..1.2);
    let scaled: Vec<f32> = pattern.iter().map(|&v| v * gain).collect();
    let margin = (0.1 * SAMPLE_RATE as f64) as usize;
    let max_off = n.saturating_sub(scaled.len() + margin).max(margin + 1);
    let offset = rng.random_range(margin..max_off.max(margin + 1));
    add_into(&mut audio, &scaled, offset);
    audio
}

fn synth_negative(rng: &mut ChaCha8Rng, kind: usize) -> Vec<f32> {
    // negatives run longer than positives on average so sub-segmentation has
    // something to chop, while the duration distributions still overlap
    let dur = lognormal(rng, 3.6, 0.35, 1.6, 9.0);
    let n = (dur * SAMPLE_RATE as f64).round() as usize;
    let bg_amp: f32 = rng.random_range(0.01..0.03);
    let mut audio = white_noise(rng, n, bg_amp);
    let freqs = match kind % 3 {
        0 => negative_tone_seq(rng),
        1 => Vec::new(), // pure noise
        _ => distractor_tones(rng),
    };
    if !freqs.is_empty() {
        let phases: Vec<f64> = (0..freqs.len())
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        // capped below PATTERN_AMP so the loudest negatives stay ~3 dB under
        // the wake pattern
        let amp: f32 = rng.random_range(0.15..0.25);
        let seq = tone_sequence(&freqs, amp, &phases);
        if n > seq.len() + 2 {
            let offset = rng.random_range(0..n - seq.len());
            add_into(&mut audio, &seq, offset);
        }
    }
    audio
}

/// Generate `n_pos` positives and `n_neg` negatives under `out_dir/wav/`,
/// write `out_dir/manifest.tsv`, and return the manifest.
pub fn synth_toy(out_dir: &Path, n_pos: usize, n_neg: usize, seed: u64) -> Result<Manifest> {
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Config("n_pos and n_neg must be at least 1".into()));
    }
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n_pos + n_neg);
    for i in 0..n_pos {
        let audio = synth_positive(&mut rng);
        let utt_id = format!("pos{i:04}");
        let path = wav_dir.join(format!("{utt_id}.wav"));
        wav::write(&path, &audio)?;
        entries.push(ManifestEntry {
            utt_id,
            audio_path: path,
            label: UtteranceLabel::Positive(0),
            offset_s: 0.0,
            duration_s: audio.len() as f64 / SAMPLE_RATE as f64,
        });
    }
    for i in 0..n_neg {
        let audio = synth_negative(&mut rng, i);
        let utt_id = format!("neg{i:04}");
        let path = wav_dir.join(format!("{utt_id}.wav"));
        wav::write(&path, &audio)?;
        entries.push(ManifestEntry {
            utt_id,
            audio_path: path,
            label: UtteranceLabel::Negative,
            offset_s: 0.0,
            duration_s: audio.len() as f64 / SAMPLE_RATE as f64,
        });
    }
    let manifest = Manifest { entries };
    manifest.validate()?;
    manifest.write(&out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}

/// A small bank of noise sources for augmentation, one category per id
/// prefix (`babble*`, `music*`, `noise*`).
pub fn make_noise_bank(out_dir: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbadc0ffe);
    let mut paths = Vec::new();
    let dur_n = 6 * SAMPLE_RATE as usize;
    for i in 0..3 {
        // babble: many overlapping low tones in noise
        let mut audio = white_noise(&mut rng, dur_n, 0.05);
        for _ in 0..10 {
            let f = rng.random_range(120.0..400.0);
            let t = tone(f, rng.random_range(0.3..1.0), 0.1, rng.random_range(0.0..6.28));
            let off = rng.random_range(0..dur_n - t.len());
            add_into(&mut audio, &t, off);
        }
        let p = out_dir.join(format!("babble{i}.wav"));
        wav::write(&p, &audio)?;
        paths.push(p);
    }
    for i in 0..2 {
        // music: slow arpeggio
        let mut audio = vec![0.0f32; dur_n];
        let mut pos = 0usize;
        while pos < dur_n {
            let f = PALETTE[rng.random_range(0..PALETTE.len())] / 2.0;
            let t = tone(f, 0.4, 0.15, 0.0);
            add_into(&mut audio, &t, pos);
            pos += t.len();
        }
        let p = out_dir.join(format!("music{i}.wav"));
        wav::write(&p, &audio)?;
        paths.push(p);
    }
    for i in 0..3 {
        let amp: f32 = rng.random_range(0.05..0.15);
        let audio = white_noise(&mut rng, dur_n, amp);
        let p = out_dir.join(format!("noise{i}.wav"));
        wav::write(&p, &audio)?;
        paths.push(p);
    }
    Ok(paths)
}
