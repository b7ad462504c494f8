//! Dataset manifests, negative-recording sub-segmentation, and
//! SNR-controlled data augmentation with speed perturbation.
//!
//! Manifest files are UTF-8, one record per line:
//! `utt_id<TAB>audio_path<TAB>label<TAB>offset_s<TAB>duration_s`
//! with label `neg` or `pos:<k>`. A duration of `-` is read from the audio
//! header. Chunks produced by sub-segmentation are realized as
//! (offset, length) views into the source audio, not copied files.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{par, wav, Error, Result, SAMPLE_RATE};

/// Overlap between successive negative chunks, in seconds.
pub const CHUNK_OVERLAP_S: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UtteranceLabel {
    Negative,
    Positive(usize),
}

impl UtteranceLabel {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "neg" {
            Some(UtteranceLabel::Negative)
        } else {
            let k = s.strip_prefix("pos:")?.parse().ok()?;
            Some(UtteranceLabel::Positive(k))
        }
    }

    pub fn is_positive(&self) -> bool {
        matches!(self, UtteranceLabel::Positive(_))
    }
}

impl std::fmt::Display for UtteranceLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UtteranceLabel::Negative => write!(f, "neg"),
            UtteranceLabel::Positive(k) => write!(f, "pos:{k}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub audio_path: PathBuf,
    pub label: UtteranceLabel,
    /// Offset into the source audio, seconds.
    pub offset_s: f64,
    pub duration_s: f64,
}

impl ManifestEntry {
    /// Load this entry's samples (honoring offset and duration).
    pub fn load_audio(&self) -> Result<Vec<f32>> {
        let offset = (self.offset_s * SAMPLE_RATE as f64).round() as usize;
        let len = (self.duration_s * SAMPLE_RATE as f64).round() as usize;
        wav::read_segment(&self.audio_path, offset, len)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_positive(&self) -> usize {
        self.entries.iter().filter(|e| e.label.is_positive()).count()
    }

    pub fn num_negative(&self) -> usize {
        self.len() - self.num_positive()
    }

    /// Largest wake word index plus one, or 0 if no positives.
    pub fn num_wake_words(&self) -> usize {
        self.entries
            .iter()
            .filter_map(|e| match e.label {
                UtteranceLabel::Positive(k) => Some(k + 1),
                UtteranceLabel::Negative => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.utt_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate utt_id {}", e.utt_id)));
            }
            if !(e.duration_s > 0.0) {
                return Err(Error::Manifest(format!(
                    "utterance {} has non-positive duration {}",
                    e.utt_id, e.duration_s
                )));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{:.6}",
                e.utt_id,
                e.audio_path.display(),
                e.label,
                e.offset_s,
                e.duration_s
            )
            .unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Load and validate a manifest file. Missing durations (`-`) are read from
/// the audio headers; audio files named by records with missing durations
/// must exist.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 tab-separated fields, got {}", fields.len())));
        }
        let label = UtteranceLabel::parse(fields[2])
            .ok_or_else(|| err(format!("unknown label token {:?}", fields[2])))?;
        let offset_s: f64 = fields[3]
            .parse()
            .map_err(|_| err(format!("bad offset {:?}", fields[3])))?;
        let audio_path = PathBuf::from(fields[1]);
        let duration_s = if fields[4] == "-" {
            wav::duration_s(&audio_path)? - offset_s
        } else {
            fields[4]
                .parse()
                .map_err(|_| err(format!("bad duration {:?}", fields[4])))?
        };
        entries.push(ManifestEntry {
            utt_id: fields[0].to_string(),
            audio_path,
            label,
            offset_s,
            duration_s,
        });
    }
    if entries.is_empty() {
        eprintln!("warning: empty manifest {}", path.display());
    }
    let m = Manifest { entries };
    m.validate()?;
    Ok(m)
}

fn stable_hash(s: &str) -> u64 {
    // FNV-1a; stable across platforms and releases.
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn entry_rng(seed: u64, utt_id: &str, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ stable_hash(utt_id).rotate_left(17) ^ salt)
}

/// Replace long negative recordings by overlapping chunks whose lengths are
/// i.i.d. draws from the empirical distribution of positive durations.
/// Consecutive chunks overlap exactly [`CHUNK_OVERLAP_S`]; a short final
/// remainder chunk is kept. Positives pass through unchanged.
pub fn subsegment_negatives(m: &Manifest, rng_seed: u64) -> Result<Manifest> {
    let positive_durations: Vec<f64> = m
        .entries
        .iter()
        .filter(|e| e.label.is_positive())
        .map(|e| e.duration_s)
        .collect();
    if positive_durations.is_empty() {
        return Err(Error::Manifest(
            "sub-segmentation needs at least one positive entry".into(),
        ));
    }
    let mut entries = Vec::new();
    for e in &m.entries {
        if e.label.is_positive() {
            entries.push(e.clone());
            continue;
        }
        if !(e.duration_s > 0.0) {
            return Err(Error::Manifest(format!(
                "negative utterance {} has non-positive duration",
                e.utt_id
            )));
        }
        let mut rng = entry_rng(rng_seed, &e.utt_id, 0x5e6);
        let mut start = 0.0f64;
        let mut idx = 0usize;
        loop {
            let len = positive_durations[rng.random_range(0..positive_durations.len())];
            let end = start + len;
            let (chunk_len, last) = if end >= e.duration_s {
                (e.duration_s - start, true)
            } else {
                (len, false)
            };
            entries.push(ManifestEntry {
                utt_id: format!("{}-c{:03}", e.utt_id, idx),
                audio_path: e.audio_path.clone(),
                label: UtteranceLabel::Negative,
                offset_s: e.offset_s + start,
                duration_s: chunk_len,
            });
            if last {
                break;
            }
            start = end - CHUNK_OVERLAP_S;
            idx += 1;
        }
    }
    entries.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
    let out = Manifest { entries };
    out.validate()?;
    Ok(out)
}

/// SNR-controlled augmentation policy; ranges are inclusive.
#[derive(Debug, Clone)]
pub struct AugmentPolicy {
    pub babble_count_range: (usize, usize),
    pub babble_snr_db_range: (f64, f64),
    pub music_count: usize,
    pub music_snr_db_range: (f64, f64),
    pub noise_interval_s: f64,
    pub noise_snr_db_range: (f64, f64),
    pub reverb_decay_s_range: (f64, f64),
    pub speed_factors: Vec<f64>,
    pub seed: u64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            babble_count_range: (3, 7),
            babble_snr_db_range: (13.0, 20.0),
            music_count: 1,
            music_snr_db_range: (5.0, 15.0),
            noise_interval_s: 1.0,
            noise_snr_db_range: (0.0, 15.0),
            reverb_decay_s_range: (0.2, 0.8),
            speed_factors: vec![0.9, 1.0, 1.1],
            seed: 0,
        }
    }
}

impl AugmentPolicy {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("babble", self.babble_snr_db_range),
            ("music", self.music_snr_db_range),
            ("noise", self.noise_snr_db_range),
        ] {
            if lo > hi {
                return Err(Error::Manifest(format!("{name} SNR range inverted")));
            }
        }
        if self.speed_factors.iter().any(|&f| f <= 0.0) {
            return Err(Error::Manifest("speed factors must be positive".into()));
        }
        Ok(())
    }
}

fn power(x: &[f32]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / x.len() as f64
}

/// Gain to apply to noise with power `p_noise` so the mixture has the given
/// SNR against signal power `p_signal`.
pub fn snr_gain(p_signal: f64, p_noise: f64, snr_db: f64) -> f64 {
    (p_signal.max(1e-12) / (p_noise.max(1e-12) * 10f64.powf(snr_db / 10.0))).sqrt()
}

fn cycle_to_len(src: &[f32], len: usize, start: usize) -> Vec<f32> {
    (0..len).map(|i| src[(start + i) % src.len()]).collect()
}

/// Mix `noise` into `signal` (cycled to length) at the given SNR.
pub fn mix_at_snr(signal: &mut [f32], noise: &[f32], snr_db: f64, noise_start: usize) {
    let n = cycle_to_len(noise, signal.len(), noise_start);
    let g = snr_gain(power(signal), power(&n), snr_db) as f32;
    for (s, v) in signal.iter_mut().zip(&n) {
        *s += g * v;
    }
}

/// Linear-interpolation resampling: playback at `factor` times real time,
/// so the output duration is `len / factor`.
pub fn speed_perturb(x: &[f32], factor: f64) -> Vec<f32> {
    let out_len = (x.len() as f64 / factor).floor() as usize;
    (0..out_len)
        .map(|n| {
            let pos = n as f64 * factor;
            let i = pos.floor() as usize;
            let frac = (pos - i as f64) as f32;
            let a = x[i.min(x.len() - 1)];
            let b = x[(i + 1).min(x.len() - 1)];
            a + (b - a) * frac
        })
        .collect()
}

/// Parametric synthetic reverb: convolution with an exponentially decaying
/// noise kernel, output rescaled to the input power.
pub fn synth_reverb(x: &[f32], decay_s: f64, rng: &mut impl RngExt) -> Vec<f32> {
    let klen = ((decay_s * 3.0 * SAMPLE_RATE as f64) as usize).clamp(32, x.len().max(32));
    let tau = decay_s * SAMPLE_RATE as f64;
    let mut kernel: Vec<f64> = (0..klen)
        .map(|n| {
            let g: f64 = rng.random_range(-1.0..1.0);
            g * (-(n as f64) / tau).exp()
        })
        .collect();
    kernel[0] = 1.0; // direct path
    let e: f64 = kernel.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in kernel.iter_mut() {
        *v /= e;
    }
    let out = fft_convolve(x, &kernel);
    let p_in = power(x);
    let p_out = power(&out[..x.len()]);
    let g = (p_in.max(1e-12) / p_out.max(1e-12)).sqrt() as f32;
    out[..x.len()].iter().map(|&v| v * g).collect()
}

fn fft_convolve(x: &[f32], kernel: &[f64]) -> Vec<f32> {
    use rustfft::num_complex::Complex64;
    let n = (x.len() + kernel.len() - 1).next_power_of_two();
    let mut planner = rustfft::FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex64> = x
        .iter()
        .map(|&v| Complex64::new(v as f64, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    let mut b: Vec<Complex64> = kernel
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(n)
        .collect();
    fft.process(&mut a);
    fft.process(&mut b);
    for (av, bv) in a.iter_mut().zip(&b) {
        *av *= bv;
    }
    ifft.process(&mut a);
    a[..x.len()].iter().map(|c| (c.re / n as f64) as f32).collect()
}

struct NoiseBank {
    babble: Vec<Vec<f32>>,
    music: Vec<Vec<f32>>,
    noise: Vec<Vec<f32>>,
}

impl NoiseBank {
    fn load(noise_sources: &Manifest) -> Result<Self> {
        let mut bank = NoiseBank {
            babble: Vec::new(),
            music: Vec::new(),
            noise: Vec::new(),
        };
        for e in &noise_sources.entries {
            let audio = e.load_audio()?;
            if e.utt_id.starts_with("babble") {
                bank.babble.push(audio);
            } else if e.utt_id.starts_with("music") {
                bank.music.push(audio);
            } else if e.utt_id.starts_with("noise") {
                bank.noise.push(audio);
            } else {
                return Err(Error::Manifest(format!(
                    "noise source {} must be named babble*/music*/noise*",
                    e.utt_id
                )));
            }
        }
        for (name, v) in [
            ("babble", &bank.babble),
            ("music", &bank.music),
            ("noise", &bank.noise),
        ] {
            if v.is_empty() {
                return Err(Error::Manifest(format!("no {name} noise sources")));
            }
        }
        Ok(bank)
    }
}

/// Emit the original manifest plus babble/music/noise/reverb copies and two
/// extra speed-perturbed copies of the originals (about 7x the input).
/// Augmented audio is written under `out_dir`; the result is a pure function
/// of (input, policy), sorted by utt_id.
pub fn augment(
    m: &Manifest,
    noise_sources: &Manifest,
    policy: &AugmentPolicy,
    out_dir: &Path,
) -> Result<Manifest> {
    policy.validate()?;
    let bank = NoiseBank::load(noise_sources)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let results = par::map_slice(&m.entries, |e| augment_entry(e, &bank, policy, out_dir));
    let mut entries = Vec::new();
    for r in results {
        entries.extend(r?);
    }
    entries.sort_by(|a, b| a.utt_id.cmp(&b.utt_id));
    let out = Manifest { entries };
    out.validate()?;
    Ok(out)
}

fn augment_entry(
    e: &ManifestEntry,
    bank: &NoiseBank,
    policy: &AugmentPolicy,
    out_dir: &Path,
) -> Result<Vec<ManifestEntry>> {
    let audio = e.load_audio()?;
    let mut out = vec![e.clone()];
    let mut emit = |suffix: &str, samples: &[f32]| -> Result<()> {
        let utt_id = format!("{}-{suffix}", e.utt_id);
        let path = out_dir.join(format!("{utt_id}.wav"));
        wav::write(&path, samples)?;
        out.push(ManifestEntry {
            utt_id,
            audio_path: path,
            label: e.label,
            offset_s: 0.0,
            duration_s: samples.len() as f64 / SAMPLE_RATE as f64,
        });
        Ok(())
    };

    // babble: 3-7 background speakers
    let mut rng = entry_rng(policy.seed, &e.utt_id, 1);
    let mut mixed = audio.clone();
    let count = rng.random_range(policy.babble_count_range.0..=policy.babble_count_range.1);
    for _ in 0..count {
        let src = &bank.babble[rng.random_range(0..bank.babble.len())];
        let snr = rng.random_range(policy.babble_snr_db_range.0..=policy.babble_snr_db_range.1);
        let start = rng.random_range(0..src.len());
        mix_at_snr(&mut mixed, src, snr, start);
    }
    emit("bab", &mixed)?;

    // music: background, once
    let mut rng = entry_rng(policy.seed, &e.utt_id, 2);
    let mut mixed = audio.clone();
    for _ in 0..policy.music_count {
        let src = &bank.music[rng.random_range(0..bank.music.len())];
        let snr = rng.random_range(policy.music_snr_db_range.0..=policy.music_snr_db_range.1);
        let start = rng.random_range(0..src.len());
        mix_at_snr(&mut mixed, src, snr, start);
    }
    emit("mus", &mixed)?;

    // noise: foreground snippets at fixed intervals
    let mut rng = entry_rng(policy.seed, &e.utt_id, 3);
    let mut mixed = audio.clone();
    let interval = (policy.noise_interval_s * SAMPLE_RATE as f64) as usize;
    let p_signal = power(&audio);
    let mut pos = 0;
    while pos < mixed.len() {
        let src = &bank.noise[rng.random_range(0..bank.noise.len())];
        let snr = rng.random_range(policy.noise_snr_db_range.0..=policy.noise_snr_db_range.1);
        let len = interval.min(mixed.len() - pos);
        let start = rng.random_range(0..src.len());
        let snippet = cycle_to_len(src, len, start);
        let g = snr_gain(p_signal, power(&snippet), snr) as f32;
        for (s, v) in mixed[pos..pos + len].iter_mut().zip(&snippet) {
            *s += g * v;
        }
        pos += interval;
    }
    emit("noi", &mixed)?;

    // synthetic reverb
    let mut rng = entry_rng(policy.seed, &e.utt_id, 4);
    let decay = rng.random_range(policy.reverb_decay_s_range.0..=policy.reverb_decay_s_range.1);
    let reverbed = synth_reverb(&audio, decay, &mut rng);
    emit("rev", &reverbed)?;

    // speed perturbation (factors other than 1.0)
    for &f in &policy.speed_factors {
        if (f - 1.0).abs() < 1e-9 {
            continue;
        }
        emit(&format!("sp{f}"), &speed_perturb(&audio, f))?;
    }
    Ok(out)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        let fa = i as f64 / a.len() as f64;
        let fb = j as f64 / b.len() as f64;
        d = d.max((fa - fb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, label: UtteranceLabel, dur: f64) -> ManifestEntry {
        ManifestEntry {
            utt_id: id.into(),
            audio_path: PathBuf::from(format!("{id}.wav")),
            label,
            offset_s: 0.0,
            duration_s: dur,
        }
    }

    #[test]
    fn manifest_parse_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        std::fs::write(
            &path,
            "u1\ta.wav\tpos:0\t0.0\t2.0\nu2\tb.wav\tneg\t0.0\t3.0\nu3\tc.wav\tneg\t1.0\t0.5\n",
        )
        .unwrap();
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.entries[0].label, UtteranceLabel::Positive(0));

        std::fs::write(&path, "").unwrap();
        assert_eq!(load_manifest(&path).unwrap().len(), 0);

        std::fs::write(&path, "u1\ta.wav\tmaybe\t0.0\t2.0\n").unwrap();
        let err = load_manifest(&path).unwrap_err().to_string();
        assert!(err.contains(":1:"), "{err}");
        assert!(err.contains("maybe"));

        std::fs::write(&path, "u1\ta.wav\tneg\t0\t1\nu1\tb.wav\tneg\t0\t1\n").unwrap();
        assert!(load_manifest(&path).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn fixed_chunk_overlap() {
        // all positives 2.0 s -> chunks [0,2.0],[1.7,3.7],[3.4,5.4],...
        let m = Manifest {
            entries: vec![
                entry("p1", UtteranceLabel::Positive(0), 2.0),
                entry("n1", UtteranceLabel::Negative, 10.0),
            ],
        };
        let out = subsegment_negatives(&m, 7).unwrap();
        let chunks: Vec<&ManifestEntry> =
            out.entries.iter().filter(|e| e.utt_id.starts_with("n1")).collect();
        for (i, c) in chunks.iter().enumerate() {
            assert!((c.offset_s - i as f64 * 1.7).abs() < 1e-9);
            assert_eq!(c.label, UtteranceLabel::Negative);
            if i + 1 < chunks.len() {
                assert!((c.duration_s - 2.0).abs() < 1e-9);
                // exactly 0.3 s overlap with the next chunk
                let end = c.offset_s + c.duration_s;
                assert!((end - chunks[i + 1].offset_s - CHUNK_OVERLAP_S).abs() < 1e-9);
            }
        }
        // chunk count formula against the greedy chunker
        let expect = ((10.0_f64 - 0.3) / (2.0 - 0.3)).ceil() as usize;
        assert_eq!(chunks.len(), expect);
    }

    #[test]
    fn short_negative_single_chunk() {
        let m = Manifest {
            entries: vec![
                entry("p1", UtteranceLabel::Positive(0), 2.0),
                entry("n1", UtteranceLabel::Negative, 0.8),
            ],
        };
        let out = subsegment_negatives(&m, 3).unwrap();
        let chunks: Vec<&ManifestEntry> =
            out.entries.iter().filter(|e| e.utt_id.starts_with("n1")).collect();
        assert_eq!(chunks.len(), 1);
        assert!((chunks[0].duration_s - 0.8).abs() < 1e-9);
        assert_eq!(chunks[0].offset_s, 0.0);
    }

    #[test]
    fn chunk_count_formula_randomized() {
        // for fixed chunk length c and recording length L:
        // count = ceil((L - v) / (c - v)), verified against greedy simulation
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let c: f64 = rng.random_range(1.0..3.0);
            let l: f64 = rng.random_range(3.0..40.0);
            let v = CHUNK_OVERLAP_S;
            let m = Manifest {
                entries: vec![
                    entry("p1", UtteranceLabel::Positive(0), c),
                    entry("n1", UtteranceLabel::Negative, l),
                ],
            };
            let out = subsegment_negatives(&m, 0).unwrap();
            let got = out.entries.iter().filter(|e| e.utt_id.starts_with("n1")).count();
            let expect = ((l - v) / (c - v)).ceil().max(1.0) as usize;
            assert_eq!(got, expect, "c={c} l={l}");
        }
    }

    #[test]
    fn coverage_and_no_positive_chunks() {
        let m = Manifest {
            entries: vec![
                entry("p1", UtteranceLabel::Positive(0), 1.5),
                entry("p2", UtteranceLabel::Positive(0), 2.5),
                entry("n1", UtteranceLabel::Negative, 23.0),
            ],
        };
        let out = subsegment_negatives(&m, 42).unwrap();
        let mut chunks: Vec<(f64, f64)> = out
            .entries
            .iter()
            .filter(|e| e.utt_id.starts_with("n1"))
            .inspect(|e| assert_eq!(e.label, UtteranceLabel::Negative))
            .map(|e| (e.offset_s, e.offset_s + e.duration_s))
            .collect();
        chunks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // every sample covered by at least one chunk
        assert_eq!(chunks[0].0, 0.0);
        for w in chunks.windows(2) {
            assert!(w[1].0 <= w[0].1 + 1e-9);
        }
        assert!((chunks.last().unwrap().1 - 23.0).abs() < 1e-9);
    }

    #[test]
    fn subsegment_deterministic() {
        let m = Manifest {
            entries: vec![
                entry("p1", UtteranceLabel::Positive(0), 1.5),
                entry("p2", UtteranceLabel::Positive(0), 2.5),
                entry("n1", UtteranceLabel::Negative, 30.0),
            ],
        };
        let a = subsegment_negatives(&m, 9).unwrap();
        let b = subsegment_negatives(&m, 9).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        let c = subsegment_negatives(&m, 10).unwrap();
        assert_ne!(a.to_text(), c.to_text());
    }

    #[test]
    fn no_positives_errors() {
        let m = Manifest {
            entries: vec![entry("n1", UtteranceLabel::Negative, 5.0)],
        };
        assert!(subsegment_negatives(&m, 0).is_err());
    }

    #[test]
    fn snr_mixing_measured() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let signal: Vec<f32> = (0..16000)
            .map(|n| 0.3 * (2.0 * std::f32::consts::PI * 350.0 * n as f32 / 16000.0).sin())
            .collect();
        let noise: Vec<f32> = (0..16000).map(|_| rng.random_range(-0.1..0.1)).collect();
        let mut mixed = signal.clone();
        mix_at_snr(&mut mixed, &noise, 13.0, 0);
        // recompute powers from the mixed waveform
        let added: Vec<f32> = mixed.iter().zip(&signal).map(|(m, s)| m - s).collect();
        let measured = 10.0 * (power(&signal) / power(&added)).log10();
        assert!((measured - 13.0).abs() < 0.01, "measured {measured}");
    }

    #[test]
    fn speed_perturb_duration() {
        let x = vec![0.0f32; 32000]; // 2.0 s
        let y = speed_perturb(&x, 0.9);
        let dur = y.len() as f64 / SAMPLE_RATE as f64;
        assert!((dur - 2.0 / 0.9).abs() < 1e-3, "{dur}");
    }

    #[test]
    fn ks_statistic_sane() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        assert!(ks_statistic(&a, &a) < 1e-9);
        let b: Vec<f64> = a.iter().map(|v| v + 10.0).collect();
        assert!((ks_statistic(&a, &b) - 1.0).abs() < 1e-9);
    }
}
