//! Command-line entry point: corpus preparation, training, alignment export,
//! refinement, streaming decode, evaluation and DET sweeps.
//!
//! Every subcommand writes its outputs under `--run-dir` together with a
//! copy of the resolved configuration, so a run can be reproduced from the
//! directory alone. Exit codes: 0 success, 1 pipeline failure (message on
//! stderr), 2 usage error.

use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wakeword::am::{self, ModelConfig, Tdnnf};
use wakeword::corpus::{
    augment, load_manifest, subsegment_negatives, AugmentPolicy, Manifest, ManifestEntry,
    UtteranceLabel,
};
use wakeword::decoder::{DecoderConfig, OnlineDecoder};
use wakeword::eval::{
    decode_all, det_csv, det_sweep, evaluate, frr_at_fah, monotone_envelope, ScoredUtt,
};
use wakeword::features::{compute_mfcc, MfccConfig};
use wakeword::graphs::{build_decoding_graph, build_topology, write_symbol_tables, PhoneInventory};
use wakeword::lfmmi::LogProbMatrix;
use wakeword::par;
use wakeword::trainer::{
    self, align, read_alignments, write_alignments, Graphs, TrainConfig, TrainUtt,
};
use wakeword::{wav, Error, Result, SUBFRAME_S};

#[derive(Parser)]
#[command(name = "wakeword", about = "Wake-word detection toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic toy corpus (plus a noise bank for augmentation)
    SynthToy {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 500)]
        n_pos: usize,
        #[arg(long, default_value_t = 2000)]
        n_neg: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sub-segment negatives and optionally augment a manifest
    Prepare {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        run_dir: PathBuf,
        /// Split long negatives into positive-length chunks
        #[arg(long)]
        subsegment: bool,
        /// Apply noise/reverb/speed augmentation (needs --noise-dir)
        #[arg(long)]
        augment: bool,
        #[arg(long)]
        noise_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Alignment-free LF-MMI training
    Train(TrainArgs),
    /// Export Viterbi alignments from a trained model
    Align {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regular LF-MMI refinement on top of a trained model
    Refine {
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        alignments: PathBuf,
        /// Checkpoint to initialize from (typically the trained best.ckpt)
        #[arg(long)]
        init: PathBuf,
    },
    /// Stream one recording through the decoder and print detections
    Decode {
        #[arg(long)]
        model: PathBuf,
        /// WAV file, or `-` for raw signed 16-bit little-endian on stdin
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        cost: f64,
        #[arg(long, default_value_t = 40.0)]
        beam: f64,
        #[arg(long, default_value_t = 2000)]
        max_active: usize,
        /// Subsampled frames per decoding chunk
        #[arg(long, default_value_t = 10)]
        chunk_frames: usize,
    },
    /// FRR / FAH at one operating point
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        cost: f64,
        #[arg(long, default_value_t = 40.0)]
        beam: f64,
        #[arg(long, default_value_t = 2000)]
        max_active: usize,
    },
    /// DET sweep over positive-path costs
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Cost grid `lo:step:hi` (inclusive)
        #[arg(long, allow_hyphen_values = true)]
        costs: String,
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, default_value_t = 40.0)]
        beam: f64,
        #[arg(long, default_value_t = 2000)]
        max_active: usize,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    #[arg(long)]
    run_dir: PathBuf,
    /// Key-value config file (defaults < file < flags)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    xent_weight: Option<f64>,
    /// Resume from a last.ckpt written by an interrupted run
    #[arg(long)]
    resume: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // clap exits with code 2 on usage errors
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthToy {
            out_dir,
            n_pos,
            n_neg,
            seed,
        } => {
            let m = wakeword::synth::synth_toy(&out_dir, n_pos, n_neg, seed)?;
            wakeword::synth::make_noise_bank(&out_dir.join("noise"), seed)?;
            write_resolved(
                &out_dir,
                &format!("command=synth-toy\nn_pos={n_pos}\nn_neg={n_neg}\nseed={seed}\n"),
            )?;
            println!(
                "wrote {} utterances under {}",
                m.entries.len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Prepare {
            manifest,
            run_dir,
            subsegment,
            augment: do_augment,
            noise_dir,
            seed,
        } => {
            std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
            let mut m = load_manifest(&manifest)?;
            if subsegment {
                m = subsegment_negatives(&m, seed)?;
            }
            if do_augment {
                let noise_dir = noise_dir
                    .ok_or_else(|| Error::Config("--augment requires --noise-dir".into()))?;
                let noise = manifest_from_dir(&noise_dir)?;
                let policy = AugmentPolicy {
                    seed,
                    ..AugmentPolicy::default()
                };
                m = augment(&m, &noise, &policy, &run_dir.join("aug_wav"))?;
            }
            let out = run_dir.join("prepared.tsv");
            m.write(&out)?;
            write_resolved(
                &run_dir,
                &format!(
                    "command=prepare\nmanifest={}\nsubsegment={subsegment}\naugment={do_augment}\nseed={seed}\n",
                    manifest.display()
                ),
            )?;
            println!("wrote {} ({} utterances)", out.display(), m.entries.len());
            Ok(())
        }
        Command::Train(args) => {
            let (cfg, train_m, dev_m) = resolve_train(&args)?;
            let graphs = Graphs::build(
                num_wake_words(&train_m)?,
                train_m.num_positive(),
                train_m.num_negative(),
            )?;
            let model_cfg = ModelConfig::with_outputs(graphs.topo.num_pdfs());
            let train_utts = load_features(&train_m)?;
            let dev_utts = load_features(&dev_m)?;
            write_symbol_tables(&args.run_dir, &graphs.topo)?;
            let out = trainer::train(
                &cfg,
                model_cfg,
                &graphs,
                &train_utts,
                &dev_utts,
                &args.run_dir,
                args.resume.as_deref(),
            )?;
            for l in &out.log {
                println!("{}\t{:.6}\t{:.6}", l.epoch, l.train_loss, l.dev_loss);
            }
            println!("best dev loss {:.6} -> {}", out.best_dev, out.checkpoint.display());
            Ok(())
        }
        Command::Align {
            model,
            manifest,
            out,
        } => {
            let (model, _) = am::load_checkpoint::<f32>(&model)?;
            let m = load_manifest(&manifest)?;
            let graphs = Graphs::build(
                num_wake_words_from_outputs(model.cfg.outputs)?,
                m.num_positive().max(1),
                m.num_negative().max(1),
            )?;
            let utts = load_features(&m)?;
            let alis = align(&model, &graphs, &utts)?;
            write_alignments(&out, &alis)?;
            println!("wrote {} alignments to {}", alis.len(), out.display());
            Ok(())
        }
        Command::Refine {
            train: args,
            alignments,
            init,
        } => {
            let (cfg, train_m, dev_m) = resolve_train(&args)?;
            let graphs = Graphs::build(
                num_wake_words(&train_m)?,
                train_m.num_positive(),
                train_m.num_negative(),
            )?;
            let model_cfg = ModelConfig::with_outputs(graphs.topo.num_pdfs());
            let train_utts = load_features(&train_m)?;
            let dev_utts = load_features(&dev_m)?;
            let alis = read_alignments(&alignments)?;
            let out = trainer::train_refine(
                &cfg,
                model_cfg,
                &graphs,
                &train_utts,
                &dev_utts,
                &alis,
                &args.run_dir,
                Some(&init),
            )?;
            for l in &out.log {
                println!("{}\t{:.6}\t{:.6}", l.epoch, l.train_loss, l.dev_loss);
            }
            println!("best dev loss {:.6} -> {}", out.best_dev, out.checkpoint.display());
            Ok(())
        }
        Command::Decode {
            model,
            input,
            cost,
            beam,
            max_active,
            chunk_frames,
        } => {
            let (model, _) = am::load_checkpoint::<f32>(&model)?;
            let inv = PhoneInventory::new(num_wake_words_from_outputs(model.cfg.outputs)?)?;
            let topo = build_topology(&inv, 4, 1)?;
            let graph = build_decoding_graph(&topo, cost)?;
            let audio = if input == "-" {
                read_pcm_stdin()?
            } else {
                wav::read(Path::new(&input))?
            };
            let scores = model_scores(&model, &audio)?;
            let mut dec = OnlineDecoder::new(&graph, DecoderConfig { beam, max_active })?;
            let mut detected = false;
            let chunk = chunk_frames.max(1);
            let mut f = 0;
            while f < scores.nrows() {
                let hi = (f + chunk).min(scores.nrows());
                let events = dec.process_chunk(scores.slice(ndarray::s![f..hi, ..]))?;
                detected |= print_detections(&inv, &events);
                f = hi;
            }
            let (tail, _) = dec.finish();
            detected |= print_detections(&inv, &tail);
            if !detected {
                println!("END\tno-detection");
            }
            Ok(())
        }
        Command::Eval {
            model,
            manifest,
            cost,
            beam,
            max_active,
        } => {
            let (model, _) = am::load_checkpoint::<f32>(&model)?;
            let m = load_manifest(&manifest)?;
            let inv = PhoneInventory::new(num_wake_words_from_outputs(model.cfg.outputs)?)?;
            let topo = build_topology(&inv, 4, 1)?;
            let scored = score_manifest(&model, &m)?;
            let dets = decode_all(&scored, &topo, &DecoderConfig { beam, max_active }, cost)?;
            let r = evaluate(&dets)?;
            println!(
                "cost {cost}: FRR {:.2}% ({} of {} missed), FAH {:.3} ({} false alarms over {:.2} h)",
                r.frr_percent, r.num_missed, r.num_positives, r.fah_per_hour,
                r.num_false_alarms, r.negative_hours
            );
            Ok(())
        }
        Command::Sweep {
            model,
            manifest,
            costs,
            run_dir,
            beam,
            max_active,
        } => {
            std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
            let (model, _) = am::load_checkpoint::<f32>(&model)?;
            let m = load_manifest(&manifest)?;
            let inv = PhoneInventory::new(num_wake_words_from_outputs(model.cfg.outputs)?)?;
            let topo = build_topology(&inv, 4, 1)?;
            let grid = parse_cost_grid(&costs)?;
            let scored = score_manifest(&model, &m)?;
            let points = det_sweep(&scored, &topo, &DecoderConfig { beam, max_active }, &grid)?;
            let raw_path = run_dir.join("det.csv");
            std::fs::write(&raw_path, det_csv(&points)).map_err(|e| Error::io(&raw_path, e))?;
            let env = monotone_envelope(&points);
            let env_path = run_dir.join("det_envelope.csv");
            std::fs::write(&env_path, det_csv(&env)).map_err(|e| Error::io(&env_path, e))?;
            write_resolved(&run_dir, &format!("command=sweep\ncosts={costs}\nbeam={beam}\nmax_active={max_active}\n"))?;
            println!("{} points -> {}", points.len(), raw_path.display());
            if let Some(frr) = frr_at_fah(&env, 0.5) {
                println!("FRR at 0.5 FAH: {frr:.2}%");
            }
            if let Some(frr) = frr_at_fah(&env, 1.0) {
                println!("FRR at 1.0 FAH: {frr:.2}%");
            }
            Ok(())
        }
    }
}

fn print_detections(inv: &PhoneInventory, events: &[wakeword::decoder::Event]) -> bool {
    let mut any = false;
    for e in events {
        if e.word < inv.num_wake_words {
            println!(
                "DETECTED\t{}\t{:.2}",
                inv.phone_name(e.word),
                e.frame as f64 * SUBFRAME_S
            );
            any = true;
        }
    }
    any
}

fn write_resolved(dir: &Path, text: &str) -> Result<()> {
    let p = dir.join("resolved.conf");
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
}

/// Defaults < config file < flags; persists the resolved config.
fn resolve_train(args: &TrainArgs) -> Result<(TrainConfig, Manifest, Manifest)> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            TrainConfig::from_kv(&text)?
        }
        None => TrainConfig::default(),
    };
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.lr {
        cfg.lr = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.xent_weight {
        cfg.xent_weight = v;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&args.run_dir).map_err(|e| Error::io(&args.run_dir, e))?;
    let resolved = args.run_dir.join("train.conf");
    std::fs::write(&resolved, cfg.to_kv()).map_err(|e| Error::io(&resolved, e))?;
    let train_m = load_manifest(&args.train)?;
    let dev_m = load_manifest(&args.dev)?;
    Ok((cfg, train_m, dev_m))
}

fn num_wake_words(m: &Manifest) -> Result<usize> {
    let n = m.num_wake_words();
    if n == 0 {
        return Err(Error::Manifest("manifest has no positive utterances".into()));
    }
    Ok(n)
}

/// Invert `num_pdfs` back to the wake-word count for the standard topology
/// (4 emitting states per word, 1 for SIL).
fn num_wake_words_from_outputs(outputs: usize) -> Result<usize> {
    for k in 1..=64 {
        let inv = PhoneInventory::new(k)?;
        let topo = build_topology(&inv, 4, 1)?;
        if topo.num_pdfs() == outputs {
            return Ok(k);
        }
    }
    Err(Error::Model(format!(
        "cannot infer wake-word count from {outputs} model outputs"
    )))
}

fn load_features(m: &Manifest) -> Result<Vec<TrainUtt>> {
    let cfg = MfccConfig::default();
    let results = par::map_slice(&m.entries, |e| -> Result<TrainUtt> {
        let audio = e.load_audio()?;
        Ok(TrainUtt {
            utt_id: e.utt_id.clone(),
            label: e.label,
            feats: compute_mfcc(&audio, &cfg)?,
        })
    });
    results.into_iter().collect()
}

fn model_scores(model: &Tdnnf<f32>, audio: &[f32]) -> Result<LogProbMatrix> {
    let feats = compute_mfcc(audio, &MfccConfig::default())?;
    let (mmi, _) = model.forward(&feats)?;
    Ok(mmi.mapv(|v| v as f64))
}

fn score_manifest(model: &Tdnnf<f32>, m: &Manifest) -> Result<Vec<ScoredUtt>> {
    let results = par::map_slice(&m.entries, |e| -> Result<ScoredUtt> {
        let audio = e.load_audio()?;
        Ok(ScoredUtt {
            utt_id: e.utt_id.clone(),
            label: e.label,
            duration_s: e.duration_s,
            scores: model_scores(model, &audio)?,
        })
    });
    results.into_iter().collect()
}

/// Inclusive `lo:step:hi` grid.
fn parse_cost_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("bad cost grid {spec:?}, expected lo:step:hi"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let step: f64 = parts[1].parse().map_err(|_| bad())?;
    let hi: f64 = parts[2].parse().map_err(|_| bad())?;
    if !(step > 0.0) || hi < lo {
        return Err(bad());
    }
    let mut grid = Vec::new();
    let mut i = 0usize;
    loop {
        let v = lo + i as f64 * step;
        if v > hi + 1e-9 {
            break;
        }
        grid.push(v);
        i += 1;
    }
    Ok(grid)
}

fn manifest_from_dir(dir: &Path) -> Result<Manifest> {
    let mut entries = Vec::new();
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "wav"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Manifest(format!("no .wav files in {}", dir.display())));
    }
    for p in paths {
        let utt_id = p.file_stem().unwrap().to_string_lossy().to_string();
        let duration_s = wav::duration_s(&p)?;
        entries.push(ManifestEntry {
            utt_id,
            audio_path: p,
            label: UtteranceLabel::Negative,
            offset_s: 0.0,
            duration_s,
        });
    }
    Ok(Manifest { entries })
}

fn read_pcm_stdin() -> Result<Vec<f32>> {
    let mut buf = Vec::new();
    std::io::stdin()
        .read_to_end(&mut buf)
        .map_err(|e| Error::io("<stdin>", e))?;
    Ok(buf
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
        .collect())
}
