//! Mini-batch LF-MMI training, Viterbi alignment export, and the regular
//! (tolerance-banded) LF-MMI refinement stage.
//!
//! Each batch evaluates per-utterance losses and gradients in parallel
//! through [`par::map_slice`], then reduces them in input order, so training
//! is bit-reproducible for a fixed seed regardless of thread count.
//! Utterances are bucketed by duration (sorted, then chunked) and the batch
//! order is shuffled by a `ChaCha8` stream keyed on `(seed, epoch)` only.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::am::{self, Gradients, ModelConfig, NormBatchStats, Tdnnf};
use crate::corpus::UtteranceLabel;
use crate::graphs::{
    build_denominator_graph, build_numerator_graph, build_phone_lm, build_topology,
    HmmTopology, PhoneInventory, PhoneLmProbs, Wfst, EPS,
};
use crate::lfmmi::{forward_backward, tolerance_mask, xent_regularizer, LogProbMatrix};
use crate::par;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Per-epoch multiplicative learning-rate decay.
    pub lr_decay: f64,
    pub momentum: f64,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    /// Cross-entropy regularizer weight.
    pub xent_weight: f64,
    /// L2 penalty on the raw LF-MMI head scores. Keeps scores for contexts
    /// the numerator/denominator graphs never visit pinned near zero instead
    /// of drifting arbitrarily high, which matters at decoding time.
    pub out_l2: f64,
    /// Tolerance band (subsampled frames) for refinement numerators.
    pub tolerance: usize,
    pub seed: u64,
    /// Stop after this many epochs without dev improvement.
    pub patience: usize,
    /// Apply the semi-orthogonal constraint every this many optimizer steps.
    pub constrain_interval: usize,
    /// Abort if more than this fraction of an epoch's utterances fail their
    /// numerator forward-backward.
    pub max_skip_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 16,
            lr: 0.02,
            lr_decay: 0.9,
            momentum: 0.9,
            clip_norm: 5.0,
            xent_weight: 0.1,
            out_l2: 0.0,
            tolerance: 5,
            seed: 0,
            patience: 5,
            constrain_interval: 4,
            max_skip_fraction: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "epochs={}", self.epochs).unwrap();
        writeln!(s, "batch_size={}", self.batch_size).unwrap();
        writeln!(s, "lr={}", self.lr).unwrap();
        writeln!(s, "lr_decay={}", self.lr_decay).unwrap();
        writeln!(s, "momentum={}", self.momentum).unwrap();
        writeln!(s, "clip_norm={}", self.clip_norm).unwrap();
        writeln!(s, "xent_weight={}", self.xent_weight).unwrap();
        writeln!(s, "out_l2={}", self.out_l2).unwrap();
        writeln!(s, "tolerance={}", self.tolerance).unwrap();
        writeln!(s, "seed={}", self.seed).unwrap();
        writeln!(s, "patience={}", self.patience).unwrap();
        writeln!(s, "constrain_interval={}", self.constrain_interval).unwrap();
        writeln!(s, "max_skip_fraction={}", self.max_skip_fraction).unwrap();
        s
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let bad = || Error::Config(format!("bad value for {k}: {v}"));
            match k.trim() {
                "epochs" => cfg.epochs = v.trim().parse().map_err(|_| bad())?,
                "batch_size" => cfg.batch_size = v.trim().parse().map_err(|_| bad())?,
                "lr" => cfg.lr = v.trim().parse().map_err(|_| bad())?,
                "lr_decay" => cfg.lr_decay = v.trim().parse().map_err(|_| bad())?,
                "momentum" => cfg.momentum = v.trim().parse().map_err(|_| bad())?,
                "clip_norm" => cfg.clip_norm = v.trim().parse().map_err(|_| bad())?,
                "xent_weight" => cfg.xent_weight = v.trim().parse().map_err(|_| bad())?,
                "out_l2" => cfg.out_l2 = v.trim().parse().map_err(|_| bad())?,
                "tolerance" => cfg.tolerance = v.trim().parse().map_err(|_| bad())?,
                "seed" => cfg.seed = v.trim().parse().map_err(|_| bad())?,
                "patience" => cfg.patience = v.trim().parse().map_err(|_| bad())?,
                "constrain_interval" => {
                    cfg.constrain_interval = v.trim().parse().map_err(|_| bad())?
                }
                "max_skip_fraction" => {
                    cfg.max_skip_fraction = v.trim().parse().map_err(|_| bad())?
                }
                other => return Err(Error::Config(format!("unknown config key {other}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lr >= 0.0) || !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config("lr must be >= 0 and lr_decay in (0,1]".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must be in [0,1)".into()));
        }
        if !(self.clip_norm > 0.0) || self.xent_weight < 0.0 {
            return Err(Error::Config("clip_norm must be > 0, xent_weight >= 0".into()));
        }
        if self.out_l2 < 0.0 {
            return Err(Error::Config("out_l2 must be >= 0".into()));
        }
        if self.constrain_interval == 0 {
            return Err(Error::Config("constrain_interval must be positive".into()));
        }
        Ok(())
    }
}

/// One training utterance: extracted features plus its label.
pub struct TrainUtt {
    pub utt_id: String,
    pub label: UtteranceLabel,
    pub feats: Array2<f32>,
}

/// Everything graph-side that training needs: HMM topology, denominator, and
/// one numerator per label.
pub struct Graphs {
    pub topo: HmmTopology,
    pub probs: PhoneLmProbs,
    pub den: Wfst,
    /// `numerators[k]` for wake word `k`; the last entry is the negative
    /// (freetext) numerator.
    pub numerators: Vec<Wfst>,
}

impl Graphs {
    pub fn build(num_wake_words: usize, num_pos: usize, num_neg: usize) -> Result<Self> {
        let inv = PhoneInventory::new(num_wake_words)?;
        let topo = build_topology(&inv, 4, 1)?;
        let probs = PhoneLmProbs::from_counts(num_wake_words, num_pos, num_neg)?;
        let lm = build_phone_lm(&inv, &probs)?;
        let den = build_denominator_graph(&lm, &topo)?;
        let mut numerators = Vec::with_capacity(num_wake_words + 1);
        for k in 0..num_wake_words {
            numerators.push(build_numerator_graph(
                UtteranceLabel::Positive(k),
                &topo,
                &probs,
            )?);
        }
        numerators.push(build_numerator_graph(UtteranceLabel::Negative, &topo, &probs)?);
        Ok(Graphs {
            topo,
            probs,
            den,
            numerators,
        })
    }

    pub fn numerator(&self, label: UtteranceLabel) -> &Wfst {
        match label {
            UtteranceLabel::Positive(k) => &self.numerators[k],
            UtteranceLabel::Negative => self.numerators.last().unwrap(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
}

pub struct TrainOutcome {
    /// Path of the best-dev checkpoint.
    pub checkpoint: PathBuf,
    pub log: Vec<EpochLog>,
    pub best_dev: f64,
    pub epochs_run: usize,
}

/// Deterministic batch composition: bucket by frame count (ties broken by
/// utterance id), chunk into batches, shuffle the batch order keyed on
/// `(seed, epoch)`.
pub fn batch_order(utts: &[TrainUtt], batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..utts.len()).collect();
    order.sort_by(|&a, &b| {
        utts[a]
            .feats
            .nrows()
            .cmp(&utts[b].feats.nrows())
            .then_with(|| utts[a].utt_id.cmp(&utts[b].utt_id))
    });
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(|c| c.to_vec()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    batches.shuffle(&mut rng);
    batches
}

struct UttResult {
    grads: Gradients<f32>,
    stats: NormBatchStats<f32>,
    loss: f64,
    frames: usize,
}

/// Numerator forward-backward (optionally tolerance-masked), denominator
/// forward-backward, cross-entropy regularizer: loss and the two head
/// gradients.
fn utt_loss_and_grads(
    graphs: &Graphs,
    cfg: &TrainConfig,
    utt: &TrainUtt,
    mmi: &LogProbMatrix,
    xent: &LogProbMatrix,
    alignment: Option<&Vec<usize>>,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let num = graphs.numerator(utt.label);
    let masked_scores;
    let num_scores = match alignment {
        Some(ali) => {
            if ali.len() != mmi.nrows() {
                return Err(Error::Train(format!(
                    "alignment length {} != {} frames for {}",
                    ali.len(),
                    mmi.nrows(),
                    utt.utt_id
                )));
            }
            let mask = tolerance_mask(ali, mmi.ncols(), cfg.tolerance);
            let mut m = mmi.clone();
            ndarray::Zip::from(&mut m).and(&mask).for_each(|v, &keep| {
                if !keep {
                    *v = f64::NEG_INFINITY;
                }
            });
            masked_scores = m;
            &masked_scores
        }
        None => mmi,
    };
    let fb_num = forward_backward(num, num_scores).map_err(|e| match e {
        Error::NoPath { .. } => Error::NoPath {
            utt: Some(utt.utt_id.clone()),
        },
        other => other,
    })?;
    let fb_den = forward_backward(&graphs.den, mmi)?;
    let loss = -(fb_num.log_total - fb_den.log_total);
    let mut mmi_grad = &fb_den.gamma - &fb_num.gamma;
    let l2_loss = cfg.out_l2 * mmi.iter().map(|v| v * v).sum::<f64>();
    if cfg.out_l2 > 0.0 {
        mmi_grad.scaled_add(2.0 * cfg.out_l2, mmi);
    }
    let (xent_loss, xent_grad) = xent_regularizer(xent, &fb_num.gamma, cfg.xent_weight)?;
    Ok((loss + l2_loss + xent_loss, mmi_grad, xent_grad))
}

fn to_f64(a: &Array2<f32>) -> Array2<f64> {
    a.mapv(|v| v as f64)
}

fn to_f32(a: &Array2<f64>) -> Array2<f32> {
    a.mapv(|v| v as f32)
}

/// Mean per-frame loss over a held-out set (no gradient, no updates).
pub fn dataset_loss(
    model: &Tdnnf<f32>,
    graphs: &Graphs,
    cfg: &TrainConfig,
    utts: &[TrainUtt],
    alignments: Option<&HashMap<String, Vec<usize>>>,
) -> Result<f64> {
    let results = par::map_slice(utts, |u| -> Result<Option<(f64, usize)>> {
        let (mmi, xent) = model.forward(&u.feats)?;
        let mmi = to_f64(&mmi);
        let xent = to_f64(&xent);
        let ali = alignments.and_then(|m| m.get(&u.utt_id));
        match utt_loss_and_grads(graphs, cfg, u, &mmi, &xent, ali) {
            Ok((loss, _, _)) => Ok(Some((loss, mmi.nrows()))),
            Err(Error::NoPath { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut total = 0.0;
    let mut frames = 0usize;
    for r in results {
        if let Some((l, f)) = r? {
            total += l;
            frames += f;
        }
    }
    if frames == 0 {
        return Err(Error::Train("no scorable utterances in dataset".into()));
    }
    Ok(total / frames as f64)
}

struct OptState {
    velocity: Gradients<f32>,
    step: usize,
}

fn momentum_extras(vel: &Gradients<f32>, epoch_next: usize, best_dev: f64, since_best: usize, step: usize)
    -> Vec<(String, Vec<usize>, Vec<f32>)> {
    let mut extras: Vec<(String, Vec<usize>, Vec<f32>)> = vel
        .named_tensors()
        .into_iter()
        .map(|(n, d, v)| (format!("opt.{n}"), d, v))
        .collect();
    extras.push(("train.epoch".into(), vec![1], vec![epoch_next as f32]));
    extras.push(("train.best_dev".into(), vec![1], vec![best_dev as f32]));
    extras.push(("train.since_best".into(), vec![1], vec![since_best as f32]));
    extras.push(("train.step".into(), vec![1], vec![step as f32]));
    extras
}

/// Alignment-free LF-MMI training. Returns the best-dev checkpoint path.
pub fn train(
    cfg: &TrainConfig,
    model_cfg: ModelConfig,
    graphs: &Graphs,
    train_utts: &[TrainUtt],
    dev_utts: &[TrainUtt],
    out_dir: &Path,
    resume: Option<&Path>,
) -> Result<TrainOutcome> {
    run_training(cfg, model_cfg, graphs, train_utts, dev_utts, out_dir, resume, None)
}

/// Regular LF-MMI refinement: identical loop, but each utterance's numerator
/// scores are masked to a tolerance band around its alignment.
pub fn train_refine(
    cfg: &TrainConfig,
    model_cfg: ModelConfig,
    graphs: &Graphs,
    train_utts: &[TrainUtt],
    dev_utts: &[TrainUtt],
    alignments: &HashMap<String, Vec<usize>>,
    out_dir: &Path,
    resume: Option<&Path>,
) -> Result<TrainOutcome> {
    for u in train_utts {
        if !alignments.contains_key(&u.utt_id) {
            return Err(Error::Train(format!("no alignment for utterance {}", u.utt_id)));
        }
    }
    run_training(
        cfg,
        model_cfg,
        graphs,
        train_utts,
        dev_utts,
        out_dir,
        resume,
        Some(alignments),
    )
}

#[allow(clippy::too_many_arguments)]
fn run_training(
    cfg: &TrainConfig,
    model_cfg: ModelConfig,
    graphs: &Graphs,
    train_utts: &[TrainUtt],
    dev_utts: &[TrainUtt],
    out_dir: &Path,
    resume: Option<&Path>,
    alignments: Option<&HashMap<String, Vec<usize>>>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if model_cfg.outputs != graphs.topo.num_pdfs() {
        return Err(Error::Train(format!(
            "model outputs {} != topology pdfs {}",
            model_cfg.outputs,
            graphs.topo.num_pdfs()
        )));
    }
    if train_utts.is_empty() || dev_utts.is_empty() {
        return Err(Error::Train("empty train or dev set".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut model: Tdnnf<f32>;
    let mut opt;
    let mut start_epoch = 0usize;
    let mut best_dev = f64::INFINITY;
    let mut since_best = 0usize;
    match resume {
        Some(path) => {
            let (m, extras) = am::load_checkpoint::<f32>(path)?;
            model = m;
            let mut vel = model.zeros_like();
            let mut step = 0usize;
            for (name, dims, data) in &extras {
                if let Some(rest) = name.strip_prefix("opt.") {
                    vel.set_tensor(rest, dims, data)?;
                } else {
                    match name.as_str() {
                        "train.epoch" => start_epoch = data[0] as usize,
                        "train.best_dev" => best_dev = data[0] as f64,
                        "train.since_best" => since_best = data[0] as usize,
                        "train.step" => step = data[0] as usize,
                        _ => {}
                    }
                }
            }
            opt = OptState { velocity: vel, step };
        }
        None => {
            model = Tdnnf::new(model_cfg.clone(), cfg.seed)?;
            opt = OptState {
                velocity: model.zeros_like(),
                step: 0,
            };
        }
    }

    let best_path = out_dir.join("best.ckpt");
    let last_path = out_dir.join("last.ckpt");
    let log_path = out_dir.join("train.log");
    let mut log = Vec::new();
    let mut epochs_run = start_epoch;

    for epoch in start_epoch..cfg.epochs {
        let lr = cfg.lr * cfg.lr_decay.powi(epoch as i32);
        let batches = batch_order(train_utts, cfg.batch_size, cfg.seed, epoch);
        let mut epoch_loss = 0.0f64;
        let mut epoch_frames = 0usize;
        let mut skipped = 0usize;
        for batch in &batches {
            let members: Vec<&TrainUtt> = batch.iter().map(|&i| &train_utts[i]).collect();
            let results = par::map_slice(&members, |u| -> Result<Option<UttResult>> {
                let (mmi, xent, cache) = model.forward_train(&u.feats)?;
                let mmi64 = to_f64(&mmi);
                let xent64 = to_f64(&xent);
                let ali = alignments.and_then(|m| m.get(&u.utt_id));
                let (loss, mmi_grad, xent_grad) =
                    match utt_loss_and_grads(graphs, cfg, u, &mmi64, &xent64, ali) {
                        Ok(v) => v,
                        Err(Error::NoPath { utt }) => {
                            eprintln!(
                                "warning: skipping utterance {} (no numerator path)",
                                utt.as_deref().unwrap_or("?")
                            );
                            return Ok(None);
                        }
                        Err(e) => return Err(e),
                    };
                if !loss.is_finite() {
                    return Err(Error::Train(format!(
                        "non-finite loss on utterance {}",
                        u.utt_id
                    )));
                }
                let frames = mmi64.nrows();
                // frame-normalize per utterance so long utterances don't
                // dominate the batch gradient
                let scale = 1.0 / frames as f64;
                let (grads, _) = model.backward(
                    &cache,
                    &to_f32(&mmi_grad.mapv(|v| v * scale)),
                    &to_f32(&xent_grad.mapv(|v| v * scale)),
                );
                let stats = model.collect_norm_stats(&cache);
                Ok(Some(UttResult {
                    grads,
                    stats,
                    loss,
                    frames,
                }))
            });
            // fixed-order reduction
            let mut acc: Option<(Gradients<f32>, NormBatchStats<f32>)> = None;
            let mut n_used = 0usize;
            for r in results {
                let Some(u) = r? else {
                    skipped += 1;
                    continue;
                };
                epoch_loss += u.loss;
                epoch_frames += u.frames;
                n_used += 1;
                match &mut acc {
                    None => acc = Some((u.grads, u.stats)),
                    Some((g, s)) => {
                        g.add_scaled(&u.grads, 1.0);
                        s.merge(&u.stats);
                    }
                }
            }
            let Some((mut grads, stats)) = acc else {
                continue;
            };
            grads.scale(1.0 / n_used as f32);
            let norm = grads.sq_norm().sqrt();
            if !norm.is_finite() {
                return Err(Error::Train("non-finite gradient norm".into()));
            }
            if norm > cfg.clip_norm {
                grads.scale((cfg.clip_norm / norm) as f32);
            }
            opt.velocity.scale(cfg.momentum as f32);
            opt.velocity.add_scaled(&grads, 1.0);
            model.add_scaled(&opt.velocity, -(lr as f32));
            model.apply_norm_stats(&stats);
            opt.step += 1;
            if opt.step % cfg.constrain_interval == 0 {
                model.constrain_all()?;
            }
        }
        let skip_frac = skipped as f64 / train_utts.len() as f64;
        if skip_frac > cfg.max_skip_fraction {
            return Err(Error::Train(format!(
                "{skipped} of {} utterances skipped ({:.1}% > {:.1}% allowed)",
                train_utts.len(),
                100.0 * skip_frac,
                100.0 * cfg.max_skip_fraction
            )));
        }
        if epoch_frames == 0 {
            return Err(Error::Train("no trainable utterances".into()));
        }
        let train_loss = epoch_loss / epoch_frames as f64;
        let dev_loss = dataset_loss(&model, graphs, cfg, dev_utts, alignments)?;
        log.push(EpochLog {
            epoch,
            train_loss,
            dev_loss,
        });
        let line = format!("{epoch}\t{train_loss:.6}\t{dev_loss:.6}\n");
        append_file(&log_path, &line)?;
        epochs_run = epoch + 1;
        if dev_loss < best_dev {
            best_dev = dev_loss;
            since_best = 0;
            am::save_checkpoint(&best_path, &model, &[])?;
        } else {
            since_best += 1;
        }
        am::save_checkpoint(
            &last_path,
            &model,
            &momentum_extras(&opt.velocity, epoch + 1, best_dev, since_best, opt.step),
        )?;
        if since_best >= cfg.patience {
            break;
        }
    }
    if !best_path.exists() {
        // no epoch improved on +inf means no epochs ran; save the model as-is
        am::save_checkpoint(&best_path, &model, &[])?;
    }
    Ok(TrainOutcome {
        checkpoint: best_path,
        log,
        best_dev,
        epochs_run,
    })
}

fn append_file(path: &Path, text: &str) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Viterbi best PdfId path through an epsilon-free graph under `scores`
/// (log-probs). Returns one PdfId per frame.
pub fn viterbi_align(graph: &Wfst, scores: &LogProbMatrix) -> Result<Vec<usize>> {
    let n = graph.num_states();
    for s in 0..n {
        if graph.arcs(s).iter().any(|a| a.ilabel == EPS) {
            return Err(Error::Train("viterbi_align requires an epsilon-free graph".into()));
        }
    }
    let t_max = scores.nrows();
    let mut cost = vec![f64::INFINITY; n];
    cost[graph.start()] = 0.0;
    // backpointer per (frame, state): (previous state, pdf consumed)
    let mut back: Vec<Vec<Option<(usize, usize)>>> = Vec::with_capacity(t_max);
    for f in 0..t_max {
        let row = scores.row(f);
        let mut ncost = vec![f64::INFINITY; n];
        let mut nback: Vec<Option<(usize, usize)>> = vec![None; n];
        for s in 0..n {
            if cost[s].is_infinite() {
                continue;
            }
            for a in graph.arcs(s) {
                let pdf = (a.ilabel - 1) as usize;
                let score = row.get(pdf).copied().ok_or_else(|| {
                    Error::Train(format!("PdfId {pdf} out of score range"))
                })?;
                let c = cost[s] + a.weight - score;
                if c < ncost[a.dst] {
                    ncost[a.dst] = c;
                    nback[a.dst] = Some((s, pdf));
                }
            }
        }
        cost = ncost;
        back.push(nback);
    }
    let mut best: Option<(f64, usize)> = None;
    for (s, &c) in cost.iter().enumerate() {
        if let Some(fw) = graph.final_weight(s) {
            let total = c + fw;
            if total.is_finite() && best.is_none_or(|(b, _)| total < b) {
                best = Some((total, s));
            }
        }
    }
    let Some((_, mut state)) = best else {
        return Err(Error::NoPath { utt: None });
    };
    let mut pdfs = vec![0usize; t_max];
    for f in (0..t_max).rev() {
        let (prev, pdf) = back[f][state].ok_or_else(|| Error::Train("broken backpointer".into()))?;
        pdfs[f] = pdf;
        state = prev;
    }
    Ok(pdfs)
}

/// Viterbi alignments (subsampled frame -> PdfId) for every utterance, via
/// its numerator graph under the model's LF-MMI scores.
pub fn align(
    model: &Tdnnf<f32>,
    graphs: &Graphs,
    utts: &[TrainUtt],
) -> Result<Vec<(String, Vec<usize>)>> {
    let results = par::map_slice(utts, |u| -> Result<(String, Vec<usize>)> {
        let (mmi, _) = model.forward(&u.feats)?;
        let scores = to_f64(&mmi);
        let ali = viterbi_align(graphs.numerator(u.label), &scores).map_err(|e| match e {
            Error::NoPath { .. } => Error::NoPath {
                utt: Some(u.utt_id.clone()),
            },
            other => other,
        })?;
        Ok((u.utt_id.clone(), ali))
    });
    results.into_iter().collect()
}

/// Text alignment archive: `utt_id<TAB>pdf pdf pdf ...` per line.
pub fn write_alignments(path: &Path, alignments: &[(String, Vec<usize>)]) -> Result<()> {
    let mut out = String::new();
    for (id, pdfs) in alignments {
        let seq: Vec<String> = pdfs.iter().map(|p| p.to_string()).collect();
        writeln!(out, "{id}\t{}", seq.join(" ")).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_alignments(path: &Path) -> Result<HashMap<String, Vec<usize>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, rest) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.into(),
            line: lineno + 1,
            msg: "expected utt_id<TAB>pdfs".into(),
        })?;
        let pdfs: std::result::Result<Vec<usize>, _> =
            rest.split_whitespace().map(|t| t.parse()).collect();
        let pdfs = pdfs.map_err(|_| Error::Parse {
            path: path.into(),
            line: lineno + 1,
            msg: "bad PdfId".into(),
        })?;
        map.insert(id.to_string(), pdfs);
    }
    Ok(map)
}
