//! Forward-backward in the log semiring over training graphs, the LF-MMI
//! loss with exact gradients, and the cross-entropy regularizer.
//!
//! Scores are unnormalized log-space acoustic outputs, one row per
//! subsampled frame and one column per PdfId. Graph weights are negative
//! log probabilities; internally everything is flipped into log-probability
//! space (higher is better) and combined with max-subtracted log-sum-exp.

use ndarray::Array2;

use crate::graphs::{StateId, Wfst, EPS};
use crate::{Error, Result};

/// T_sub x P matrix of unnormalized log-space acoustic scores.
pub type LogProbMatrix = Array2<f64>;

/// T_sub x P matrix of posterior state-occupation probabilities; rows sum to 1.
pub type Occupancy = Array2<f64>;

/// log(exp(a) + exp(b)) in log-probability space.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Result of a two-sided forward-backward pass.
pub struct FbResult {
    /// Total log-likelihood from the forward pass.
    pub log_total: f64,
    /// Total log-likelihood recomputed from the backward pass.
    pub log_total_backward: f64,
    /// Posterior occupation probability per (subsampled frame, PdfId).
    pub gamma: Occupancy,
}

/// Forward-backward over `g` with frame scores. Epsilon arcs are closed
/// within each frame boundary; the epsilon subgraph must be acyclic.
pub fn forward_backward(g: &Wfst, scores: &LogProbMatrix) -> Result<FbResult> {
    if g.num_states() == 0 {
        return Err(Error::ForwardBackward("empty graph".into()));
    }
    let num_frames = scores.nrows();
    let num_pdfs = scores.ncols();
    let n = g.num_states();
    let order = g.eps_topo_order()?;
    let rev_order: Vec<StateId> = order.iter().rev().copied().collect();

    // alpha[t][s]: log-prob of all paths consuming frames 0..t and ending in s
    // (after epsilon closure).
    let mut alpha = vec![vec![f64::NEG_INFINITY; n]; num_frames + 1];
    alpha[0][g.start()] = 0.0;
    eps_forward(g, &order, &mut alpha[0]);
    for t in 0..num_frames {
        let row = scores.row(t);
        let (cur, next) = {
            let (a, b) = alpha.split_at_mut(t + 1);
            (&a[t], &mut b[0])
        };
        for s in 0..n {
            let a = cur[s];
            if a == f64::NEG_INFINITY {
                continue;
            }
            for arc in g.arcs(s) {
                if arc.ilabel != EPS {
                    let pdf = (arc.ilabel - 1) as usize;
                    debug_assert!(pdf < num_pdfs);
                    let v = a - arc.weight + row[pdf];
                    next[arc.dst] = log_add(next[arc.dst], v);
                }
            }
        }
        eps_forward(g, &order, next);
    }
    let mut log_total = f64::NEG_INFINITY;
    for (s, w) in g.finals() {
        log_total = log_add(log_total, alpha[num_frames][s] - w);
    }
    if log_total == f64::NEG_INFINITY {
        return Err(Error::NoPath { utt: None });
    }

    // beta[t][s]: log-prob of all paths consuming frames t.. from s to a final.
    let mut beta = vec![vec![f64::NEG_INFINITY; n]; num_frames + 1];
    for (s, w) in g.finals() {
        beta[num_frames][s] = -w;
    }
    eps_backward(g, &rev_order, &mut beta[num_frames]);
    for t in (0..num_frames).rev() {
        let row = scores.row(t);
        let (cur, next) = {
            let (a, b) = beta.split_at_mut(t + 1);
            (&mut a[t], &b[0])
        };
        for &s in &rev_order {
            let mut acc = cur[s];
            for arc in g.arcs(s) {
                let v = if arc.ilabel == EPS {
                    // epsilon arcs handled below in eps_backward; skip here
                    continue;
                } else {
                    let pdf = (arc.ilabel - 1) as usize;
                    next[arc.dst] - arc.weight + row[pdf]
                };
                acc = log_add(acc, v);
            }
            cur[s] = acc;
        }
        eps_backward(g, &rev_order, cur);
    }
    let log_total_backward = beta[0][g.start()];

    let mut gamma = Array2::zeros((num_frames, num_pdfs));
    for t in 0..num_frames {
        let row = scores.row(t);
        let mut grow = gamma.row_mut(t);
        for s in 0..n {
            let a = alpha[t][s];
            if a == f64::NEG_INFINITY {
                continue;
            }
            for arc in g.arcs(s) {
                if arc.ilabel != EPS {
                    let pdf = (arc.ilabel - 1) as usize;
                    let lp = a - arc.weight + row[pdf] + beta[t + 1][arc.dst] - log_total;
                    grow[pdf] += lp.exp();
                }
            }
        }
    }
    Ok(FbResult {
        log_total,
        log_total_backward,
        gamma,
    })
}

fn eps_forward(g: &Wfst, order: &[StateId], values: &mut [f64]) {
    for &s in order {
        let v = values[s];
        if v == f64::NEG_INFINITY {
            continue;
        }
        for arc in g.arcs(s) {
            if arc.ilabel == EPS {
                values[arc.dst] = log_add(values[arc.dst], v - arc.weight);
            }
        }
    }
}

fn eps_backward(g: &Wfst, rev_order: &[StateId], values: &mut [f64]) {
    for &s in rev_order {
        let mut acc = values[s];
        for arc in g.arcs(s) {
            if arc.ilabel == EPS {
                let v = values[arc.dst] - arc.weight;
                acc = log_add(acc, v);
            }
        }
        values[s] = acc;
    }
}

/// LF-MMI loss and its gradient with respect to the scores.
///
/// `loss = -(log_total_num - log_total_den)`, `grad = gamma_den - gamma_num`.
/// A numerator with no surviving path is reported as [`Error::NoPath`].
pub fn lfmmi_loss_and_grad(
    num: &Wfst,
    den: &Wfst,
    scores: &LogProbMatrix,
) -> Result<(f64, Array2<f64>)> {
    let fb_num = forward_backward(num, scores)?;
    let fb_den = forward_backward(den, scores)?;
    let loss = -(fb_num.log_total - fb_den.log_total);
    let grad = &fb_den.gamma - &fb_num.gamma;
    Ok((loss, grad))
}

/// LF-MMI with a per-frame PdfId mask on the numerator (regular LF-MMI
/// refinement): masked entries are treated as impossible.
pub fn lfmmi_loss_and_grad_masked(
    num: &Wfst,
    den: &Wfst,
    scores: &LogProbMatrix,
    mask: &Array2<bool>,
) -> Result<(f64, Array2<f64>)> {
    if mask.dim() != scores.dim() {
        return Err(Error::ForwardBackward("mask shape mismatch".into()));
    }
    let mut masked = scores.clone();
    ndarray::Zip::from(&mut masked).and(mask).for_each(|v, &keep| {
        if !keep {
            *v = f64::NEG_INFINITY;
        }
    });
    let fb_num = forward_backward(num, &masked)?;
    let fb_den = forward_backward(den, scores)?;
    let loss = -(fb_num.log_total - fb_den.log_total);
    let grad = &fb_den.gamma - &fb_num.gamma;
    Ok((loss, grad))
}

/// Per-frame PdfId mask allowing, at frame `t`, every PdfId aligned within
/// `tolerance` subsampled frames of `t`.
pub fn tolerance_mask(alignment: &[usize], num_pdfs: usize, tolerance: usize) -> Array2<bool> {
    let t_sub = alignment.len();
    let mut mask = Array2::from_elem((t_sub, num_pdfs), false);
    for (u, &pdf) in alignment.iter().enumerate() {
        let lo = u.saturating_sub(tolerance);
        let hi = (u + tolerance).min(t_sub - 1);
        for t in lo..=hi {
            mask[(t, pdf)] = true;
        }
    }
    mask
}

/// Cross-entropy regularizer against the numerator occupancies.
///
/// `xent_logprobs` must be log-softmax-normalized rows (the model's
/// cross-entropy head output). Returns the loss and its gradient with
/// respect to those log-probabilities.
pub fn xent_regularizer(
    xent_logprobs: &LogProbMatrix,
    gamma_num: &Occupancy,
    weight: f64,
) -> Result<(f64, Array2<f64>)> {
    if weight < 0.0 {
        return Err(Error::ForwardBackward("negative regularizer weight".into()));
    }
    if xent_logprobs.dim() != gamma_num.dim() {
        return Err(Error::ForwardBackward("regularizer shape mismatch".into()));
    }
    if weight == 0.0 {
        return Ok((0.0, Array2::zeros(xent_logprobs.dim())));
    }
    let mut loss = 0.0;
    for (&g, &lp) in gamma_num.iter().zip(xent_logprobs.iter()) {
        if g > 0.0 {
            loss -= g * lp;
        }
    }
    Ok((weight * loss, gamma_num.mapv(|g| -weight * g)))
}
