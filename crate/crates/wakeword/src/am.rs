//! Factorized time-delay acoustic model: narrow (hidden 80) but deep
//! (20 layers), each layer a bottleneck factorization whose first factor is
//! kept semi-orthogonal, with 0.66-scaled bypass connections, 3x frame
//! subsampling in the middle of the stack, and two heads (unnormalized
//! LF-MMI scores and log-softmax cross-entropy scores).
//!
//! Every layer uses a symmetric one-step time context (`{-1,0}` into the
//! first factor, `{0,+1}` out of the bottleneck). The lower 10 layers run at
//! the input frame rate and the upper 10 on every third frame, so one output
//! frame sees 1 + 2*(10 + 3*10) = 81 input frames. Edge frames are
//! replicated (index clamping) so every input frame yields an output.
//!
//! The whole model is generic over `f32` (default, used for training and
//! inference) and `f64` (test mode for finite-difference gradient checks).

use ndarray::{Array1, Array2, Axis, NdFloat};
use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden: usize,
    pub bottleneck: usize,
    pub input_dim: usize,
    /// Number of PdfIds (18 for one wake word).
    pub outputs: usize,
    pub subsample: usize,
    /// Number of layers running at the full frame rate before subsampling.
    pub full_rate_layers: usize,
    pub skip_scale: f64,
}

impl ModelConfig {
    pub fn with_outputs(outputs: usize) -> Self {
        ModelConfig {
            num_layers: 20,
            hidden: 80,
            bottleneck: 20,
            input_dim: 40,
            outputs,
            subsample: 3,
            full_rate_layers: 10,
            skip_scale: 0.66,
        }
    }

    /// Receptive field of one output frame, in input frames.
    pub fn receptive_field(&self) -> usize {
        let upper = self.num_layers - self.full_rate_layers;
        1 + 2 * (self.full_rate_layers + self.subsample * upper)
    }

    pub fn to_kv(&self) -> String {
        format!(
            "num_layers={}\nhidden={}\nbottleneck={}\ninput_dim={}\noutputs={}\nsubsample={}\nfull_rate_layers={}\nskip_scale={}\n",
            self.num_layers,
            self.hidden,
            self.bottleneck,
            self.input_dim,
            self.outputs,
            self.subsample,
            self.full_rate_layers,
            self.skip_scale
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::with_outputs(18);
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad model config line {line:?}")))?;
            let parse_usize =
                |v: &str| v.parse::<usize>().map_err(|_| Error::Config(format!("bad value for {k}")));
            match k {
                "num_layers" => cfg.num_layers = parse_usize(v)?,
                "hidden" => cfg.hidden = parse_usize(v)?,
                "bottleneck" => cfg.bottleneck = parse_usize(v)?,
                "input_dim" => cfg.input_dim = parse_usize(v)?,
                "outputs" => cfg.outputs = parse_usize(v)?,
                "subsample" => cfg.subsample = parse_usize(v)?,
                "full_rate_layers" => cfg.full_rate_layers = parse_usize(v)?,
                "skip_scale" => {
                    cfg.skip_scale = v
                        .parse()
                        .map_err(|_| Error::Config("bad skip_scale".into()))?
                }
                _ => return Err(Error::Config(format!("unknown model config key {k}"))),
            }
        }
        Ok(cfg)
    }
}

/// Per-channel normalization with running statistics. The forward pass
/// always normalizes with the running statistics (frozen at inference), so
/// streaming and batch outputs match; training updates the statistics after
/// each forward pass.
#[derive(Debug, Clone)]
pub struct Norm<F> {
    pub gamma: Array1<F>,
    pub beta: Array1<F>,
    pub running_mean: Array1<F>,
    pub running_var: Array1<F>,
}

const NORM_EPS: f64 = 1e-5;
const STATS_MOMENTUM: f64 = 0.1;

impl<F: NdFloat> Norm<F> {
    fn new(dim: usize) -> Self {
        Norm {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
        }
    }

    fn inv_std(&self) -> Array1<F> {
        self.running_var
            .mapv(|v| F::one() / (v + F::from(NORM_EPS).unwrap()).sqrt())
    }

    fn forward(&self, x: &Array2<F>) -> Array2<F> {
        let inv = self.inv_std();
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.running_mean[j]) * inv[j] * self.gamma[j] + self.beta[j];
            }
        }
        out
    }

}

/// Per-normalization activation statistics; see
/// [`Tdnnf::collect_norm_stats`].
#[derive(Debug, Clone)]
pub struct NormBatchStats<F> {
    per_norm: Vec<(Array1<F>, Array1<F>, usize)>,
}

impl<F: NdFloat> NormBatchStats<F> {
    pub fn merge(&mut self, other: &NormBatchStats<F>) {
        assert_eq!(self.per_norm.len(), other.per_norm.len());
        for (a, b) in self.per_norm.iter_mut().zip(&other.per_norm) {
            a.0 += &b.0;
            a.1 += &b.1;
            a.2 += b.2;
        }
    }
}

/// One factorized layer: `factor_a` is (2*hidden) x bottleneck with the
/// semi-orthogonal constraint on its transpose, `factor_b` is
/// (2*bottleneck) x hidden.
#[derive(Debug, Clone)]
pub struct TdnnfLayer<F> {
    pub factor_a: Array2<F>,
    pub factor_b: Array2<F>,
    pub bias: Array1<F>,
    pub norm: Norm<F>,
}

pub struct Tdnnf<F> {
    pub cfg: ModelConfig,
    pub input_weight: Array2<F>, // input_dim x hidden
    pub input_bias: Array1<F>,
    pub input_norm: Norm<F>,
    pub layers: Vec<TdnnfLayer<F>>,
    pub mmi_weight: Array2<F>, // hidden x outputs
    pub mmi_bias: Array1<F>,
    pub xent_weight: Array2<F>,
    pub xent_bias: Array1<F>,
}

/// Gradients (and momentum buffers) share the model's tensor layout.
pub type Gradients<F> = Tdnnf<F>;

/// Intermediate activations recorded by [`Tdnnf::forward_train`], consumed
/// by [`Tdnnf::backward`].
pub struct ForwardCache<F> {
    feats: Array2<F>,
    input_pre: Array2<F>, // before relu
    layer_inputs: Vec<Array2<F>>,
    layer_u: Vec<Array2<F>>,
    layer_pre: Vec<Array2<F>>, // affine output before relu
    hidden_final: Array2<F>,
    xent_logprobs: Array2<F>,
}

fn gather_ctx<F: NdFloat>(x: &Array2<F>, off_a: i64, off_b: i64) -> Array2<F> {
    let (t, d) = x.dim();
    let mut out = Array2::zeros((t, 2 * d));
    for i in 0..t {
        let ia = (i as i64 + off_a).clamp(0, t as i64 - 1) as usize;
        let ib = (i as i64 + off_b).clamp(0, t as i64 - 1) as usize;
        out.row_mut(i)
            .slice_mut(ndarray::s![..d])
            .assign(&x.row(ia));
        out.row_mut(i)
            .slice_mut(ndarray::s![d..])
            .assign(&x.row(ib));
    }
    out
}

fn scatter_ctx<F: NdFloat>(grad: &Array2<F>, off_a: i64, off_b: i64, t: usize) -> Array2<F> {
    let d = grad.ncols() / 2;
    let mut out = Array2::zeros((t, d));
    for i in 0..grad.nrows() {
        let ia = (i as i64 + off_a).clamp(0, t as i64 - 1) as usize;
        let ib = (i as i64 + off_b).clamp(0, t as i64 - 1) as usize;
        let row = grad.row(i);
        for j in 0..d {
            out[(ia, j)] = out[(ia, j)] + row[j];
            out[(ib, j)] = out[(ib, j)] + row[j + d];
        }
    }
    out
}

fn relu<F: NdFloat>(x: &Array2<F>) -> Array2<F> {
    x.mapv(|v| if v > F::zero() { v } else { F::zero() })
}

fn subsample_rows<F: NdFloat>(x: &Array2<F>, step: usize) -> Array2<F> {
    let rows: Vec<_> = (0..x.nrows()).step_by(step).collect();
    let mut out = Array2::zeros((rows.len(), x.ncols()));
    for (i, &r) in rows.iter().enumerate() {
        out.row_mut(i).assign(&x.row(r));
    }
    out
}

impl<F: NdFloat> Tdnnf<F> {
    /// Randomly initialized model; the first factors are projected onto the
    /// semi-orthogonal manifold right away.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        if cfg.full_rate_layers > cfg.num_layers {
            return Err(Error::Model("full_rate_layers exceeds num_layers".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut randn = |rows: usize, cols: usize, std: f64| -> Array2<F> {
            Array2::from_shape_fn((rows, cols), |_| {
                // Box-Muller
                let u1: f64 = rng.random_range(1e-12..1.0);
                let u2: f64 = rng.random_range(0.0..1.0);
                let g = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                F::from(g * std).unwrap()
            })
        };
        let h = cfg.hidden;
        let b = cfg.bottleneck;
        let input_weight = randn(cfg.input_dim, h, 1.0 / (cfg.input_dim as f64).sqrt());
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for _ in 0..cfg.num_layers {
            let mut factor_a = randn(2 * h, b, 1.0 / ((2 * h) as f64).sqrt());
            constrain_semi_orthogonal(&mut factor_a, 100, 1e-6)?;
            layers.push(TdnnfLayer {
                factor_a,
                factor_b: randn(2 * b, h, 1.0 / ((2 * b) as f64).sqrt()),
                bias: Array1::zeros(h),
                norm: Norm::new(h),
            });
        }
        let mmi_weight = randn(h, cfg.outputs, 1.0 / (h as f64).sqrt());
        let xent_weight = randn(h, cfg.outputs, 1.0 / (h as f64).sqrt());
        Ok(Tdnnf {
            input_bias: Array1::zeros(h),
            input_norm: Norm::new(h),
            input_weight,
            layers,
            mmi_weight,
            mmi_bias: Array1::zeros(cfg.outputs),
            xent_weight,
            xent_bias: Array1::zeros(cfg.outputs),
            cfg,
        })
    }

    /// All-zero tensors in this model's layout (for gradients / momentum).
    pub fn zeros_like(&self) -> Gradients<F> {
        let mut z = Tdnnf {
            cfg: self.cfg.clone(),
            input_weight: Array2::zeros(self.input_weight.dim()),
            input_bias: Array1::zeros(self.input_bias.len()),
            input_norm: Norm {
                gamma: Array1::zeros(self.cfg.hidden),
                beta: Array1::zeros(self.cfg.hidden),
                running_mean: Array1::zeros(self.cfg.hidden),
                running_var: Array1::zeros(self.cfg.hidden),
            },
            layers: Vec::with_capacity(self.layers.len()),
            mmi_weight: Array2::zeros(self.mmi_weight.dim()),
            mmi_bias: Array1::zeros(self.mmi_bias.len()),
            xent_weight: Array2::zeros(self.xent_weight.dim()),
            xent_bias: Array1::zeros(self.xent_bias.len()),
        };
        for l in &self.layers {
            z.layers.push(TdnnfLayer {
                factor_a: Array2::zeros(l.factor_a.dim()),
                factor_b: Array2::zeros(l.factor_b.dim()),
                bias: Array1::zeros(l.bias.len()),
                norm: Norm {
                    gamma: Array1::zeros(self.cfg.hidden),
                    beta: Array1::zeros(self.cfg.hidden),
                    running_mean: Array1::zeros(self.cfg.hidden),
                    running_var: Array1::zeros(self.cfg.hidden),
                },
            });
        }
        z
    }

    /// Number of trainable parameters.
    pub fn num_params(&self) -> usize {
        let mut n = self.input_weight.len() + self.input_bias.len();
        n += self.input_norm.gamma.len() + self.input_norm.beta.len();
        for l in &self.layers {
            n += l.factor_a.len() + l.factor_b.len() + l.bias.len();
            n += l.norm.gamma.len() + l.norm.beta.len();
        }
        n += self.mmi_weight.len() + self.mmi_bias.len();
        n += self.xent_weight.len() + self.xent_bias.len();
        n
    }

    fn check_input(&self, feats: &Array2<F>) -> Result<()> {
        if feats.ncols() != self.cfg.input_dim {
            return Err(Error::Model(format!(
                "feature dimension {} != {}",
                feats.ncols(),
                self.cfg.input_dim
            )));
        }
        if feats.nrows() == 0 {
            return Err(Error::Model("empty feature matrix".into()));
        }
        Ok(())
    }

    /// Inference forward pass: unnormalized LF-MMI scores and log-softmax
    /// cross-entropy scores, one row per `subsample` input frames.
    pub fn forward(&self, feats: &Array2<F>) -> Result<(Array2<F>, Array2<F>)> {
        let cache = self.run_forward(feats)?;
        let mmi = cache.hidden_final.dot(&self.mmi_weight) + &self.mmi_bias;
        Ok((mmi, cache.xent_logprobs))
    }

    /// Training forward pass: returns outputs plus the activation cache
    /// needed by [`backward`](Self::backward).
    pub fn forward_train(&self, feats: &Array2<F>) -> Result<(Array2<F>, Array2<F>, ForwardCache<F>)> {
        let cache = self.run_forward(feats)?;
        let mmi = cache.hidden_final.dot(&self.mmi_weight) + &self.mmi_bias;
        let xent = cache.xent_logprobs.clone();
        Ok((mmi, xent, cache))
    }

    fn run_forward(&self, feats: &Array2<F>) -> Result<ForwardCache<F>> {
        self.check_input(feats)?;
        let input_pre = feats.dot(&self.input_weight) + &self.input_bias;
        let mut x = self.input_norm.forward(&relu(&input_pre));
        let skip = F::from(self.cfg.skip_scale).unwrap();
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut layer_u = Vec::with_capacity(self.layers.len());
        let mut layer_pre = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            if i == self.cfg.full_rate_layers {
                x = subsample_rows(&x, self.cfg.subsample);
            }
            let a_in = gather_ctx(&x, -1, 0);
            let u = a_in.dot(&layer.factor_a);
            let b_in = gather_ctx(&u, 0, 1);
            let pre = b_in.dot(&layer.factor_b) + &layer.bias;
            let out = layer.norm.forward(&relu(&pre)) + &x * skip;
            layer_inputs.push(x);
            layer_u.push(u);
            layer_pre.push(pre);
            x = out;
        }
        if self.cfg.full_rate_layers == self.layers.len() {
            x = subsample_rows(&x, self.cfg.subsample);
        }
        let xent_raw = x.dot(&self.xent_weight) + &self.xent_bias;
        let xent_logprobs = log_softmax_rows(&xent_raw);
        Ok(ForwardCache {
            feats: feats.clone(),
            input_pre,
            layer_inputs,
            layer_u,
            layer_pre,
            hidden_final: x,
            xent_logprobs,
        })
    }

    /// Update the normalization running statistics from a recorded forward
    /// pass (training mode only; call after `forward_train`).
    pub fn update_norm_stats(&mut self, cache: &ForwardCache<F>) {
        let stats = self.collect_norm_stats(cache);
        self.apply_norm_stats(&stats);
    }

    /// Sufficient statistics (sum, sum of squares, frame count) of the
    /// post-relu activations feeding each normalization, in model order
    /// (input norm first). Collected per utterance so batches can merge them
    /// in a fixed order before updating the running statistics.
    pub fn collect_norm_stats(&self, cache: &ForwardCache<F>) -> NormBatchStats<F> {
        let mut per_norm = Vec::with_capacity(1 + self.layers.len());
        for pre in std::iter::once(&cache.input_pre).chain(cache.layer_pre.iter()) {
            let r = relu(pre);
            let sum = r.sum_axis(Axis(0));
            let mut sumsq = Array1::zeros(r.ncols());
            for row in r.rows() {
                for (j, &v) in row.iter().enumerate() {
                    sumsq[j] = sumsq[j] + v * v;
                }
            }
            per_norm.push((sum, sumsq, r.nrows()));
        }
        NormBatchStats { per_norm }
    }

    /// Fold aggregated batch statistics into the running mean/variance.
    pub fn apply_norm_stats(&mut self, stats: &NormBatchStats<F>) {
        let norms = std::iter::once(&mut self.input_norm)
            .chain(self.layers.iter_mut().map(|l| &mut l.norm));
        for (norm, (sum, sumsq, count)) in norms.zip(&stats.per_norm) {
            if *count == 0 {
                continue;
            }
            let n = F::from(*count).unwrap();
            let mom = F::from(STATS_MOMENTUM).unwrap();
            let keep = F::one() - mom;
            for j in 0..norm.running_mean.len() {
                let mean = sum[j] / n;
                let var = (sumsq[j] / n - mean * mean).max(F::zero());
                norm.running_mean[j] = norm.running_mean[j] * keep + mean * mom;
                norm.running_var[j] = norm.running_var[j] * keep + var * mom;
            }
        }
    }

    /// Exact gradients of `sum(mmi_grad * mmi) + sum(xent_grad * xent_logprobs)`
    /// with respect to every trainable parameter and the input features.
    pub fn backward(
        &self,
        cache: &ForwardCache<F>,
        mmi_grad: &Array2<F>,
        xent_grad: &Array2<F>,
    ) -> (Gradients<F>, Array2<F>) {
        let mut grads = self.zeros_like();
        let h_final = &cache.hidden_final;

        // heads
        grads.mmi_weight = h_final.t().dot(mmi_grad);
        grads.mmi_bias = mmi_grad.sum_axis(Axis(0));
        // log-softmax backward: d_raw = g - softmax * rowsum(g)
        let probs = cache.xent_logprobs.mapv(|v| v.exp());
        let rowsum = xent_grad.sum_axis(Axis(1));
        let mut xent_raw_grad = xent_grad.clone();
        for (i, mut row) in xent_raw_grad.rows_mut().into_iter().enumerate() {
            let s = rowsum[i];
            for (v, &p) in row.iter_mut().zip(probs.row(i)) {
                *v = *v - p * s;
            }
        }
        grads.xent_weight = h_final.t().dot(&xent_raw_grad);
        grads.xent_bias = xent_raw_grad.sum_axis(Axis(0));

        let mut d_x = mmi_grad.dot(&self.mmi_weight.t()) + xent_raw_grad.dot(&self.xent_weight.t());

        let skip = F::from(self.cfg.skip_scale).unwrap();
        if self.cfg.full_rate_layers == self.layers.len() {
            let t_full = cache.layer_inputs.last().map(|x| x.nrows()).unwrap_or(0);
            d_x = upsample_rows(&d_x, self.cfg.subsample, t_full);
        }
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.layer_inputs[i];
            let u = &cache.layer_u[i];
            let pre = &cache.layer_pre[i];
            let g = &mut grads.layers[i];

            let inv = layer.norm.inv_std();
            let r = relu(pre);
            // norm backward (running stats are constants)
            let mut d_r = d_x.clone();
            for mut row in d_r.rows_mut() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = *v * layer.norm.gamma[j] * inv[j];
                }
            }
            for (t, row) in d_x.rows().into_iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    let rn = (r[(t, j)] - layer.norm.running_mean[j]) * inv[j];
                    g.norm.gamma[j] = g.norm.gamma[j] + v * rn;
                    g.norm.beta[j] = g.norm.beta[j] + v;
                }
            }
            // relu
            let mut d_pre = d_r;
            ndarray::Zip::from(&mut d_pre).and(pre).for_each(|v, &p| {
                if p <= F::zero() {
                    *v = F::zero();
                }
            });
            g.bias = d_pre.sum_axis(Axis(0));
            let b_in = gather_ctx(u, 0, 1);
            g.factor_b = b_in.t().dot(&d_pre);
            let d_b_in = d_pre.dot(&layer.factor_b.t());
            let d_u = scatter_ctx(&d_b_in, 0, 1, u.nrows());
            let a_in = gather_ctx(x, -1, 0);
            g.factor_a = a_in.t().dot(&d_u);
            let d_a_in = d_u.dot(&layer.factor_a.t());
            let mut d_in = scatter_ctx(&d_a_in, -1, 0, x.nrows());
            d_in = d_in + &d_x * skip;
            d_x = d_in;
            if i == self.cfg.full_rate_layers {
                let t_full = if i == 0 {
                    cache.feats.nrows()
                } else {
                    cache.layer_inputs[i - 1].nrows()
                };
                d_x = upsample_rows(&d_x, self.cfg.subsample, t_full);
            }
        }

        // input affine
        let inv = self.input_norm.inv_std();
        let r = relu(&cache.input_pre);
        let mut d_r = d_x.clone();
        for mut row in d_r.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * self.input_norm.gamma[j] * inv[j];
            }
        }
        for (t, row) in d_x.rows().into_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let rn = (r[(t, j)] - self.input_norm.running_mean[j]) * inv[j];
                grads.input_norm.gamma[j] = grads.input_norm.gamma[j] + v * rn;
                grads.input_norm.beta[j] = grads.input_norm.beta[j] + v;
            }
        }
        let mut d_pre = d_r;
        ndarray::Zip::from(&mut d_pre)
            .and(&cache.input_pre)
            .for_each(|v, &p| {
                if p <= F::zero() {
                    *v = F::zero();
                }
            });
        grads.input_bias = d_pre.sum_axis(Axis(0));
        grads.input_weight = cache.feats.t().dot(&d_pre);
        let input_grads = d_pre.dot(&self.input_weight.t());
        (grads, input_grads)
    }

    /// Apply the semi-orthogonal constraint to every layer's first factor.
    pub fn constrain_all(&mut self) -> Result<()> {
        for layer in &mut self.layers {
            constrain_semi_orthogonal(&mut layer.factor_a, 20, 1e-4)?;
        }
        Ok(())
    }

    /// In-place elementwise `self += other * scale` over trainable tensors.
    pub fn add_scaled(&mut self, other: &Gradients<F>, scale: F) {
        for (dst, src) in self.tensors_mut_2d().into_iter().zip(other.tensors_2d()) {
            dst.scaled_add(scale, src);
        }
        // gradients' tensors_mut_1d must align with tensors_1d
        let srcs: Vec<Array1<F>> = other.tensors_1d().into_iter().cloned().collect();
        for (dst, src) in self.tensors_mut_1d().into_iter().zip(srcs) {
            dst.scaled_add(scale, &src);
        }
    }

    /// Scale all trainable tensors.
    pub fn scale(&mut self, s: F) {
        for t in self.tensors_mut_2d() {
            t.mapv_inplace(|v| v * s);
        }
        for t in self.tensors_mut_1d() {
            t.mapv_inplace(|v| v * s);
        }
    }

    /// Squared L2 norm over trainable tensors.
    pub fn sq_norm(&self) -> f64 {
        let mut acc = 0.0f64;
        for t in self.tensors_2d() {
            for &v in t.iter() {
                acc += v.to_f64().unwrap().powi(2);
            }
        }
        for t in self.tensors_1d() {
            for &v in t.iter() {
                acc += v.to_f64().unwrap().powi(2);
            }
        }
        acc
    }

    fn tensors_2d(&self) -> Vec<&Array2<F>> {
        let mut v = vec![&self.input_weight];
        for l in &self.layers {
            v.push(&l.factor_a);
            v.push(&l.factor_b);
        }
        v.push(&self.mmi_weight);
        v.push(&self.xent_weight);
        v
    }

    fn tensors_mut_2d(&mut self) -> Vec<&mut Array2<F>> {
        let mut v = vec![&mut self.input_weight];
        for l in &mut self.layers {
            v.push(&mut l.factor_a);
            v.push(&mut l.factor_b);
        }
        v.push(&mut self.mmi_weight);
        v.push(&mut self.xent_weight);
        v
    }

    fn tensors_1d(&self) -> Vec<&Array1<F>> {
        let mut v = vec![&self.input_bias, &self.input_norm.gamma, &self.input_norm.beta];
        for l in &self.layers {
            v.push(&l.bias);
            v.push(&l.norm.gamma);
            v.push(&l.norm.beta);
        }
        v.push(&self.mmi_bias);
        v.push(&self.xent_bias);
        v
    }

    fn tensors_mut_1d(&mut self) -> Vec<&mut Array1<F>> {
        let mut v = vec![&mut self.input_bias];
        v.push(&mut self.input_norm.gamma);
        v.push(&mut self.input_norm.beta);
        for l in &mut self.layers {
            v.push(&mut l.bias);
            v.push(&mut l.norm.gamma);
            v.push(&mut l.norm.beta);
        }
        v.push(&mut self.mmi_bias);
        v.push(&mut self.xent_bias);
        v
    }

    /// Named tensors for checkpointing, including normalization statistics.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, Vec<f32>)> {
        let mut out = Vec::new();
        let push2 = |out: &mut Vec<(String, Vec<usize>, Vec<f32>)>, name: String, t: &Array2<F>| {
            out.push((
                name,
                vec![t.nrows(), t.ncols()],
                t.iter().map(|&v| v.to_f32().unwrap()).collect(),
            ));
        };
        let push1 = |out: &mut Vec<(String, Vec<usize>, Vec<f32>)>, name: String, t: &Array1<F>| {
            out.push((
                name,
                vec![t.len()],
                t.iter().map(|&v| v.to_f32().unwrap()).collect(),
            ));
        };
        push2(&mut out, "input.weight".into(), &self.input_weight);
        push1(&mut out, "input.bias".into(), &self.input_bias);
        push1(&mut out, "input.norm.gamma".into(), &self.input_norm.gamma);
        push1(&mut out, "input.norm.beta".into(), &self.input_norm.beta);
        push1(&mut out, "input.norm.mean".into(), &self.input_norm.running_mean);
        push1(&mut out, "input.norm.var".into(), &self.input_norm.running_var);
        for (i, l) in self.layers.iter().enumerate() {
            push2(&mut out, format!("layer{i}.factor_a"), &l.factor_a);
            push2(&mut out, format!("layer{i}.factor_b"), &l.factor_b);
            push1(&mut out, format!("layer{i}.bias"), &l.bias);
            push1(&mut out, format!("layer{i}.norm.gamma"), &l.norm.gamma);
            push1(&mut out, format!("layer{i}.norm.beta"), &l.norm.beta);
            push1(&mut out, format!("layer{i}.norm.mean"), &l.norm.running_mean);
            push1(&mut out, format!("layer{i}.norm.var"), &l.norm.running_var);
        }
        push2(&mut out, "mmi.weight".into(), &self.mmi_weight);
        push1(&mut out, "mmi.bias".into(), &self.mmi_bias);
        push2(&mut out, "xent.weight".into(), &self.xent_weight);
        push1(&mut out, "xent.bias".into(), &self.xent_bias);
        out
    }

    /// Fill tensors by name (checkpoint loading).
    pub fn set_tensor(&mut self, name: &str, dims: &[usize], data: &[f32]) -> Result<()> {
        let fill2 = |t: &mut Array2<F>| -> Result<()> {
            if dims != [t.nrows(), t.ncols()] {
                return Err(Error::Model(format!("tensor {name}: shape mismatch")));
            }
            for (v, &x) in t.iter_mut().zip(data) {
                *v = F::from(x).unwrap();
            }
            Ok(())
        };
        let fill1 = |t: &mut Array1<F>| -> Result<()> {
            if dims != [t.len()] {
                return Err(Error::Model(format!("tensor {name}: shape mismatch")));
            }
            for (v, &x) in t.iter_mut().zip(data) {
                *v = F::from(x).unwrap();
            }
            Ok(())
        };
        match name {
            "input.weight" => fill2(&mut self.input_weight),
            "input.bias" => fill1(&mut self.input_bias),
            "input.norm.gamma" => fill1(&mut self.input_norm.gamma),
            "input.norm.beta" => fill1(&mut self.input_norm.beta),
            "input.norm.mean" => fill1(&mut self.input_norm.running_mean),
            "input.norm.var" => fill1(&mut self.input_norm.running_var),
            "mmi.weight" => fill2(&mut self.mmi_weight),
            "mmi.bias" => fill1(&mut self.mmi_bias),
            "xent.weight" => fill2(&mut self.xent_weight),
            "xent.bias" => fill1(&mut self.xent_bias),
            _ => {
                let rest = name
                    .strip_prefix("layer")
                    .ok_or_else(|| Error::Model(format!("unknown tensor {name}")))?;
                let (idx, field) = rest
                    .split_once('.')
                    .ok_or_else(|| Error::Model(format!("unknown tensor {name}")))?;
                let i: usize = idx
                    .parse()
                    .map_err(|_| Error::Model(format!("unknown tensor {name}")))?;
                let l = self
                    .layers
                    .get_mut(i)
                    .ok_or_else(|| Error::Model(format!("tensor {name}: no such layer")))?;
                match field {
                    "factor_a" => fill2(&mut l.factor_a),
                    "factor_b" => fill2(&mut l.factor_b),
                    "bias" => fill1(&mut l.bias),
                    "norm.gamma" => fill1(&mut l.norm.gamma),
                    "norm.beta" => fill1(&mut l.norm.beta),
                    "norm.mean" => fill1(&mut l.norm.running_mean),
                    "norm.var" => fill1(&mut l.norm.running_var),
                    _ => Err(Error::Model(format!("unknown tensor {name}"))),
                }
            }
        }
    }
}

const CKPT_MAGIC: &[u8; 8] = b"WWAMCKP1";

/// Serialize the model (plus arbitrary named extra tensors, e.g. optimizer
/// state) to a binary checkpoint. All tensors are stored as f32.
pub fn save_checkpoint<F: NdFloat>(
    path: &std::path::Path,
    model: &Tdnnf<F>,
    extras: &[(String, Vec<usize>, Vec<f32>)],
) -> Result<()> {
    use std::io::Write;
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CKPT_MAGIC);
    let cfg = model.cfg.to_kv();
    buf.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    buf.extend_from_slice(cfg.as_bytes());
    let tensors: Vec<_> = model
        .named_tensors()
        .into_iter()
        .chain(extras.iter().cloned())
        .collect();
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, dims, data) in &tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for &d in dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Load a checkpoint; returns the model and any extra tensors that do not
/// belong to the model itself (optimizer state, training counters).
pub fn load_checkpoint<F: NdFloat>(
    path: &std::path::Path,
) -> Result<(Tdnnf<F>, Vec<(String, Vec<usize>, Vec<f32>)>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::Model("truncated checkpoint".into()));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let read_u32 = |pos: &mut usize| -> Result<u32> {
        Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
    };
    if take(&mut pos, 8)? != CKPT_MAGIC {
        return Err(Error::Model("bad checkpoint magic".into()));
    }
    let cfg_len = read_u32(&mut pos)? as usize;
    let cfg_text = std::str::from_utf8(take(&mut pos, cfg_len)?)
        .map_err(|_| Error::Model("bad checkpoint config".into()))?
        .to_owned();
    let cfg = ModelConfig::from_kv(&cfg_text)?;
    let mut model: Tdnnf<F> = Tdnnf::new(cfg, 0)?;
    let n_tensors = read_u32(&mut pos)? as usize;
    let mut extras = Vec::new();
    for _ in 0..n_tensors {
        let name_len = read_u32(&mut pos)? as usize;
        let name = std::str::from_utf8(take(&mut pos, name_len)?)
            .map_err(|_| Error::Model("bad tensor name".into()))?
            .to_owned();
        let ndim = read_u32(&mut pos)? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(read_u32(&mut pos)? as usize);
        }
        let count: usize = dims.iter().product();
        let raw = take(&mut pos, count * 4)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if name.starts_with("opt.") || name.starts_with("train.") {
            extras.push((name, dims, data));
        } else {
            model.set_tensor(&name, &dims, &data)?;
        }
    }
    Ok((model, extras))
}

fn upsample_rows<F: NdFloat>(grad: &Array2<F>, step: usize, t_full: usize) -> Array2<F> {
    let mut out = Array2::zeros((t_full, grad.ncols()));
    for (i, row) in grad.rows().into_iter().enumerate() {
        out.row_mut(i * step).assign(&row);
    }
    out
}

fn log_softmax_rows<F: NdFloat>(x: &Array2<F>) -> Array2<F> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for v in row.iter() {
            sum = sum + (*v - max).exp();
        }
        let lse = max + sum.ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Project onto the semi-orthogonal manifold: scale so the Gram matrix has
/// unit mean diagonal, then Newton-style iterations `M <- M - 0.5 (MM^T - I) M`
/// until `||MM^T - I||_F <= tol` (or `max_iters`). The matrix is oriented
/// internally so rows <= cols. Returns the achieved Frobenius deviation.
pub fn constrain_semi_orthogonal<F: NdFloat>(
    a: &mut Array2<F>,
    max_iters: usize,
    tol: f64,
) -> Result<f64> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Model("non-finite entries in semi-orthogonal factor".into()));
    }
    let transpose = a.nrows() > a.ncols();
    let mut m = if transpose { a.t().to_owned() } else { a.clone() };
    let rows = m.nrows();
    let mut dev = semi_orth_deviation(&m);
    for _ in 0..max_iters {
        if dev <= tol {
            break;
        }
        let p = m.dot(&m.t());
        let trace: F = (0..rows).map(|i| p[(i, i)]).fold(F::zero(), |a, b| a + b);
        let scale = (F::from(rows).unwrap() / trace).sqrt();
        m.mapv_inplace(|v| v * scale);
        let p = m.dot(&m.t());
        let half = F::from(0.5).unwrap();
        let mut q = p;
        for i in 0..rows {
            q[(i, i)] = q[(i, i)] - F::one();
        }
        let update = q.dot(&m);
        m = m - update.mapv(|v| v * half);
        dev = semi_orth_deviation(&m);
    }
    *a = if transpose { m.t().to_owned() } else { m };
    Ok(dev)
}

/// `||MM^T - I||_F` with M oriented rows <= cols.
pub fn semi_orth_deviation<F: NdFloat>(a: &Array2<F>) -> f64 {
    let m = if a.nrows() > a.ncols() {
        a.t().to_owned()
    } else {
        a.clone()
    };
    let p = m.dot(&m.t());
    let mut acc = 0.0f64;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            acc += (p[(i, j)].to_f64().unwrap() - target).powi(2);
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            num_layers: 2,
            hidden: 8,
            bottleneck: 4,
            input_dim: 5,
            outputs: 3,
            subsample: 3,
            full_rate_layers: 1,
            skip_scale: 0.66,
        }
    }

    #[test]
    fn param_budget_default() {
        let model: Tdnnf<f32> = Tdnnf::new(ModelConfig::with_outputs(18), 0).unwrap();
        let n = model.num_params();
        assert!((135_000..=165_000).contains(&n), "params = {n}");
    }

    #[test]
    fn receptive_field_size() {
        let cfg = ModelConfig::with_outputs(18);
        let rf = cfg.receptive_field();
        assert!((78..=82).contains(&rf), "rf = {rf}");
    }

    #[test]
    fn output_rows_ceil_t_over_3() {
        let model: Tdnnf<f32> = Tdnnf::new(tiny_cfg(), 1).unwrap();
        for t in [1usize, 2, 3, 4, 299, 300, 301] {
            let feats = Array2::zeros((t, 5));
            let (mmi, xent) = model.forward(&feats).unwrap();
            assert_eq!(mmi.nrows(), t.div_ceil(3), "t={t}");
            assert_eq!(xent.dim(), mmi.dim());
        }
    }

    #[test]
    fn wrong_feature_dim_errors() {
        let model: Tdnnf<f32> = Tdnnf::new(tiny_cfg(), 1).unwrap();
        assert!(model.forward(&Array2::zeros((10, 7))).is_err());
    }

    #[test]
    fn zero_model_outputs() {
        let mut model: Tdnnf<f32> = Tdnnf::new(tiny_cfg(), 1).unwrap();
        model.scale(0.0);
        let feats = Array2::zeros((9, 5));
        let (mmi, xent) = model.forward(&feats).unwrap();
        assert!(mmi.iter().all(|&v| v == 0.0));
        let expect = -(3f32).ln();
        assert!(xent.iter().all(|&v| (v - expect).abs() < 1e-6));
    }

    #[test]
    fn skip_connection_pass_through() {
        // zero one layer's own transform: its output is input + 0.66 * 0
        // combined with the bypass, i.e. exactly 0.66 * input when the norm
        // is at its identity initialization.
        let mut model: Tdnnf<f64> = Tdnnf::new(tiny_cfg(), 3).unwrap();
        let l = &mut model.layers[1];
        l.factor_a.fill(0.0);
        l.factor_b.fill(0.0);
        l.bias.fill(0.0);
        // norm(relu(0)) = 0 at identity init, so layer 1 out = skip * input.
        // Verify by comparing against a model whose layer 1 is replaced by
        // explicit scaling of layer 0's output.
        let feats = Array2::from_shape_fn((7, 5), |(i, j)| ((i * 5 + j) as f64 * 0.17).sin());
        let cache = model.run_forward(&feats).unwrap();
        let x_in = &cache.layer_inputs[1];
        let out = &cache.hidden_final;
        // layer 1 is the last layer; final hidden = subsampled(0.66 * x_in)
        let expect = subsample_rows(&x_in.mapv(|v| v * 0.66), 3);
        for (a, b) in out.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn semi_orthogonal_fixed_point_and_convergence() {
        // already semi-orthogonal -> unchanged up to 1e-12
        let mut eye: Array2<f64> = Array2::eye(6);
        constrain_semi_orthogonal(&mut eye, 20, 1e-3).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((eye[(i, j)] - e).abs() < 1e-12);
            }
        }
        // 2I -> I within 10 iterations
        let mut two: Array2<f64> = Array2::eye(6) * 2.0;
        constrain_semi_orthogonal(&mut two, 10, 1e-10).unwrap();
        for i in 0..6 {
            assert!((two[(i, i)] - 1.0).abs() < 1e-9);
        }
        // random 20x160 -> deviation < 1e-3 within 20 iterations
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = Array2::from_shape_fn((20, 160), |_| rng.random_range(-0.5..0.5));
        let dev = constrain_semi_orthogonal(&mut a, 20, 1e-4).unwrap();
        assert!(dev < 1e-3, "dev = {dev}");
    }

    #[test]
    fn grad_check_tiny_model() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model: Tdnnf<f64> = Tdnnf::new(tiny_cfg(), 7).unwrap();
        let feats = Array2::from_shape_fn((6, 5), |_| rng.random_range(-1.0..1.0));
        let (mmi, xent, cache) = model.forward_train(&feats).unwrap();
        let gm = Array2::from_shape_fn(mmi.dim(), |_| rng.random_range(-1.0..1.0));
        let gx = Array2::from_shape_fn(xent.dim(), |_| rng.random_range(-1.0..1.0));
        let loss = |m: &Tdnnf<f64>| -> f64 {
            let (mmi, xent) = m.forward(&feats).unwrap();
            (&mmi * &gm).sum() + (&xent * &gx).sum()
        };
        let (grads, input_grads) = model.backward(&cache, &gm, &gx);

        let eps = 1e-5;
        // spot-check a sample of parameters from every tensor kind
        let check = |analytic: f64, mut plus: Tdnnf<f64>, mut minus: Tdnnf<f64>, what: &str| {
            let fd = (loss(&mut plus) - loss(&mut minus)) / (2.0 * eps);
            assert!(
                (fd - analytic).abs() <= 1e-3 * (1.0 + fd.abs().max(analytic.abs())),
                "{what}: fd {fd} vs {analytic}"
            );
        };
        for (r, c) in [(0, 0), (3, 2), (4, 7)] {
            let mut p = model.clone_params();
            p.input_weight[(r, c)] += eps;
            let mut m = model.clone_params();
            m.input_weight[(r, c)] -= eps;
            check(grads.input_weight[(r, c)], p, m, "input.weight");
        }
        for li in 0..2 {
            for (r, c) in [(0, 0), (5, 3)] {
                let mut p = model.clone_params();
                p.layers[li].factor_a[(r, c)] += eps;
                let mut m = model.clone_params();
                m.layers[li].factor_a[(r, c)] -= eps;
                check(grads.layers[li].factor_a[(r, c)], p, m, "factor_a");
                let mut p = model.clone_params();
                p.layers[li].factor_b[(c, r)] += eps;
                let mut m = model.clone_params();
                m.layers[li].factor_b[(c, r)] -= eps;
                check(grads.layers[li].factor_b[(c, r)], p, m, "factor_b");
            }
            let mut p = model.clone_params();
            p.layers[li].norm.gamma[2] += eps;
            let mut m = model.clone_params();
            m.layers[li].norm.gamma[2] -= eps;
            check(grads.layers[li].norm.gamma[2], p, m, "norm.gamma");
        }
        let mut p = model.clone_params();
        p.mmi_weight[(1, 1)] += eps;
        let mut m = model.clone_params();
        m.mmi_weight[(1, 1)] -= eps;
        check(grads.mmi_weight[(1, 1)], p, m, "mmi.weight");
        let mut p = model.clone_params();
        p.xent_weight[(2, 0)] += eps;
        let mut m = model.clone_params();
        m.xent_weight[(2, 0)] -= eps;
        check(grads.xent_weight[(2, 0)], p, m, "xent.weight");

        // input grads via finite differences
        let base = {
            let (mmi, xent) = model.forward(&feats).unwrap();
            (&mmi * &gm).sum() + (&xent * &gx).sum()
        };
        let _ = base;
        for (t, d) in [(0usize, 0usize), (3, 4), (5, 1)] {
            let mut fp = feats.clone();
            fp[(t, d)] += eps;
            let mut fm = feats.clone();
            fm[(t, d)] -= eps;
            let lp = {
                let (mmi, xent) = model.forward(&fp).unwrap();
                (&mmi * &gm).sum() + (&xent * &gx).sum()
            };
            let lm = {
                let (mmi, xent) = model.forward(&fm).unwrap();
                (&mmi * &gm).sum() + (&xent * &gx).sum()
            };
            let fd = (lp - lm) / (2.0 * eps);
            let g = input_grads[(t, d)];
            assert!((fd - g).abs() <= 1e-3 * (1.0 + fd.abs().max(g.abs())));
        }
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let model: Tdnnf<f64> = Tdnnf::new(tiny_cfg(), 2).unwrap();
        let feats = Array2::from_shape_fn((6, 5), |(i, j)| (i as f64 - j as f64) * 0.1);
        let (mmi, xent, cache) = model.forward_train(&feats).unwrap();
        let (grads, input_grads) = model.backward(
            &cache,
            &Array2::zeros(mmi.dim()),
            &Array2::zeros(xent.dim()),
        );
        assert_eq!(grads.sq_norm(), 0.0);
        assert!(input_grads.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn receptive_field_probe() {
        let cfg = ModelConfig::with_outputs(18);
        let rf = cfg.receptive_field();
        let model: Tdnnf<f32> = Tdnnf::new(cfg, 11).unwrap();
        let t = 301usize;
        let feats = Array2::from_shape_fn((t, 40), |(i, j)| ((i * 7 + j) as f32 * 0.013).sin());
        let (base, _) = model.forward(&feats).unwrap();
        let out_row = 50; // center input frame 150
        let center = out_row * 3;
        let half = (rf - 1) / 2;
        // inside: one frame from the edge of the field must change the output
        let mut f2 = feats.clone();
        for v in f2.row_mut(center - half + 1).iter_mut() {
            *v += 1.0;
        }
        let (o2, _) = model.forward(&f2).unwrap();
        assert!(
            o2.row(out_row)
                .iter()
                .zip(base.row(out_row))
                .any(|(a, b)| a != b)
        );
        // outside: two frames beyond the field must leave the row unchanged
        let mut f3 = feats.clone();
        for v in f3.row_mut(center + half + 2).iter_mut() {
            *v += 1.0;
        }
        let (o3, _) = model.forward(&f3).unwrap();
        for (a, b) in o3.row(out_row).iter().zip(base.row(out_row)) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut model: Tdnnf<f32> = Tdnnf::new(tiny_cfg(), 42).unwrap();
        // make running stats non-trivial so they are exercised too
        let feats = Array2::from_shape_fn((12, 5), |(i, j)| ((i * 3 + j) as f32 * 0.21).sin());
        let (_, _, cache) = model.forward_train(&feats).unwrap();
        model.update_norm_stats(&cache);
        let extras = vec![("train.epoch".to_string(), vec![1usize], vec![7.0f32])];
        save_checkpoint(&path, &model, &extras).unwrap();
        let (loaded, got_extras): (Tdnnf<f32>, _) = load_checkpoint(&path).unwrap();
        assert_eq!(got_extras, extras);
        let (a, ax) = model.forward(&feats).unwrap();
        let (b, bx) = loaded.forward(&feats).unwrap();
        assert_eq!(a, b);
        assert_eq!(ax, bx);
        // saving the loaded model reproduces the model bytes exactly
        let path2 = dir.path().join("model2.ckpt");
        save_checkpoint(&path2, &loaded, &extras).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn forward_bit_reproducible() {
        let model: Tdnnf<f32> = Tdnnf::new(ModelConfig::with_outputs(18), 4).unwrap();
        let feats = Array2::from_shape_fn((120, 40), |(i, j)| ((i + j) as f32 * 0.01).cos());
        let (a, ax) = model.forward(&feats).unwrap();
        let (b, bx) = model.forward(&feats).unwrap();
        assert_eq!(a, b);
        assert_eq!(ax, bx);
    }

    impl<F: NdFloat> Tdnnf<F> {
        fn clone_params(&self) -> Tdnnf<F> {
            Tdnnf {
                cfg: self.cfg.clone(),
                input_weight: self.input_weight.clone(),
                input_bias: self.input_bias.clone(),
                input_norm: self.input_norm.clone(),
                layers: self.layers.clone(),
                mmi_weight: self.mmi_weight.clone(),
                mmi_bias: self.mmi_bias.clone(),
                xent_weight: self.xent_weight.clone(),
                xent_bias: self.xent_bias.clone(),
            }
        }
    }
}
