//! Dense feedforward network with ReLU hidden layers, Bernoulli dropout on
//! the final hidden layer, and a linear 24-output head:
//!
//! ```text
//! h_0 = x
//! h_l = ReLU(W_l h_{l−1} + b_l)          l = 1..L
//! h_L' = (m ⊙ h_L) / (1 − γ)             m ~ Bernoulli(1 − γ)
//! out  = W_out h_L' + b_out
//! ```
//!
//! The mask multiplies only the last hidden layer, so the output is linear
//! in the mask and the expectation over masks of a stochastic pass equals
//! the deterministic pass (inverted scaling keeps that identity exact).
//! Gradients of the MSE loss are hand-derived for this fixed architecture;
//! the dropout mask is a constant during differentiation.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{matvec, outer_acc, tmatvec, Mat};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("non-finite input at position {0}")]
    NonFiniteInput(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("forward cache does not match parameters ({0})")]
    CacheMismatch(String),
    #[error("dropout rate {0} outside [0, 1)")]
    BadDropoutRate(f64),
}

/// Architecture and dropout configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_layers: usize,
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NetworkError::BadDropoutRate(self.dropout_rate));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dim == 0 || self.hidden_layers == 0 {
            return Err(NetworkError::ShapeMismatch("all dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// One affine layer, weights row-major `(out, in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl DenseLayer {
    fn zeros(out_dim: usize, in_dim: usize) -> Self {
        DenseLayer {
            w: Mat::zeros(out_dim, in_dim),
            b: vec![0.0; out_dim],
        }
    }
}

/// All trainable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: Vec<DenseLayer>,
    pub output: DenseLayer,
}

impl MlpParams {
    pub fn zeros(config: &MlpConfig) -> Self {
        let mut hidden = Vec::with_capacity(config.hidden_layers);
        let mut fan_in = config.input_dim;
        for _ in 0..config.hidden_layers {
            hidden.push(DenseLayer::zeros(config.hidden_dim, fan_in));
            fan_in = config.hidden_dim;
        }
        MlpParams {
            hidden,
            output: DenseLayer::zeros(config.output_dim, fan_in),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden.last().map(|l| l.w.rows).unwrap_or(0)
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.first().map(|l| l.w.cols).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.output.w.rows
    }

    pub fn is_finite(&self) -> bool {
        self.hidden
            .iter()
            .chain(std::iter::once(&self.output))
            .all(|l| l.w.is_finite() && l.b.iter().all(|v| v.is_finite()))
    }

    /// Named views over every parameter tensor, in a fixed order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::with_capacity(2 * (self.hidden.len() + 1));
        for (i, layer) in self.hidden.iter_mut().enumerate() {
            out.push((format!("hidden[{i}].w"), layer.w.data.as_mut_slice()));
            out.push((format!("hidden[{i}].b"), layer.b.as_mut_slice()));
        }
        out.push(("output.w".to_string(), self.output.w.data.as_mut_slice()));
        out.push(("output.b".to_string(), self.output.b.as_mut_slice()));
        out
    }

    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::with_capacity(2 * (self.hidden.len() + 1));
        for (i, layer) in self.hidden.iter().enumerate() {
            out.push((format!("hidden[{i}].w"), layer.w.data.as_slice()));
            out.push((format!("hidden[{i}].b"), layer.b.as_slice()));
        }
        out.push(("output.w".to_string(), self.output.w.data.as_slice()));
        out.push(("output.b".to_string(), self.output.b.as_slice()));
        out
    }
}

/// He-style initialization: zero-mean weights with variance 2/fan_in,
/// zero biases. Deterministic given the generator state.
pub fn init_params(config: &MlpConfig, rng: &mut ChaCha8Rng) -> Result<MlpParams, NetworkError> {
    config.validate()?;
    let mut params = MlpParams::zeros(config);
    for layer in params.hidden.iter_mut().chain(std::iter::once(&mut params.output)) {
        let fan_in = layer.w.cols as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
        for w in layer.w.data.iter_mut() {
            *w = normal.sample(rng);
        }
        // biases stay zero
    }
    Ok(params)
}

/// Bernoulli keep/drop pattern over the final hidden layer with the
/// inverted-dropout scale 1/(1−γ) folded in at application time.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    /// One entry per final-hidden unit, each exactly 0.0 or 1.0.
    pub keep: Vec<f64>,
    /// 1/(1−γ).
    pub scale: f64,
}

impl DropoutMask {
    pub fn sample(dim: usize, dropout_rate: f64, rng: &mut ChaCha8Rng) -> Result<Self, NetworkError> {
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(NetworkError::BadDropoutRate(dropout_rate));
        }
        let bern = Bernoulli::new(1.0 - dropout_rate).expect("validated rate");
        let keep = (0..dim).map(|_| if bern.sample(rng) { 1.0 } else { 0.0 }).collect();
        Ok(DropoutMask {
            keep,
            scale: 1.0 / (1.0 - dropout_rate),
        })
    }

    pub fn all_ones(dim: usize) -> Self {
        DropoutMask {
            keep: vec![1.0; dim],
            scale: 1.0,
        }
    }
}

/// Intermediate activations retained for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    /// Post-ReLU activations h_1..h_L.
    pub hidden: Vec<Vec<f64>>,
    /// Final hidden layer after the mask and scale.
    pub dropped: Vec<f64>,
    pub output: Vec<f64>,
}

fn check_mask(params: &MlpParams, mask: Option<&DropoutMask>) -> Result<(), NetworkError> {
    if let Some(m) = mask {
        if m.keep.len() != params.hidden_dim() {
            return Err(NetworkError::ShapeMismatch(format!(
                "mask length {} but final hidden layer has {} units",
                m.keep.len(),
                params.hidden_dim()
            )));
        }
    }
    Ok(())
}

/// Forward pass, reusing the cache's buffers. `mask = None` is the
/// deterministic pass (all-ones mask, unit scale).
pub fn forward_into(
    params: &MlpParams,
    x: &[f64],
    mask: Option<&DropoutMask>,
    cache: &mut ForwardCache,
) -> Result<(), NetworkError> {
    if x.len() != params.input_dim() {
        return Err(NetworkError::ShapeMismatch(format!(
            "input length {} but first layer expects {}",
            x.len(),
            params.input_dim()
        )));
    }
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        return Err(NetworkError::NonFiniteInput(pos));
    }
    check_mask(params, mask)?;

    cache.input.clear();
    cache.input.extend_from_slice(x);
    cache.hidden.resize(params.hidden.len(), Vec::new());

    for (l, layer) in params.hidden.iter().enumerate() {
        let (done, rest) = cache.hidden.split_at_mut(l);
        let prev: &[f64] = if l == 0 { &cache.input } else { &done[l - 1] };
        let h = &mut rest[0];
        h.resize(layer.w.rows, 0.0);
        matvec(&layer.w, prev, h);
        for (v, b) in h.iter_mut().zip(&layer.b) {
            *v = (*v + b).max(0.0);
        }
    }

    let last = cache.hidden.last().expect("at least one hidden layer");
    cache.dropped.resize(last.len(), 0.0);
    match mask {
        Some(m) => {
            for ((d, h), k) in cache.dropped.iter_mut().zip(last).zip(&m.keep) {
                *d = h * k * m.scale;
            }
        }
        None => cache.dropped.copy_from_slice(last),
    }

    cache.output.resize(params.output.w.rows, 0.0);
    matvec(&params.output.w, &cache.dropped, &mut cache.output);
    for (v, b) in cache.output.iter_mut().zip(&params.output.b) {
        *v += b;
    }
    Ok(())
}

/// Convenience wrapper returning the prediction and a fresh cache.
pub fn forward(
    params: &MlpParams,
    x: &[f64],
    mask: Option<&DropoutMask>,
) -> Result<(Vec<f64>, ForwardCache), NetworkError> {
    let mut cache = ForwardCache::default();
    forward_into(params, x, mask, &mut cache)?;
    Ok((cache.output.clone(), cache))
}

/// Mean squared error over the output hours.
pub fn mse_loss(prediction: &[f64], target: &[f64]) -> f64 {
    assert_eq!(prediction.len(), target.len(), "mse over mismatched lengths");
    let n = prediction.len() as f64;
    prediction
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub hidden: Vec<DenseLayer>,
    pub output: DenseLayer,
}

impl Gradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Gradients {
            hidden: params
                .hidden
                .iter()
                .map(|l| DenseLayer::zeros(l.w.rows, l.w.cols))
                .collect(),
            output: DenseLayer::zeros(params.output.w.rows, params.output.w.cols),
        }
    }

    pub fn zero(&mut self) {
        for layer in self.hidden.iter_mut().chain(std::iter::once(&mut self.output)) {
            layer.w.fill(0.0);
            layer.b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in self.hidden.iter_mut().chain(std::iter::once(&mut self.output)) {
            layer.w.data.iter_mut().for_each(|v| *v *= factor);
            layer.b.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::with_capacity(2 * (self.hidden.len() + 1));
        for (i, layer) in self.hidden.iter().enumerate() {
            out.push((format!("hidden[{i}].w"), layer.w.data.as_slice()));
            out.push((format!("hidden[{i}].b"), layer.b.as_slice()));
        }
        out.push(("output.w".to_string(), self.output.w.data.as_slice()));
        out.push(("output.b".to_string(), self.output.b.as_slice()));
        out
    }
}

/// Accumulate the exact gradient of `mse_loss(forward(x, mask), target)`
/// into `grads`, using the cache written by the matching forward call.
pub fn backward_into(
    params: &MlpParams,
    cache: &ForwardCache,
    target: &[f64],
    mask: Option<&DropoutMask>,
    grads: &mut Gradients,
) -> Result<(), NetworkError> {
    if cache.hidden.len() != params.hidden.len()
        || cache.input.len() != params.input_dim()
        || cache.output.len() != params.output_dim()
        || cache.hidden.iter().zip(&params.hidden).any(|(h, l)| h.len() != l.w.rows)
    {
        return Err(NetworkError::CacheMismatch(
            "cache shapes do not match parameter shapes".into(),
        ));
    }
    if target.len() != params.output_dim() {
        return Err(NetworkError::ShapeMismatch(format!(
            "target length {} but output dim {}",
            target.len(),
            params.output_dim()
        )));
    }
    check_mask(params, mask)?;

    let n_out = target.len() as f64;
    // dL/d out
    let d_out: Vec<f64> = cache
        .output
        .iter()
        .zip(target)
        .map(|(o, t)| 2.0 * (o - t) / n_out)
        .collect();

    outer_acc(&mut grads.output.w, &d_out, &cache.dropped);
    for (g, d) in grads.output.b.iter_mut().zip(&d_out) {
        *g += d;
    }

    // back through the dropout: d h_L = W_outᵀ d_out ⊙ m·s
    let mut d_h = vec![0.0; params.hidden_dim()];
    tmatvec(&params.output.w, &d_out, &mut d_h);
    if let Some(m) = mask {
        for (d, k) in d_h.iter_mut().zip(&m.keep) {
            *d *= k * m.scale;
        }
    }

    for l in (0..params.hidden.len()).rev() {
        let h = &cache.hidden[l];
        // ReLU gate: pass gradient only where the unit fired
        for (d, act) in d_h.iter_mut().zip(h) {
            if *act <= 0.0 {
                *d = 0.0;
            }
        }
        let prev: &[f64] = if l == 0 { &cache.input } else { &cache.hidden[l - 1] };
        outer_acc(&mut grads.hidden[l].w, &d_h, prev);
        for (g, d) in grads.hidden[l].b.iter_mut().zip(&d_h) {
            *g += d;
        }
        if l > 0 {
            let mut d_prev = vec![0.0; prev.len()];
            tmatvec(&params.hidden[l].w, &d_h, &mut d_prev);
            d_h = d_prev;
        }
    }
    Ok(())
}

/// Fresh-gradient wrapper around [`backward_into`].
pub fn backward(
    params: &MlpParams,
    cache: &ForwardCache,
    target: &[f64],
    mask: Option<&DropoutMask>,
) -> Result<Gradients, NetworkError> {
    let mut grads = Gradients::zeros_like(params);
    backward_into(params, cache, target, mask, &mut grads)?;
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use approx::assert_abs_diff_eq;

    fn small_config(input: usize, layers: usize, dim: usize, gamma: f64) -> MlpConfig {
        MlpConfig {
            input_dim: input,
            output_dim: 5,
            hidden_layers: layers,
            hidden_dim: dim,
            dropout_rate: gamma,
            seed: 0,
        }
    }

    #[test]
    fn init_is_deterministic_given_seed() {
        let cfg = small_config(12, 2, 8, 0.2);
        let a = init_params(&cfg, &mut rng_for(42, "init", 0)).unwrap();
        let b = init_params(&cfg, &mut rng_for(42, "init", 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn init_variance_close_to_he() {
        let cfg = MlpConfig {
            input_dim: 248,
            output_dim: 24,
            hidden_layers: 1,
            hidden_dim: 256,
            dropout_rate: 0.0,
            seed: 0,
        };
        let params = init_params(&cfg, &mut rng_for(7, "init", 0)).unwrap();
        let w = &params.hidden[0].w.data;
        let var = crate::linalg::population_variance(w);
        let expected = 2.0 / 248.0;
        assert!(
            (var - expected).abs() / expected < 0.10,
            "sample variance {var} vs He target {expected}"
        );
        assert!(params.hidden[0].b.iter().all(|&b| b == 0.0));
        assert!(params.output.b.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_weights_pass_bias_through() {
        let cfg = small_config(4, 2, 3, 0.5);
        let mut params = MlpParams::zeros(&cfg);
        params.output.b = vec![7.0; 5];
        let mask = DropoutMask::sample(3, 0.5, &mut rng_for(1, "mask", 0)).unwrap();
        let (out, _) = forward(&params, &[1.0, -2.0, 3.0, 4.0], Some(&mask)).unwrap();
        assert_eq!(out, vec![7.0; 5]);
        let (out2, _) = forward(&params, &[0.0; 4], None).unwrap();
        assert_eq!(out2, vec![7.0; 5]);
    }

    #[test]
    fn gamma_zero_mask_equals_no_mask() {
        let cfg = small_config(6, 2, 8, 0.0);
        let params = init_params(&cfg, &mut rng_for(3, "init", 0)).unwrap();
        let x: Vec<f64> = (0..6).map(|i| (i as f64) * 0.3 - 1.0).collect();
        let mask = DropoutMask::sample(8, 0.0, &mut rng_for(4, "mask", 0)).unwrap();
        assert!(mask.keep.iter().all(|&k| k == 1.0));
        assert_eq!(mask.scale, 1.0);
        let (a, _) = forward(&params, &x, Some(&mask)).unwrap();
        let (b, _) = forward(&params, &x, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hand_computed_two_two_one_chain() {
        // 2-2-1 toy net checked on paper:
        // W1 = [[1, -1], [0.5, 0.5]], b1 = [0, -1]
        // x = [2, 1] → pre = [1, 0.5] → relu → [1, 0.5]
        // W2 = [[2, -4]], b2 = [0.25] → out = 2·1 − 4·0.5 + 0.25 = 0.25
        let params = MlpParams {
            hidden: vec![DenseLayer {
                w: Mat::from_rows(&[vec![1.0, -1.0], vec![0.5, 0.5]]),
                b: vec![0.0, -1.0],
            }],
            output: DenseLayer {
                w: Mat::from_rows(&[vec![2.0, -4.0]]),
                b: vec![0.25],
            },
        };
        let (out, cache) = forward(&params, &[2.0, 1.0], None).unwrap();
        assert_abs_diff_eq!(out[0], 0.25, epsilon = 1e-15);
        assert_eq!(cache.hidden[0], vec![1.0, 0.5]);

        // negative pre-activation clips: x = [0, 2] → pre = [-2, 0] → relu [0, 0]
        let (out2, _) = forward(&params, &[0.0, 2.0], None).unwrap();
        assert_abs_diff_eq!(out2[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn non_finite_input_is_an_error() {
        let cfg = small_config(3, 1, 2, 0.0);
        let params = init_params(&cfg, &mut rng_for(5, "init", 0)).unwrap();
        let err = forward(&params, &[1.0, f64::NAN, 0.0], None).unwrap_err();
        assert!(matches!(err, NetworkError::NonFiniteInput(1)));
    }

    #[test]
    fn mse_basics() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        // constant offset δ on all hours → δ²
        let pred = vec![5.0; 24];
        let target = vec![2.0; 24];
        assert_abs_diff_eq!(mse_loss(&pred, &target), 9.0, epsilon = 1e-12);
        // random fixture vs independent recomputation
        use rand::Rng;
        let mut rng = rng_for(9, "mse", 0);
        let p: Vec<f64> = (0..24).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let t: Vec<f64> = (0..24).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let manual: f64 = p.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 24.0;
        assert_abs_diff_eq!(mse_loss(&p, &t), manual, epsilon = 1e-12);
    }

    #[test]
    fn zero_gradient_at_perfect_prediction() {
        let cfg = small_config(4, 2, 6, 0.0);
        let params = init_params(&cfg, &mut rng_for(8, "init", 0)).unwrap();
        let x = [0.5, -0.5, 1.0, 0.0];
        let (out, cache) = forward(&params, &x, None).unwrap();
        let grads = backward(&params, &cache, &out, None).unwrap();
        for (_, t) in grads.tensors() {
            assert!(t.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn masked_unit_gets_zero_output_column_gradient() {
        let cfg = small_config(4, 1, 3, 0.5);
        let params = init_params(&cfg, &mut rng_for(10, "init", 0)).unwrap();
        let mask = DropoutMask {
            keep: vec![1.0, 0.0, 1.0],
            scale: 2.0,
        };
        let x = [1.0, 2.0, -1.0, 0.5];
        let (_, cache) = forward(&params, &x, Some(&mask)).unwrap();
        let target = vec![1.0; 5];
        let grads = backward(&params, &cache, &target, Some(&mask)).unwrap();
        // column 1 of output.w multiplies the dropped unit: gradient must be 0
        for r in 0..5 {
            assert_eq!(grads.output.w.get(r, 1), 0.0);
        }
        // and the masked unit's incoming weights get no gradient either
        assert!(grads.hidden[0].w.row(1).iter().all(|&g| g == 0.0));
    }

    /// Central finite differences of the full loss with a frozen mask.
    fn finite_difference_check(cfg: &MlpConfig, seed: u64, rel_tol: f64) -> (usize, usize) {
        use rand::Rng;
        let mut rng = rng_for(seed, "fd", 0);
        let params = init_params(cfg, &mut rng).unwrap();
        let x: Vec<f64> = (0..cfg.input_dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let y: Vec<f64> = (0..cfg.output_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mask = if cfg.dropout_rate > 0.0 {
            Some(DropoutMask::sample(cfg.hidden_dim, cfg.dropout_rate, &mut rng).unwrap())
        } else {
            None
        };

        let (_, cache) = forward(&params, &x, mask.as_ref()).unwrap();
        let analytic = backward(&params, &cache, &y, mask.as_ref()).unwrap();

        let loss_of = |p: &MlpParams| {
            let (out, _) = forward(p, &x, mask.as_ref()).unwrap();
            mse_loss(&out, &y)
        };

        let eps = 1e-4;
        let mut checked = 0;
        let mut ok = 0;
        let grad_tensors = analytic.tensors();
        for (tensor_idx, (_, grad)) in grad_tensors.iter().enumerate() {
            for i in 0..grad.len() {
                let mut plus = params.clone();
                plus.tensors_mut()[tensor_idx].1[i] += eps;
                let mut minus = params.clone();
                minus.tensors_mut()[tensor_idx].1[i] -= eps;
                let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * eps);
                let a = grad[i];
                let denom = a.abs().max(numeric.abs()).max(1e-6);
                checked += 1;
                if ((a - numeric).abs() / denom) < rel_tol {
                    ok += 1;
                }
            }
        }
        (ok, checked)
    }

    #[test]
    fn gradients_match_finite_differences() {
        // small net for speed; the acceptance suite runs the 248→8→8→24 case
        let cfg = MlpConfig {
            input_dim: 10,
            output_dim: 5,
            hidden_layers: 2,
            hidden_dim: 6,
            dropout_rate: 0.3,
            seed: 0,
        };
        let (ok, total) = finite_difference_check(&cfg, 1234, 1e-5);
        assert_eq!(ok, total, "{ok}/{total} gradient entries matched");
    }

    #[test]
    fn dropout_expectation_matches_deterministic_pass() {
        // output is linear in the mask, so averaging stochastic passes
        // converges to the deterministic pass
        let cfg = small_config(6, 2, 8, 0.4);
        let params = init_params(&cfg, &mut rng_for(77, "init", 0)).unwrap();
        let x = [0.8, -0.3, 1.2, 0.1, -0.9, 0.4];
        let (det, _) = forward(&params, &x, None).unwrap();

        let mut mean = vec![0.0; 5];
        let n = 50_000;
        let mut rng = rng_for(77, "masks", 0);
        let mut cache = ForwardCache::default();
        for _ in 0..n {
            let mask = DropoutMask::sample(8, 0.4, &mut rng).unwrap();
            forward_into(&params, &x, Some(&mask), &mut cache).unwrap();
            for (m, o) in mean.iter_mut().zip(&cache.output) {
                *m += o;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        for (m, d) in mean.iter().zip(&det) {
            let rel = (m - d).abs() / d.abs().max(1e-6);
            assert!(rel < 0.01, "MC mean {m} vs deterministic {d} (rel {rel})");
        }
    }

    #[test]
    fn hidden_activations_are_nonnegative() {
        let cfg = small_config(6, 3, 10, 0.2);
        let params = init_params(&cfg, &mut rng_for(21, "init", 0)).unwrap();
        let mut rng = rng_for(22, "x", 0);
        use rand::Rng;
        for _ in 0..50 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (_, cache) = forward(&params, &x, None).unwrap();
            for h in &cache.hidden {
                assert!(h.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let cfg = small_config(5, 2, 7, 0.3);
        let params = init_params(&cfg, &mut rng_for(31, "init", 0)).unwrap();
        let mask = DropoutMask::sample(7, 0.3, &mut rng_for(32, "mask", 0)).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4, -0.5];
        let (a, _) = forward(&params, &x, Some(&mask)).unwrap();
        let (b, _) = forward(&params, &x, Some(&mask)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cache_mismatch_is_an_error() {
        let cfg_a = small_config(4, 1, 3, 0.0);
        let cfg_b = small_config(4, 2, 3, 0.0);
        let pa = init_params(&cfg_a, &mut rng_for(1, "a", 0)).unwrap();
        let pb = init_params(&cfg_b, &mut rng_for(1, "b", 0)).unwrap();
        let (_, cache) = forward(&pa, &[1.0, 2.0, 3.0, 4.0], None).unwrap();
        let err = backward(&pb, &cache, &[0.0; 5], None).unwrap_err();
        assert!(matches!(err, NetworkError::CacheMismatch(_)));
    }
}
