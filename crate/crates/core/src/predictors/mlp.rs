//! Fully connected regressor: logistic hidden layers, linear output,
//! trained with Adam on the mean squared 2-norm loss.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainingData;
use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![512, 4],
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 200,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid!("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid!("batch_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(invalid!("epochs must be >= 1"));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(invalid!("hidden layer sizes must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Logistic,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
        }
    }
}

/// Dense layer. `weights` is `input × output`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Gradient of the loss with respect to each layer's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingHistory {
    /// Mean minibatch loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Loss over the full training set with the final parameters.
    pub final_loss: f64,
}

impl TrainingHistory {
    /// Trailing moving average of the epoch losses over `window` epochs.
    pub fn moving_average(&self, window: usize) -> Vec<f64> {
        if window == 0 || self.epoch_losses.len() < window {
            return Vec::new();
        }
        self.epoch_losses
            .windows(window)
            .map(|w| w.iter().sum::<f64>() / window as f64)
            .collect()
    }
}

/// `c = alpha · op(a) · op(b) + beta · c` for row-major operands, where
/// `a` is `m × k` and `b` is `k × n` after the optional transposes.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices cover the strided extents asserted above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        output_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(output_dim);
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    input: fan_in,
                    output: fan_out,
                    activation: if l + 2 == sizes.len() {
                        Activation::Identity
                    } else {
                        Activation::Logistic
                    },
                    weights: (0..fan_in * fan_out)
                        .map(|_| rng.random_range(-bound..bound))
                        .collect(),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid!("network needs at least one layer"));
        }
        for w in layers.windows(2) {
            if w[0].output != w[1].input {
                return Err(invalid!("layer sizes do not chain"));
            }
        }
        for l in &layers {
            if l.weights.len() != l.input * l.output || l.bias.len() != l.output {
                return Err(invalid!("layer parameter sizes are inconsistent"));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(invalid!(
                "input has length {}, model expects {}",
                x.len(),
                self.input_dim()
            ));
        }
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let mut next = layer.bias.clone();
            for (i, &xi) in cur.iter().enumerate() {
                let row = &layer.weights[i * layer.output..(i + 1) * layer.output];
                for (acc, &w) in next.iter_mut().zip(row) {
                    *acc += w * xi;
                }
            }
            for z in next.iter_mut() {
                *z = layer.activation.apply(*z);
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Activations of every layer for a batch; index 0 is the input.
    fn forward(&self, x: &[f64], batch: usize) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let prev = acts.last().expect("input pushed");
            let mut z = Vec::with_capacity(batch * layer.output);
            for _ in 0..batch {
                z.extend_from_slice(&layer.bias);
            }
            gemm(batch, layer.input, layer.output, prev, false, &layer.weights, false, 1.0, &mut z);
            if layer.activation == Activation::Logistic {
                for v in z.iter_mut() {
                    *v = Activation::Logistic.apply(*v);
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Mean squared 2-norm error `(1/N) Σ ‖y_i − f(x_i)‖²` over a batch.
    pub fn loss(&self, x: &[f64], y: &[f64], batch: usize) -> f64 {
        let out = self.forward(x, batch).pop().expect("output layer");
        out.iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / batch as f64
    }

    /// Loss and its gradient over a batch.
    pub fn gradient(&self, x: &[f64], y: &[f64], batch: usize) -> (f64, Gradient) {
        let acts = self.forward(x, batch);
        let out = acts.last().expect("output layer");
        let scale = 2.0 / batch as f64;
        let mut loss = 0.0;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let r = a - b;
                loss += r * r;
                scale * r
            })
            .collect();
        loss /= batch as f64;

        let nl = self.layers.len();
        let mut gw = vec![Vec::new(); nl];
        let mut gb = vec![Vec::new(); nl];
        for l in (0..nl).rev() {
            let layer = &self.layers[l];
            let input = &acts[l];
            let mut dw = vec![0.0; layer.input * layer.output];
            gemm(layer.input, batch, layer.output, input, true, &delta, false, 0.0, &mut dw);
            let mut db = vec![0.0; layer.output];
            for row in delta.chunks_exact(layer.output) {
                for (acc, &d) in db.iter_mut().zip(row) {
                    *acc += d;
                }
            }
            gw[l] = dw;
            gb[l] = db;
            if l > 0 {
                let mut da = vec![0.0; batch * layer.input];
                gemm(batch, layer.output, layer.input, &delta, false, &layer.weights, true, 0.0, &mut da);
                // Hidden layers are logistic: σ' = a(1 − a).
                for (d, &a) in da.iter_mut().zip(input) {
                    *d *= a * (1.0 - a);
                }
                delta = da;
            }
        }
        (loss, Gradient { weights: gw, bias: gb })
    }
}

struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(lr: f64, params: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
            step: 0,
            m: vec![0.0; params],
            v: vec![0.0; params],
        }
    }

    fn update(&mut self, net: &mut Mlp, grad: &Gradient) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let mut offset = 0;
        for (l, layer) in net.layers.iter_mut().enumerate() {
            for (params, g) in [
                (&mut layer.weights, &grad.weights[l]),
                (&mut layer.bias, &grad.bias[l]),
            ] {
                let m = &mut self.m[offset..offset + params.len()];
                let v = &mut self.v[offset..offset + params.len()];
                for i in 0..params.len() {
                    m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                    v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                    let mhat = m[i] / c1;
                    let vhat = v[i] / c2;
                    params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
                }
                offset += params.len();
            }
        }
    }
}

/// Trains a network with minibatch Adam. Initialization and shuffling use
/// separate ChaCha streams of `config.seed`, so training is deterministic.
pub fn train(data: &TrainingData<'_>, config: &MlpConfig) -> Result<(Mlp, TrainingHistory)> {
    config.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    init_rng.set_stream(0);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let (d_in, d_out) = (data.input_dim(), data.output_dim());
    let mut net = Mlp::init(d_in, d_out, &config.hidden_sizes, &mut init_rng);
    let mut adam = Adam::new(config.learning_rate, net.param_count());
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut xb = Vec::with_capacity(config.batch_size * d_in);
    let mut yb = Vec::with_capacity(config.batch_size * d_out);
    let mut history = TrainingHistory::default();

    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            xb.clear();
            yb.clear();
            for &i in chunk {
                xb.extend_from_slice(data.feature_row(i));
                yb.extend_from_slice(data.label_row(i));
            }
            let (loss, grad) = net.gradient(&xb, &yb, chunk.len());
            total += loss * chunk.len() as f64;
            adam.update(&mut net, &grad);
        }
        history.epoch_losses.push(total / n as f64);
    }
    history.final_loss = net.loss(data.features(), data.labels(), n);
    Ok((net, history))
}
