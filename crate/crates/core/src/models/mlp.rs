//! One-hidden-layer perceptron with ReLU activations.
//!
//! Regression uses a linear output and squared loss, classification a
//! sigmoid output and logistic loss. Training is mini-batch gradient
//! descent with momentum.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::TargetKind;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub task: TargetKind,
    /// `p × h`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `h`
    pub w2: Array1<f64>,
    pub b2: f64,
}

#[derive(Clone, Debug)]
pub struct MlpParams {
    pub hidden_units: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub momentum: f64,
    /// L2 penalty on the weights (not the biases).
    pub l2: f64,
}

/// Gradient of the mean loss with respect to every parameter.
#[derive(Clone, Debug)]
pub struct MlpGradient {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    /// Weights drawn from N(0, 1/fan_in), biases zero.
    pub fn init(task: TargetKind, p: usize, h: usize, rng: &mut Rng) -> Self {
        let s1 = 1.0 / (p.max(1) as f64).sqrt();
        let s2 = 1.0 / (h.max(1) as f64).sqrt();
        let mut draw = |s: f64| -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            z * s
        };
        let w1 = Array2::from_shape_fn((p, h), |_| draw(s1));
        let w2 = Array1::from_shape_fn(h, |_| draw(s2));
        Self {
            task,
            w1,
            b1: Array1::zeros(h),
            w2,
            b2: 0.0,
        }
    }

    pub fn zeros(task: TargetKind, p: usize, h: usize) -> Self {
        Self {
            task,
            w1: Array2::zeros((p, h)),
            b1: Array1::zeros(h),
            w2: Array1::zeros(h),
            b2: 0.0,
        }
    }

    fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        let pre = x.dot(&self.w1) + &self.b1;
        let hidden = pre.mapv(|v| v.max(0.0));
        let out = hidden.dot(&self.w2) + self.b2;
        (pre, hidden, out)
    }

    /// Scores: raw output for regression, sigmoid probability otherwise.
    pub fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        let (_, _, out) = self.forward(x);
        match self.task {
            TargetKind::Regression => out,
            TargetKind::Classification => out.mapv(sigmoid),
        }
    }

    /// Mean loss over the rows plus `l2/2 · ‖weights‖²`.
    pub fn loss(&self, x: &Array2<f64>, y: &[f64], l2: f64) -> f64 {
        let (_, _, out) = self.forward(x);
        let n = y.len() as f64;
        let data: f64 = match self.task {
            TargetKind::Regression => out.iter().zip(y).map(|(o, t)| 0.5 * (o - t).powi(2)).sum(),
            TargetKind::Classification => out
                .iter()
                .zip(y)
                .map(|(&z, &t)| {
                    let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                    softplus - t * z
                })
                .sum(),
        };
        data / n + 0.5 * l2 * (self.w1.iter().map(|v| v * v).sum::<f64>() + self.w2.iter().map(|v| v * v).sum::<f64>())
    }

    /// Backpropagated gradient of [`Mlp::loss`].
    pub fn gradient(&self, x: &Array2<f64>, y: &[f64], l2: f64) -> MlpGradient {
        let (pre, hidden, out) = self.forward(x);
        let n = y.len() as f64;
        // d loss / d out is (prediction - target) for both losses
        let delta_out: Array1<f64> = match self.task {
            TargetKind::Regression => out.iter().zip(y).map(|(o, t)| (o - t) / n).collect(),
            TargetKind::Classification => out.iter().zip(y).map(|(&z, t)| (sigmoid(z) - t) / n).collect(),
        };
        let g_w2 = hidden.t().dot(&delta_out) + &self.w2 * l2;
        let g_b2 = delta_out.sum();
        let mut delta_hidden = delta_out.insert_axis(Axis(1)).dot(&self.w2.view().insert_axis(Axis(0)));
        delta_hidden.zip_mut_with(&pre, |d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        let g_w1 = x.t().dot(&delta_hidden) + &self.w1 * l2;
        let g_b1 = delta_hidden.sum_axis(Axis(0));
        MlpGradient {
            w1: g_w1,
            b1: g_b1,
            w2: g_w2,
            b2: g_b2,
        }
    }

    /// All parameters as one vector: w1 (row-major), b1, w2, b2.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.w1.iter().copied().collect();
        v.extend(self.b1.iter());
        v.extend(self.w2.iter());
        v.push(self.b2);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let (p, h) = self.w1.dim();
        let mut k = 0;
        for i in 0..p {
            for j in 0..h {
                self.w1[[i, j]] = v[k];
                k += 1;
            }
        }
        for j in 0..h {
            self.b1[j] = v[k];
            k += 1;
        }
        for j in 0..h {
            self.w2[j] = v[k];
            k += 1;
        }
        self.b2 = v[k];
    }
}

impl MlpGradient {
    pub fn flatten(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.w1.iter().copied().collect();
        v.extend(self.b1.iter());
        v.extend(self.w2.iter());
        v.push(self.b2);
        v
    }
}

pub fn fit_mlp(task: TargetKind, x: &Array2<f64>, y: &[f64], params: &MlpParams, rng: &mut Rng) -> Mlp {
    let (n, p) = x.dim();
    let mut net = Mlp::init(task, p, params.hidden_units, rng);
    if task == TargetKind::Regression {
        net.b2 = y.iter().sum::<f64>() / n as f64;
    }
    let mut velocity = vec![0.0; net.flatten().len()];
    let mut order: Vec<usize> = (0..n).collect();
    let batch = params.batch_size.clamp(1, n);
    for _ in 0..params.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
            let g = net.gradient(&xb, &yb, params.l2).flatten();
            let mut theta = net.flatten();
            for ((t, v), gi) in theta.iter_mut().zip(velocity.iter_mut()).zip(&g) {
                *v = params.momentum * *v - params.learning_rate * gi;
                *t += *v;
            }
            net.set_flat(&theta);
        }
    }
    net
}
