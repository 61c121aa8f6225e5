//! Single-layer softmax classifiers used by the regularizers.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::mat::{softmax_backward, softmax_in_place, Mat};
use crate::error::{Error, Result};

/// Smallest probability fed to a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub input_label: String,
    pub output_label: String,
    /// `n_out x n_in`.
    pub weights: Mat,
    pub bias: Vec<f64>,
}

impl Predictor {
    pub fn n_in(&self) -> usize {
        self.weights.cols
    }

    pub fn n_out(&self) -> usize {
        self.weights.rows
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.weights.mul_vec(x);
        for (zi, b) in z.iter_mut().zip(&self.bias) {
            *zi += b;
        }
        softmax_in_place(&mut z);
        z
    }

    /// Given `p = predict(x)` and `dL/dp`, return `dL/dx`.
    pub fn input_grad(&self, p: &[f64], grad_p: &[f64]) -> Vec<f64> {
        let dz = softmax_backward(p, grad_p);
        self.weights.left_mul(&dz).expect("predictor shapes agree")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub epochs: usize,
    pub adam: AdamConfig,
    pub init_std: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            epochs: 400,
            adam: AdamConfig::with_step_size(0.1),
            init_std: 0.01,
        }
    }
}

/// Cross-entropy `-sum_j t_j log max(q_j, floor)`.
pub fn cross_entropy(q: &[f64], target: &[f64]) -> f64 {
    q.iter()
        .zip(target)
        .filter(|(_, t)| **t > 0.0)
        .map(|(qj, t)| -t * qj.max(PROB_FLOOR).ln())
        .sum()
}

/// `dCE/dq`, zero wherever the floor is active.
pub fn cross_entropy_grad(q: &[f64], target: &[f64]) -> Vec<f64> {
    q.iter()
        .zip(target)
        .map(|(qj, t)| if *t > 0.0 && *qj > PROB_FLOOR { -t / qj } else { 0.0 })
        .collect()
}

/// Collapse identical pairs into one weighted example; weights sum to 1.
pub fn weighted_unique(pairs: impl IntoIterator<Item = (Vec<f64>, Vec<f64>)>) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
    let mut order: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut index: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
    let mut total = 0.0;
    for (x, t) in pairs {
        let key: Vec<u64> = x.iter().chain(&t).map(|v| v.to_bits()).collect();
        total += 1.0;
        match index.get(&key) {
            Some(&i) => order[i].2 += 1.0,
            None => {
                index.insert(key, order.len());
                order.push((x, t, 1.0));
            }
        }
    }
    for e in &mut order {
        e.2 /= total;
    }
    order
}

/// Keep pairs whose target has positive mass, renormalized to sum to one.
fn normalize_targets(data: &[(Vec<f64>, Vec<f64>)]) -> Vec<(Vec<f64>, Vec<f64>)> {
    data.iter()
        .filter_map(|(x, t)| {
            let s: f64 = t.iter().sum();
            (s > 0.0).then(|| (x.clone(), t.iter().map(|v| v / s).collect()))
        })
        .collect()
}

/// Weighted mean cross-entropy of a predictor on a dataset.
pub fn predictor_loss(p: &Predictor, data: &[(Vec<f64>, Vec<f64>, f64)]) -> f64 {
    data.iter()
        .map(|(x, t, w)| w * cross_entropy(&p.predict(x), t))
        .sum()
}

/// Fit a softmax classifier by full-batch Adam on weighted cross-entropy.
pub fn fit_predictor(
    data: &[(Vec<f64>, Vec<f64>)],
    labels: (&str, &str),
    config: &PredictorConfig,
    rng: &mut impl Rng,
) -> Result<Predictor> {
    config.adam.validate()?;
    let data = weighted_unique(normalize_targets(data));
    let Some((x0, t0, _)) = data.first() else {
        return Err(Error::Empty("predictor dataset"));
    };
    let (n_in, n_out) = (x0.len(), t0.len());
    if let Some((x, t, _)) = data.iter().find(|(x, t, _)| x.len() != n_in || t.len() != n_out) {
        return Err(Error::Dimension {
            expected: n_in + n_out,
            actual: x.len() + t.len(),
        });
    }
    let normal = Normal::new(0.0, config.init_std)
        .map_err(|e| Error::Config(format!("predictor init: {e}")))?;
    let mut pred = Predictor {
        input_label: labels.0.to_string(),
        output_label: labels.1.to_string(),
        weights: Mat::from_fn(n_out, n_in, |_, _| normal.sample(&mut *rng)),
        bias: vec![0.0; n_out],
    };
    let n_w = n_out * n_in;
    let mut adam = Adam::new(n_w + n_out, config.adam);
    let mut params: Vec<f64> = pred.weights.data.iter().chain(&pred.bias).copied().collect();
    let mut grad = vec![0.0; params.len()];
    for _ in 0..config.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, t, w) in &data {
            let p = pred.predict(x);
            // Softmax followed by cross-entropy has logit gradient p - t.
            for j in 0..n_out {
                let dz = w * (p[j] - t[j]);
                grad[n_w + j] += dz;
                for (k, xk) in x.iter().enumerate() {
                    grad[j * n_in + k] += dz * xk;
                }
            }
        }
        adam.step(&mut params, &grad)?;
        pred.weights.data.copy_from_slice(&params[..n_w]);
        pred.bias.copy_from_slice(&params[n_w..]);
    }
    if !params.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("predictor weights"));
    }
    Ok(pred)
}
