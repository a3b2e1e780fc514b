use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MetamodelError;
use crate::rng::SimRng;

/// Fully connected network with ReLU hidden layers and a linear output.
/// Parameters live in one flat vector, layer by layer: the weight matrix
/// (row per output unit) followed by the biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl Mlp {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn new(sizes: &[usize], rng: &mut SimRng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output widths");
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.sizes.last().expect("nonempty")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Bias vector of the output layer.
    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let n = self.outputs();
        let len = self.params.len();
        &mut self.params[len - n..]
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut acts = Vec::new();
        self.forward_cached(x, &mut acts);
        acts.pop().expect("output layer")
    }

    /// Runs the network keeping every layer's output; `acts[0]` is the
    /// input and the last entry the network output.
    pub(crate) fn forward_cached(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.clear();
        acts.push(x.to_vec());
        let mut offset = 0;
        let last = self.sizes.len() - 2;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let input = &acts[l];
            let mut out = bias.to_vec();
            for (o, row) in weights.chunks_exact(n_in).enumerate() {
                out[o] += row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
            }
            if l != last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(out);
            offset += n_in * n_out + n_out;
        }
    }

    /// Adds the gradient of a loss with output gradient `grad_out` to
    /// `grads`, given the activations of [`Self::forward_cached`].
    pub(crate) fn backward(&self, acts: &[Vec<f64>], grad_out: &[f64], grads: &mut [f64]) {
        let mut delta = grad_out.to_vec();
        let mut offset = self.params.len();
        for l in (0..self.sizes.len() - 1).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            offset -= n_in * n_out + n_out;
            let input = &acts[l];
            let (gw, gb) = grads[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                gb[o] += delta[o];
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += delta[o] * a;
                }
            }
            if l == 0 {
                break;
            }
            let weights = &self.params[offset..offset + n_in * n_out];
            let mut next = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    for (n, w) in next.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                        *n += d * w;
                    }
                }
            }
            // ReLU derivative of the layer below
            for (n, a) in next.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *n = 0.0;
                }
            }
            delta = next;
        }
    }

    pub fn to_stored(&self) -> StoredMlp {
        let mut bytes = Vec::with_capacity(self.params.len() * 8);
        for p in &self.params {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
        StoredMlp {
            sizes: self.sizes.clone(),
            activation: "relu".into(),
            weights: STANDARD.encode(bytes),
        }
    }

    pub fn from_stored(stored: &StoredMlp) -> Result<Self, MetamodelError> {
        let bytes = STANDARD
            .decode(&stored.weights)
            .map_err(|e| MetamodelError::Checkpoint(e.to_string()))?;
        if stored.sizes.len() < 2 || bytes.len() != param_count(&stored.sizes) * 8 {
            return Err(MetamodelError::Checkpoint(format!(
                "{} weight bytes do not fit layer sizes {:?}",
                bytes.len(),
                stored.sizes
            )));
        }
        let params = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self {
            sizes: stored.sizes.clone(),
            params,
        })
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Checkpoint form of an [`Mlp`]: layer widths plus the flat parameter
/// vector as base64 of little-endian `f64`s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredMlp {
    pub sizes: Vec<usize>,
    pub activation: String,
    pub weights: String,
}

/// Adam state for a flat parameter vector.
pub(crate) struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn checkpoint_round_trip() {
        let mlp = Mlp::new(&[2, 4, 3], &mut stream(1, &[]));
        let text = serde_json::to_string(&mlp.to_stored()).unwrap();
        let back = Mlp::from_stored(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, mlp);
    }
}
