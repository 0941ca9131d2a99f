use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Dense feed-forward network: ReLU on hidden layers, identity on the output.
///
/// `weights[l]` is row-major with shape `(layer_dims[l+1], layer_dims[l])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpParams {
    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer dims need at least input and output and no zero widths, got {layer_dims:?}"
            )));
        }
        let weights = layer_dims.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = layer_dims[1..].iter().map(|n| vec![0.0; *n]).collect();
        Ok(MlpParams {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    /// He-uniform weights `U(−√(6/fan_in), √(6/fan_in))`, zero biases.
    pub fn init_he<R: Rng>(layer_dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(layer_dims)?;
        for (l, w) in params.weights.iter_mut().enumerate() {
            let bound = (6.0 / layer_dims[l] as f64).sqrt();
            for x in w.iter_mut() {
                *x = rng.random_range(-bound..bound);
            }
        }
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let layers = self.layer_dims.len().saturating_sub(1);
        if layers == 0 || self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::Config("network layer counts are inconsistent".into()));
        }
        for l in 0..layers {
            let (i, o) = (self.layer_dims[l], self.layer_dims[l + 1]);
            if self.weights[l].len() != i * o || self.biases[l].len() != o {
                return Err(Error::Config(format!("layer {l} has inconsistent shapes")));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated non-empty")
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.layer_dims.len() - 2
    }

    /// Number of strictly nonzero weights and biases.
    pub fn size(&self) -> usize {
        self.values().filter(|v| **v != 0.0).count()
    }

    /// Total number of trainable entries, zero or not.
    pub fn parameter_count(&self) -> usize {
        self.values().count()
    }

    /// All entries, weights layer by layer then biases layer by layer.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().flatten().chain(self.biases.iter().flatten())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .flatten()
            .chain(self.biases.iter_mut().flatten())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len())?;
        let mut a = x.to_vec();
        let layers = self.weights.len();
        for l in 0..layers {
            let mut z = affine(&self.weights[l], &self.biases[l], &a);
            if l + 1 < layers {
                relu_in_place(&mut z);
            }
            a = z;
        }
        Ok(a)
    }

    /// Mean squared error over all samples and output components, and its
    /// gradient with respect to every parameter (same layout as `self`).
    pub fn mse_loss_and_gradient(
        &self,
        inputs: &[&[f64]],
        targets: &[&[f64]],
    ) -> Result<(f64, MlpParams)> {
        check_dim(inputs.len(), targets.len())?;
        let mut grad = MlpParams::zeros(&self.layer_dims)?;
        if inputs.is_empty() {
            return Ok((0.0, grad));
        }
        let n_out = self.output_dim();
        let scale = 1.0 / (inputs.len() * n_out) as f64;
        let layers = self.weights.len();
        let mut loss = 0.0;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
        for (x, t) in inputs.iter().zip(targets) {
            check_dim(self.input_dim(), x.len())?;
            check_dim(n_out, t.len())?;
            acts.clear();
            acts.push(x.to_vec());
            for l in 0..layers {
                let mut z = affine(&self.weights[l], &self.biases[l], &acts[l]);
                if l + 1 < layers {
                    relu_in_place(&mut z);
                }
                acts.push(z);
            }
            let out = &acts[layers];
            let mut delta: Vec<f64> = out
                .iter()
                .zip(t.iter())
                .map(|(y, t)| {
                    let e = y - t;
                    loss += e * e;
                    2.0 * e * scale
                })
                .collect();
            for l in (0..layers).rev() {
                let input = &acts[l];
                let n_in = input.len();
                let gw = &mut grad.weights[l];
                for (o, dlt) in delta.iter().enumerate() {
                    grad.biases[l][o] += dlt;
                    let row = &mut gw[o * n_in..(o + 1) * n_in];
                    for (g, a) in row.iter_mut().zip(input) {
                        *g += dlt * a;
                    }
                }
                if l > 0 {
                    let w = &self.weights[l];
                    let mut prev = vec![0.0; n_in];
                    for (o, dlt) in delta.iter().enumerate() {
                        let row = &w[o * n_in..(o + 1) * n_in];
                        for (p, wv) in prev.iter_mut().zip(row) {
                            *p += dlt * wv;
                        }
                    }
                    // acts[l] is post-ReLU, so a zero marks an inactive unit.
                    for (p, a) in prev.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        Ok((loss * scale, grad))
    }

    /// Mean squared error without gradients.
    pub fn mse(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> Result<f64> {
        check_dim(inputs.len(), targets.len())?;
        if inputs.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            let y = self.forward(x)?;
            check_dim(y.len(), t.len())?;
            total += y.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(total / (inputs.len() * self.output_dim()) as f64)
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(o, bias)| {
            bias + w[o * n_in..(o + 1) * n_in]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        })
        .collect()
}

fn relu_in_place(z: &mut [f64]) {
    for v in z {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gadget() -> MlpParams {
        MlpParams {
            layer_dims: vec![1, 2, 1],
            weights: vec![vec![1.0, -1.0], vec![1.0, -1.0]],
            biases: vec![vec![0.0, 0.0], vec![0.0]],
        }
    }

    #[test]
    fn forward_examples() {
        let mut zero = MlpParams::zeros(&[3, 5, 2]).unwrap();
        zero.biases[1] = vec![0.25, -4.0];
        assert_eq!(zero.forward(&[1.0, -7.0, 3.0]).unwrap(), vec![0.25, -4.0]);

        let single = MlpParams {
            layer_dims: vec![1, 1, 1],
            weights: vec![vec![1.0], vec![1.0]],
            biases: vec![vec![0.0], vec![0.0]],
        };
        assert_eq!(single.forward(&[-3.0]).unwrap(), vec![0.0]);

        for x in [-2.5, 0.0, 4.0] {
            assert_eq!(gadget().forward(&[x]).unwrap(), vec![x]);
        }
        assert!(matches!(
            gadget().forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn size_and_depth_examples() {
        assert_eq!(MlpParams::zeros(&[3, 4, 2]).unwrap().size(), 0);
        let mut p = MlpParams::zeros(&[2, 3, 1]).unwrap();
        p.weights[0][0] = 1.0;
        p.weights[0][3] = -2.0;
        p.weights[0][5] = 0.5;
        p.biases[0][1] = 1.0;
        p.weights[1][0] = 3.0;
        p.weights[1][2] = 3.0;
        assert_eq!((p.size(), p.depth()), (6, 1));
        assert_eq!((gadget().size(), gadget().depth()), (4, 1));
    }

    #[test]
    fn size_ignores_inserted_zero_units() {
        let g = gadget();
        // widen the hidden layer with a dead unit: zero row in A0, zero column in A1
        let widened = MlpParams {
            layer_dims: vec![1, 3, 1],
            weights: vec![vec![1.0, -1.0, 0.0], vec![1.0, -1.0, 0.0]],
            biases: vec![vec![0.0; 3], vec![0.0]],
        };
        assert_eq!(widened.size(), g.size());
        for x in [-1.0, 2.0] {
            assert_eq!(widened.forward(&[x]).unwrap(), g.forward(&[x]).unwrap());
        }
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(MlpParams::zeros(&[3]).is_err());
        assert!(MlpParams::zeros(&[3, 0, 1]).is_err());
        let mut p = gadget();
        p.weights[1].pop();
        assert!(p.validate().is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params = MlpParams::init_he(&[2, 4, 3], &mut rng).unwrap();
        let xs: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let ts: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let xr: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let tr: Vec<&[f64]> = ts.iter().map(|v| v.as_slice()).collect();
        let (loss, grad) = params.mse_loss_and_gradient(&xr, &tr).unwrap();
        assert!((loss - params.mse(&xr, &tr).unwrap()).abs() < 1e-14);
        let analytic: Vec<f64> = grad.values().copied().collect();
        let step = 1e-6;
        for (i, g) in analytic.iter().enumerate() {
            let mut plus = params.clone();
            *plus.values_mut().nth(i).unwrap() += step;
            let mut minus = params.clone();
            *minus.values_mut().nth(i).unwrap() -= step;
            let fd = (plus.mse(&xr, &tr).unwrap() - minus.mse(&xr, &tr).unwrap()) / (2.0 * step);
            assert!((fd - g).abs() <= 1e-6 * (1.0 + g.abs()), "param {i}: {g} vs {fd}");
        }
    }

    proptest! {
        #[test]
        fn relu_network_positively_homogeneous(
            w0 in proptest::collection::vec(-2.0f64..2.0, 6),
            w1 in proptest::collection::vec(-2.0f64..2.0, 6),
            x in proptest::collection::vec(-3.0f64..3.0, 2),
            alpha in 0.0f64..5.0,
        ) {
            let p = MlpParams {
                layer_dims: vec![2, 3, 2],
                weights: vec![w0, w1],
                biases: vec![vec![0.0; 3], vec![0.0; 2]],
            };
            let scaled: Vec<f64> = x.iter().map(|v| alpha * v).collect();
            let a = p.forward(&scaled).unwrap();
            let b = p.forward(&x).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!((u - alpha * v).abs() <= 1e-10 * (1.0 + u.abs()));
            }
        }
    }
}
