use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::MlpParams;
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            step_size: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default)]
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of samples used for training; the rest is validation.
    pub train_fraction: f64,
    /// Multiplies the step size after every epoch (1 keeps it constant).
    #[serde(default = "one")]
    pub step_decay: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            batch_size: 32,
            epochs: 100,
            seed: 0,
            train_fraction: 0.9,
            step_decay: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.adam.step_size > 0.0) || !(self.step_decay > 0.0) {
            return Err(Error::Config("step size and decay must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when the split leaves no validation samples.
    pub val_loss: Option<f64>,
}

struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(cfg: AdamConfig, n: usize) -> Self {
        Adam {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut MlpParams, grad: &MlpParams, step_size: f64) {
        self.t += 1;
        let c = self.cfg;
        let bias1 = 1.0 - c.beta1.powi(self.t);
        let bias2 = 1.0 - c.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .values_mut()
            .zip(grad.values())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= step_size * m_hat / (v_hat.sqrt() + c.epsilon);
        }
    }
}

/// Deterministic train/validation split of `0..n`.
pub(crate) fn split_indices(n: usize, train_fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n);
    let val = idx.split_off(n_train);
    (idx, val)
}

/// Trains a network from He-uniform initialization with minibatch Adam on
/// the mean squared error. Everything stochastic (initialization, split,
/// shuffling) derives from `cfg.seed`.
pub fn train_regression(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    arch: &[usize],
    cfg: &TrainConfig,
) -> Result<(MlpParams, Vec<EpochRecord>)> {
    cfg.validate()?;
    check_dim(inputs.len(), targets.len())?;
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = MlpParams::init_he(arch, &mut rng)?;
    for (x, t) in inputs.iter().zip(targets) {
        check_dim(params.input_dim(), x.len())?;
        check_dim(params.output_dim(), t.len())?;
    }
    let (mut train_idx, val_idx) = split_indices(inputs.len(), cfg.train_fraction, &mut rng);
    let val_x: Vec<&[f64]> = val_idx.iter().map(|i| inputs[*i].as_slice()).collect();
    let val_t: Vec<&[f64]> = val_idx.iter().map(|i| targets[*i].as_slice()).collect();

    let mut adam = Adam::new(cfg.adam, params.parameter_count());
    let mut step_size = cfg.adam.step_size;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut weighted = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            let bx: Vec<&[f64]> = batch.iter().map(|i| inputs[*i].as_slice()).collect();
            let bt: Vec<&[f64]> = batch.iter().map(|i| targets[*i].as_slice()).collect();
            let (loss, grad) = params.mse_loss_and_gradient(&bx, &bt)?;
            if !loss.is_finite() {
                return Err(Error::TrainingFailure { epoch });
            }
            weighted += loss * batch.len() as f64;
            adam.step(&mut params, &grad, step_size);
        }
        let train_loss = weighted / train_idx.len() as f64;
        let val_loss = if val_x.is_empty() {
            None
        } else {
            Some(params.mse(&val_x, &val_t)?)
        };
        if !train_loss.is_finite() || val_loss.is_some_and(|v| !v.is_finite()) {
            return Err(Error::TrainingFailure { epoch });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        step_size *= cfg.step_decay;
    }
    Ok((params, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_data() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let xs: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 100.0 - 1.0]).collect();
        let ts = xs.iter().map(|x| vec![2.0 * x[0] + 0.5]).collect();
        (xs, ts)
    }

    #[test]
    fn learns_a_line_and_is_deterministic() {
        let (xs, ts) = linear_data();
        let cfg = TrainConfig {
            epochs: 60,
            adam: AdamConfig { step_size: 1e-2, ..Default::default() },
            ..Default::default()
        };
        let (a, hist) = train_regression(&xs, &ts, &[1, 16, 1], &cfg).unwrap();
        let (b, _) = train_regression(&xs, &ts, &[1, 16, 1], &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(hist.len(), 60);
        assert!(hist.windows(2).all(|w| w[1].epoch == w[0].epoch + 1));
        assert!(hist.last().unwrap().val_loss.unwrap() < 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (xs, ts) = linear_data();
        let mut cfg = TrainConfig::default();
        assert!(train_regression(&[], &[], &[1, 1], &cfg).is_err());
        assert!(train_regression(&xs, &ts, &[2, 1], &cfg).is_err());
        cfg.train_fraction = 1.0;
        assert!(train_regression(&xs, &ts, &[1, 1], &cfg).is_err());
    }

    #[test]
    fn divergence_reports_epoch() {
        let (xs, mut ts) = linear_data();
        ts[3][0] = f64::INFINITY;
        let cfg = TrainConfig { epochs: 3, ..Default::default() };
        assert!(matches!(
            train_regression(&xs, &ts, &[1, 4, 1], &cfg),
            Err(Error::TrainingFailure { epoch: 1 })
        ));
    }
}
