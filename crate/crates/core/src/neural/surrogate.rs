use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::MlpParams;
use super::train::{train_regression, EpochRecord, TrainConfig};
use crate::error::{check_dim, Error, Result};
use crate::flow::{integrate_flow_batch, IntegratorConfig, PhaseState};
use crate::hamiltonians::HamiltonianSpec;
use crate::torus::{wrap_angle, TorusPoint};

/// Input/target pairs `(s0, Ψ_t(s0))` of the exact flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowDataset {
    pub d: usize,
    pub t: f64,
    /// `M`: `p0 ∈ [−M, M]^d` and `z0 ∈ [−M, M]`.
    pub sampling_box: f64,
    pub seed: u64,
    pub integrator: IntegratorConfig,
    pub samples: Vec<(PhaseState, PhaseState)>,
}

/// Draws `n_samples` states uniformly on `Ω × [−M, M]^{d+1}` and pushes them
/// through the exact flow.
pub fn generate_dataset(
    spec: &HamiltonianSpec,
    t: f64,
    n_samples: usize,
    sampling_box: f64,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<FlowDataset> {
    if !(sampling_box >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sampling box M must be >= 1, got {sampling_box}"
        )));
    }
    let inputs = sample_states(spec.d, n_samples, sampling_box, seed);
    let integrator = cfg.with_t_final(t);
    let targets = integrate_flow_batch(spec, &inputs, &integrator)?;
    Ok(FlowDataset {
        d: spec.d,
        t,
        sampling_box,
        seed,
        integrator,
        samples: inputs.into_iter().zip(targets).collect(),
    })
}

/// Uniform samples on `Ω × [−M, M]^{d+1}`.
pub fn sample_states(d: usize, n: usize, m: f64, seed: u64) -> Vec<PhaseState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..TAU)).collect();
            let p: Vec<f64> = (0..d).map(|_| rng.random_range(-m..=m)).collect();
            let z = rng.random_range(-m..=m);
            PhaseState::new(TorusPoint::new(q), p, z)
        })
        .collect()
}

/// Network input `(q − π, p, z)`; centring `q` keeps all inputs near zero.
pub fn encode_input(s: &PhaseState) -> Vec<f64> {
    let mut v = s.to_vec();
    v[..s.dim()].iter_mut().for_each(|q| *q -= PI);
    v
}

/// Periodic target embedding `(sin q, cos q, p, z)`, length `3d + 1`.
pub fn encode_target(s: &PhaseState) -> Vec<f64> {
    let q = s.q.coords();
    let mut v = Vec::with_capacity(3 * q.len() + 1);
    v.extend(q.iter().map(|x| x.sin()));
    v.extend(q.iter().map(|x| x.cos()));
    v.extend_from_slice(&s.p);
    v.push(s.z);
    v
}

/// A trained (or constructed) approximation of the flow map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSurrogate {
    pub format: String,
    pub d: usize,
    pub t: f64,
    /// Outputs are `(sin q, cos q, p, z)` when set, raw `(q, p, z)` otherwise.
    pub periodic_encoding: bool,
    pub seed: u64,
    #[serde(flatten)]
    pub params: MlpParams,
}

pub const MODEL_FORMAT: &str = "hjnet-flow-surrogate/2";

impl FlowSurrogate {
    pub fn new(d: usize, t: f64, periodic_encoding: bool, seed: u64, params: MlpParams) -> Result<Self> {
        params.validate()?;
        check_dim(2 * d + 1, params.input_dim())?;
        let out = if periodic_encoding { 3 * d + 1 } else { 2 * d + 1 };
        check_dim(out, params.output_dim())?;
        Ok(FlowSurrogate {
            format: MODEL_FORMAT.to_string(),
            d,
            t,
            periodic_encoding,
            seed,
            params,
        })
    }

    pub fn size(&self) -> usize {
        self.params.size()
    }

    pub fn depth(&self) -> usize {
        self.params.depth()
    }

    pub fn apply(&self, s: &PhaseState) -> Result<PhaseState> {
        check_dim(self.d, s.dim())?;
        check_dim(self.d, s.p.len())?;
        let y = self.params.forward(&encode_input(s))?;
        let d = self.d;
        let (q, rest) = if self.periodic_encoding {
            let q: Vec<f64> = (0..d).map(|i| wrap_angle(y[i].atan2(y[d + i]))).collect();
            (q, &y[2 * d..])
        } else {
            (y[..d].to_vec(), &y[d..])
        };
        Ok(PhaseState::new(TorusPoint::new(q), rest[..d].to_vec(), rest[d]))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: FlowSurrogate = serde_json::from_str(text)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::Config(format!("unknown model format {:?}", model.format)));
        }
        FlowSurrogate::new(model.d, model.t, model.periodic_encoding, model.seed, model.params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Applies the surrogate to each state; order preserved.
pub fn surrogate_flow(model: &FlowSurrogate, states: &[PhaseState]) -> Result<Vec<PhaseState>> {
    states
        .par_iter()
        .enumerate()
        .map(|(i, s)| model.apply(s).map_err(|e| e.at_index(i)))
        .collect()
}

/// Largest phase-space distance between surrogate outputs and `targets`.
pub fn surrogate_sup_error(
    model: &FlowSurrogate,
    inputs: &[PhaseState],
    targets: &[PhaseState],
) -> Result<f64> {
    check_dim(inputs.len(), targets.len())?;
    let outs = surrogate_flow(model, inputs)?;
    Ok(outs
        .iter()
        .zip(targets)
        .map(|(a, b)| a.distance(b))
        .fold(0.0, f64::max))
}

/// Root-mean-square phase-space error.
pub fn surrogate_rmse(model: &FlowSurrogate, inputs: &[PhaseState], targets: &[PhaseState]) -> Result<f64> {
    check_dim(inputs.len(), targets.len())?;
    if inputs.is_empty() {
        return Ok(0.0);
    }
    let outs = surrogate_flow(model, inputs)?;
    let ms = outs.iter().zip(targets).map(|(a, b)| a.distance(b).powi(2)).sum::<f64>() / inputs.len() as f64;
    Ok(ms.sqrt())
}

/// Trains a periodic-output flow surrogate. `arch` must start at `2d+1` and
/// end at `3d+1`.
pub fn train_flow_net(
    dataset: &FlowDataset,
    arch: &[usize],
    tcfg: &TrainConfig,
) -> Result<(FlowSurrogate, Vec<EpochRecord>)> {
    let d = dataset.d;
    if dataset.samples.is_empty() {
        return Err(Error::InvalidArgument("flow dataset is empty".into()));
    }
    if arch.first() != Some(&(2 * d + 1)) || arch.last() != Some(&(3 * d + 1)) {
        return Err(Error::InvalidArgument(format!(
            "flow network must map {} inputs to {} outputs, got {arch:?}",
            2 * d + 1,
            3 * d + 1
        )));
    }
    let inputs: Vec<Vec<f64>> = dataset.samples.iter().map(|(s, _)| encode_input(s)).collect();
    let targets: Vec<Vec<f64>> = dataset.samples.iter().map(|(_, s)| encode_target(s)).collect();
    let (params, history) = train_regression(&inputs, &targets, arch, tcfg)?;
    let model = FlowSurrogate::new(d, dataset.t, true, tcfg.seed, params)?;
    Ok((model, history))
}

/// Identity on `(q, p, z)` via `x = ReLU(x) − ReLU(−x)`, with raw output; exact
/// up to the rounding of the `q` centring.
pub fn identity_surrogate(d: usize) -> FlowSurrogate {
    let n = 2 * d + 1;
    let mut params = MlpParams::zeros(&[n, 2 * n, n]).expect("valid dims");
    for i in 0..n {
        params.weights[0][(2 * i) * n + i] = 1.0;
        params.weights[0][(2 * i + 1) * n + i] = -1.0;
        params.weights[1][i * 2 * n + 2 * i] = 1.0;
        params.weights[1][i * 2 * n + 2 * i + 1] = -1.0;
    }
    params.biases[1][..d].fill(PI);
    FlowSurrogate::new(d, 0.0, false, 0, params).expect("shapes are consistent")
}
