//! The composed solver: encode the initial data on a grid, push every triple
//! through a flow backend, keep `(q_t, z_t)`, and reconstruct by pruned MLS.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result, Stage};
use crate::flow::{
    integrate_flow_batch, min_jacobian_det_series, oracle_solve_with, IntegratorConfig,
    NewtonConfig, PhaseState,
};
use crate::hamiltonians::{HamiltonianSpec, InitialData};
use crate::mls::{
    default_fill_resolution, default_gamma, fill_distance, reconstruct_with, MlsEvaluator, PointSet,
};
use crate::neural::{surrogate_flow, FlowSurrogate};
use crate::torus::{lattice, TorusPoint};

/// Encoded initial data: `(q0, ∇u0(q0), u0(q0))` per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    pub triples: Vec<PhaseState>,
    pub source_grid: PointSet,
}

pub fn encode(u0: &InitialData, grid: &PointSet) -> Result<EncodedBatch> {
    if grid.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    check_dim(u0.d, grid.dim())?;
    let triples = grid
        .points()
        .iter()
        .map(|q| {
            let (z, p) = u0.eval_u0(q)?;
            Ok(PhaseState::new(q.clone(), p, z))
        })
        .collect::<Result<_>>()?;
    Ok(EncodedBatch {
        triples,
        source_grid: grid.clone(),
    })
}

/// The lattice `{2πk/n}^d`.
pub fn make_uniform_grid(d: usize, n_per_axis: usize) -> Result<PointSet> {
    if d == 0 || n_per_axis == 0 {
        return Err(Error::InvalidArgument(format!(
            "grid needs d >= 1 and n >= 1, got d = {d}, n = {n_per_axis}"
        )));
    }
    PointSet::new(d, lattice(d, n_per_axis))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FlowBackend {
    Exact { integrator: IntegratorConfig },
    Surrogate { model: FlowSurrogate },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Encoding points per axis; the grid has `grid_per_axis^d` points.
    pub grid_per_axis: usize,
    pub t: f64,
    pub r: u32,
    /// MLS support multiplier; `r + 1` when absent.
    #[serde(default)]
    pub gamma: Option<f64>,
    pub backend: FlowBackend,
    /// Number of equispaced times in `(0, t]` at which the exact backend
    /// verifies that the characteristic map is still invertible; 0 disables.
    #[serde(default = "default_horizon_checks")]
    pub horizon_checks: usize,
}

fn default_horizon_checks() -> usize {
    8
}

impl PipelineConfig {
    pub fn exact(grid_per_axis: usize, t: f64, r: u32, integrator: IntegratorConfig) -> Self {
        PipelineConfig {
            grid_per_axis,
            t,
            r,
            gamma: None,
            backend: FlowBackend::Exact { integrator },
            horizon_checks: default_horizon_checks(),
        }
    }

    pub fn surrogate(grid_per_axis: usize, r: u32, model: FlowSurrogate) -> Self {
        PipelineConfig {
            grid_per_axis,
            t: model.t,
            r,
            gamma: None,
            backend: FlowBackend::Surrogate { model },
            horizon_checks: 0,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
            .unwrap_or_else(|| default_gamma(self.r.saturating_sub(1) as usize))
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_per_axis == 0 {
            return Err(Error::Config("grid_per_axis must be >= 1".into()));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::Config(format!("t must be non-negative, got {}", self.t)));
        }
        if self.r < 2 {
            return Err(Error::Config(format!("r must be >= 2, got {}", self.r)));
        }
        if !(self.gamma() > 0.0) {
            return Err(Error::Config("gamma must be positive".into()));
        }
        if let FlowBackend::Surrogate { model } = &self.backend {
            if (model.t - self.t).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "surrogate was trained for t = {}, pipeline asks for t = {}",
                    model.t, self.t
                )));
            }
        }
        Ok(())
    }

    fn flow_stage(&self) -> Stage {
        match self.backend {
            FlowBackend::Exact { .. } => Stage::Flow,
            FlowBackend::Surrogate { .. } => Stage::Surrogate,
        }
    }
}

/// Geometry and sizes recorded while solving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_encoded: usize,
    pub n_kept: usize,
    /// Fill distance of the encoding grid.
    pub h_source: f64,
    /// Fill distance of the transported points `q_t`.
    pub h_image: f64,
    pub delta: f64,
    /// Smallest characteristic Jacobian determinant seen by the horizon check.
    pub min_jacobian_det: Option<f64>,
}

/// The reconstructed solution `x ↦ u(x, t)`.
pub struct HjNetSolution {
    evaluator: MlsEvaluator,
    transported: Vec<PhaseState>,
    diagnostics: Diagnostics,
    eval_stage: Stage,
}

impl HjNetSolution {
    pub fn evaluate(&self, q: &TorusPoint) -> Result<f64> {
        self.evaluator.evaluate(q).map_err(|e| e.at_stage(self.eval_stage))
    }

    /// Parallel evaluation, ordered like `queries`.
    pub fn evaluate_many(&self, queries: &[TorusPoint]) -> Result<Vec<f64>> {
        queries
            .par_iter()
            .enumerate()
            .map(|(i, q)| self.evaluate(q).map_err(|e| e.at_index(i)))
            .collect()
    }

    pub fn evaluator(&self) -> &MlsEvaluator {
        &self.evaluator
    }

    /// Flowed states `Ψ(q0, p0, z0)` for every encoding point.
    pub fn transported(&self) -> &[PhaseState] {
        &self.transported
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }
}

/// Runs encode → flow → project → reconstruct on a uniform grid.
pub fn hjnet_solve(
    spec: &HamiltonianSpec,
    u0: &InitialData,
    pcfg: &PipelineConfig,
) -> Result<HjNetSolution> {
    pcfg.validate()?;
    check_dim(spec.d, u0.d)?;
    let grid = make_uniform_grid(spec.d, pcfg.grid_per_axis).map_err(|e| e.at_stage(Stage::Encode))?;
    hjnet_solve_on(spec, u0, &grid, pcfg)
}

/// Same as [`hjnet_solve`] with an arbitrary encoding point set.
pub fn hjnet_solve_on(
    spec: &HamiltonianSpec,
    u0: &InitialData,
    grid: &PointSet,
    pcfg: &PipelineConfig,
) -> Result<HjNetSolution> {
    pcfg.validate()?;
    check_dim(spec.d, u0.d)?;
    let batch = encode(u0, grid).map_err(|e| e.at_stage(Stage::Encode))?;
    let stage = pcfg.flow_stage();

    let mut min_det = None;
    let transported = match &pcfg.backend {
        FlowBackend::Exact { integrator } => {
            if pcfg.horizon_checks > 0 && pcfg.t > 0.0 {
                let det = horizon_check(spec, u0, grid, pcfg.t, pcfg.horizon_checks, integrator)
                    .map_err(|e| e.at_stage(stage))?;
                min_det = Some(det);
            }
            integrate_flow_batch(spec, &batch.triples, &integrator.with_t_final(pcfg.t))
        }
        FlowBackend::Surrogate { model } => {
            check_dim(spec.d, model.d).map_err(|e| e.at_stage(stage))?;
            surrogate_flow(model, &batch.triples)
        }
    }
    .map_err(|e| e.at_stage(stage))?;

    // Projection: keep (q_t, z_t); p_t is not used by the reconstruction.
    let res = default_fill_resolution(spec.d);
    let image = PointSet::new(spec.d, transported.iter().map(|s| s.q.clone()).collect())?;
    let values: Vec<f64> = transported.iter().map(|s| s.z).collect();
    let evaluator = reconstruct_with(&image, &values, pcfg.r, pcfg.gamma(), res)
        .map_err(|e| e.at_stage(Stage::Reconstruct))?;
    let diagnostics = Diagnostics {
        n_encoded: grid.len(),
        n_kept: evaluator.points().len(),
        h_source: fill_distance(grid, res)?,
        h_image: fill_distance(&image, res)?,
        delta: evaluator.delta(),
        min_jacobian_det: min_det,
    };
    let eval_stage = match pcfg.backend {
        FlowBackend::Exact { .. } => Stage::Evaluate,
        FlowBackend::Surrogate { .. } => Stage::Surrogate,
    };
    Ok(HjNetSolution {
        evaluator,
        transported,
        diagnostics,
        eval_stage,
    })
}

fn horizon_check(
    spec: &HamiltonianSpec,
    u0: &InitialData,
    grid: &PointSet,
    t: f64,
    checks: usize,
    integrator: &IntegratorConfig,
) -> Result<f64> {
    let times: Vec<f64> = (1..=checks).map(|k| t * k as f64 / checks as f64).collect();
    let series = min_jacobian_det_series(spec, u0, grid.points(), &times, integrator)?;
    let min_det = series.iter().copied().fold(f64::INFINITY, f64::min);
    if let Some(k) = series.iter().position(|d| *d <= 0.0) {
        return Err(Error::PastClassicalHorizon {
            time: times[k],
            min_det,
        });
    }
    Ok(min_det)
}

/// Probe lattices default to eight times the encoding resolution.
pub fn default_probe_count(grid_per_axis: usize) -> usize {
    8 * grid_per_axis
}

/// Uniform probe lattice with `probe_count` points per axis. It contains the
/// encoding grid whenever `probe_count` is a multiple of the grid resolution.
pub fn probe_lattice(d: usize, probe_count: usize) -> Result<Vec<TorusPoint>> {
    if probe_count == 0 {
        return Err(Error::InvalidArgument("probe_count must be >= 1".into()));
    }
    Ok(lattice(d, probe_count))
}

/// `max |approx(q) − u(q, t)|` over the probe lattice, with `u` from the
/// characteristic oracle.
pub fn sup_error<F>(
    approx: F,
    spec: &HamiltonianSpec,
    u0: &InitialData,
    t: f64,
    probe_count: usize,
    cfg: &IntegratorConfig,
) -> Result<f64>
where
    F: Fn(&TorusPoint) -> Result<f64> + Sync,
{
    let probes = probe_lattice(spec.d, probe_count)?;
    let truth = oracle_solve_with(spec, u0, t, &probes, cfg, &NewtonConfig::default())
        .map_err(|e| e.at_stage(Stage::Oracle))?;
    sup_error_against(approx, &probes, &truth)
}

/// `max |approx(q_i) − truth_i|`.
pub fn sup_error_against<F>(approx: F, probes: &[TorusPoint], truth: &[f64]) -> Result<f64>
where
    F: Fn(&TorusPoint) -> Result<f64> + Sync,
{
    check_dim(probes.len(), truth.len())?;
    let errs = probes
        .par_iter()
        .zip(truth)
        .enumerate()
        .map(|(i, (q, u))| Ok((approx(q).map_err(|e| e.at_index(i))? - u).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// `C = (1 + M)·exp(t·sup‖D²H‖)` bounding `h_image ≤ C·h_source`, with `M`
/// the estimated `C²` norm of `u0` and the Hessian bound sampled over
/// momenta up to `p_radius`.
pub fn fill_distance_constant(
    spec: &HamiltonianSpec,
    u0: &InitialData,
    t: f64,
    samples: usize,
    p_radius: f64,
) -> f64 {
    let m = u0.c2_norm_estimate(samples);
    (1.0 + m) * (t * spec.hessian_norm_bound(samples, p_radius)).exp()
}
