use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{
    BaselineConfig, ConvergenceConfig, FamilyConfig, ProblemConfig, SizeSweepConfig,
    SurrogateTraining, TrainCommandConfig, TstarConfig, Truth,
};
use super::report::fit_loglog_slope;
use crate::error::{Error, Result, Stage};
use crate::flow::{min_jacobian_det_series, monitor_characteristics, oracle_solve, CharMonitor};
use crate::hamiltonians::{FourierTerm, InitialData};
use crate::mls::{default_fill_resolution, fill_distance};
use crate::neural::{
    generate_dataset, surrogate_sup_error, train_flow_net, train_regression, EpochRecord,
    FlowSurrogate, MlpParams,
};
use crate::pipeline::{
    hjnet_solve, make_uniform_grid, probe_lattice, sup_error_against, PipelineConfig,
};
use crate::torus::TorusPoint;

/// Reference values `u(q, t)` at the probes.
pub fn truth_values(
    problem: &ProblemConfig,
    u0: &InitialData,
    t: f64,
    probes: &[TorusPoint],
    truth: Truth,
) -> Result<Vec<f64>> {
    match truth {
        Truth::Oracle => oracle_solve(&problem.hamiltonian, u0, t, probes, &problem.integrator)
            .map_err(|e| e.at_stage(Stage::Oracle)),
        Truth::Transport => {
            let v = problem.constant_velocity().ok_or_else(|| {
                Error::Config("transport truth needs advection with constant velocity".into())
            })?;
            let shift: Vec<f64> = v.iter().map(|vi| -vi * t).collect();
            probes
                .iter()
                .map(|q| Ok(u0.eval_u0(&q.shifted(&shift))?.0))
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Fill distance of the encoding grid.
    pub h: f64,
    pub sup_error: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// `None` when fewer than two rows are usable.
    pub fitted_slope: Option<f64>,
}

/// Exact-backend pipeline error across grid resolutions, rows ascending in
/// `N`. The first failing grid aborts the study.
pub fn convergence_study(problem: &ProblemConfig, cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    problem.validate()?;
    if cfg.probe_factor == 0 {
        return Err(Error::Config("probe_factor must be >= 1".into()));
    }
    let d = problem.hamiltonian.d;
    let r = cfg.r.unwrap_or(problem.initial.regularity_r);
    let mut grids = cfg.grids.clone();
    grids.sort_unstable();
    grids.dedup();
    let mut rows = Vec::with_capacity(grids.len());
    for n in grids {
        let row = (|| {
            let start = Instant::now();
            let mut pcfg = PipelineConfig::exact(n, cfg.t, r, problem.integrator);
            pcfg.gamma = cfg.gamma;
            let sol = hjnet_solve(&problem.hamiltonian, &problem.initial, &pcfg)?;
            let probes = probe_lattice(d, cfg.probe_factor * n)?;
            let truth = truth_values(problem, &problem.initial, cfg.t, &probes, cfg.truth)?;
            let sup_error = sup_error_against(|q| sol.evaluate(q), &probes, &truth)?;
            let grid = make_uniform_grid(d, n)?;
            Ok(ConvergenceRow {
                n,
                h: fill_distance(&grid, default_fill_resolution(d))?,
                sup_error,
                wall_time_s: start.elapsed().as_secs_f64(),
            })
        })()
        .map_err(|e: Error| Error::RowFailure {
            row: format!("grid N = {n}"),
            source: Box::new(e),
        })?;
        rows.push(row);
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.sup_error)).collect();
    Ok(ConvergenceReport {
        fitted_slope: fit_loglog_slope(&pairs),
        rows,
    })
}

/// A hidden-layer stack `[2d+1, w, …, w, 3d+1]`.
pub fn flow_architecture(d: usize, width: usize, depth: usize) -> Vec<usize> {
    let mut arch = vec![2 * d + 1];
    arch.extend(std::iter::repeat_n(width, depth));
    arch.push(3 * d + 1);
    arch
}

/// Trained surrogate plus its held-out sup error.
#[derive(Debug, Clone)]
pub struct TrainedSurrogate {
    pub model: FlowSurrogate,
    pub history: Vec<EpochRecord>,
    pub test_sup_error: f64,
}

/// Trains on `n_samples` states from `seed` and scores on `test_samples`
/// fresh states drawn from the same box with a different stream.
pub fn train_surrogate(
    problem: &ProblemConfig,
    t: f64,
    arch: &[usize],
    training: &SurrogateTraining,
    seed: u64,
) -> Result<TrainedSurrogate> {
    let (train, test) = surrogate_datasets(problem, t, training, seed)?;
    fit_surrogate(&train, &test, arch, training, seed)
}

fn surrogate_datasets(
    problem: &ProblemConfig,
    t: f64,
    training: &SurrogateTraining,
    seed: u64,
) -> Result<(crate::neural::FlowDataset, crate::neural::FlowDataset)> {
    let h = &problem.hamiltonian;
    let m = training.sampling_box;
    let train = generate_dataset(h, t, training.n_samples, m, seed, &problem.integrator)?;
    let test = generate_dataset(h, t, training.test_samples, m, held_out_seed(seed), &problem.integrator)?;
    Ok((train, test))
}

fn held_out_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_7e57_0000_0001
}

fn fit_surrogate(
    train: &crate::neural::FlowDataset,
    test: &crate::neural::FlowDataset,
    arch: &[usize],
    training: &SurrogateTraining,
    seed: u64,
) -> Result<TrainedSurrogate> {
    let mut tcfg = training.train;
    tcfg.seed = seed;
    let (model, history) = train_flow_net(train, arch, &tcfg)?;
    let (inputs, targets): (Vec<_>, Vec<_>) = test.samples.iter().cloned().unzip();
    let test_sup_error = surrogate_sup_error(&model, &inputs, &targets)?;
    Ok(TrainedSurrogate {
        model,
        history,
        test_sup_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSweepRow {
    pub width: usize,
    pub depth: usize,
    /// Nonzero weights and biases of the trained model.
    pub size: usize,
    pub parameter_count: usize,
    pub surrogate_sup_error: f64,
    pub pipeline_sup_error: f64,
    /// `Err` carries the failure message; the numeric fields are NaN then.
    pub status: std::result::Result<(), String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSweepReport {
    pub rows: Vec<SizeSweepRow>,
    /// `(2d+1)/r` in `size ≲ ε^{-(2d+1)/r}`.
    pub reference_exponent: f64,
}

impl SizeSweepReport {
    pub fn complete(&self) -> bool {
        self.rows.iter().all(|r| r.status.is_ok())
    }
}

/// Trains one surrogate per width (rows independent, run in parallel) and
/// scores both the surrogate and the full pipeline.
pub fn size_sweep(problem: &ProblemConfig, cfg: &SizeSweepConfig, seed: u64) -> Result<SizeSweepReport> {
    problem.validate()?;
    let d = problem.hamiltonian.d;
    let r = cfg.r.unwrap_or(problem.initial.regularity_r);
    let reference_exponent = (2 * d + 1) as f64 / r as f64;
    let mut widths = cfg.widths.clone();
    widths.sort_unstable();
    widths.dedup();
    if widths.is_empty() {
        return Ok(SizeSweepReport {
            rows: Vec::new(),
            reference_exponent,
        });
    }
    let (train, test) = surrogate_datasets(problem, cfg.t, &cfg.training, seed)?;
    let probes = probe_lattice(d, cfg.probe_factor * cfg.grid_per_axis)?;
    let truth = truth_values(problem, &problem.initial, cfg.t, &probes, Truth::Oracle)?;
    let rows = widths
        .par_iter()
        .map(|&width| {
            let arch = flow_architecture(d, width, cfg.depth);
            let mut row = SizeSweepRow {
                width,
                depth: cfg.depth,
                size: 0,
                parameter_count: MlpParams::zeros(&arch).map(|p| p.parameter_count()).unwrap_or(0),
                surrogate_sup_error: f64::NAN,
                pipeline_sup_error: f64::NAN,
                status: Ok(()),
            };
            let trained = match fit_surrogate(&train, &test, &arch, &cfg.training, seed) {
                Ok(t) => t,
                Err(e) => {
                    row.status = Err(e.to_string());
                    return row;
                }
            };
            row.size = trained.model.size();
            row.surrogate_sup_error = trained.test_sup_error;
            let pcfg = PipelineConfig::surrogate(cfg.grid_per_axis, r, trained.model);
            let pipe = hjnet_solve(&problem.hamiltonian, &problem.initial, &pcfg)
                .and_then(|sol| sup_error_against(|q| sol.evaluate(q), &probes, &truth));
            match pipe {
                Ok(e) => row.pipeline_sup_error = e,
                Err(e) => row.status = Err(e.to_string()),
            }
            row
        })
        .collect();
    Ok(SizeSweepReport {
        rows,
        reference_exponent,
    })
}

/// Draws one-dimensional initial data from the random trigonometric family.
pub fn sample_family(family: &FamilyConfig, count: usize, regularity_r: u32, seed: u64) -> Vec<InitialData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let terms = (1..=family.modes)
                .map(|k| {
                    let bound = family.amplitude / (k * k) as f64;
                    let a = rng.random_range(-bound..=bound);
                    let b = rng.random_range(-bound..=bound);
                    FourierTerm::new([k as i32], a, b)
                })
                .collect();
            InitialData::new(1, terms, regularity_r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    /// Hidden width of the flow surrogate; 0 marks the bias-only row.
    pub hjnet_width: usize,
    pub hjnet_parameters: usize,
    pub hjnet_error: Option<f64>,
    pub baseline_width: usize,
    pub baseline_parameters: usize,
    pub baseline_error: f64,
    pub status: std::result::Result<(), String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub rows: Vec<BaselineRow>,
}

impl BaselineReport {
    pub fn complete(&self) -> bool {
        self.rows.iter().all(|r| r.status.is_ok())
    }
}

/// Data for the direct operator regression: `u0` sampled on the grid mapped
/// to `u(·, t)` at the probes.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorData {
    pub initial: Vec<InitialData>,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

pub fn operator_data(
    problem: &ProblemConfig,
    initial: Vec<InitialData>,
    t: f64,
    grid: &[TorusPoint],
    probes: &[TorusPoint],
) -> Result<OperatorData> {
    let inputs = initial
        .iter()
        .map(|u0| grid.iter().map(|q| Ok(u0.eval_u0(q)?.0)).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    let targets = initial
        .par_iter()
        .map(|u0| truth_values(problem, u0, t, probes, Truth::Oracle))
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorData {
        initial,
        inputs,
        targets,
    })
}

/// Predicting the per-output mean of the training targets: the best
/// constant fit in the least-squares sense.
pub fn bias_only_fit(targets: &[Vec<f64>]) -> Vec<f64> {
    let mut mean = vec![0.0; targets.first().map_or(0, Vec::len)];
    for t in targets {
        for (m, v) in mean.iter_mut().zip(t) {
            *m += v;
        }
    }
    let n = targets.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

fn max_abs_diff(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter().zip(truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// HJ-Net against a plain network regressing `u0|grid ↦ u(·,t)|probes`, at
/// matched parameter counts.
pub fn baseline_direct(problem: &ProblemConfig, cfg: &BaselineConfig, seed: u64) -> Result<BaselineReport> {
    problem.validate()?;
    if problem.hamiltonian.d != 1 {
        return Err(Error::Config("the baseline family is one-dimensional".into()));
    }
    let r = cfg.r.unwrap_or(problem.initial.regularity_r);
    let grid = make_uniform_grid(1, cfg.grid_per_axis)?.into_points();
    let probes = probe_lattice(1, cfg.probes_per_axis)?;
    let family = sample_family(&cfg.family, cfg.n_train + cfg.n_test, r, seed.wrapping_add(2));
    let mut data = operator_data(problem, family, cfg.t, &grid, &probes)?;
    let test_initial = data.initial.split_off(cfg.n_train);
    let test_inputs = data.inputs.split_off(cfg.n_train);
    let test_targets = data.targets.split_off(cfg.n_train);
    if data.inputs.is_empty() || test_inputs.is_empty() {
        return Err(Error::Config("baseline needs n_train >= 1 and n_test >= 1".into()));
    }

    let (flow_train, flow_test) = surrogate_datasets(problem, cfg.t, &cfg.surrogate, seed)?;
    let (n_in, n_out) = (cfg.grid_per_axis, cfg.probes_per_axis);
    let mut widths = cfg.widths.clone();
    widths.sort_unstable();
    widths.dedup();
    let rows = widths
        .par_iter()
        .map(|&width| {
            let mut row = BaselineRow {
                hjnet_width: width,
                hjnet_parameters: 0,
                hjnet_error: None,
                baseline_width: 0,
                baseline_parameters: n_out,
                baseline_error: f64::NAN,
                status: Ok(()),
            };
            if width == 0 {
                let mean = bias_only_fit(&data.targets);
                row.baseline_error = test_targets.iter().map(|t| max_abs_diff(&mean, t)).fold(0.0, f64::max);
                return row;
            }
            let mut failures = Vec::new();
            let arch = flow_architecture(1, width, 1);
            let hj_params = MlpParams::zeros(&arch).map(|p| p.parameter_count()).unwrap_or(0);
            row.hjnet_parameters = hj_params;
            let hj = fit_surrogate(&flow_train, &flow_test, &arch, &cfg.surrogate, seed).and_then(|trained| {
                let mut worst: f64 = 0.0;
                for (u0, truth) in test_initial.iter().zip(&test_targets) {
                    let pcfg = PipelineConfig::surrogate(cfg.grid_per_axis, r, trained.model.clone());
                    let sol = hjnet_solve(&problem.hamiltonian, u0, &pcfg)?;
                    worst = worst.max(sup_error_against(|q| sol.evaluate(q), &probes, truth)?);
                }
                Ok(worst)
            });
            match hj {
                Ok(e) => row.hjnet_error = Some(e),
                Err(e) => failures.push(format!("hjnet: {e}")),
            }

            row.baseline_width = matched_width(hj_params, n_in, n_out);
            let b_arch = [n_in, row.baseline_width, n_out];
            let mut tcfg = cfg.direct_train;
            tcfg.seed = seed;
            let direct = train_regression(&data.inputs, &data.targets, &b_arch, &tcfg).and_then(|(params, _)| {
                let mut worst: f64 = 0.0;
                for (x, truth) in test_inputs.iter().zip(&test_targets) {
                    worst = worst.max(max_abs_diff(&params.forward(x)?, truth));
                }
                Ok((params.parameter_count(), worst))
            });
            match direct {
                Ok((p, e)) => {
                    row.baseline_parameters = p;
                    row.baseline_error = e;
                }
                Err(e) => failures.push(format!("direct: {e}")),
            }
            if !failures.is_empty() {
                row.status = Err(failures.join("; "));
            }
            row
        })
        .collect();
    Ok(BaselineReport { rows })
}

/// Hidden width of `[n_in, w, n_out]` whose parameter count is closest to
/// `target`.
pub fn matched_width(target: usize, n_in: usize, n_out: usize) -> usize {
    let per_unit = (n_in + n_out + 1) as f64;
    (((target as f64 - n_out as f64) / per_unit).round() as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TstarReport {
    pub times: Vec<f64>,
    pub min_det: Vec<f64>,
    /// Interpolated first sign change of the minimum determinant.
    pub tstar: Option<f64>,
}

pub fn tstar_scan(problem: &ProblemConfig, cfg: &TstarConfig) -> Result<TstarReport> {
    problem.validate()?;
    if cfg.n_times < 2 || !(cfg.t_max > 0.0) {
        return Err(Error::Config("tstar needs n_times >= 2 and t_max > 0".into()));
    }
    let probes = probe_lattice(problem.hamiltonian.d, cfg.probes_per_axis)?;
    let times: Vec<f64> = (0..cfg.n_times)
        .map(|k| cfg.t_max * k as f64 / (cfg.n_times - 1) as f64)
        .collect();
    let min_det = min_jacobian_det_series(
        &problem.hamiltonian,
        &problem.initial,
        &probes,
        &times,
        &problem.integrator,
    )?;
    let tstar = crate::flow::first_sign_change(&times, &min_det);
    Ok(TstarReport { times, min_det, tstar })
}

/// Invertibility summary over a probe lattice at the given times.
pub fn horizon_monitor(problem: &ProblemConfig, probes_per_axis: usize, times: &[f64]) -> Result<CharMonitor> {
    let probes = probe_lattice(problem.hamiltonian.d, probes_per_axis)?;
    monitor_characteristics(&problem.hamiltonian, &problem.initial, &probes, times, &problem.integrator)
}

pub fn train_command(problem: &ProblemConfig, cfg: &TrainCommandConfig, seed: u64) -> Result<TrainedSurrogate> {
    problem.validate()?;
    let d = problem.hamiltonian.d;
    let mut arch = vec![2 * d + 1];
    arch.extend(&cfg.hidden);
    arch.push(3 * d + 1);
    train_surrogate(problem, cfg.t, &arch, &cfg.training, seed)
}
