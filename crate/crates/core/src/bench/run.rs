use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{LoadedConfig, RunConfig, Truth};
use super::experiments::{
    baseline_direct, convergence_study, size_sweep, train_command, truth_values, tstar_scan,
};
use super::report::{
    convergence_plot, num, opt_num, size_plot, tstar_plot, Manifest, Outputs, Table,
};
use crate::error::{Error, Result};
use crate::flow::oracle_solve;
use crate::neural::FlowSurrogate;
use crate::pipeline::{hjnet_solve, probe_lattice, PipelineConfig};
use crate::torus::TorusPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Convergence,
    SizeSweep,
    Baseline,
    Tstar,
    Train,
    Solve,
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Convergence => "convergence",
            Command::SizeSweep => "size-sweep",
            Command::Baseline => "baseline",
            Command::Tstar => "tstar",
            Command::Train => "train",
            Command::Solve => "solve",
            Command::Oracle => "oracle",
        }
    }

    fn stem(self) -> String {
        self.name().replace('-', "_")
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What a command did: files written, a one-paragraph summary, and whether
/// every requested row completed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub complete: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
    pub manifest: Manifest,
}

/// Runs `command` with outputs in `out_dir`. `seed` overrides the config's.
pub fn run_command(
    command: Command,
    loaded: &LoadedConfig,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)?;
    let mut config = loaded.config.clone();
    if let Some(s) = seed {
        config.seed = s;
    }
    let mut model_bytes = Vec::new();
    if command == Command::Solve {
        if let Some(model) = &config.solve.model {
            let resolved = if model.is_absolute() { model.clone() } else { loaded.base_dir.join(model) };
            model_bytes = std::fs::read(&resolved)?;
            config.solve.model = Some(std::path::absolute(&resolved)?);
        }
    }
    let inputs: Vec<&[u8]> = if model_bytes.is_empty() { vec![] } else { vec![&model_bytes] };
    let manifest = Manifest::new(command.name(), config.seed, &config, &inputs)?;
    let stem = command.stem();
    let mut out = Outputs::default();
    out.write(out_dir.join(format!("{stem}.manifest.json")), manifest.to_json()?.as_bytes())?;

    let ctx = Ctx {
        config: &config,
        manifest: &manifest,
        out_dir,
        stem: &stem,
    };
    let (complete, summary) = match command {
        Command::Convergence => ctx.convergence(&mut out)?,
        Command::SizeSweep => ctx.size_sweep(&mut out)?,
        Command::Baseline => ctx.baseline(&mut out)?,
        Command::Tstar => ctx.tstar(&mut out)?,
        Command::Train => ctx.train(&mut out)?,
        Command::Solve => ctx.solve(&mut out, &model_bytes)?,
        Command::Oracle => ctx.oracle(&mut out)?,
    };
    Ok(RunOutcome {
        complete,
        summary,
        files: out.files,
        manifest,
    })
}

struct Ctx<'a> {
    config: &'a RunConfig,
    manifest: &'a Manifest,
    out_dir: &'a Path,
    stem: &'a str,
}

fn status(s: &std::result::Result<(), String>) -> String {
    match s {
        Ok(()) => "ok".into(),
        Err(e) => format!("error: {e}"),
    }
}

fn coord_header(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("q{i}")).collect()
}

impl Ctx<'_> {
    fn path(&self, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{}{suffix}", self.stem))
    }

    fn table(&self, header: &[&str]) -> Table {
        Table::new(header, self.manifest)
    }

    fn convergence(&self, out: &mut Outputs) -> Result<(bool, String)> {
        let rep = convergence_study(&self.config.problem, &self.config.convergence)?;
        let mut t = self.table(&["n", "h", "sup_error", "status"]);
        let mut timing = self.table(&["n", "wall_time_s"]);
        for r in &rep.rows {
            t.push(vec![r.n.to_string(), num(r.h), num(r.sup_error), "ok".into()]);
            timing.push(vec![r.n.to_string(), num(r.wall_time_s)]);
        }
        out.table(self.path(".csv"), &t)?;
        out.table(self.path(".timings.csv"), &timing)?;
        let h: Vec<f64> = rep.rows.iter().map(|r| r.h).collect();
        let e: Vec<f64> = rep.rows.iter().map(|r| r.sup_error).collect();
        let png = format!("{}.png", self.stem);
        out.write(self.path("_plot.py"), convergence_plot(&h, &e, rep.fitted_slope, &png).as_bytes())?;
        let summary = match rep.fitted_slope {
            Some(s) => format!("fitted slope {s:.4} over {} grids", rep.rows.len()),
            None => format!("fitted slope undefined ({} usable grid)", rep.rows.len()),
        };
        Ok((true, summary))
    }

    fn size_sweep(&self, out: &mut Outputs) -> Result<(bool, String)> {
        let rep = size_sweep(&self.config.problem, &self.config.size_sweep, self.config.seed)?;
        let mut t = self.table(&[
            "width",
            "depth",
            "size",
            "parameter_count",
            "surrogate_sup_error",
            "pipeline_sup_error",
            "reference_exponent",
            "status",
        ]);
        for r in &rep.rows {
            t.push(vec![
                r.width.to_string(),
                r.depth.to_string(),
                r.size.to_string(),
                r.parameter_count.to_string(),
                num(r.surrogate_sup_error),
                num(r.pipeline_sup_error),
                num(rep.reference_exponent),
                status(&r.status),
            ]);
        }
        out.table(self.path(".csv"), &t)?;
        let size: Vec<f64> = rep.rows.iter().map(|r| r.size as f64).collect();
        let surr: Vec<f64> = rep.rows.iter().map(|r| r.surrogate_sup_error).collect();
        let pipe: Vec<f64> = rep.rows.iter().map(|r| r.pipeline_sup_error).collect();
        let png = format!("{}.png", self.stem);
        let script = size_plot(
            &size,
            &[("surrogate", &surr), ("pipeline", &pipe)],
            rep.reference_exponent,
            &png,
        );
        out.write(self.path("_plot.py"), script.as_bytes())?;
        let failed = rep.rows.iter().filter(|r| r.status.is_err()).count();
        Ok((
            rep.complete(),
            format!("{} architectures, {failed} failed", rep.rows.len()),
        ))
    }

    fn baseline(&self, out: &mut Outputs) -> Result<(bool, String)> {
        let rep = baseline_direct(&self.config.problem, &self.config.baseline, self.config.seed)?;
        let mut t = self.table(&[
            "hjnet_width",
            "hjnet_parameters",
            "hjnet_error",
            "baseline_width",
            "baseline_parameters",
            "baseline_error",
            "status",
        ]);
        for r in &rep.rows {
            t.push(vec![
                r.hjnet_width.to_string(),
                r.hjnet_parameters.to_string(),
                opt_num(r.hjnet_error),
                r.baseline_width.to_string(),
                r.baseline_parameters.to_string(),
                num(r.baseline_error),
                status(&r.status),
            ]);
        }
        out.table(self.path(".csv"), &t)?;
        let matched: Vec<_> = rep.rows.iter().filter(|r| r.hjnet_error.is_some()).collect();
        let size: Vec<f64> = matched.iter().map(|r| r.hjnet_parameters as f64).collect();
        let hj: Vec<f64> = matched.iter().map(|r| r.hjnet_error.unwrap_or(f64::NAN)).collect();
        let base: Vec<f64> = matched.iter().map(|r| r.baseline_error).collect();
        let d = self.config.problem.hamiltonian.d;
        let r = self.config.baseline.r.unwrap_or(self.config.problem.initial.regularity_r);
        let script = size_plot(
            &size,
            &[("hjnet", &hj), ("direct", &base)],
            (2 * d + 1) as f64 / r as f64,
            &format!("{}.png", self.stem),
        );
        out.write(self.path("_plot.py"), script.as_bytes())?;
        let summary = match matched.last() {
            Some(r) => format!(
                "largest matched size: hjnet {:.3e} vs direct {:.3e}",
                r.hjnet_error.unwrap_or(f64::NAN),
                r.baseline_error
            ),
            None => "no matched rows".into(),
        };
        Ok((rep.complete(), summary))
    }

    fn tstar(&self, out: &mut Outputs) -> Result<(bool, String)> {
        let rep = tstar_scan(&self.config.problem, &self.config.tstar)?;
        let mut t = self.table(&["t", "min_det"]);
        for (ti, di) in rep.times.iter().zip(&rep.min_det) {
            t.push(vec![num(*ti), num(*di)]);
        }
        out.table(self.path(".csv"), &t)?;
        let png = format!("{}.png", self.stem);
        out.write(self.path("_plot.py"), tstar_plot(&rep.times, &rep.min_det, rep.tstar, &png).as_bytes())?;
        let summary = match rep.tstar {
            Some(ts) => format!("estimated T* = {ts:.6}"),
            None => format!("no sign change up to t = {}", self.config.tstar.t_max),
        };
        Ok((true, summary))
    }

    fn train(&self, out: &mut Outputs) -> Result<(bool, String)> {
        let trained = train_command(&self.config.problem, &self.config.train, self.config.seed)?;
        out.write(self.out_dir.join("model.json"), trained.model.to_json()?.as_bytes())?;
        let mut t = self.table(&["epoch", "train_loss", "val_loss"]);
        for h in &trained.history {
            t.push(vec![h.epoch.to_string(), num(h.train_loss), opt_num(h.val_loss)]);
        }
        out.table(self.path(".csv"), &t)?;
        Ok((
            true,
            format!(
                "size {}, depth {}, held-out sup error {:.4e}",
                trained.model.size(),
                trained.model.depth(),
                trained.test_sup_error
            ),
        ))
    }

    fn solve(&self, out: &mut Outputs, model_bytes: &[u8]) -> Result<(bool, String)> {
        let cfg = &self.config.solve;
        let problem = &self.config.problem;
        let r = cfg.r.unwrap_or(problem.initial.regularity_r);
        let mut pcfg = if cfg.model.is_some() {
            let model = FlowSurrogate::from_json(std::str::from_utf8(model_bytes).map_err(|e| Error::Config(e.to_string()))?)?;
            if (model.t - cfg.t).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "model was trained for t = {}, solve asks for t = {}",
                    model.t, cfg.t
                )));
            }
            PipelineConfig::surrogate(cfg.grid_per_axis, r, model)
        } else {
            PipelineConfig::exact(cfg.grid_per_axis, cfg.t, r, problem.integrator)
        };
        pcfg.gamma = cfg.gamma;
        let sol = hjnet_solve(&problem.hamiltonian, &problem.initial, &pcfg)?;
        let probes = probe_lattice(problem.hamiltonian.d, cfg.probes_per_axis)?;
        let values = sol.evaluate_many(&probes)?;
        let truth = if cfg.compare_oracle {
            Some(truth_values(problem, &problem.initial, cfg.t, &probes, Truth::Oracle)?)
        } else {
            None
        };
        let mut header = coord_header(problem.hamiltonian.d);
        header.push("u".into());
        if truth.is_some() {
            header.extend(["oracle".into(), "abs_error".into()]);
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = self.table(&header_refs);
        let mut sup: f64 = 0.0;
        for (i, (q, u)) in probes.iter().zip(&values).enumerate() {
            let mut row = coords(q);
            row.push(num(*u));
            if let Some(tr) = &truth {
                let err = (u - tr[i]).abs();
                sup = sup.max(err);
                row.extend([num(tr[i]), num(err)]);
            }
            t.push(row);
        }
        out.table(self.path(".csv"), &t)?;
        let diag = sol.diagnostics();
        let mut summary = format!(
            "{} encoding points, {} kept after pruning, delta {:.4}",
            diag.n_encoded, diag.n_kept, diag.delta
        );
        if truth.is_some() {
            summary += &format!(", sup error {sup:.4e}");
        }
        Ok((true, summary))
    }

    fn oracle(&self, out: &mut Outputs) -> Result<(bool, String)> {
        let cfg = &self.config.oracle;
        let problem = &self.config.problem;
        let d = problem.hamiltonian.d;
        let probes = probe_lattice(d, cfg.probes_per_axis)?;
        let values = oracle_solve(&problem.hamiltonian, &problem.initial, cfg.t, &probes, &problem.integrator)?;
        let mut header = coord_header(d);
        header.push("u".into());
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = self.table(&header_refs);
        for (q, u) in probes.iter().zip(&values) {
            let mut row = coords(q);
            row.push(num(*u));
            t.push(row);
        }
        out.table(self.path(".csv"), &t)?;
        Ok((true, format!("{} oracle values at t = {}", values.len(), cfg.t)))
    }
}

fn coords(q: &TorusPoint) -> Vec<String> {
    q.coords().iter().map(|c| num(*c)).collect()
}
