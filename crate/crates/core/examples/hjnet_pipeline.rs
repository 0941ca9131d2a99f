//! Solves a periodic Hamilton-Jacobi problem end to end with the exact flow
//! and with a trained surrogate, and compares both against the oracle.

use hjnet::bench::{train_surrogate, ProblemConfig, SurrogateTraining};
use hjnet::pipeline::{hjnet_solve, sup_error, PipelineConfig};

fn main() -> hjnet::Result<()> {
    let problem = ProblemConfig::default();
    let (spec, u0, cfg) = (&problem.hamiltonian, &problem.initial, problem.integrator);
    let (n, t, r) = (64, 0.3, 4);

    let exact = hjnet_solve(spec, u0, &PipelineConfig::exact(n, t, r, cfg))?;
    println!("exact backend: {:?}", exact.diagnostics());
    let err = sup_error(|q| exact.evaluate(q), spec, u0, t, 8 * n, &cfg)?;
    println!("exact backend sup error {err:.3e}");

    let trained = train_surrogate(&problem, t, &[3, 64, 64, 4], &SurrogateTraining::default(), 0)?;
    println!("surrogate held-out sup error {:.3e}", trained.test_sup_error);
    let surr = hjnet_solve(spec, u0, &PipelineConfig::surrogate(n, r, trained.model))?;
    let err = sup_error(|q| surr.evaluate(q), spec, u0, t, 8 * n, &cfg)?;
    println!("surrogate backend sup error {err:.3e}");
    Ok(())
}
