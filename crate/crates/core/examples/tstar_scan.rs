//! Scans the minimum characteristic Jacobian determinant in time to locate
//! the classical horizon.

use hjnet::bench::{tstar_scan, ProblemConfig, TstarConfig};
use hjnet::hamiltonians::HamiltonianSpec;

fn main() -> hjnet::Result<()> {
    let problems = [
        ("free particle", HamiltonianSpec::free_particle(1)),
        ("pendulum", HamiltonianSpec::pendulum()),
        ("advection", HamiltonianSpec::constant_advection(&[1.0])),
    ];
    for (name, hamiltonian) in problems {
        let problem = ProblemConfig {
            hamiltonian,
            ..ProblemConfig::default()
        };
        let report = tstar_scan(&problem, &TstarConfig::default())?;
        match report.tstar {
            Some(t) => println!("{name:14} T* ~ {t:.4}"),
            None => println!("{name:14} no crossing up to t = {}", report.times.last().unwrap()),
        }
    }
    Ok(())
}
