//! Integrates characteristics, writes one trajectory as CSV, and solves
//! `u(q, t)` by inverting the spatial characteristic map.

use hjnet::flow::{
    integrate_flow, integrate_trajectory, monitor_characteristics, oracle_solve,
    write_trajectory_csv, IntegratorConfig, PhaseState,
};
use hjnet::hamiltonians::{HamiltonianSpec, InitialData};
use hjnet::torus::{lattice, TorusPoint};

fn main() -> hjnet::Result<()> {
    let spec = HamiltonianSpec::pendulum();
    let u0 = InitialData::sine();
    let cfg = IntegratorConfig::new(1e-2, 0.5);

    let q0 = TorusPoint::new(vec![1.0]);
    let (z0, p0) = u0.eval_u0(&q0)?;
    let s0 = PhaseState::new(q0, p0, z0);
    let end = integrate_flow(&spec, &s0, &cfg)?;
    let energy = |s: &PhaseState| spec.eval_h(&s.q, &s.p);
    println!("start {s0:?}\nend   {end:?}");
    println!("energy drift {:.2e}", (energy(&end)? - energy(&s0)?).abs());

    let trajectory = integrate_trajectory(&spec, &s0, &cfg.with_t_final(0.05))?;
    write_trajectory_csv(std::io::stdout(), &trajectory)?;

    let probes = lattice(1, 64);
    let times: Vec<f64> = (1..=30).map(|k| 0.05 * k as f64).collect();
    let monitor = monitor_characteristics(&spec, &u0, &probes, &times, &cfg)?;
    println!("characteristic monitor: {monitor:?}");

    let points = lattice(1, 8);
    let u = oracle_solve(&spec, &u0, 0.5, &points, &cfg)?;
    for (q, v) in points.iter().zip(&u) {
        println!("u({:.4}, 0.5) = {v:+.6}", q.coords()[0]);
    }
    Ok(())
}
