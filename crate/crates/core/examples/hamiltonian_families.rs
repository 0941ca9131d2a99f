//! Evaluates the built-in Hamiltonian families and checks their growth bound.

use hjnet::hamiltonians::{FourierTerm, HamiltonianSpec};
use hjnet::torus::TorusPoint;

fn main() -> hjnet::Result<()> {
    let families = [
        ("free particle", HamiltonianSpec::free_particle(1)),
        ("pendulum", HamiltonianSpec::pendulum()),
        (
            "kinetic + potential",
            HamiltonianSpec::kinetic_plus_potential(1, vec![FourierTerm::new([2], 0.3, 0.1)], 1.0),
        ),
        ("advection v = 1", HamiltonianSpec::constant_advection(&[1.0])),
    ];
    let q = TorusPoint::new(vec![0.7]);
    let p = [1.5];
    for (name, spec) in &families {
        spec.validate()?;
        let h = spec.eval_h(&q, &p)?;
        let (hq, hp) = spec.grad_h(&q, &p)?;
        let l = spec.lagrangian(&q, &p)?;
        let growth = spec.check_growth_bound(2000, 4.0)?;
        println!(
            "{name:20} H = {h:+.4}  dH/dq = {:+.4}  dH/dp = {:+.4}  L = {l:+.4}  \
             growth ratio {:.3} ({})",
            hq[0],
            hp[0],
            growth.max_ratio,
            if growth.holds { "holds" } else { "violated" }
        );
    }
    Ok(())
}
