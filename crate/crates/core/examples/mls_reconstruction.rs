//! Prunes a scattered point cloud and reconstructs a smooth periodic function
//! from it by moving least squares.

use hjnet::mls::{
    default_fill_resolution, default_gamma, fill_distance, prune, reconstruct, separation_distance,
    PointSet,
};
use hjnet::torus::{lattice, TorusPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hjnet::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = |q: &TorusPoint| q.coords()[0].sin() + 0.5 * (2.0 * q.coords()[1]).cos();
    // Jittered 64 x 64 lattice plus a dense random cluster.
    let spacing = std::f64::consts::TAU / 64.0;
    let mut cloud: Vec<TorusPoint> = lattice(2, 64)
        .iter()
        .map(|p| {
            let jitter = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)];
            p.shifted(&[jitter[0] * spacing, jitter[1] * spacing])
        })
        .collect();
    cloud.extend((0..500).map(|_| TorusPoint::new(vec![rng.random_range(1.0..1.5), rng.random_range(2.0..2.5)])));
    let q = PointSet::new(2, cloud)?;
    let values: Vec<f64> = q.points().iter().map(f).collect();

    let res = default_fill_resolution(2);
    let h = fill_distance(&q, res)?;
    println!("cloud: {} points, fill {h:.4}, separation {:.2e}", q.len(), separation_distance(&q)?);
    let (_, pruned) = prune(&q, h)?;
    println!(
        "pruned: {} points, fill {:.4}, separation {:.4}",
        pruned.len(),
        fill_distance(&pruned, res)?,
        separation_distance(&pruned)?
    );

    for r in [2, 3, 4] {
        let eval = reconstruct(&q, &values, r, default_gamma(r as usize - 1))?;
        let probes = lattice(2, 48);
        let err = probes
            .iter()
            .map(|p| Ok((eval.evaluate(p)? - f(p)).abs()))
            .collect::<hjnet::Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        println!("r = {r}: {} points kept, delta {:.3}, sup error {err:.2e}", eval.points().len(), eval.delta());
    }
    Ok(())
}
