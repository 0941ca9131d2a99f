//! Moving least squares on the torus.
//!
//! At a query point the data are expressed in a local chart (minimal
//! periodic offsets, scaled by `δ`) and a polynomial of total degree `n` is
//! fitted by weighted least squares with the bump weight
//! `φ(s) = exp(1 − 1/(1 − s²))`; the fit's value at the query is returned.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cells::CellIndex;
use super::pointset::{default_fill_resolution, fill_distance, PointSet};
use super::prune::prune;
use crate::error::{check_dim, Error, Result};
use crate::torus::TorusPoint;

/// Relative eigenvalue cutoff of the normal-equation pseudoinverse.
pub const SPECTRAL_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlsConfig {
    /// Polynomial degree `n`.
    pub degree: usize,
    /// Support scale multiplier: `δ = γ·h`.
    pub gamma: f64,
}

impl MlsConfig {
    /// `n = r − 1` with the default `γ`.
    pub fn for_regularity(r: u32) -> Self {
        let degree = r.saturating_sub(1) as usize;
        MlsConfig {
            degree,
            gamma: default_gamma(degree),
        }
    }
}

/// `γ = n + 2`: after pruning the support still holds a unisolvent stencil
/// for `π_n`, while `δ` stays below `π` on coarse grids.
pub fn default_gamma(degree: usize) -> f64 {
    degree as f64 + 2.0
}

/// Compactly supported bump, `φ(0) = 1`, zero for `s ≥ 1`.
pub fn bump_weight(s: f64) -> f64 {
    let s = s.abs();
    if s >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Exponents of all monomials of total degree `≤ n` in `d` variables, the
/// constant monomial first, then by increasing degree.
pub fn monomial_exponents(d: usize, n: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=n {
        let mut current = vec![0u32; d];
        push_compositions(total as u32, 0, &mut current, &mut out);
    }
    out
}

fn push_compositions(remaining: u32, axis: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if axis + 1 == current.len() {
        current[axis] = remaining;
        out.push(current.clone());
        return;
    }
    for e in (0..=remaining).rev() {
        current[axis] = e;
        push_compositions(remaining - e, axis + 1, current, out);
    }
    current[axis] = 0;
}

/// Dimension of the space of polynomials of degree `≤ n` in `d` variables.
pub fn poly_space_dim(d: usize, n: usize) -> usize {
    // C(n + d, d)
    (1..=d).fold(1usize, |acc, i| acc * (n + i) / i)
}

struct LocalFit<'a> {
    exps: &'a [Vec<u32>],
    gram: DMatrix<f64>,
    rhs: DVector<f64>,
    basis: Vec<f64>,
    count: usize,
}

impl<'a> LocalFit<'a> {
    fn new(exps: &'a [Vec<u32>]) -> Self {
        let m = exps.len();
        LocalFit {
            exps,
            gram: DMatrix::zeros(m, m),
            rhs: DVector::zeros(m),
            basis: vec![0.0; m],
            count: 0,
        }
    }

    /// `x` are local coordinates already divided by `δ`.
    fn add(&mut self, x: &[f64], weight: f64, value: f64) {
        if weight <= 0.0 {
            return;
        }
        self.count += 1;
        for (b, e) in self.basis.iter_mut().zip(self.exps) {
            *b = x.iter().zip(e).map(|(xi, ei)| xi.powi(*ei as i32)).product();
        }
        let m = self.basis.len();
        for i in 0..m {
            let wb = weight * self.basis[i];
            self.rhs[i] += wb * value;
            for j in i..m {
                self.gram[(i, j)] += wb * self.basis[j];
            }
        }
    }

    fn solve(mut self, query: &TorusPoint) -> Result<f64> {
        let m = self.exps.len();
        if self.count < m {
            return Err(Error::InsufficientStencil {
                query: query.coords().to_vec(),
                found: self.count,
                needed: m,
            });
        }
        for i in 0..m {
            for j in 0..i {
                self.gram[(i, j)] = self.gram[(j, i)];
            }
        }
        let eig = SymmetricEigen::new(self.gram);
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
        let cutoff = SPECTRAL_CUTOFF * lmax;
        // Only the constant coefficient is needed: c0 = Σ_k v_k[0] (v_k·rhs)/λ_k.
        let mut c0 = 0.0;
        for (k, lambda) in eig.eigenvalues.iter().enumerate() {
            if *lambda > cutoff {
                let v = eig.eigenvectors.column(k);
                c0 += v[0] * v.dot(&self.rhs) / lambda;
            }
        }
        Ok(c0)
    }
}

/// Moving-least-squares value at `query` from scattered data.
pub fn mls_evaluate(
    qp: &PointSet,
    values: &[f64],
    query: &TorusPoint,
    cfg: &MlsConfig,
    delta: f64,
) -> Result<f64> {
    check_dim(qp.len(), values.len())?;
    check_dim(qp.dim(), query.dim())?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let exps = monomial_exponents(qp.dim(), cfg.degree);
    let mut fit = LocalFit::new(&exps);
    for (p, v) in qp.points().iter().zip(values) {
        let x: Vec<f64> = p.delta(query).iter().map(|c| c / delta).collect();
        let s = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        fit.add(&x, bump_weight(s), *v);
    }
    fit.solve(query)
}

/// Immutable MLS reconstruction over a fixed (pruned) data set.
pub struct MlsEvaluator {
    points: PointSet,
    values: Vec<f64>,
    kept: Vec<usize>,
    cfg: MlsConfig,
    delta: f64,
    exps: Vec<Vec<u32>>,
    index: CellIndex,
}

impl MlsEvaluator {
    pub fn new(points: PointSet, values: Vec<f64>, cfg: MlsConfig, delta: f64) -> Result<Self> {
        check_dim(points.len(), values.len())?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        let kept = (0..points.len()).collect();
        let index = points.index(delta);
        let exps = monomial_exponents(points.dim(), cfg.degree);
        Ok(MlsEvaluator {
            points,
            values,
            kept,
            cfg,
            delta,
            exps,
            index,
        })
    }

    pub fn evaluate(&self, query: &TorusPoint) -> Result<f64> {
        check_dim(self.points.dim(), query.dim())?;
        let mut fit = LocalFit::new(&self.exps);
        let mut local = vec![0.0; query.dim()];
        self.index.for_each_within(query.coords(), self.delta, |id, dist| {
            for (l, c) in local.iter_mut().zip(self.points.points()[id].delta(query)) {
                *l = c / self.delta;
            }
            fit.add(&local, bump_weight(dist / self.delta), self.values[id]);
        });
        fit.solve(query)
    }

    /// Evaluates at many points in parallel, preserving order.
    pub fn evaluate_many(&self, queries: &[TorusPoint]) -> Result<Vec<f64>> {
        queries.par_iter().map(|q| self.evaluate(q)).collect()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Indices into the original data of the points kept by pruning.
    pub fn kept_indices(&self) -> &[usize] {
        &self.kept
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn config(&self) -> &MlsConfig {
        &self.cfg
    }
}

/// Pruned MLS reconstruction: thin `q` with `h = h_Q`, then fit degree
/// `r − 1` with `δ = γ·h_{Q'}` on the kept data only.
pub fn reconstruct(q: &PointSet, values: &[f64], r: u32, gamma: f64) -> Result<MlsEvaluator> {
    reconstruct_with(q, values, r, gamma, default_fill_resolution(q.dim()))
}

pub fn reconstruct_with(
    q: &PointSet,
    values: &[f64],
    r: u32,
    gamma: f64,
    fill_resolution: usize,
) -> Result<MlsEvaluator> {
    if r < 2 {
        return Err(Error::InvalidArgument(format!("regularity r must be >= 2, got {r}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    check_dim(q.len(), values.len())?;
    let h = fill_distance(q, fill_resolution)?;
    let (kept, pruned) = prune(q, h)?;
    let h_pruned = fill_distance(&pruned, fill_resolution)?;
    let cfg = MlsConfig {
        degree: (r - 1) as usize,
        gamma,
    };
    let kept_values = kept.iter().map(|i| values[*i]).collect();
    let mut eval = MlsEvaluator::new(pruned, kept_values, cfg, gamma * h_pruned)?;
    eval.kept = kept;
    Ok(eval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::lattice;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn bump_properties() {
        assert_eq!(bump_weight(0.0), 1.0);
        assert_eq!(bump_weight(1.0), 0.0);
        assert_eq!(bump_weight(1.5), 0.0);
        assert!(bump_weight(0.5) > 0.7);
        assert!(bump_weight(0.999) > 0.0);
    }

    #[test]
    fn monomials() {
        assert_eq!(monomial_exponents(1, 3), vec![vec![0], vec![1], vec![2], vec![3]]);
        let m = monomial_exponents(2, 2);
        assert_eq!(m.len(), 6);
        assert_eq!(m[0], vec![0, 0]);
        for (d, n) in [(1, 0), (1, 4), (2, 3), (3, 2)] {
            assert_eq!(monomial_exponents(d, n).len(), poly_space_dim(d, n));
        }
    }

    #[test]
    fn constants_reproduced() {
        let q = PointSet::new(1, lattice(1, 32)).unwrap();
        let vals = vec![3.25; 32];
        for n in 0..4 {
            let cfg = MlsConfig { degree: n, gamma: default_gamma(n) };
            let v = mls_evaluate(&q, &vals, &TorusPoint::new(vec![1.234]), &cfg, 0.8).unwrap();
            assert!((v - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_reproduced_in_local_chart() {
        let pts: Vec<f64> = (0..40).map(|i| PI - 0.5 + i as f64 * 0.025).collect();
        let q = PointSet::from_angles(&pts);
        let vals: Vec<f64> = pts.iter().map(|x| x - PI).collect();
        for n in 1..=3 {
            let cfg = MlsConfig { degree: n, gamma: 1.0 };
            let query = TorusPoint::new(vec![PI + 0.01]);
            let v = mls_evaluate(&q, &vals, &query, &cfg, 0.4).unwrap();
            assert!((v - 0.01).abs() < 1e-10, "n={n}: {v}");
        }
    }

    #[test]
    fn polynomials_reproduced_in_2d() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let centre = [2.0, 5.0];
        let pts: Vec<TorusPoint> = (0..80)
            .map(|_| {
                TorusPoint::new(vec![
                    centre[0] + rng.random_range(-0.5..0.5),
                    centre[1] + rng.random_range(-0.5..0.5),
                ])
            })
            .collect();
        let f = |x: f64, y: f64| 1.0 - 2.0 * x + 0.5 * x * y + 3.0 * y * y;
        let vals: Vec<f64> = pts
            .iter()
            .map(|p| {
                let d = p.delta(&TorusPoint::new(centre.to_vec()));
                f(d[0], d[1])
            })
            .collect();
        let q = PointSet::new(2, pts).unwrap();
        let cfg = MlsConfig { degree: 2, gamma: 1.0 };
        let query = TorusPoint::new(vec![2.1, 4.95]);
        let v = mls_evaluate(&q, &vals, &query, &cfg, 0.6).unwrap();
        assert!((v - f(0.1, -0.05)).abs() < 1e-8);
    }

    #[test]
    fn insufficient_stencil_is_an_error() {
        let q = PointSet::from_angles(&[0.0, 0.1, 3.0]);
        let cfg = MlsConfig { degree: 2, gamma: 1.0 };
        let err = mls_evaluate(&q, &[1.0, 1.0, 1.0], &TorusPoint::new(vec![0.05]), &cfg, 0.5)
            .unwrap_err();
        assert!(matches!(err, Error::InsufficientStencil { found: 2, needed: 3, .. }));
    }

    #[test]
    fn evaluator_agrees_with_direct_evaluation() {
        let q = PointSet::new(1, lattice(1, 64)).unwrap();
        let vals: Vec<f64> = q.points().iter().map(|p| p.coords()[0].sin()).collect();
        let cfg = MlsConfig::for_regularity(4);
        let delta = cfg.gamma * PI / 64.0;
        let eval = MlsEvaluator::new(q.clone(), vals.clone(), cfg, delta).unwrap();
        for i in 0..50 {
            let x = TorusPoint::new(vec![TAU * i as f64 / 50.0 + 0.01]);
            let a = eval.evaluate(&x).unwrap();
            let b = mls_evaluate(&q, &vals, &x, &cfg, delta).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn sine_error(n_points: usize) -> f64 {
        let q = PointSet::new(1, lattice(1, n_points)).unwrap();
        let vals: Vec<f64> = q.points().iter().map(|p| p.coords()[0].sin()).collect();
        let cfg = MlsConfig::for_regularity(4);
        let h = fill_distance(&q, 0).unwrap();
        (0..512)
            .map(|i| {
                let x = TAU * (i as f64 + 0.5) / 512.0;
                let v = mls_evaluate(&q, &vals, &TorusPoint::new(vec![x]), &cfg, cfg.gamma * h)
                    .unwrap();
                (v - x.sin()).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn dyadic_refinement_ratio_near_sixteen() {
        let (e64, e128) = (sine_error(64), sine_error(128));
        let h64 = PI / 64.0;
        assert!(e64 <= 10.0 * h64.powi(4), "{e64}");
        let ratio = e64 / e128;
        assert!(ratio >= 16.0 / 1.6 && ratio <= 16.0 * 1.6, "ratio {ratio}");
    }

    #[test]
    fn reconstruct_constant_and_errors() {
        let angles: Vec<f64> = (0..40).map(|i| (i as f64 * 2.399963).rem_euclid(TAU)).collect();
        let q = PointSet::from_angles(&angles);
        let eval = reconstruct(&q, &vec![-1.5; 40], 3, default_gamma(2)).unwrap();
        for i in 0..30 {
            let v = eval.evaluate(&TorusPoint::new(vec![i as f64 * 0.2])).unwrap();
            assert!((v + 1.5).abs() < 1e-12);
        }
        assert!(eval.kept_indices().len() <= 40);
        assert!(reconstruct(&q, &vec![0.0; 40], 1, 2.0).is_err());
        assert!(reconstruct(&q, &vec![0.0; 39], 3, 2.0).is_err());
    }
}
