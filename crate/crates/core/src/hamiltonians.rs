//! Closed-form periodic Hamiltonians, their Lagrangians, and trigonometric
//! initial data.
//!
//! Every q-dependence is a finite trigonometric polynomial, so periodicity
//! and smoothness hold by construction and all derivatives are analytic.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::torus::TorusPoint;

/// One term `cos_amp·cos(k·q) + sin_amp·sin(k·q)`.
///
/// Serialized as the triple `[k-vector, cos_amp, sin_amp]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "(Vec<i32>, f64, f64)", into = "(Vec<i32>, f64, f64)")]
pub struct FourierTerm {
    pub k: Vec<i32>,
    pub cos_amp: f64,
    pub sin_amp: f64,
}

impl FourierTerm {
    pub fn new(k: impl Into<Vec<i32>>, cos_amp: f64, sin_amp: f64) -> Self {
        FourierTerm {
            k: k.into(),
            cos_amp,
            sin_amp,
        }
    }

    /// The constant `c` in dimension `d`.
    pub fn constant(d: usize, c: f64) -> Self {
        FourierTerm::new(vec![0; d], c, 0.0)
    }

    fn phase(&self, q: &[f64]) -> f64 {
        self.k.iter().zip(q).map(|(k, x)| *k as f64 * x).sum()
    }
}

impl From<(Vec<i32>, f64, f64)> for FourierTerm {
    fn from((k, cos_amp, sin_amp): (Vec<i32>, f64, f64)) -> Self {
        FourierTerm { k, cos_amp, sin_amp }
    }
}

impl From<FourierTerm> for (Vec<i32>, f64, f64) {
    fn from(t: FourierTerm) -> Self {
        (t.k, t.cos_amp, t.sin_amp)
    }
}

/// Sum of Fourier terms, evaluated on raw (possibly unwrapped) coordinates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TrigPoly<'a>(pub &'a [FourierTerm]);

impl TrigPoly<'_> {
    pub fn value(&self, q: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|t| {
                let (s, c) = t.phase(q).sin_cos();
                t.cos_amp * c + t.sin_amp * s
            })
            .sum()
    }

    /// Adds `scale·∇f(q)` into `out`.
    pub fn add_gradient(&self, q: &[f64], scale: f64, out: &mut [f64]) {
        for t in self.0 {
            let (s, c) = t.phase(q).sin_cos();
            let dphase = scale * (t.sin_amp * c - t.cos_amp * s);
            for (o, k) in out.iter_mut().zip(&t.k) {
                *o += dphase * *k as f64;
            }
        }
    }

    /// Adds `scale·∇²f(q)` into the top-left `d×d` block of `out` at `offset`.
    pub fn add_hessian(&self, q: &[f64], scale: f64, out: &mut DMatrix<f64>, offset: usize) {
        for t in self.0 {
            let (s, c) = t.phase(q).sin_cos();
            let curv = -scale * (t.cos_amp * c + t.sin_amp * s);
            for (i, ki) in t.k.iter().enumerate() {
                for (j, kj) in t.k.iter().enumerate() {
                    out[(offset + i, offset + j)] += curv * (*ki * *kj) as f64;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    /// `H = |p|²/2`
    FreeParticle,
    /// `H = |p|²/2 + V(q)`
    KineticPlusPotential,
    /// `H = v(q)·p`
    Advection,
}

/// A periodic Hamiltonian from one of the closed-form families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub kind: HamiltonianKind,
    pub d: usize,
    #[serde(default)]
    pub potential_coeffs: Vec<FourierTerm>,
    /// One coefficient list per velocity component.
    #[serde(default)]
    pub velocity_coeffs: Vec<Vec<FourierTerm>>,
    /// `L_H` with `sup_q -p·∇_q H ≤ L_H (1 + |p|²)`.
    #[serde(default)]
    pub growth_constant: f64,
}

impl HamiltonianSpec {
    pub fn free_particle(d: usize) -> Self {
        HamiltonianSpec {
            kind: HamiltonianKind::FreeParticle,
            d,
            potential_coeffs: Vec::new(),
            velocity_coeffs: Vec::new(),
            growth_constant: 0.0,
        }
    }

    pub fn kinetic_plus_potential(
        d: usize,
        potential: Vec<FourierTerm>,
        growth_constant: f64,
    ) -> Self {
        HamiltonianSpec {
            kind: HamiltonianKind::KineticPlusPotential,
            d,
            potential_coeffs: potential,
            velocity_coeffs: Vec::new(),
            growth_constant,
        }
    }

    /// `H = p²/2 + cos q` in one dimension, with `L_H = 1/2`.
    pub fn pendulum() -> Self {
        Self::kinetic_plus_potential(1, vec![FourierTerm::new([1], 1.0, 0.0)], 0.5)
    }

    pub fn advection(d: usize, velocity: Vec<Vec<FourierTerm>>, growth_constant: f64) -> Self {
        HamiltonianSpec {
            kind: HamiltonianKind::Advection,
            d,
            potential_coeffs: Vec::new(),
            velocity_coeffs: velocity,
            growth_constant,
        }
    }

    /// Advection by a constant velocity field (`L_H = 0`).
    pub fn constant_advection(velocity: &[f64]) -> Self {
        let d = velocity.len();
        let coeffs = velocity
            .iter()
            .map(|v| vec![FourierTerm::constant(d, *v)])
            .collect();
        Self::advection(d, coeffs, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("hamiltonian dimension must be positive".into()));
        }
        if !(self.growth_constant >= 0.0) {
            return Err(Error::Config("growth_constant must be non-negative".into()));
        }
        let check_terms = |terms: &[FourierTerm]| -> Result<()> {
            for t in terms {
                if t.k.len() != self.d {
                    return Err(Error::Config(format!(
                        "wavevector {:?} does not have dimension {}",
                        t.k, self.d
                    )));
                }
            }
            Ok(())
        };
        check_terms(&self.potential_coeffs)?;
        for comp in &self.velocity_coeffs {
            check_terms(comp)?;
        }
        if self.kind == HamiltonianKind::Advection && self.velocity_coeffs.len() != self.d {
            return Err(Error::Config(format!(
                "advection needs {} velocity components, got {}",
                self.d,
                self.velocity_coeffs.len()
            )));
        }
        Ok(())
    }

    pub fn eval_h(&self, q: &TorusPoint, p: &[f64]) -> Result<f64> {
        check_dim(self.d, q.dim())?;
        check_dim(self.d, p.len())?;
        Ok(self.h_raw(q.coords(), p))
    }

    /// Returns `(∇_q H, ∇_p H)`.
    pub fn grad_h(&self, q: &TorusPoint, p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim(self.d, q.dim())?;
        check_dim(self.d, p.len())?;
        let mut gq = vec![0.0; self.d];
        let mut gp = vec![0.0; self.d];
        self.grad_raw(q.coords(), p, &mut gq, &mut gp);
        Ok((gq, gp))
    }

    /// `L(q, p) = p·∇_p H − H`.
    pub fn lagrangian(&self, q: &TorusPoint, p: &[f64]) -> Result<f64> {
        check_dim(self.d, q.dim())?;
        check_dim(self.d, p.len())?;
        Ok(self.lagrangian_raw(q.coords(), p))
    }

    /// Full `2d×2d` Hessian in the variables `(q, p)`.
    pub fn hessian(&self, q: &TorusPoint, p: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.d, q.dim())?;
        check_dim(self.d, p.len())?;
        let d = self.d;
        let q = q.coords();
        let mut hess = DMatrix::zeros(2 * d, 2 * d);
        match self.kind {
            HamiltonianKind::FreeParticle | HamiltonianKind::KineticPlusPotential => {
                for i in 0..d {
                    hess[(d + i, d + i)] = 1.0;
                }
                if self.kind == HamiltonianKind::KineticPlusPotential {
                    TrigPoly(&self.potential_coeffs).add_hessian(q, 1.0, &mut hess, 0);
                }
            }
            HamiltonianKind::Advection => {
                for (i, comp) in self.velocity_coeffs.iter().enumerate() {
                    let poly = TrigPoly(comp);
                    poly.add_hessian(q, p[i], &mut hess, 0);
                    let mut dv = vec![0.0; d];
                    poly.add_gradient(q, 1.0, &mut dv);
                    for (j, g) in dv.iter().enumerate() {
                        hess[(j, d + i)] += g;
                        hess[(d + i, j)] += g;
                    }
                }
            }
        }
        Ok(hess)
    }

    pub(crate) fn h_raw(&self, q: &[f64], p: &[f64]) -> f64 {
        match self.kind {
            HamiltonianKind::FreeParticle => 0.5 * norm_sq(p),
            HamiltonianKind::KineticPlusPotential => {
                0.5 * norm_sq(p) + TrigPoly(&self.potential_coeffs).value(q)
            }
            HamiltonianKind::Advection => self
                .velocity_coeffs
                .iter()
                .zip(p)
                .map(|(comp, pi)| TrigPoly(comp).value(q) * pi)
                .sum(),
        }
    }

    pub(crate) fn grad_raw(&self, q: &[f64], p: &[f64], gq: &mut [f64], gp: &mut [f64]) {
        gq.fill(0.0);
        match self.kind {
            HamiltonianKind::FreeParticle => gp.copy_from_slice(p),
            HamiltonianKind::KineticPlusPotential => {
                TrigPoly(&self.potential_coeffs).add_gradient(q, 1.0, gq);
                gp.copy_from_slice(p);
            }
            HamiltonianKind::Advection => {
                for (i, comp) in self.velocity_coeffs.iter().enumerate() {
                    let poly = TrigPoly(comp);
                    gp[i] = poly.value(q);
                    poly.add_gradient(q, p[i], gq);
                }
            }
        }
    }

    pub(crate) fn lagrangian_raw(&self, q: &[f64], p: &[f64]) -> f64 {
        match self.kind {
            HamiltonianKind::FreeParticle => 0.5 * norm_sq(p),
            HamiltonianKind::KineticPlusPotential => {
                0.5 * norm_sq(p) - TrigPoly(&self.potential_coeffs).value(q)
            }
            HamiltonianKind::Advection => 0.0,
        }
    }

    /// Samples `(q, p)` on a Halton sequence over `Ω × B(p_radius)` and
    /// reports the largest observed `(−p·∇_q H)/(1 + |p|²)`.
    pub fn check_growth_bound(&self, sample_count: usize, p_radius: f64) -> Result<GrowthReport> {
        if sample_count == 0 {
            return Err(Error::InvalidArgument("sample_count must be >= 1".into()));
        }
        let d = self.d;
        let mut halton = Halton::new(2 * d);
        let mut gq = vec![0.0; d];
        let mut gp = vec![0.0; d];
        let mut q = vec![0.0; d];
        let mut p = vec![0.0; d];
        let mut max_ratio = f64::NEG_INFINITY;
        let mut accepted = 0;
        while accepted < sample_count {
            let u = halton.next_point();
            for i in 0..d {
                q[i] = TAU * u[i];
                p[i] = p_radius * (2.0 * u[d + i] - 1.0);
            }
            if norm_sq(&p) > p_radius * p_radius {
                continue;
            }
            accepted += 1;
            self.grad_raw(&q, &p, &mut gq, &mut gp);
            let ratio = -dot(&p, &gq) / (1.0 + norm_sq(&p));
            max_ratio = max_ratio.max(ratio);
        }
        Ok(GrowthReport {
            max_ratio,
            holds: max_ratio <= self.growth_constant,
        })
    }

    /// `sup ‖D²H‖₂` over `Ω × {|p| ≤ p_radius}`, estimated on a Halton sample.
    pub fn hessian_norm_bound(&self, sample_count: usize, p_radius: f64) -> f64 {
        let d = self.d;
        let mut halton = Halton::new(2 * d);
        let mut best: f64 = 0.0;
        let mut accepted = 0;
        while accepted < sample_count {
            let u = halton.next_point();
            let q = TorusPoint::new((0..d).map(|i| TAU * u[i]).collect::<Vec<_>>());
            let p: Vec<f64> = (0..d).map(|i| p_radius * (2.0 * u[d + i] - 1.0)).collect();
            if norm_sq(&p) > p_radius * p_radius {
                continue;
            }
            accepted += 1;
            let hess = self.hessian(&q, &p).expect("dimensions match by construction");
            best = best.max(spectral_norm_sym(hess));
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    pub max_ratio: f64,
    pub holds: bool,
}

/// Periodic initial data given by a trigonometric polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub d: usize,
    #[serde(default)]
    pub fourier_coeffs: Vec<FourierTerm>,
    /// Smoothness order used by the reconstruction (`n = r − 1`).
    #[serde(default = "default_regularity")]
    pub regularity_r: u32,
}

fn default_regularity() -> u32 {
    4
}

impl InitialData {
    pub fn new(d: usize, fourier_coeffs: Vec<FourierTerm>, regularity_r: u32) -> Self {
        InitialData {
            d,
            fourier_coeffs,
            regularity_r,
        }
    }

    pub fn zero(d: usize) -> Self {
        InitialData::new(d, Vec::new(), default_regularity())
    }

    pub fn constant(d: usize, c: f64) -> Self {
        InitialData::new(d, vec![FourierTerm::constant(d, c)], default_regularity())
    }

    /// `u0(q) = sin q` in one dimension.
    pub fn sine() -> Self {
        InitialData::new(1, vec![FourierTerm::new([1], 0.0, 1.0)], default_regularity())
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("initial data dimension must be positive".into()));
        }
        if self.regularity_r < 2 {
            return Err(Error::Config("regularity_r must be >= 2".into()));
        }
        if let Some(t) = self.fourier_coeffs.iter().find(|t| t.k.len() != self.d) {
            return Err(Error::Config(format!(
                "wavevector {:?} does not have dimension {}",
                t.k, self.d
            )));
        }
        Ok(())
    }

    /// Returns `(u0(q), ∇u0(q))`.
    pub fn eval_u0(&self, q: &TorusPoint) -> Result<(f64, Vec<f64>)> {
        check_dim(self.d, q.dim())?;
        let poly = TrigPoly(&self.fourier_coeffs);
        let mut grad = vec![0.0; self.d];
        poly.add_gradient(q.coords(), 1.0, &mut grad);
        Ok((poly.value(q.coords()), grad))
    }

    pub fn hessian(&self, q: &TorusPoint) -> Result<DMatrix<f64>> {
        check_dim(self.d, q.dim())?;
        let mut hess = DMatrix::zeros(self.d, self.d);
        TrigPoly(&self.fourier_coeffs).add_hessian(q.coords(), 1.0, &mut hess, 0);
        Ok(hess)
    }

    /// `max(|u0|, |∇u0|, ‖∇²u0‖₂)` over a Halton sample of the torus.
    pub fn c2_norm_estimate(&self, sample_count: usize) -> f64 {
        let mut halton = Halton::new(self.d);
        let mut best: f64 = 0.0;
        for _ in 0..sample_count {
            let u = halton.next_point();
            let q = TorusPoint::new(u.iter().map(|x| TAU * x).collect::<Vec<_>>());
            let (v, g) = self.eval_u0(&q).expect("dimensions match by construction");
            let h = self.hessian(&q).expect("dimensions match by construction");
            best = best.max(v.abs()).max(norm_sq(&g).sqrt()).max(spectral_norm_sym(h));
        }
        best
    }
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn spectral_norm_sym(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, e| acc.max(e.abs()))
}

/// Halton low-discrepancy sequence in up to 16 dimensions.
pub(crate) struct Halton {
    index: u64,
    bases: Vec<u64>,
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

impl Halton {
    pub fn new(dim: usize) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sequence supports at most 16 dims");
        Halton {
            index: 1,
            bases: PRIMES[..dim].to_vec(),
        }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.bases.iter().map(|b| radical_inverse(i, *b)).collect()
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}
