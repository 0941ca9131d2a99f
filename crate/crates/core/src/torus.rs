//! Points on the flat torus `[0, 2π)^d` and the periodic metric.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Wraps a real number into `[0, 2π)` by floored modulo.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Smallest periodic representative of `a - b`, in `[-π, π)`.
pub fn periodic_delta(a: f64, b: f64) -> f64 {
    let w = wrap_angle(a - b);
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// A canonically wrapped point of the torus. Coordinates are radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        let mut coords = coords.into();
        for c in &mut coords {
            *c = wrap_angle(*c);
        }
        TorusPoint(coords)
    }

    pub fn origin(d: usize) -> Self {
        TorusPoint(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Component-wise minimal representatives of `self - other`.
    pub fn delta(&self, other: &TorusPoint) -> Vec<f64> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| periodic_delta(*a, *b))
            .collect()
    }

    pub fn distance(&self, other: &TorusPoint) -> f64 {
        periodic_distance(&self.0, &other.0)
    }

    /// Translates by an (unwrapped) vector and re-wraps.
    pub fn shifted(&self, v: &[f64]) -> TorusPoint {
        TorusPoint::new(
            self.0
                .iter()
                .zip(v)
                .map(|(a, b)| a + b)
                .collect::<Vec<_>>(),
        )
    }
}

impl From<Vec<f64>> for TorusPoint {
    fn from(v: Vec<f64>) -> Self {
        TorusPoint::new(v)
    }
}

impl From<TorusPoint> for Vec<f64> {
    fn from(p: TorusPoint) -> Self {
        p.0
    }
}

/// Euclidean distance in the periodic metric between raw coordinate slices.
pub fn periodic_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = periodic_delta(*x, *y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Uniform lattice `{2πk/n}^d`, enumerated with the last axis fastest.
pub fn lattice(d: usize, n_per_axis: usize) -> Vec<TorusPoint> {
    let total = n_per_axis.pow(d as u32);
    let step = TAU / n_per_axis as f64;
    (0..total)
        .map(|mut flat| {
            let mut coords = vec![0.0; d];
            for c in coords.iter_mut().rev() {
                *c = (flat % n_per_axis) as f64 * step;
                flat /= n_per_axis;
            }
            TorusPoint(coords)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_handles_edges() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert_eq!(wrap_angle(TAU), 0.0);
        assert!((wrap_angle(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!(wrap_angle(-1e-300) < TAU);
        assert!((wrap_angle(7.0) - (7.0 - TAU)).abs() < 1e-15);
    }

    #[test]
    fn lattice_enumeration() {
        let g = lattice(2, 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[1].coords(), &[0.0, TAU / 3.0]);
        assert_eq!(g[3].coords(), &[TAU / 3.0, 0.0]);
        assert_eq!(lattice(1, 1), vec![TorusPoint::origin(1)]);
    }

    proptest! {
        #[test]
        fn wrapped_coordinates_in_range(x in -1e6f64..1e6) {
            let w = wrap_angle(x);
            prop_assert!((0.0..TAU).contains(&w));
        }

        #[test]
        fn distance_bounded_by_half_diagonal(
            a in proptest::collection::vec(-50.0f64..50.0, 3),
            b in proptest::collection::vec(-50.0f64..50.0, 3),
        ) {
            let (pa, pb) = (TorusPoint::new(a), TorusPoint::new(b));
            let dist = pa.distance(&pb);
            prop_assert!(dist <= PI * 3f64.sqrt() + 1e-12);
            prop_assert!((dist - pb.distance(&pa)).abs() < 1e-12);
        }

        #[test]
        fn integer_shifts_are_invisible(x in 0.0f64..TAU, m in -20i32..20) {
            let shifted = TorusPoint::new(vec![x + TAU * m as f64]);
            prop_assert!(shifted.distance(&TorusPoint::new(vec![x])) < 1e-11);
        }
    }
}
