use super::cells::CellIndex;
use super::pointset::PointSet;
use crate::error::{Error, Result};

/// Relative slack under which two radius-`h` balls whose centres are exactly
/// `2h` apart still count as disjoint; keeps equispaced sets intact despite
/// rounding in the distance computation.
const TOUCH_SLACK: f64 = 1e-12;

/// Greedy disjoint-ball thinning.
///
/// Walks the points in input order and keeps `q_k` iff the ball of radius
/// `h` around it is disjoint from the balls around all points kept so far.
/// Returns the kept (0-based, ascending) indices and the subset. With
/// `h` equal to the fill distance of `q`, the result has separation distance
/// at least `h`, fill distance at most `3h`, and is quasi-uniform with
/// distortion constant 3.
pub fn prune(q: &PointSet, h: f64) -> Result<(Vec<usize>, PointSet)> {
    if q.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("pruning radius must be positive, got {h}")));
    }
    let exclusion = 2.0 * h * (1.0 - TOUCH_SLACK);
    let mut kept = CellIndex::new(q.dim(), 2.0 * h);
    let mut indices = Vec::new();
    for (k, p) in q.points().iter().enumerate() {
        let mut blocked = false;
        kept.for_each_within(p.coords(), exclusion, |_, _| blocked = true);
        if !blocked {
            kept.insert(k, p.coords());
            indices.push(k);
        }
    }
    let subset = q.subset(&indices);
    Ok((indices, subset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mls::pointset::{fill_distance, separation_distance};
    use crate::torus::{lattice, TorusPoint};
    use std::f64::consts::{PI, TAU};

    #[test]
    fn hand_trace() {
        let q = PointSet::from_angles(&[0.0, 0.1, PI]);
        let (idx, sub) = prune(&q, 0.5).unwrap();
        assert_eq!(idx, vec![0, 2]);
        assert_eq!(sub.len(), 2);
    }

    #[test]
    fn huge_radius_keeps_first_point() {
        let q = PointSet::new(
            2,
            vec![
                TorusPoint::new(vec![3.0, 1.0]),
                TorusPoint::new(vec![0.0, 0.0]),
                TorusPoint::new(vec![PI, PI]),
            ],
        )
        .unwrap();
        let (idx, _) = prune(&q, PI * 2f64.sqrt() / 2.0 + 1e-9).unwrap();
        assert_eq!(idx, vec![0]);
    }

    #[test]
    fn equispaced_grid_is_kept_whole() {
        for n in [4, 16, 64, 128] {
            let grid = PointSet::new(1, lattice(1, n)).unwrap();
            let h = fill_distance(&grid, 0).unwrap();
            let (idx, _) = prune(&grid, h).unwrap();
            assert_eq!(idx.len(), n);
        }
        // Shifted grid: rounding varies gap to gap.
        let shifted = PointSet::from_angles(
            &(0..64).map(|i| 0.37 + TAU * i as f64 / 64.0).collect::<Vec<_>>(),
        );
        let h = fill_distance(&shifted, 0).unwrap();
        assert_eq!(prune(&shifted, h).unwrap().0.len(), 64);
    }

    #[test]
    fn errors() {
        assert!(matches!(prune(&PointSet::from_angles(&[]), 1.0), Err(Error::EmptyPointSet)));
        assert!(prune(&PointSet::from_angles(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn deterministic_and_separated() {
        let angles: Vec<f64> = (0..50).map(|i| (i as f64 * 2.399963).rem_euclid(TAU)).collect();
        let q = PointSet::from_angles(&angles);
        let h = fill_distance(&q, 0).unwrap();
        let (a, sub) = prune(&q, h).unwrap();
        let (b, _) = prune(&q, h).unwrap();
        assert_eq!(a, b);
        assert!(separation_distance(&sub).unwrap() >= h * (1.0 - 1e-9));
    }
}
