//! Uniform cell lists on the torus for radius and nearest-neighbour queries.

use std::f64::consts::TAU;

use crate::torus::periodic_distance;

const MAX_CELLS: usize = 1 << 20;

pub(crate) struct CellIndex {
    d: usize,
    per_axis: usize,
    cell: f64,
    buckets: Vec<Vec<usize>>,
    coords: Vec<f64>,
    ids: Vec<usize>,
}

impl CellIndex {
    /// Cells are at least `min_cell` wide along each axis.
    pub fn new(d: usize, min_cell: f64) -> Self {
        let mut per_axis = if min_cell > 0.0 && min_cell.is_finite() {
            ((TAU / min_cell).floor() as usize).max(1)
        } else {
            1
        };
        while per_axis > 1 && per_axis.saturating_pow(d as u32) > MAX_CELLS {
            per_axis /= 2;
        }
        CellIndex {
            d,
            per_axis,
            cell: TAU / per_axis as f64,
            buckets: vec![Vec::new(); per_axis.pow(d as u32)],
            coords: Vec::new(),
            ids: Vec::new(),
        }
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    fn axis_cell(&self, x: f64) -> usize {
        ((x / self.cell) as usize).min(self.per_axis - 1)
    }

    fn flat_cell(&self, x: &[f64]) -> usize {
        x.iter().fold(0, |acc, c| acc * self.per_axis + self.axis_cell(*c))
    }

    pub fn insert(&mut self, id: usize, x: &[f64]) {
        debug_assert_eq!(x.len(), self.d);
        let slot = self.ids.len();
        let cell = self.flat_cell(x);
        self.buckets[cell].push(slot);
        self.coords.extend_from_slice(x);
        self.ids.push(id);
    }

    fn point(&self, slot: usize) -> &[f64] {
        &self.coords[slot * self.d..(slot + 1) * self.d]
    }

    /// Visits every stored point in cells within `rings` cells of the query
    /// cell along each axis (each cell at most once).
    fn visit_cube(&self, query: &[f64], rings: usize, mut f: impl FnMut(usize)) {
        let n = self.per_axis;
        let full = 2 * rings + 1 >= n;
        let span = if full { n } else { 2 * rings + 1 };
        let centre: Vec<usize> = query.iter().map(|x| self.axis_cell(*x)).collect();
        let mut offsets = vec![0usize; self.d];
        loop {
            let mut flat = 0;
            for (axis, off) in offsets.iter().enumerate() {
                let c = if full {
                    *off
                } else {
                    (centre[axis] + n + off - rings) % n
                };
                flat = flat * n + c;
            }
            for &slot in &self.buckets[flat] {
                f(slot);
            }
            // odometer
            let mut axis = self.d;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                offsets[axis] += 1;
                if offsets[axis] < span {
                    break;
                }
                offsets[axis] = 0;
            }
        }
    }

    /// Calls `f(id, distance)` for every stored point closer than `radius`.
    pub fn for_each_within(&self, query: &[f64], radius: f64, mut f: impl FnMut(usize, f64)) {
        let rings = (radius / self.cell).ceil() as usize;
        self.visit_cube(query, rings, |slot| {
            let dist = periodic_distance(query, self.point(slot));
            if dist < radius {
                f(self.ids[slot], dist);
            }
        });
    }

    /// Nearest stored point, skipping the id `skip`.
    pub fn nearest(&self, query: &[f64], skip: Option<usize>) -> Option<(usize, f64)> {
        let mut rings = 0;
        loop {
            let mut best: Option<(usize, f64)> = None;
            self.visit_cube(query, rings, |slot| {
                let id = self.ids[slot];
                if Some(id) == skip {
                    return;
                }
                let dist = periodic_distance(query, self.point(slot));
                if best.is_none_or(|(_, b)| dist < b) {
                    best = Some((id, dist));
                }
            });
            let covered_all = 2 * rings + 1 >= self.per_axis;
            if let Some((_, b)) = best {
                if covered_all || b <= rings as f64 * self.cell {
                    return best;
                }
            } else if covered_all {
                return None;
            }
            rings += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nearest_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in 1..=3 {
            let pts: Vec<Vec<f64>> = (0..300)
                .map(|_| (0..d).map(|_| rng.random_range(0.0..TAU)).collect())
                .collect();
            let mut index = CellIndex::new(d, 0.4);
            for (i, p) in pts.iter().enumerate() {
                index.insert(i, p);
            }
            for _ in 0..200 {
                let q: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..TAU)).collect();
                let brute = pts
                    .iter()
                    .map(|p| periodic_distance(&q, p))
                    .fold(f64::INFINITY, f64::min);
                let (_, got) = index.nearest(&q, None).unwrap();
                assert_eq!(got, brute);

                let radius = 0.9;
                let mut found = Vec::new();
                index.for_each_within(&q, radius, |id, _| found.push(id));
                found.sort_unstable();
                let expect: Vec<usize> = (0..pts.len())
                    .filter(|i| periodic_distance(&q, &pts[*i]) < radius)
                    .collect();
                assert_eq!(found, expect);
            }
        }
    }

    #[test]
    fn skip_and_empty() {
        let mut index = CellIndex::new(1, 1.0);
        assert!(index.nearest(&[1.0], None).is_none());
        index.insert(7, &[1.0]);
        assert!(index.nearest(&[1.0], Some(7)).is_none());
        index.insert(8, &[1.5]);
        assert_eq!(index.nearest(&[1.0], Some(7)).unwrap().0, 8);
        assert_eq!(index.len(), 2);
    }
}
