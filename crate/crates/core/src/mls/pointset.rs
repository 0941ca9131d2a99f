use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

use rayon::prelude::*;

use super::cells::CellIndex;
use crate::error::{check_dim, Error, Result};
use crate::torus::{lattice, TorusPoint};

/// A finite set of torus points. Distances are always periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    d: usize,
    points: Vec<TorusPoint>,
}

impl PointSet {
    pub fn new(d: usize, points: Vec<TorusPoint>) -> Result<Self> {
        for p in &points {
            check_dim(d, p.dim())?;
        }
        Ok(PointSet { d, points })
    }

    /// Builds a one-dimensional set from raw angles.
    pub fn from_angles(angles: &[f64]) -> Self {
        PointSet {
            d: 1,
            points: angles.iter().map(|a| TorusPoint::new(vec![*a])).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<TorusPoint> {
        self.points
    }

    pub fn subset(&self, indices: &[usize]) -> PointSet {
        PointSet {
            d: self.d,
            points: indices.iter().map(|i| self.points[*i].clone()).collect(),
        }
    }

    pub(crate) fn index(&self, min_cell: f64) -> CellIndex {
        let mut index = CellIndex::new(self.d, min_cell);
        for (i, p) in self.points.iter().enumerate() {
            index.insert(i, p.coords());
        }
        index
    }

    fn typical_spacing(&self) -> f64 {
        let per_axis = (self.points.len() as f64).powf(1.0 / self.d as f64).ceil().max(1.0);
        TAU / per_axis
    }
}

/// Probe-lattice resolution used for fill distances when none is given.
pub fn default_fill_resolution(d: usize) -> usize {
    match d {
        0..=2 => 256,
        3 => 64,
        _ => 16,
    }
}

/// Upper bound on how much a probe-lattice estimate undershoots the true
/// fill distance (half the lattice cell diagonal). Zero in one dimension,
/// where the fill distance is computed exactly.
pub fn fill_distance_probe_error(d: usize, resolution: usize) -> f64 {
    if d == 1 {
        0.0
    } else {
        PI * (d as f64).sqrt() / resolution as f64
    }
}

/// Fill distance `sup_q min_j |q − q_j|` of the set over the torus.
///
/// Exact in one dimension (half the largest circular gap). In higher
/// dimensions the supremum is taken over a `resolution^d` probe lattice, a
/// lower estimate within [`fill_distance_probe_error`].
pub fn fill_distance(q: &PointSet, resolution: usize) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if q.d == 1 {
        let mut xs: Vec<f64> = q.points.iter().map(|p| p.coords()[0]).collect();
        xs.sort_by(f64::total_cmp);
        let wrap_gap = xs[0] + TAU - xs[xs.len() - 1];
        let max_gap = xs.windows(2).map(|w| w[1] - w[0]).fold(wrap_gap, f64::max);
        return Ok(0.5 * max_gap);
    }
    if resolution == 0 {
        return Err(Error::InvalidArgument("probe resolution must be >= 1".into()));
    }
    let index = q.index(q.typical_spacing());
    let probes = lattice(q.d, resolution);
    Ok(probes
        .par_iter()
        .map(|p| index.nearest(p.coords(), None).map_or(f64::INFINITY, |(_, d)| d))
        .reduce(|| 0.0, f64::max))
}

/// Half the minimal pairwise periodic distance.
pub fn separation_distance(q: &PointSet) -> Result<f64> {
    if q.len() < 2 {
        return Err(Error::TooFewPoints(q.len()));
    }
    let index = q.index(q.typical_spacing());
    let min = q
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| index.nearest(p.coords(), Some(i)).map_or(f64::INFINITY, |(_, d)| d))
        .reduce(|| f64::INFINITY, f64::min);
    Ok(0.5 * min)
}

/// Writes one CSV row per point: coordinates `q1..qd`, then `value`.
pub fn write_points_csv<W: Write>(out: W, q: &PointSet, values: &[f64]) -> Result<()> {
    check_dim(q.len(), values.len())?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=q.d).map(|i| format!("q{i}")).collect();
    header.push("value".into());
    w.write_record(&header)?;
    for (p, v) in q.points.iter().zip(values) {
        let mut row: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
        row.push(v.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points_csv<R: Read>(input: R) -> Result<(PointSet, Vec<f64>)> {
    let mut r = csv::Reader::from_reader(input);
    let d = r
        .headers()?
        .len()
        .checked_sub(1)
        .filter(|d| *d > 0)
        .ok_or_else(|| Error::Config("point CSV needs coordinate columns and a value column".into()))?;
    let mut points = Vec::new();
    let mut values = Vec::new();
    for record in r.records() {
        let record = record?;
        let nums = record
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad number {s:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        check_dim(d + 1, nums.len())?;
        points.push(TorusPoint::new(nums[..d].to_vec()));
        values.push(nums[d]);
    }
    Ok((PointSet { d, points }, values))
}
