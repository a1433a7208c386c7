//! Jump kernels with finitely supported spatial parts.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::measure::{normalize_pieces, Atom, DensityPiece, Monotonicity, StieltjesMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialPoint {
    pub z: [f64; 2],
    pub weight: f64,
}

impl SpatialPoint {
    pub fn new(z1: f64, z2: f64, weight: f64) -> Self {
        Self { z: [z1, z2], weight }
    }

    pub fn norm(&self) -> f64 {
        self.z[0].hypot(self.z[1])
    }

    pub fn dot(&self, v: [f64; 2]) -> f64 {
        self.z[0] * v[0] + self.z[1] * v[1]
    }
}

/// Finite measure on the quadrant minus the origin. Points are sorted by
/// location, locations are distinct and weights are strictly positive.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscreteSpatialMeasure {
    points: Arc<[SpatialPoint]>,
}

impl DiscreteSpatialMeasure {
    pub fn new(points: Vec<SpatialPoint>) -> Result<Self> {
        for (k, p) in points.iter().enumerate() {
            let field = format!("point[{k}]");
            if !(p.z[0].is_finite() && p.z[1].is_finite() && p.weight.is_finite()) {
                return Err(Error::structure(field, "non-finite entry"));
            }
            if p.z[0] < 0.0 || p.z[1] < 0.0 {
                return Err(Error::structure(field, "jump sizes must be nonnegative"));
            }
            if p.z[0] == 0.0 && p.z[1] == 0.0 {
                return Err(Error::structure(field, "jump at the origin"));
            }
            if p.weight <= 0.0 {
                return Err(Error::structure(field, "weight must be positive"));
            }
        }
        Ok(Self::canonical(points))
    }

    fn canonical(mut points: Vec<SpatialPoint>) -> Self {
        points.sort_by(|a, b| a.z[0].total_cmp(&b.z[0]).then(a.z[1].total_cmp(&b.z[1])));
        let mut out: Vec<SpatialPoint> = Vec::with_capacity(points.len());
        for p in points {
            match out.last_mut() {
                Some(last) if last.z == p.z => last.weight += p.weight,
                _ => out.push(p),
            }
        }
        out.retain(|p| p.weight > 0.0);
        Self { points: out.into() }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[SpatialPoint] {
        &self.points
    }

    pub(crate) fn shared_points(&self) -> Arc<[SpatialPoint]> {
        self.points.clone()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.points.iter().fold(0.0, |acc, p| acc + p.weight)
    }

    /// `sum g(z) w` over the support.
    pub fn integrate(&self, g: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().fold(0.0, |acc, p| acc + g(p.z) * p.weight)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut pts = self.points.to_vec();
        pts.extend_from_slice(&other.points);
        Self::canonical(pts)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map_points(|p| Some(SpatialPoint { weight: p.weight * factor, ..p }))
    }

    /// Applies `f` pointwise; points mapped to `None`, to the origin or to a
    /// non-positive weight are dropped.
    pub fn map_points(&self, f: impl Fn(SpatialPoint) -> Option<SpatialPoint>) -> Self {
        Self::canonical(
            self.points
                .iter()
                .filter_map(|&p| f(p))
                .filter(|p| p.weight > 0.0 && (p.z[0] > 0.0 || p.z[1] > 0.0))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelPiece {
    pub start: f64,
    pub end: f64,
    pub measure: DiscreteSpatialMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpAtom {
    pub time: f64,
    pub measure: DiscreteSpatialMeasure,
}

/// A jump measure laid out on a grid.
#[derive(Debug, Clone)]
pub struct GridJump {
    pub kernels: Vec<Arc<[SpatialPoint]>>,
    pub atoms: Vec<Arc<[SpatialPoint]>>,
}

/// `m(ds, dz)`: a rate kernel per time piece plus spatial measures carried
/// by time atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMeasure {
    horizon: f64,
    kernels: Vec<KernelPiece>,
    atoms: Vec<JumpAtom>,
}

impl JumpMeasure {
    pub fn new(horizon: f64, kernels: Vec<KernelPiece>, atoms: Vec<JumpAtom>) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        for (k, p) in kernels.iter().enumerate() {
            if !(p.start.is_finite() && p.end.is_finite() && 0.0 <= p.start && p.start < p.end && p.end <= horizon) {
                return Err(Error::structure(
                    format!("kernel[{k}]"),
                    format!("interval [{}, {}] must satisfy 0 <= t0 < t1 <= {horizon}", p.start, p.end),
                ));
            }
        }
        for (k, a) in atoms.iter().enumerate() {
            if !(a.time.is_finite() && a.time > 0.0 && a.time <= horizon) {
                return Err(Error::structure(
                    format!("atoms[{k}]"),
                    format!("atom time {} outside (0, {horizon}]", a.time),
                ));
            }
        }
        Ok(Self::canonical(horizon, kernels, atoms))
    }

    fn canonical(horizon: f64, kernels: Vec<KernelPiece>, atoms: Vec<JumpAtom>) -> Self {
        let kernels = normalize_pieces(
            kernels.into_iter().map(|p| (p.start, p.end, p.measure)).collect(),
            DiscreteSpatialMeasure::empty,
            |acc, m| *acc = acc.add(m),
            DiscreteSpatialMeasure::is_empty,
            |a, b| a == b,
        )
        .into_iter()
        .map(|(start, end, measure)| KernelPiece { start, end, measure })
        .collect();
        let mut sorted = atoms;
        sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut merged: Vec<JumpAtom> = Vec::with_capacity(sorted.len());
        for a in sorted {
            match merged.last_mut() {
                Some(last) if last.time == a.time => last.measure = last.measure.add(&a.measure),
                _ => merged.push(a),
            }
        }
        merged.retain(|a| !a.measure.is_empty());
        Self { horizon, kernels, atoms: merged }
    }

    pub fn zero(horizon: f64) -> Self {
        Self { horizon, kernels: Vec::new(), atoms: Vec::new() }
    }

    /// Constant kernel on `[start, end]`.
    pub fn kernel(horizon: f64, start: f64, end: f64, points: Vec<SpatialPoint>) -> Result<Self> {
        let measure = DiscreteSpatialMeasure::new(points)?;
        Self::new(horizon, vec![KernelPiece { start, end, measure }], Vec::new())
    }

    pub fn point_atom(horizon: f64, time: f64, points: Vec<SpatialPoint>) -> Result<Self> {
        let measure = DiscreteSpatialMeasure::new(points)?;
        Self::new(horizon, Vec::new(), vec![JumpAtom { time, measure }])
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn kernels(&self) -> &[KernelPiece] {
        &self.kernels
    }

    pub fn atoms(&self) -> &[JumpAtom] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.kernels.is_empty() && self.atoms.is_empty()
    }

    /// Rate kernel on the open piece containing `t`.
    pub fn kernel_at(&self, t: f64) -> &DiscreteSpatialMeasure {
        static EMPTY: std::sync::OnceLock<DiscreteSpatialMeasure> = std::sync::OnceLock::new();
        let pos = self.kernels.partition_point(|p| p.end <= t);
        match self.kernels.get(pos) {
            Some(p) if p.start < t => &p.measure,
            _ => EMPTY.get_or_init(DiscreteSpatialMeasure::empty),
        }
    }

    /// Spatial measure of the time atom at `t` (empty when there is none).
    pub fn atom_at(&self, t: f64) -> Option<&DiscreteSpatialMeasure> {
        self.atoms.binary_search_by(|a| a.time.total_cmp(&t)).ok().map(|k| &self.atoms[k].measure)
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.kernels.iter().flat_map(|p| [p.start, p.end]).chain(self.atoms.iter().map(|a| a.time))
    }

    /// The time measure `B -> int_B int g(z) m(ds, dz)`.
    pub fn moment_measure(&self, g: impl Fn([f64; 2]) -> f64) -> StieltjesMeasure {
        let pieces = self
            .kernels
            .iter()
            .map(|p| DensityPiece { start: p.start, end: p.end, value: p.measure.integrate(&g) })
            .collect();
        let atoms = self.atoms.iter().map(|a| Atom { time: a.time, mass: a.measure.integrate(&g) }).collect();
        StieltjesMeasure::new(self.horizon, pieces, atoms, Monotonicity::Signed)
            .expect("moments of a valid jump measure are finite")
    }

    /// Applies `f` to the spatial measure of every piece and atom. The
    /// closure also receives the time (piece start for kernels) and whether
    /// it acts on an atom.
    pub fn map_measures(&self, f: impl Fn(&DiscreteSpatialMeasure, f64, bool) -> DiscreteSpatialMeasure) -> Self {
        let kernels = self
            .kernels
            .iter()
            .map(|p| KernelPiece { start: p.start, end: p.end, measure: f(&p.measure, p.start, false) })
            .collect();
        let atoms =
            self.atoms.iter().map(|a| JumpAtom { time: a.time, measure: f(&a.measure, a.time, true) }).collect();
        Self::canonical(self.horizon, kernels, atoms)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut kernels = self.kernels.clone();
        kernels.extend(other.kernels.iter().cloned());
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Self::canonical(self.horizon, kernels, atoms)
    }

    /// Spatial points per cell (rate kernel) and per node (atom).
    pub fn on_grid(&self, grid: &TimeGrid) -> Result<GridJump> {
        self.check_on_grid(grid, "jump measure")?;
        let nodes = grid.nodes();
        let kernels =
            (0..grid.cells()).map(|c| self.kernel_at(0.5 * (nodes[c] + nodes[c + 1])).shared_points()).collect();
        let empty: Arc<[SpatialPoint]> = Arc::from(Vec::new());
        let mut atoms = vec![empty; grid.len()];
        for a in &self.atoms {
            let k = grid.index_of(a.time).expect("checked above");
            atoms[k] = a.measure.shared_points();
        }
        Ok(GridJump { kernels, atoms })
    }

    pub fn check_on_grid(&self, grid: &TimeGrid, what: &str) -> Result<()> {
        if let Some(t) = self.breakpoints().find(|&t| !grid.contains_node(t)) {
            return Err(Error::structure(what, format!("breakpoint {t} is not a grid node")));
        }
        Ok(())
    }
}
