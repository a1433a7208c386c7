//! Time discretization carrier.
//!
//! Every integral in the crate is taken over right-closed intervals `(r, t]`,
//! so a grid cell `k` is the interval `(nodes[k], nodes[k + 1]]`.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Relative distance under which two candidate nodes are merged.
const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TimeGrid {
    nodes: Arc<[f64]>,
}

impl PartialEq for TimeGrid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes) || self.nodes == other.nodes
    }
}

impl TimeGrid {
    /// Builds a grid from explicit nodes. They must start at 0, be strictly
    /// increasing and finite, and contain at least two entries.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Domain("a grid needs at least two nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::Domain(format!("first node must be 0, got {}", nodes[0])));
        }
        for w in nodes.windows(2) {
            if !(w[1].is_finite() && w[1] > w[0]) {
                return Err(Error::Domain(format!(
                    "nodes must be finite and strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { nodes: nodes.into() })
    }

    pub fn uniform(horizon: f64, cells: usize) -> Result<Self> {
        Self::build(horizon, cells, &[])
    }

    /// `cells` uniform cells on `[0, horizon]` merged with the `required`
    /// times. Required times are kept bit-exact; uniform nodes that fall
    /// within a relative `1e-12` of one are dropped.
    pub fn build(horizon: f64, cells: usize, required: &[f64]) -> Result<Self> {
        Self::build_segmented(horizon, &[(0.0, horizon, cells)], required)
    }

    /// Uniform subdivisions of each `(start, end, cells)` segment merged with
    /// `required` and the endpoints `0` and `horizon`.
    pub fn build_segmented(horizon: f64, segments: &[(f64, f64, usize)], required: &[f64]) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive and finite, got {horizon}")));
        }
        let tol = MERGE_TOL * horizon;
        let mut fixed: Vec<f64> =
            required.iter().copied().chain([0.0, horizon]).filter(|t| (0.0..=horizon).contains(t)).collect();
        fixed.sort_by(f64::total_cmp);
        fixed.dedup();

        let mut candidates = Vec::new();
        for &(start, end, cells) in segments {
            if cells == 0 || end.partial_cmp(&start) != Some(std::cmp::Ordering::Greater) {
                continue;
            }
            let h = (end - start) / cells as f64;
            candidates.extend((1..cells).map(|k| start + k as f64 * h));
        }
        candidates.retain(|&c| {
            let pos = fixed.partition_point(|&f| f < c);
            let near_next = pos < fixed.len() && (fixed[pos] - c).abs() <= tol;
            let near_prev = pos > 0 && (c - fixed[pos - 1]).abs() <= tol;
            !(near_next || near_prev)
        });
        fixed.extend(candidates);
        fixed.sort_by(f64::total_cmp);
        fixed.dedup();
        Self::from_nodes(fixed)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn node(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    pub fn cell_width(&self, cell: usize) -> f64 {
        self.nodes[cell + 1] - self.nodes[cell]
    }

    pub fn max_cell_width(&self) -> f64 {
        (0..self.cells()).map(|c| self.cell_width(c)).fold(0.0, f64::max)
    }

    /// Index of the node equal to `t` up to a relative `1e-12` of the horizon.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = MERGE_TOL * self.horizon();
        let pos = self.nodes.partition_point(|&n| n < t);
        [pos.checked_sub(1), Some(pos)]
            .into_iter()
            .flatten()
            .filter(|&k| k < self.nodes.len())
            .find(|&k| (self.nodes[k] - t).abs() <= tol)
    }

    pub fn require_node(&self, t: f64, what: &str) -> Result<usize> {
        self.index_of(t).ok_or_else(|| Error::Domain(format!("{what} = {t} is not a grid node")))
    }

    /// Smallest node index `k` with `nodes[k] >= t`.
    pub fn ceil_index(&self, t: f64) -> Option<usize> {
        if let Some(k) = self.index_of(t) {
            return Some(k);
        }
        let pos = self.nodes.partition_point(|&n| n < t);
        (pos < self.nodes.len()).then_some(pos)
    }

    pub fn contains_node(&self, t: f64) -> bool {
        self.index_of(t).is_some()
    }

    /// Splits every cell into `factor` equal subcells. Original nodes are
    /// copied bit-exact.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Domain("refinement factor must be at least 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let mut nodes = Vec::with_capacity(self.cells() * factor + 1);
        for w in self.nodes.windows(2) {
            let f = factor as f64;
            nodes.push(w[0]);
            nodes.extend((1..factor).map(|k| (w[0] * (f - k as f64) + w[1] * k as f64) / f));
        }
        nodes.push(self.horizon());
        Self::from_nodes(nodes)
    }
}
