//! Signed Stieltjes measures on a finite horizon `(0, T]`.
//!
//! A measure is a piecewise-constant density plus finitely many time atoms.
//! It is stored independently of any grid, in a canonical form: density
//! pieces are disjoint, sorted and non-zero, adjacent pieces with equal
//! values are merged, and atoms are sorted with distinct times and non-zero
//! masses. Grids only enter when a measure is integrated against node values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPiece {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub time: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Monotonicity {
    #[default]
    Signed,
    Nondecreasing,
}

/// Quadrature used for the density part of a Stieltjes integral. Atoms are
/// always evaluated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EndpointRule {
    #[default]
    Right,
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StieltjesMeasure {
    horizon: f64,
    pieces: Vec<DensityPiece>,
    atoms: Vec<Atom>,
    monotonicity: Monotonicity,
}

/// A measure laid out on a grid: one density per cell, one atom per node
/// (`atoms[0]` is always zero).
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    pub density: Vec<f64>,
    pub atoms: Vec<f64>,
}

/// Splits overlapping `(start, end, payload)` pieces at every breakpoint and
/// accumulates the payloads on each elementary segment. Segments whose
/// accumulated payload is zero are dropped; contiguous equal neighbours are
/// merged.
pub(crate) fn normalize_pieces<T: Clone>(
    mut items: Vec<(f64, f64, T)>,
    empty: impl Fn() -> T,
    accumulate: impl Fn(&mut T, &T),
    is_zero: impl Fn(&T) -> bool,
    same: impl Fn(&T, &T) -> bool,
) -> Vec<(f64, f64, T)> {
    items.retain(|(s, e, _)| e > s);
    if items.is_empty() {
        return Vec::new();
    }
    let mut breaks: Vec<f64> = items.iter().flat_map(|(s, e, _)| [*s, *e]).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    items.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut out: Vec<(f64, f64, T)> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut next = 0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        active.retain(|&i| items[i].1 > a);
        while next < items.len() && items[next].0 <= a {
            if items[next].1 > a {
                active.push(next);
            }
            next += 1;
        }
        let mut acc = empty();
        for &i in &active {
            accumulate(&mut acc, &items[i].2);
        }
        if is_zero(&acc) {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.1 == a && same(&last.2, &acc) => last.1 = b,
            _ => out.push((a, b, acc)),
        }
    }
    out
}

fn check_time(horizon: f64, t: f64) -> Result<()> {
    if (0.0..=horizon).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!("t = {t} outside [0, {horizon}]")))
    }
}

impl StieltjesMeasure {
    pub fn new(horizon: f64, pieces: Vec<DensityPiece>, atoms: Vec<Atom>, monotonicity: Monotonicity) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        for (k, p) in pieces.iter().enumerate() {
            if !(p.start.is_finite() && p.end.is_finite() && p.value.is_finite()) {
                return Err(Error::structure(format!("density[{k}]"), "non-finite entry"));
            }
            if !(0.0 <= p.start && p.start < p.end && p.end <= horizon) {
                return Err(Error::structure(
                    format!("density[{k}]"),
                    format!("interval [{}, {}] must satisfy 0 <= t0 < t1 <= {horizon}", p.start, p.end),
                ));
            }
        }
        for (k, a) in atoms.iter().enumerate() {
            if !(a.time.is_finite() && a.mass.is_finite()) {
                return Err(Error::structure(format!("atoms[{k}]"), "non-finite entry"));
            }
            if !(a.time > 0.0 && a.time <= horizon) {
                return Err(Error::structure(
                    format!("atoms[{k}]"),
                    format!("atom time {} outside (0, {horizon}]", a.time),
                ));
            }
        }
        let pieces = normalize_pieces(
            pieces.into_iter().map(|p| (p.start, p.end, p.value)).collect(),
            || 0.0,
            |acc, v| *acc += *v,
            |v| *v == 0.0,
            |a, b| a == b,
        )
        .into_iter()
        .map(|(start, end, value)| DensityPiece { start, end, value })
        .collect();

        let mut sorted = atoms;
        sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut merged: Vec<Atom> = Vec::with_capacity(sorted.len());
        for a in sorted {
            match merged.last_mut() {
                Some(last) if last.time == a.time => last.mass += a.mass,
                _ => merged.push(a),
            }
        }
        merged.retain(|a| a.mass != 0.0);

        let m = Self { horizon, pieces, atoms: merged, monotonicity };
        if monotonicity == Monotonicity::Nondecreasing && !m.is_nonnegative() {
            return Err(Error::structure("measure", "declared nondecreasing but has a negative density or atom"));
        }
        Ok(m)
    }

    pub fn zero(horizon: f64) -> Self {
        Self { horizon, pieces: Vec::new(), atoms: Vec::new(), monotonicity: Monotonicity::Signed }
    }

    /// Constant density on `[start, end]`.
    pub fn density(horizon: f64, start: f64, end: f64, value: f64) -> Result<Self> {
        Self::new(horizon, vec![DensityPiece { start, end, value }], Vec::new(), Monotonicity::Signed)
    }

    pub fn point_mass(horizon: f64, time: f64, mass: f64) -> Result<Self> {
        Self::new(horizon, Vec::new(), vec![Atom { time, mass }], Monotonicity::Signed)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn pieces(&self) -> &[DensityPiece] {
        &self.pieces
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.is_empty() && self.atoms.is_empty()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.pieces.iter().all(|p| p.value >= 0.0) && self.atoms.iter().all(|a| a.mass >= 0.0)
    }

    /// Re-tags the measure as nondecreasing after checking the sign.
    pub fn into_nondecreasing(mut self, what: &str) -> Result<Self> {
        if !self.is_nonnegative() {
            return Err(Error::structure(what, "must be nondecreasing (nonnegative density and atoms)"));
        }
        self.monotonicity = Monotonicity::Nondecreasing;
        Ok(self)
    }

    /// `beta(t) = mu((0, t])`.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        check_time(self.horizon, t)?;
        Ok(self.cumulative_unchecked(t))
    }

    pub(crate) fn cumulative_unchecked(&self, t: f64) -> f64 {
        let dens: f64 =
            self.pieces.iter().take_while(|p| p.start < t).fold(0.0, |acc, p| acc + p.value * (p.end.min(t) - p.start));
        let atoms = self.atoms.iter().take_while(|a| a.time <= t).fold(0.0, |acc, a| acc + a.mass);
        dens + atoms
    }

    /// `|mu|((0, t])`.
    pub fn total_variation(&self, t: f64) -> Result<f64> {
        check_time(self.horizon, t)?;
        Ok(self.abs().cumulative_unchecked(t))
    }

    /// Mass of the atom at `t` (zero when there is none).
    pub fn atom_at(&self, t: f64) -> f64 {
        match self.atoms.binary_search_by(|a| a.time.total_cmp(&t)) {
            Ok(k) => self.atoms[k].mass,
            Err(_) => 0.0,
        }
    }

    /// Density value on the open piece containing `t`.
    pub fn density_at(&self, t: f64) -> f64 {
        let pos = self.pieces.partition_point(|p| p.end <= t);
        match self.pieces.get(pos) {
            Some(p) if p.start < t => p.value,
            _ => 0.0,
        }
    }

    /// Every piece boundary and atom time.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces.iter().flat_map(|p| [p.start, p.end]).chain(self.atoms.iter().map(|a| a.time))
    }

    /// The variation measure `|mu|`.
    pub fn abs(&self) -> Self {
        Self {
            horizon: self.horizon,
            pieces: self.pieces.iter().map(|p| DensityPiece { value: p.value.abs(), ..*p }).collect(),
            atoms: self.atoms.iter().map(|a| Atom { mass: a.mass.abs(), ..*a }).collect(),
            monotonicity: Monotonicity::Nondecreasing,
        }
        .renormalized()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let monotonicity = if factor >= 0.0 { self.monotonicity } else { Monotonicity::Signed };
        Self {
            horizon: self.horizon,
            pieces: self.pieces.iter().map(|p| DensityPiece { value: p.value * factor, ..*p }).collect(),
            atoms: self.atoms.iter().map(|a| Atom { mass: a.mass * factor, ..*a }).collect(),
            monotonicity,
        }
        .renormalized()
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.horizon, other.horizon);
        let monotonicity =
            if self.monotonicity == Monotonicity::Nondecreasing && other.monotonicity == Monotonicity::Nondecreasing {
                Monotonicity::Nondecreasing
            } else {
                Monotonicity::Signed
            };
        let mut pieces = self.pieces.clone();
        pieces.extend_from_slice(&other.pieces);
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        Self::new(self.horizon, pieces, atoms, Monotonicity::Signed)
            .map(|mut m| {
                m.monotonicity = monotonicity;
                m
            })
            .expect("sum of valid measures is valid")
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.negated())
    }

    /// Same measure with its monotonicity tag dropped to `Signed`.
    pub fn signed(&self) -> Self {
        Self { monotonicity: Monotonicity::Signed, ..self.clone() }
    }

    /// Applies `f` to every density value and atom mass.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            horizon: self.horizon,
            pieces: self.pieces.iter().map(|p| DensityPiece { value: f(p.value), ..*p }).collect(),
            atoms: self.atoms.iter().map(|a| Atom { mass: f(a.mass), ..*a }).collect(),
            monotonicity: Monotonicity::Signed,
        }
        .renormalized()
    }

    fn renormalized(self) -> Self {
        let monotonicity = self.monotonicity;
        let mut m = Self::new(self.horizon, self.pieces, self.atoms, Monotonicity::Signed)
            .expect("renormalizing a valid measure");
        m.monotonicity = monotonicity;
        m
    }

    /// Checks that every breakpoint is a node of `grid`.
    pub fn check_on_grid(&self, grid: &TimeGrid, what: &str) -> Result<()> {
        if (grid.horizon() - self.horizon).abs() > 1e-12 * self.horizon {
            return Err(Error::structure(
                what,
                format!("horizon {} differs from grid horizon {}", self.horizon, grid.horizon()),
            ));
        }
        if let Some(t) = self.breakpoints().find(|&t| !grid.contains_node(t)) {
            return Err(Error::structure(what, format!("breakpoint {t} is not a grid node")));
        }
        Ok(())
    }

    pub fn on_grid(&self, grid: &TimeGrid) -> Result<GridMeasure> {
        self.check_on_grid(grid, "measure")?;
        let nodes = grid.nodes();
        let density = (0..grid.cells()).map(|c| self.density_at(0.5 * (nodes[c] + nodes[c + 1]))).collect();
        let mut atoms = vec![0.0; grid.len()];
        for a in &self.atoms {
            atoms[grid.index_of(a.time).expect("checked above")] += a.mass;
        }
        Ok(GridMeasure { density, atoms })
    }

    /// Stieltjes integral of node values `f` over `(r, t]`: the density part
    /// uses `rule`, atoms use `f` at the atom node.
    pub fn integrate(&self, grid: &TimeGrid, f: &[f64], r: f64, t: f64, rule: EndpointRule) -> Result<f64> {
        if r > t {
            return Err(Error::Domain(format!("r = {r} > t = {t}")));
        }
        if f.len() != grid.len() {
            return Err(Error::Contract(format!("grid function has {} values for {} nodes", f.len(), grid.len())));
        }
        let (kr, kt) = (grid.require_node(r, "r")?, grid.require_node(t, "t")?);
        let gm = self.on_grid(grid)?;
        Ok(gm.integrate(grid, |k| f[k], kr, kt, rule))
    }
}

impl GridMeasure {
    pub fn zero(grid: &TimeGrid) -> Self {
        Self { density: vec![0.0; grid.cells()], atoms: vec![0.0; grid.len()] }
    }

    /// Integral over node range `(kr, kt]` of the node function `f`.
    pub fn integrate(
        &self,
        grid: &TimeGrid,
        f: impl Fn(usize) -> f64,
        kr: usize,
        kt: usize,
        rule: EndpointRule,
    ) -> f64 {
        let mut sum = 0.0;
        for k in kr + 1..=kt {
            let cell = k - 1;
            let h = grid.cell_width(cell);
            let d = self.density[cell];
            if d != 0.0 {
                sum += match rule {
                    EndpointRule::Right => d * h * f(k),
                    EndpointRule::Trapezoid => 0.5 * d * h * (f(k - 1) + f(k)),
                };
            }
            if self.atoms[k] != 0.0 {
                sum += self.atoms[k] * f(k);
            }
        }
        sum
    }

    /// Cumulative masses at every node.
    pub fn cumulative_at_nodes(&self, grid: &TimeGrid) -> Vec<f64> {
        let mut out = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        out.push(0.0);
        for k in 1..grid.len() {
            acc += self.density[k - 1] * grid.cell_width(k - 1) + self.atoms[k];
            out.push(acc);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn measure(pieces: &[(f64, f64, f64)], atoms: &[(f64, f64)]) -> StieltjesMeasure {
        StieltjesMeasure::new(
            1.0,
            pieces.iter().map(|&(start, end, value)| DensityPiece { start, end, value }).collect(),
            atoms.iter().map(|&(time, mass)| Atom { time, mass }).collect(),
            Monotonicity::Signed,
        )
        .unwrap()
    }

    #[test]
    fn cumulative_examples() {
        let m = measure(&[(0.0, 1.0, 2.0)], &[]);
        assert_eq!(m.cumulative(0.5).unwrap(), 1.0);
        assert_eq!(m.cumulative(0.0).unwrap(), 0.0);

        let m = measure(&[], &[(0.5, 0.3)]);
        assert_eq!(m.cumulative(0.5).unwrap(), 0.3);
        assert_eq!(m.cumulative(0.499_999_999).unwrap(), 0.0);

        let m = measure(&[(0.0, 1.0, 1.0)], &[(0.5, 0.25)]);
        assert_eq!(m.cumulative(1.0).unwrap(), 1.25);

        assert!(matches!(m.cumulative(1.5), Err(Error::Domain(_))));
        assert!(matches!(m.cumulative(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(measure(&[(0.0, 1.0, -1.0)], &[]).total_variation(1.0).unwrap(), 1.0);
        assert_eq!(measure(&[(0.0, 0.5, 1.0), (0.5, 1.0, -1.0)], &[]).total_variation(1.0).unwrap(), 1.0);
        assert_eq!(measure(&[], &[(0.3, -0.5), (0.6, 0.5)]).total_variation(1.0).unwrap(), 1.0);
    }

    #[test]
    fn overlapping_pieces_are_summed_and_canonical() {
        let m = measure(&[(0.0, 0.6, 1.0), (0.4, 1.0, 1.0)], &[(0.5, 1.0), (0.5, -1.0)]);
        assert_eq!(
            m.pieces(),
            &[
                DensityPiece { start: 0.0, end: 0.4, value: 1.0 },
                DensityPiece { start: 0.4, end: 0.6, value: 2.0 },
                DensityPiece { start: 0.6, end: 1.0, value: 1.0 },
            ]
        );
        assert!(m.atoms().is_empty());
        let cancel = measure(&[(0.0, 0.5, 1.0), (0.0, 0.5, -1.0)], &[]);
        assert!(cancel.is_zero());
    }

    #[test]
    fn integrate_examples() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let ones = vec![1.0; grid.len()];
        let m = measure(&[(0.0, 1.0, 1.0)], &[]);
        assert_abs_diff_eq!(m.integrate(&grid, &ones, 0.0, 1.0, EndpointRule::Right).unwrap(), 1.0);

        let c = 3.5;
        let consts = vec![c; grid.len()];
        let m = measure(&[], &[(0.5, 0.7)]);
        assert_abs_diff_eq!(
            m.integrate(&grid, &consts, 0.0, 1.0, EndpointRule::Right).unwrap(),
            c * 0.7,
            epsilon = 1e-15
        );
        // atom at r is excluded, atom at t included
        assert_eq!(m.integrate(&grid, &consts, 0.5, 1.0, EndpointRule::Right).unwrap(), 0.0);
        assert_eq!(m.integrate(&grid, &consts, 0.25, 0.5, EndpointRule::Right).unwrap(), c * 0.7);
    }

    #[test]
    fn trapezoid_is_second_order_on_identity() {
        // oracle: int_0^1 s ds = 1/2 exactly; trapezoid is exact for linear f,
        // the right rule has error h/2
        let m = measure(&[(0.0, 1.0, 1.0)], &[]);
        for cells in [4, 16, 64] {
            let grid = TimeGrid::uniform(1.0, cells).unwrap();
            let f = grid.nodes().to_vec();
            let trap = m.integrate(&grid, &f, 0.0, 1.0, EndpointRule::Trapezoid).unwrap();
            assert_abs_diff_eq!(trap, 0.5, epsilon = 1e-14);
            let right = m.integrate(&grid, &f, 0.0, 1.0, EndpointRule::Right).unwrap();
            assert_abs_diff_eq!(right - 0.5, 0.5 / cells as f64, epsilon = 1e-14);
        }
        // a quadratic integrand shows the O(h^2) trapezoid error: int s^2 = 1/3
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let grid = TimeGrid::uniform(1.0, n).unwrap();
                let f: Vec<f64> = grid.nodes().iter().map(|s| s * s).collect();
                (m.integrate(&grid, &f, 0.0, 1.0, EndpointRule::Trapezoid).unwrap() - 1.0 / 3.0).abs()
            })
            .collect();
        assert!((errs[0] / errs[1] - 4.0).abs() < 1e-6);
        assert!((errs[1] / errs[2] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn integrate_errors() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let m = measure(&[(0.0, 1.0, 1.0)], &[]);
        let f = vec![1.0; grid.len()];
        assert!(matches!(m.integrate(&grid, &f, 0.75, 0.25, EndpointRule::Right), Err(Error::Domain(_))));
        assert!(matches!(m.integrate(&grid, &f[..3], 0.0, 1.0, EndpointRule::Right), Err(Error::Contract(_))));
        let off = measure(&[], &[(0.3, 1.0)]);
        assert!(matches!(off.integrate(&grid, &f, 0.0, 1.0, EndpointRule::Right), Err(Error::Structure { .. })));
    }

    #[test]
    fn nondecreasing_flag_is_enforced() {
        let r = StieltjesMeasure::new(
            1.0,
            vec![DensityPiece { start: 0.0, end: 1.0, value: -1.0 }],
            vec![],
            Monotonicity::Nondecreasing,
        );
        assert!(r.is_err());
    }

    #[test]
    fn abs_equals_cumulative_for_monotone() {
        let m = measure(&[(0.0, 0.7, 0.4)], &[(0.2, 0.1), (0.9, 0.3)]);
        for t in [0.0, 0.2, 0.5, 0.9, 1.0] {
            assert_abs_diff_eq!(m.total_variation(t).unwrap(), m.cumulative(t).unwrap(), epsilon = 1e-15);
        }
    }
}
