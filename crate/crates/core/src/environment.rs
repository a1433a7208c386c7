//! Model parameters, admissibility and the general/special conversions.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::jump::{DiscreteSpatialMeasure, JumpMeasure, KernelPiece, SpatialPoint};
use crate::measure::StieltjesMeasure;

/// Slack on the atom condition `delta_i <= 1` and on bottleneck detection.
pub const ATOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Species {
    One,
    Two,
}

impl Species {
    pub const BOTH: [Species; 2] = [Species::One, Species::Two];

    /// Zero-based index.
    pub fn index(self) -> usize {
        match self {
            Species::One => 0,
            Species::Two => 1,
        }
    }

    pub fn other(self) -> Species {
        match self {
            Species::One => Species::Two,
            Species::Two => Species::One,
        }
    }

    pub fn from_index(k: usize) -> Species {
        if k == 0 {
            Species::One
        } else {
            Species::Two
        }
    }
}

impl TryFrom<usize> for Species {
    type Error = Error;

    /// One-based type label.
    fn try_from(label: usize) -> Result<Self> {
        match label {
            1 => Ok(Species::One),
            2 => Ok(Species::Two),
            _ => Err(Error::Domain(format!("type index must be 1 or 2, got {label}"))),
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index() + 1)
    }
}

/// `z_i^2 1{|z| <= 1} + z_i 1{|z| > 1} + z_j`.
pub(crate) fn moment_weight(i: usize, z: [f64; 2]) -> f64 {
    let n = z[0].hypot(z[1]);
    let own = if n <= 1.0 { z[i] * z[i] } else { z[i] };
    own + z[1 - i]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Moment functional `m_i(T)`.
    pub moment_values: [f64; 2],
    /// Largest `delta_i(s)` over all nodes (zero when there are no atoms).
    pub delta_max: [f64; 2],
    pub bottleneck_times: Vec<(f64, Species)>,
    pub ok: bool,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    grid: TimeGrid,
    base_cells: usize,
    b_diag: [StieltjesMeasure; 2],
    b_cross: [StieltjesMeasure; 2],
    c: [StieltjesMeasure; 2],
    m: [JumpMeasure; 2],
    bbar: [StieltjesMeasure; 2],
    report: ValidationReport,
}

/// Collects the measures of an [`Environment`]; unset measures are zero.
#[derive(Debug, Clone)]
pub struct EnvironmentBuilder {
    horizon: f64,
    b_diag: [StieltjesMeasure; 2],
    b_cross: [StieltjesMeasure; 2],
    c: [StieltjesMeasure; 2],
    m: [JumpMeasure; 2],
}

impl EnvironmentBuilder {
    pub fn b11(mut self, m: StieltjesMeasure) -> Self {
        self.b_diag[0] = m;
        self
    }
    pub fn b22(mut self, m: StieltjesMeasure) -> Self {
        self.b_diag[1] = m;
        self
    }
    pub fn b12(mut self, m: StieltjesMeasure) -> Self {
        self.b_cross[0] = m;
        self
    }
    pub fn b21(mut self, m: StieltjesMeasure) -> Self {
        self.b_cross[1] = m;
        self
    }
    pub fn c1(mut self, m: StieltjesMeasure) -> Self {
        self.c[0] = m;
        self
    }
    pub fn c2(mut self, m: StieltjesMeasure) -> Self {
        self.c[1] = m;
        self
    }
    pub fn m1(mut self, m: JumpMeasure) -> Self {
        self.m[0] = m;
        self
    }
    pub fn m2(mut self, m: JumpMeasure) -> Self {
        self.m[1] = m;
        self
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for k in 0..2 {
            out.extend(self.b_diag[k].breakpoints());
            out.extend(self.b_cross[k].breakpoints());
            out.extend(self.c[k].breakpoints());
            out.extend(self.m[k].breakpoints());
        }
        out
    }

    /// Builds on `cells` uniform cells merged with every breakpoint.
    pub fn build(self, cells: usize) -> Result<Environment> {
        if cells == 0 {
            return Err(Error::Domain("grid needs at least one cell".into()));
        }
        let grid = TimeGrid::build(self.horizon, cells, &self.breakpoints())?;
        self.finish(grid, cells)
    }

    /// Builds on an explicit grid that must contain every breakpoint.
    pub fn build_on(self, grid: TimeGrid) -> Result<Environment> {
        let cells = grid.cells();
        self.finish(grid, cells)
    }

    fn finish(self, grid: TimeGrid, base_cells: usize) -> Result<Environment> {
        let Self { horizon, b_diag, b_cross, c, m } = self;
        let names = [["b11", "b22"], ["b12", "b21"], ["c1", "c2"], ["m1", "m2"]];
        for k in 0..2 {
            for (meas, name) in [(&b_diag[k], names[0][k]), (&b_cross[k], names[1][k]), (&c[k], names[2][k])] {
                if meas.horizon() != horizon {
                    return Err(Error::structure(name, "horizon mismatch"));
                }
                meas.check_on_grid(&grid, name)?;
            }
            if m[k].horizon() != horizon {
                return Err(Error::structure(names[3][k], "horizon mismatch"));
            }
            m[k].check_on_grid(&grid, names[3][k])?;
        }
        let b_cross = [b_cross[0].clone().into_nondecreasing("b12")?, b_cross[1].clone().into_nondecreasing("b21")?];
        let c = [c[0].clone().into_nondecreasing("c1")?, c[1].clone().into_nondecreasing("c2")?];
        for k in 0..2 {
            if !c[k].atoms().is_empty() {
                return Err(Error::structure(names[2][k], "must be continuous (no atoms)"));
            }
        }
        let bbar = [0, 1].map(|i| {
            let j = 1 - i;
            let mut s = b_cross[i].add(&m[i].moment_measure(|z| z[j]));
            if s.is_nonnegative() {
                s = s.into_nondecreasing("bbar").expect("checked");
            }
            s
        });
        let mut env = Environment {
            grid,
            base_cells,
            b_diag,
            b_cross,
            c,
            m,
            bbar,
            report: ValidationReport {
                moment_values: [0.0; 2],
                delta_max: [0.0; 2],
                bottleneck_times: Vec::new(),
                ok: true,
                messages: Vec::new(),
            },
        };
        env.report = env.compute_report();
        Ok(env)
    }
}

impl Environment {
    pub fn builder(horizon: f64) -> EnvironmentBuilder {
        let z = StieltjesMeasure::zero(horizon);
        let j = JumpMeasure::zero(horizon);
        EnvironmentBuilder {
            horizon,
            b_diag: [z.clone(), z.clone()],
            b_cross: [z.clone(), z.clone()],
            c: [z.clone(), z],
            m: [j.clone(), j],
        }
    }

    pub fn zero(horizon: f64, cells: usize) -> Result<Self> {
        Self::builder(horizon).build(cells)
    }

    fn to_builder(&self) -> EnvironmentBuilder {
        EnvironmentBuilder {
            horizon: self.horizon(),
            b_diag: self.b_diag.clone(),
            b_cross: self.b_cross.clone(),
            c: self.c.clone(),
            m: self.m.clone(),
        }
    }

    /// Same parameters on a grid with every cell split `factor` times.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let mut env = self.to_builder().build_on(self.grid.refine(factor)?)?;
        env.base_cells = self.base_cells * factor;
        Ok(env)
    }

    /// Same parameters on `cells` uniform cells plus breakpoints.
    pub fn with_cells(&self, cells: usize) -> Result<Self> {
        self.to_builder().build(cells)
    }

    /// Same parameters on an explicit grid.
    pub fn with_grid(&self, grid: TimeGrid) -> Result<Self> {
        self.to_builder().build_on(grid)
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    /// Uniform cell count requested at build time (before breakpoints are
    /// merged in).
    pub fn base_cells(&self) -> usize {
        self.base_cells
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `b_ii`.
    pub fn b_diag(&self, i: Species) -> &StieltjesMeasure {
        &self.b_diag[i.index()]
    }

    /// `b_ij` with `j` the other type.
    pub fn b_cross(&self, i: Species) -> &StieltjesMeasure {
        &self.b_cross[i.index()]
    }

    pub fn c(&self, i: Species) -> &StieltjesMeasure {
        &self.c[i.index()]
    }

    pub fn m(&self, i: Species) -> &JumpMeasure {
        &self.m[i.index()]
    }

    /// `bbar_ij = b_ij + int z_j m_i`.
    pub fn bbar(&self, i: Species) -> &StieltjesMeasure {
        &self.bbar[i.index()]
    }

    /// Breakpoints of all parameter measures, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = self.to_builder().breakpoints();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn atom_times(&self, i: usize) -> Vec<f64> {
        let mut times: Vec<f64> =
            self.b_diag[i].atoms().iter().map(|a| a.time).chain(self.m[i].atoms().iter().map(|a| a.time)).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    /// `delta_i(s) = Delta b_ii(s) + int z_i m_i({s}, dz)`.
    pub fn delta(&self, i: Species, s: f64) -> f64 {
        let k = i.index();
        let jump = self.m[k].atom_at(s).map_or(0.0, |m| m.integrate(|z| z[k]));
        self.b_diag[k].atom_at(s) + jump
    }

    /// Same as [`Environment::delta`] with a one-based type label.
    pub fn delta_i(&self, label: usize, s: f64) -> Result<f64> {
        Ok(self.delta(Species::try_from(label)?, s))
    }

    /// Moment functional `m_i(t)`.
    pub fn moment_functional(&self, i: Species, t: f64) -> Result<f64> {
        let k = i.index();
        self.m[k].moment_measure(|z| moment_weight(k, z)).cumulative(t)
    }

    /// Bottleneck times in ascending order, each with its type.
    pub fn bottlenecks(&self) -> Vec<(f64, Species)> {
        let mut out = Vec::new();
        for i in Species::BOTH {
            let k = i.index();
            for a in self.b_diag[k].atoms() {
                if (a.mass - 1.0).abs() <= ATOM_TOL
                    && self.b_cross[k].atom_at(a.time) == 0.0
                    && self.m[k].atom_at(a.time).is_none_or(DiscreteSpatialMeasure::is_empty)
                {
                    out.push((a.time, i));
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    /// Last bottleneck in `(0, t]`.
    pub fn last_bottleneck(&self, t: f64) -> Option<f64> {
        self.bottlenecks().into_iter().map(|(s, _)| s).rfind(|&s| s <= t)
    }

    fn compute_report(&self) -> ValidationReport {
        let mut messages = Vec::new();
        let mut ok = true;
        let mut moment_values = [0.0; 2];
        let mut delta_max = [0.0f64; 2];
        let horizon = self.horizon();
        for i in Species::BOTH {
            let k = i.index();
            let mv = self.moment_functional(i, horizon).unwrap_or(f64::INFINITY);
            moment_values[k] = mv;
            if !mv.is_finite() {
                ok = false;
                messages.push(format!("moment functional m{i}(T) is not finite"));
            }
            for s in self.atom_times(k) {
                let d = self.delta(i, s);
                delta_max[k] = delta_max[k].max(d);
                if d > 1.0 + ATOM_TOL {
                    ok = false;
                    messages.push(format!("delta_{i}({s}) = {d} exceeds 1"));
                }
            }
        }
        ValidationReport { moment_values, delta_max, bottleneck_times: self.bottlenecks(), ok, messages }
    }

    pub fn validate(&self) -> ValidationReport {
        self.report.clone()
    }

    pub fn is_admissible(&self) -> bool {
        self.report.ok
    }

    /// Solvers call this before touching the parameters.
    pub fn ensure_admissible(&self) -> Result<()> {
        if self.report.ok {
            Ok(())
        } else {
            Err(Error::Inadmissible(self.report.messages.join("; ")))
        }
    }
}

/// Parameters `(gamma_ii, gamma_ij, mu_i)` of the special backward system.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialForm {
    grid: TimeGrid,
    base_cells: usize,
    gamma_diag: [StieltjesMeasure; 2],
    gamma_cross: [StieltjesMeasure; 2],
    mu: [JumpMeasure; 2],
}

#[derive(Debug, Clone)]
pub struct SpecialFormBuilder {
    horizon: f64,
    gamma_diag: [StieltjesMeasure; 2],
    gamma_cross: [StieltjesMeasure; 2],
    mu: [JumpMeasure; 2],
}

impl SpecialFormBuilder {
    pub fn gamma11(mut self, m: StieltjesMeasure) -> Self {
        self.gamma_diag[0] = m;
        self
    }
    pub fn gamma22(mut self, m: StieltjesMeasure) -> Self {
        self.gamma_diag[1] = m;
        self
    }
    pub fn gamma12(mut self, m: StieltjesMeasure) -> Self {
        self.gamma_cross[0] = m;
        self
    }
    pub fn gamma21(mut self, m: StieltjesMeasure) -> Self {
        self.gamma_cross[1] = m;
        self
    }
    pub fn mu1(mut self, m: JumpMeasure) -> Self {
        self.mu[0] = m;
        self
    }
    pub fn mu2(mut self, m: JumpMeasure) -> Self {
        self.mu[1] = m;
        self
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for k in 0..2 {
            out.extend(self.gamma_diag[k].breakpoints());
            out.extend(self.gamma_cross[k].breakpoints());
            out.extend(self.mu[k].breakpoints());
        }
        out
    }

    pub fn build(self, cells: usize) -> Result<SpecialForm> {
        if cells == 0 {
            return Err(Error::Domain("grid needs at least one cell".into()));
        }
        let grid = TimeGrid::build(self.horizon, cells, &self.breakpoints())?;
        self.finish(grid, cells)
    }

    pub fn build_on(self, grid: TimeGrid) -> Result<SpecialForm> {
        let cells = grid.cells();
        self.finish(grid, cells)
    }

    fn finish(self, grid: TimeGrid, base_cells: usize) -> Result<SpecialForm> {
        let Self { horizon, gamma_diag, gamma_cross, mu } = self;
        let names = [["gamma11", "gamma22"], ["gamma12", "gamma21"], ["mu1", "mu2"]];
        for k in 0..2 {
            for (meas, name) in [(&gamma_diag[k], names[0][k]), (&gamma_cross[k], names[1][k])] {
                if meas.horizon() != horizon {
                    return Err(Error::structure(name, "horizon mismatch"));
                }
                meas.check_on_grid(&grid, name)?;
            }
            if mu[k].horizon() != horizon {
                return Err(Error::structure(names[2][k], "horizon mismatch"));
            }
            mu[k].check_on_grid(&grid, names[2][k])?;
            if let Some(a) = gamma_diag[k].atoms().iter().find(|a| a.mass <= -1.0) {
                return Err(Error::Inadmissible(format!(
                    "{}: atom {} at t = {} must exceed -1",
                    names[0][k], a.mass, a.time
                )));
            }
        }
        let gamma_cross = [
            gamma_cross[0].clone().into_nondecreasing("gamma12")?,
            gamma_cross[1].clone().into_nondecreasing("gamma21")?,
        ];
        Ok(SpecialForm { grid, base_cells, gamma_diag, gamma_cross, mu })
    }
}

impl SpecialForm {
    pub fn builder(horizon: f64) -> SpecialFormBuilder {
        let z = StieltjesMeasure::zero(horizon);
        let j = JumpMeasure::zero(horizon);
        SpecialFormBuilder {
            horizon,
            gamma_diag: [z.clone(), z.clone()],
            gamma_cross: [z.clone(), z],
            mu: [j.clone(), j],
        }
    }

    pub fn zero(horizon: f64, cells: usize) -> Result<Self> {
        Self::builder(horizon).build(cells)
    }

    fn to_builder(&self) -> SpecialFormBuilder {
        SpecialFormBuilder {
            horizon: self.horizon(),
            gamma_diag: self.gamma_diag.clone(),
            gamma_cross: self.gamma_cross.clone(),
            mu: self.mu.clone(),
        }
    }

    pub fn refined(&self, factor: usize) -> Result<Self> {
        let mut sf = self.to_builder().build_on(self.grid.refine(factor)?)?;
        sf.base_cells = self.base_cells * factor;
        Ok(sf)
    }

    pub fn with_cells(&self, cells: usize) -> Result<Self> {
        self.to_builder().build(cells)
    }

    pub fn with_grid(&self, grid: TimeGrid) -> Result<Self> {
        self.to_builder().build_on(grid)
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    /// Uniform cell count requested at build time (before breakpoints are
    /// merged in).
    pub fn base_cells(&self) -> usize {
        self.base_cells
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn gamma_diag(&self, i: Species) -> &StieltjesMeasure {
        &self.gamma_diag[i.index()]
    }

    pub fn gamma_cross(&self, i: Species) -> &StieltjesMeasure {
        &self.gamma_cross[i.index()]
    }

    pub fn mu(&self, i: Species) -> &JumpMeasure {
        &self.mu[i.index()]
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = self.to_builder().breakpoints();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// `(z_1 + z_2)`-mass of `mu_i` on `(0, t]`.
    pub fn jump_mass(&self, i: Species, t: f64) -> Result<f64> {
        self.mu[i.index()].moment_measure(|z| z[0] + z[1]).cumulative(t)
    }

    /// The same equation written with general parameters: `c = 0`,
    /// `b_ij = gamma_ij`, `m_i = mu_i` and `b_ii = -gamma_ii - int z_i mu_i`.
    pub fn to_general(&self) -> Result<Environment> {
        let b = [0, 1].map(|i| self.gamma_diag[i].negated().sub(&self.mu[i].moment_measure(|z| z[i])));
        let [b11, b22] = b;
        let env = Environment::builder(self.horizon())
            .b11(b11)
            .b22(b22)
            .b12(self.gamma_cross[0].clone())
            .b21(self.gamma_cross[1].clone())
            .m1(self.mu[0].clone())
            .m2(self.mu[1].clone())
            .build_on(self.grid.clone())?;
        env.ensure_admissible()?;
        Ok(env)
    }
}

/// Free-function form of [`SpecialForm::to_general`].
pub fn special_to_general(sf: &SpecialForm) -> Result<Environment> {
    sf.to_general()
}

/// The finite-activity approximation `phi_n` written in special form.
pub fn build_phi_n(env: &Environment, n: u32) -> Result<SpecialForm> {
    if n < 1 {
        return Err(Error::Domain("ladder index n must be at least 1".into()));
    }
    let nf = f64::from(n);
    let en = (-nf).exp();
    let keep = move |z: [f64; 2]| -(-nf).exp_m1() * (nf * z[0].hypot(z[1])).min(1.0);
    let horizon = env.horizon();
    let mut gamma_diag = Vec::with_capacity(2);
    let mut gamma_cross = Vec::with_capacity(2);
    let mut mu = Vec::with_capacity(2);
    for i in Species::BOTH {
        let k = i.index();
        let j = 1 - k;
        let m = env.m(i);
        let gd = env
            .b_diag(i)
            .negated()
            .add(&env.b_diag(i).abs().scaled(en))
            .sub(&env.c(i).scaled(2.0 * nf))
            .sub(&m.moment_measure(|z| z[k] * keep(z)));
        // bbar_ij minus the thinned part, written without cancellation
        let gc = env.b_cross(i).add(&m.moment_measure(|z| z[j] * (1.0 - keep(z))));

        let mut e = [0.0; 2];
        e[k] = 1.0 / nf;
        let diffusion_points: Vec<KernelPiece> = env
            .c(i)
            .pieces()
            .iter()
            .map(|p| KernelPiece {
                start: p.start,
                end: p.end,
                measure: DiscreteSpatialMeasure::new(vec![SpatialPoint { z: e, weight: 2.0 * nf * nf * p.value }])
                    .expect("positive diffusion density"),
            })
            .collect();
        let thinned =
            m.map_measures(|meas, _, _| meas.map_points(|p| Some(SpatialPoint { weight: p.weight * keep(p.z), ..p })));
        let diffusion = JumpMeasure::new(horizon, diffusion_points, Vec::new())?;
        gamma_diag.push(gd);
        gamma_cross.push(gc);
        mu.push(thinned.add(&diffusion));
    }
    let mut gd = gamma_diag.into_iter();
    let mut gc = gamma_cross.into_iter();
    let mut mu = mu.into_iter();
    SpecialForm::builder(horizon)
        .gamma11(gd.next().unwrap())
        .gamma22(gd.next().unwrap())
        .gamma12(gc.next().unwrap())
        .gamma21(gc.next().unwrap())
        .mu1(mu.next().unwrap())
        .mu2(mu.next().unwrap())
        .build_on(env.grid().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dens(v: f64) -> StieltjesMeasure {
        StieltjesMeasure::density(1.0, 0.0, 1.0, v).unwrap()
    }

    fn atom(t: f64, m: f64) -> StieltjesMeasure {
        StieltjesMeasure::point_mass(1.0, t, m).unwrap()
    }

    #[test]
    fn zero_environment_is_admissible() {
        let env = Environment::zero(1.0, 10).unwrap();
        let r = env.validate();
        assert!(r.ok);
        assert_eq!(r.moment_values, [0.0, 0.0]);
        assert!(r.bottleneck_times.is_empty());
        assert_eq!(env.last_bottleneck(1.0), None);
    }

    #[test]
    fn delta_examples() {
        let env = Environment::builder(1.0)
            .b11(atom(0.5, 0.6))
            .m1(JumpMeasure::point_atom(1.0, 0.5, vec![SpatialPoint::new(0.5, 0.0, 0.8)]).unwrap())
            .build(10)
            .unwrap();
        assert_abs_diff_eq!(env.delta(Species::One, 0.5), 1.0, epsilon = 1e-15);
        assert!(env.validate().ok);
        assert!(env.bottlenecks().is_empty());

        let env = Environment::builder(1.0).b11(atom(0.5, 1.2)).build(10).unwrap();
        assert!(!env.validate().ok);
        assert!(env.validate().messages[0].contains("0.5"));
        assert!(matches!(env.ensure_admissible(), Err(Error::Inadmissible(_))));

        let env = Environment::builder(1.0)
            .b11(atom(0.5, 0.4))
            .m1(JumpMeasure::point_atom(1.0, 0.5, vec![SpatialPoint::new(1.0, 0.0, 0.3)]).unwrap())
            .build(10)
            .unwrap();
        assert_abs_diff_eq!(env.delta_i(1, 0.5).unwrap(), 0.7, epsilon = 1e-15);
        assert_eq!(env.delta_i(1, 0.3).unwrap(), 0.0);
        assert!(matches!(env.delta_i(3, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn bottleneck_examples() {
        let env = Environment::builder(1.0).b11(atom(0.5, 1.0)).build(10).unwrap();
        assert_eq!(env.delta(Species::One, 0.5), 1.0);
        assert_eq!(env.bottlenecks(), vec![(0.5, Species::One)]);
        assert_eq!(env.last_bottleneck(1.0), Some(0.5));
        assert_eq!(env.last_bottleneck(0.4), None);

        let env = Environment::builder(1.0).b11(atom(0.5, 1.0)).b12(atom(0.5, 0.1)).build(10).unwrap();
        assert!(env.bottlenecks().is_empty());

        let env = Environment::builder(1.0).b11(atom(0.3, 1.0)).b22(atom(0.7, 1.0)).build(10).unwrap();
        assert_eq!(env.last_bottleneck(0.5), Some(0.3));
        assert_eq!(env.last_bottleneck(1.0), Some(0.7));
    }

    #[test]
    fn bbar_examples() {
        let env = Environment::builder(1.0).b12(dens(1.0)).build(4).unwrap();
        assert_eq!(env.bbar(Species::One), env.b_cross(Species::One));

        let env = Environment::builder(1.0)
            .m1(JumpMeasure::kernel(1.0, 0.0, 1.0, vec![SpatialPoint::new(0.0, 1.0, 2.0)]).unwrap())
            .build(4)
            .unwrap();
        assert_eq!(env.bbar(Species::One).density_at(0.5), 2.0);

        let env = Environment::builder(1.0)
            .b12(dens(1.0))
            .m1(JumpMeasure::point_atom(1.0, 0.5, vec![SpatialPoint::new(0.0, 0.5, 1.0)]).unwrap())
            .build(4)
            .unwrap();
        assert_abs_diff_eq!(env.bbar(Species::One).cumulative(1.0).unwrap(), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(Environment::builder(1.0).b12(dens(-1.0)).build(4), Err(Error::Structure { .. })));
        assert!(matches!(Environment::builder(1.0).c1(atom(0.5, 1.0)).build(4), Err(Error::Structure { .. })));
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(matches!(Environment::builder(1.0).b11(atom(0.3, 0.5)).build_on(grid), Err(Error::Structure { .. })));
    }

    #[test]
    fn special_to_general_examples() {
        let env = SpecialForm::zero(1.0, 4).unwrap().to_general().unwrap();
        assert_eq!(env, Environment::zero(1.0, 4).unwrap());

        let sf = SpecialForm::builder(1.0)
            .gamma11(dens(0.5))
            .mu1(JumpMeasure::kernel(1.0, 0.0, 1.0, vec![SpatialPoint::new(1.0, 0.0, 1.0)]).unwrap())
            .build(4)
            .unwrap();
        assert_eq!(sf.to_general().unwrap().b_diag(Species::One).density_at(0.5), -1.5);

        let sf = SpecialForm::builder(1.0)
            .gamma11(atom(0.5, -0.5))
            .mu1(JumpMeasure::point_atom(1.0, 0.5, vec![SpatialPoint::new(0.4, 0.0, 1.0)]).unwrap())
            .build(4)
            .unwrap();
        assert_abs_diff_eq!(sf.to_general().unwrap().b_diag(Species::One).atom_at(0.5), 0.1, epsilon = 1e-15);

        assert!(matches!(SpecialForm::builder(1.0).gamma11(atom(0.5, -1.0)).build(4), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn phi_n_examples() {
        let env = Environment::zero(1.0, 4).unwrap();
        for n in [1, 2, 8] {
            let sf = build_phi_n(&env, n).unwrap();
            assert_eq!(sf, SpecialForm::zero(1.0, 4).unwrap());
        }
        assert!(matches!(build_phi_n(&env, 0), Err(Error::Domain(_))));

        let env = Environment::builder(1.0).c1(dens(1.0)).build(4).unwrap();
        let sf = build_phi_n(&env, 2).unwrap();
        assert_eq!(sf.mu(Species::One).kernel_at(0.5).points(), &[SpatialPoint::new(0.5, 0.0, 8.0)]);
        assert_eq!(sf.gamma_diag(Species::One).density_at(0.5), -4.0);

        let env = Environment::builder(1.0)
            .m1(JumpMeasure::kernel(1.0, 0.0, 1.0, vec![SpatialPoint::new(2.0, 0.0, 1.0)]).unwrap())
            .build(4)
            .unwrap();
        let sf = build_phi_n(&env, 1).unwrap();
        let w = sf.mu(Species::One).kernel_at(0.5).points()[0].weight;
        assert_abs_diff_eq!(w, 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
    }
}
