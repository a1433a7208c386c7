//! Coefficients of a backward system in the common form
//!
//! ```text
//! v_i(r) = lambda_i + int_(r,t] [ a_i v_i + x_i v_j - q_i v_i^2
//!                                 + int (1 - e^{-<v, z>}) n_i(dz) ] (ds)
//! ```
//!
//! laid out on a grid. Inside a cell the diagonal rate `a_i` is constant
//! while the other coefficients may differ between the two cell ends (they
//! do after an h-transform); atoms carry their own coefficients.

use std::sync::Arc;

use crate::environment::{Environment, SpecialForm, Species};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::jump::SpatialPoint;
use crate::measure::StieltjesMeasure;
use crate::mechanism::one_minus_exp;

pub(crate) fn empty_points() -> Arc<[SpatialPoint]> {
    Arc::from(Vec::new())
}

fn jump_sum(points: &[SpatialPoint], v: [f64; 2]) -> f64 {
    points.iter().fold(0.0, |acc, p| acc + p.weight * one_minus_exp(p.dot(v)))
}

/// Non-diagonal coefficients at one end of a cell (rates per unit time).
#[derive(Debug, Clone)]
pub struct EndCoeffs {
    pub cross: [f64; 2],
    pub quad: [f64; 2],
    pub jumps: [Arc<[SpatialPoint]>; 2],
}

impl EndCoeffs {
    fn zero() -> Self {
        Self { cross: [0.0; 2], quad: [0.0; 2], jumps: [empty_points(), empty_points()] }
    }

    /// Everything but the diagonal term.
    pub fn rate(&self, v: [f64; 2]) -> [f64; 2] {
        [0, 1].map(|i| {
            let j = 1 - i;
            self.cross[i] * v[j] - self.quad[i] * v[i] * v[i] + jump_sum(&self.jumps[i], v)
        })
    }

    fn is_zero(&self) -> bool {
        self.cross == [0.0; 2] && self.quad == [0.0; 2] && self.jumps.iter().all(|j| j.is_empty())
    }
}

/// Coefficients of the atom at a node.
#[derive(Debug, Clone)]
pub struct AtomCoeffs {
    pub diag: [f64; 2],
    pub cross: [f64; 2],
    pub quad: [f64; 2],
    pub jumps: [Arc<[SpatialPoint]>; 2],
}

impl AtomCoeffs {
    /// The increment `v(s-) - v(s)`.
    pub fn increment(&self, v: [f64; 2]) -> [f64; 2] {
        [0, 1].map(|i| {
            let j = 1 - i;
            self.diag[i] * v[i] + self.cross[i] * v[j] - self.quad[i] * v[i] * v[i] + jump_sum(&self.jumps[i], v)
        })
    }

    /// `v(s-)` from `v(s)`.
    pub fn left_limit(&self, v: [f64; 2]) -> [f64; 2] {
        let d = self.increment(v);
        [v[0] + d[0], v[1] + d[1]]
    }
}

#[derive(Debug, Clone)]
pub struct BackwardSystem {
    grid: TimeGrid,
    diag: Vec<[f64; 2]>,
    left: Vec<EndCoeffs>,
    right: Vec<EndCoeffs>,
    atoms: Vec<Option<AtomCoeffs>>,
}

fn pair<T>(f: impl Fn(usize) -> T) -> [T; 2] {
    [f(0), f(1)]
}

impl BackwardSystem {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Diagonal rate on `cell`.
    pub fn diag(&self, cell: usize) -> [f64; 2] {
        self.diag[cell]
    }

    pub fn left(&self, cell: usize) -> &EndCoeffs {
        &self.left[cell]
    }

    pub fn right(&self, cell: usize) -> &EndCoeffs {
        &self.right[cell]
    }

    pub fn atom(&self, node: usize) -> Option<&AtomCoeffs> {
        self.atoms[node].as_ref()
    }

    pub(crate) fn set_zero_diag(&mut self) {
        for d in &mut self.diag {
            *d = [0.0; 2];
        }
        for a in self.atoms.iter_mut().flatten() {
            a.diag = [0.0; 2];
        }
    }

    /// The system of the general backward equation: `a_i = -b_ii - int z_i m_i`,
    /// `x_i = b_ij`, `q_i = c_i`, `n_i = m_i`.
    pub fn from_environment(env: &Environment) -> Result<Self> {
        env.ensure_admissible()?;
        let grid = env.grid();
        let b = pair(|k| env.b_diag(Species::from_index(k)).on_grid(grid));
        let x = pair(|k| env.b_cross(Species::from_index(k)).on_grid(grid));
        let q = pair(|k| env.c(Species::from_index(k)).on_grid(grid));
        let m = pair(|k| env.m(Species::from_index(k)).on_grid(grid));
        let [b0, b1] = b;
        let [x0, x1] = x;
        let [q0, q1] = q;
        let [m0, m1] = m;
        let (b, x, q, m) = ([b0?, b1?], [x0?, x1?], [q0?, q1?], [m0?, m1?]);
        Ok(Self::assemble(grid, |k| {
            let own = |pts: &[SpatialPoint], i: usize| pts.iter().fold(0.0, |acc, p| acc + p.z[i] * p.weight);
            Parts {
                diag_density: pair(|i| -b[i].density[k.cell] - own(&m[i].kernels[k.cell], i)),
                cross_density: pair(|i| x[i].density[k.cell]),
                quad_density: pair(|i| q[i].density[k.cell]),
                kernel: pair(|i| m[i].kernels[k.cell].clone()),
                diag_atom: pair(|i| -b[i].atoms[k.node] - own(&m[i].atoms[k.node], i)),
                cross_atom: pair(|i| x[i].atoms[k.node]),
                quad_atom: pair(|i| q[i].atoms[k.node]),
                atom_jumps: pair(|i| m[i].atoms[k.node].clone()),
            }
        }))
    }

    /// The system of the special backward equation: `a_i = gamma_ii`,
    /// `x_i = gamma_ij`, `n_i = mu_i`.
    pub fn from_special(sf: &SpecialForm) -> Result<Self> {
        let grid = sf.grid();
        let g = pair(|k| sf.gamma_diag(Species::from_index(k)).on_grid(grid));
        let x = pair(|k| sf.gamma_cross(Species::from_index(k)).on_grid(grid));
        let m = pair(|k| sf.mu(Species::from_index(k)).on_grid(grid));
        let [g0, g1] = g;
        let [x0, x1] = x;
        let [m0, m1] = m;
        let (g, x, m) = ([g0?, g1?], [x0?, x1?], [m0?, m1?]);
        Ok(Self::assemble(grid, |k| Parts {
            diag_density: pair(|i| g[i].density[k.cell]),
            cross_density: pair(|i| x[i].density[k.cell]),
            quad_density: [0.0; 2],
            kernel: pair(|i| m[i].kernels[k.cell].clone()),
            diag_atom: pair(|i| g[i].atoms[k.node]),
            cross_atom: pair(|i| x[i].atoms[k.node]),
            quad_atom: [0.0; 2],
            atom_jumps: pair(|i| m[i].atoms[k.node].clone()),
        }))
    }

    fn assemble(grid: &TimeGrid, parts: impl Fn(Slot) -> Parts) -> Self {
        let n = grid.len();
        let mut diag = Vec::with_capacity(n - 1);
        let mut ends = Vec::with_capacity(n - 1);
        let mut atoms = vec![None; n];
        for (node, slot) in atoms.iter_mut().enumerate() {
            let p = parts(Slot { cell: node.min(n - 2), node });
            if node + 1 < n {
                diag.push(p.diag_density);
                ends.push(EndCoeffs { cross: p.cross_density, quad: p.quad_density, jumps: p.kernel });
            }
            let atom = AtomCoeffs { diag: p.diag_atom, cross: p.cross_atom, quad: p.quad_atom, jumps: p.atom_jumps };
            let nonzero = atom.diag != [0.0; 2]
                || atom.cross != [0.0; 2]
                || atom.quad != [0.0; 2]
                || atom.jumps.iter().any(|j| !j.is_empty());
            if node > 0 && nonzero {
                *slot = Some(atom);
            }
        }
        Self { grid: grid.clone(), diag, left: ends.clone(), right: ends, atoms }
    }

    /// A system with no coefficients at all.
    pub fn zero(grid: &TimeGrid) -> Self {
        let cells = grid.cells();
        Self {
            grid: grid.clone(),
            diag: vec![[0.0; 2]; cells],
            left: vec![EndCoeffs::zero(); cells],
            right: vec![EndCoeffs::zero(); cells],
            atoms: vec![None; grid.len()],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.diag.iter().all(|d| *d == [0.0; 2])
            && self.left.iter().chain(&self.right).all(EndCoeffs::is_zero)
            && self.atoms.iter().all(Option::is_none)
    }

    /// Applies the change of variables `v_i = e^{zeta_i} u_i`.
    pub fn h_transform(&self, zeta: &Zeta) -> Result<Self> {
        let grid = &self.grid;
        zeta.check_on_grid(grid)?;
        let z = zeta.node_values(grid);
        let zl = zeta.left_values(grid);
        let slope = pair(|i| zeta.measure[i].on_grid(grid));
        let [s0, s1] = slope;
        let slope = [s0?, s1?];
        let transform_end = |e: &EndCoeffs, at: [f64; 2]| EndCoeffs {
            cross: pair(|i| e.cross[i] * (at[i] - at[1 - i]).exp()),
            quad: pair(|i| e.quad[i] * (-at[i]).exp()),
            jumps: pair(|i| push_forward(&e.jumps[i], at[i], at)),
        };
        let cells = grid.cells();
        let mut out = Self {
            grid: grid.clone(),
            diag: Vec::with_capacity(cells),
            left: Vec::with_capacity(cells),
            right: Vec::with_capacity(cells),
            atoms: vec![None; grid.len()],
        };
        for c in 0..cells {
            out.diag.push(pair(|i| self.diag[c][i] - slope[i].density[c]));
            out.left.push(transform_end(&self.left[c], z[c]));
            out.right.push(transform_end(&self.right[c], zl[c + 1]));
        }
        for k in 1..grid.len() {
            let dz = pair(|i| slope[i].atoms[k]);
            let base = self.atoms[k].clone();
            if base.is_none() && dz == [0.0; 2] {
                continue;
            }
            let base = base.unwrap_or(AtomCoeffs {
                diag: [0.0; 2],
                cross: [0.0; 2],
                quad: [0.0; 2],
                jumps: [empty_points(), empty_points()],
            });
            out.atoms[k] = Some(AtomCoeffs {
                diag: pair(|i| (-dz[i]).exp_m1() + (-dz[i]).exp() * base.diag[i]),
                cross: pair(|i| base.cross[i] * (zl[k][i] - z[k][1 - i]).exp()),
                quad: pair(|i| base.quad[i] * (zl[k][i] - 2.0 * z[k][i]).exp()),
                jumps: pair(|i| push_forward(&base.jumps[i], zl[k][i], z[k])),
            });
        }
        Ok(out)
    }

    /// `rho(t)` of the upper estimate, computed from the coefficients:
    /// `|a_i + int z_i n_i|`, `x_i` and `int z_j n_i` integrated over `(0, t]`.
    pub fn rho(&self, t: f64) -> Result<f64> {
        let kt = self.grid.require_node(t, "t")?;
        let own =
            |e: &EndCoeffs, d: [f64; 2], i: usize| d[i] + e.jumps[i].iter().fold(0.0, |acc, p| acc + p.z[i] * p.weight);
        let other = |pts: &[SpatialPoint], i: usize| pts.iter().fold(0.0, |acc, p| acc + p.z[1 - i] * p.weight);
        let mut total = 0.0;
        for c in 0..kt {
            let h = self.grid.cell_width(c);
            let (l, r, d) = (&self.left[c], &self.right[c], self.diag[c]);
            for i in 0..2 {
                total += h * log_mean(own(l, d, i).abs(), own(r, d, i).abs());
                total += h * log_mean(l.cross[i], r.cross[i]);
                total += h * log_mean(other(&l.jumps[i], i), other(&r.jumps[i], i));
            }
        }
        for k in 1..=kt {
            if let Some(a) = &self.atoms[k] {
                for i in 0..2 {
                    let own: f64 = a.jumps[i].iter().fold(0.0, |acc, p| acc + p.z[i] * p.weight);
                    total += (a.diag[i] + own).abs() + a.cross[i] + other(&a.jumps[i], i);
                }
            }
        }
        Ok(total)
    }
}

/// Logarithmic mean: the exact cell average of a coefficient that varies
/// exponentially between its end values.
fn log_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.5 * (a + b);
    }
    let r = b / a;
    if (r - 1.0).abs() < 1e-6 {
        let x = r - 1.0;
        // (r - 1) / ln r = 1 + x/2 - x^2/12 + ...
        a * (1.0 + x / 2.0 - x * x / 12.0)
    } else {
        (b - a) / r.ln()
    }
}

fn push_forward(points: &Arc<[SpatialPoint]>, weight_log: f64, at: [f64; 2]) -> Arc<[SpatialPoint]> {
    if points.is_empty() {
        return points.clone();
    }
    let w = weight_log.exp();
    let s = [(-at[0]).exp(), (-at[1]).exp()];
    points
        .iter()
        .map(|p| SpatialPoint { z: [p.z[0] * s[0], p.z[1] * s[1]], weight: p.weight * w })
        .collect::<Vec<_>>()
        .into()
}

#[derive(Clone, Copy)]
struct Slot {
    cell: usize,
    node: usize,
}

struct Parts {
    diag_density: [f64; 2],
    cross_density: [f64; 2],
    quad_density: [f64; 2],
    kernel: [Arc<[SpatialPoint]>; 2],
    diag_atom: [f64; 2],
    cross_atom: [f64; 2],
    quad_atom: [f64; 2],
    atom_jumps: [Arc<[SpatialPoint]>; 2],
}

/// The exponents `zeta_i(r) = offset_i + measure_i((0, r])` of an h-transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Zeta {
    pub offset: [f64; 2],
    pub measure: [StieltjesMeasure; 2],
}

impl Zeta {
    pub fn zero(horizon: f64) -> Self {
        let z = StieltjesMeasure::zero(horizon);
        Self { offset: [0.0; 2], measure: [z.clone(), z] }
    }

    pub fn new(measure: [StieltjesMeasure; 2]) -> Self {
        Self { offset: [0.0; 2], measure }
    }

    pub fn constant(horizon: f64, offset: [f64; 2]) -> Self {
        Self { offset, ..Self::zero(horizon) }
    }

    /// The choice that removes the diagonal of a special form: continuous
    /// part `gamma_ii`, jumps `log(1 + Delta gamma_ii)`.
    pub fn diagonal_remover(sf: &SpecialForm) -> Self {
        let m = pair(|k| {
            let g = sf.gamma_diag(Species::from_index(k));
            let atoms = g.atoms().iter().map(|a| crate::measure::Atom { time: a.time, mass: a.mass.ln_1p() }).collect();
            StieltjesMeasure::new(g.horizon(), g.pieces().to_vec(), atoms, Default::default())
                .expect("log of atoms above -1 is finite")
        });
        Self::new(m)
    }

    pub fn value(&self, r: f64) -> Result<[f64; 2]> {
        let [a, b] = &self.measure;
        Ok([self.offset[0] + a.cumulative(r)?, self.offset[1] + b.cumulative(r)?])
    }

    pub(crate) fn check_on_grid(&self, grid: &TimeGrid) -> Result<()> {
        for (k, m) in self.measure.iter().enumerate() {
            m.check_on_grid(grid, &format!("zeta{}", k + 1))?;
        }
        if self.offset.iter().any(|o| !o.is_finite()) {
            return Err(Error::Domain("zeta offset must be finite".into()));
        }
        Ok(())
    }

    /// `zeta(node)` at every node.
    pub fn node_values(&self, grid: &TimeGrid) -> Vec<[f64; 2]> {
        let c = pair(|i| {
            self.measure[i].on_grid(grid).map(|g| g.cumulative_at_nodes(grid)).unwrap_or_else(|_| vec![0.0; grid.len()])
        });
        (0..grid.len()).map(|k| [self.offset[0] + c[0][k], self.offset[1] + c[1][k]]).collect()
    }

    /// `zeta(node-)` at every node (`zeta(0-) = zeta(0)`).
    pub fn left_values(&self, grid: &TimeGrid) -> Vec<[f64; 2]> {
        let jumps = pair(|i| self.measure[i].on_grid(grid).map(|g| g.atoms).unwrap_or_else(|_| vec![0.0; grid.len()]));
        self.node_values(grid).into_iter().enumerate().map(|(k, v)| [v[0] - jumps[0][k], v[1] - jumps[1][k]]).collect()
    }
}
