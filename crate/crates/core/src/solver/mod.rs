//! Solvers for the backward systems and the estimates around them.

mod backward;
mod bounds;
mod flow;
mod picard;
mod system;

use log::debug;

pub use backward::solve_system;
pub use bounds::{gronwall_bound, special_estimate_rho, upper_bound_u};
pub use flow::{check_flow, check_flow_with_cells, leg_grid};
pub use picard::{solve_special_picard, solve_special_picard_traced, PicardTrace};
pub use system::{AtomCoeffs, BackwardSystem, EndCoeffs, Zeta};

use crate::environment::{Environment, SpecialForm};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Passes per cell: one explicit predictor plus `n - 1` trapezoid
    /// corrections.
    pub cell_fixed_point_iters: usize,
    pub negativity_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { picard_tol: 1e-12, picard_max_iter: 200, cell_fixed_point_iters: 2, negativity_tol: 1e-9 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol > 0.0 && self.negativity_tol > 0.0)
            || self.picard_max_iter == 0
            || self.cell_fixed_point_iters == 0
        {
            return Err(Error::Domain(format!("solver options must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    GeneralBackward,
    SpecialPicard,
}

/// `r -> v_{r,t}(lambda)` on the nodes of `[r_0, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantSolution {
    pub t: f64,
    pub lambda: [f64; 2],
    pub grid: TimeGrid,
    pub method: Method,
    pub iterations_used: usize,
    pub max_residual: f64,
    /// Number of tiny negative values set to zero.
    pub clamp_events: usize,
    first: usize,
    v: Vec<[f64; 2]>,
    v_left: Vec<[f64; 2]>,
}

impl CumulantSolution {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        t: f64,
        lambda: [f64; 2],
        grid: TimeGrid,
        method: Method,
        first: usize,
        v: Vec<[f64; 2]>,
        v_left: Vec<[f64; 2]>,
    ) -> Self {
        Self { t, lambda, grid, method, iterations_used: 0, max_residual: 0.0, clamp_events: 0, first, v, v_left }
    }

    /// Index of the first and last node covered.
    pub fn node_range(&self) -> (usize, usize) {
        (self.first, self.first + self.v.len() - 1)
    }

    /// Values at the covered nodes, starting with node `first`.
    pub fn values(&self) -> &[[f64; 2]] {
        &self.v
    }

    /// Left limits `v_{s-,t}` at the covered nodes.
    pub fn left_limits(&self) -> &[[f64; 2]] {
        &self.v_left
    }

    pub fn at_node(&self, k: usize) -> [f64; 2] {
        self.v[k - self.first]
    }

    pub fn left_at_node(&self, k: usize) -> [f64; 2] {
        self.v_left[k - self.first]
    }

    /// Rows `(r, v_1, v_2)`.
    pub fn rows(&self) -> impl Iterator<Item = (f64, [f64; 2])> + '_ {
        self.v.iter().enumerate().map(|(k, v)| (self.grid.node(k + self.first), *v))
    }

    /// `v_{r,t}` for any `r` in the covered range: node values at nodes,
    /// otherwise the left limit at the next node.
    pub fn value_at(&self, r: f64) -> Result<[f64; 2]> {
        let (a, b) = self.node_range();
        let (ra, rb) = (self.grid.node(a), self.grid.node(b));
        if !(r >= ra - 1e-12 * self.grid.horizon() && r <= rb + 1e-12 * self.grid.horizon()) {
            return Err(Error::Domain(format!("r = {r} outside [{ra}, {rb}]")));
        }
        if let Some(k) = self.grid.index_of(r) {
            return Ok(self.at_node(k));
        }
        let k = self.grid.ceil_index(r).expect("r inside the grid");
        Ok(self.left_at_node(k))
    }
}

pub(crate) fn check_lambda(lambda: [f64; 2]) -> Result<()> {
    if lambda.iter().all(|l| l.is_finite() && *l >= 0.0) {
        Ok(())
    } else {
        Err(Error::Domain(format!("lambda must be finite and nonnegative, got {lambda:?}")))
    }
}

/// Solves the general backward equation on the grid of `env`.
pub fn solve_general(env: &Environment, t: f64, lambda: [f64; 2], opts: &SolverOptions) -> Result<CumulantSolution> {
    let sys = BackwardSystem::from_environment(env)?;
    debug!("general solve on {} cells, t = {t}, lambda = {lambda:?}", env.grid().cells());
    solve_system(&sys, t, lambda, 0.0, opts)
}

/// Solves the special equation with the same backward sweep as the general
/// solver (no Picard iteration).
pub fn solve_special(sf: &SpecialForm, t: f64, lambda: [f64; 2], opts: &SolverOptions) -> Result<CumulantSolution> {
    let sys = BackwardSystem::from_special(sf)?;
    solve_system(&sys, t, lambda, 0.0, opts)
}

/// Coefficients of the equation satisfied by `e^{zeta_i(r)} u_i` when `u`
/// solves the special system of `sf`.
pub fn h_transform_params(sf: &SpecialForm, zeta: &Zeta) -> Result<BackwardSystem> {
    BackwardSystem::from_special(sf)?.h_transform(zeta)
}

/// Maps a solution `u` with terminal value `e^{-zeta(t)} lambda` to
/// `v_i(r) = e^{zeta_i(r)} u_i(r)`.
pub fn h_transform_solution(u: &CumulantSolution, zeta: &Zeta, lambda: [f64; 2]) -> Result<CumulantSolution> {
    let grid = &u.grid;
    let z = zeta.node_values(grid);
    let zl = zeta.left_values(grid);
    let (first, kt) = u.node_range();
    let expected = [lambda[0] * (-z[kt][0]).exp(), lambda[1] * (-z[kt][1]).exp()];
    for i in 0..2 {
        if (expected[i] - u.lambda[i]).abs() > 1e-12 * expected[i].abs().max(1.0) {
            return Err(Error::Contract(format!(
                "solution was computed for terminal value {:?}, expected {expected:?}",
                u.lambda
            )));
        }
    }
    let scale = |k: usize, x: [f64; 2], at: &[[f64; 2]]| [x[0] * at[k][0].exp(), x[1] * at[k][1].exp()];
    let v = (first..=kt).map(|k| scale(k, u.at_node(k), &z)).collect();
    let v_left = (first..=kt).map(|k| scale(k, u.left_at_node(k), &zl)).collect();
    let mut out = CumulantSolution::new(u.t, lambda, grid.clone(), u.method, first, v, v_left);
    out.iterations_used = u.iterations_used;
    out.max_residual = u.max_residual;
    out.clamp_events = u.clamp_events;
    Ok(out)
}
