//! Numerical check of the composition property `v_{r,t} = v_{r,s} o v_{s,t}`.
//!
//! Each of the three solves runs on its own grid with `cells` uniform cells
//! across its interval, so the residual measures discretization error
//! instead of repeating the same arithmetic.

use super::SolverOptions;
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Grid with `cells` uniform cells on `[a, b]`, single cells elsewhere, and
/// every breakpoint of `env`.
pub fn leg_grid(env: &Environment, a: f64, b: f64, cells: usize) -> Result<TimeGrid> {
    let horizon = env.horizon();
    let mut required = env.breakpoints();
    required.extend([a, b]);
    TimeGrid::build_segmented(horizon, &[(0.0, a, 1), (a, b, cells), (b, horizon, 1)], &required)
}

fn leg(env: &Environment, a: f64, b: f64, lambda: [f64; 2], cells: usize, opts: &SolverOptions) -> Result<[f64; 2]> {
    if a == b {
        return Ok(lambda);
    }
    let local = env.with_grid(leg_grid(env, a, b, cells)?)?;
    let sol = super::solve_system(&super::BackwardSystem::from_environment(&local)?, b, lambda, a, opts)?;
    Ok(sol.at_node(sol.node_range().0))
}

/// Max componentwise gap between `v_{r,s}(v_{s,t}(lambda))` and
/// `v_{r,t}(lambda)`, each leg on `cells` cells.
pub fn check_flow_with_cells(
    env: &Environment,
    r: f64,
    s: f64,
    t: f64,
    lambda: [f64; 2],
    cells: usize,
    opts: &SolverOptions,
) -> Result<f64> {
    if !(0.0 <= r && r <= s && s <= t && t <= env.horizon()) {
        return Err(Error::Domain(format!("need 0 <= r <= s <= t <= T, got {r}, {s}, {t}")));
    }
    env.ensure_admissible()?;
    let inner = leg(env, s, t, lambda, cells, opts)?;
    let composed = leg(env, r, s, inner, cells, opts)?;
    let direct = leg(env, r, t, lambda, cells, opts)?;
    Ok((composed[0] - direct[0]).abs().max((composed[1] - direct[1]).abs()))
}

/// [`check_flow_with_cells`] with the base cell count of `env`.
pub fn check_flow(env: &Environment, r: f64, s: f64, t: f64, lambda: [f64; 2], opts: &SolverOptions) -> Result<f64> {
    check_flow_with_cells(env, r, s, t, lambda, env.base_cells(), opts)
}
