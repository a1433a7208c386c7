//! First moments `pi_{r,t}(lambda)` from the linear backward system
//!
//! `pi_i(r) = lambda_i + int_(r,t] pi_j dbbar_ij - int_(r,t] pi_i db_ii`.
//!
//! Coefficient densities are constant on grid cells, so each cell is one
//! matrix exponential; atoms are applied exactly.

use crate::environment::{Environment, Species};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{expm2, mat_vec, Mat2};
use crate::solver::{solve_general, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSolution {
    pub t: f64,
    pub lambda: [f64; 2],
    pub grid: TimeGrid,
    pi: Vec<[f64; 2]>,
    pi_left: Vec<[f64; 2]>,
}

impl MomentSolution {
    /// Last covered node; the first is always node 0.
    pub fn last_node(&self) -> usize {
        self.pi.len() - 1
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.pi
    }

    pub fn at_node(&self, k: usize) -> [f64; 2] {
        self.pi[k]
    }

    pub fn left_at_node(&self, k: usize) -> [f64; 2] {
        self.pi_left[k]
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, [f64; 2])> + '_ {
        self.pi.iter().enumerate().map(|(k, p)| (self.grid.node(k), *p))
    }

    /// `pi_{r,t}` with step interpolation from the right between nodes.
    pub fn value_at(&self, r: f64) -> Result<[f64; 2]> {
        let tol = 1e-12 * self.grid.horizon();
        if !(r >= -tol && r <= self.t + tol) {
            return Err(Error::Domain(format!("r = {r} outside [0, {}]", self.t)));
        }
        if let Some(k) = self.grid.index_of(r) {
            return Ok(self.pi[k]);
        }
        Ok(self.pi_left[self.grid.ceil_index(r).expect("r inside the grid")])
    }
}

/// Node values and left limits.
type Sweep = (Vec<[f64; 2]>, Vec<[f64; 2]>);

fn sweep(env: &Environment, kt: usize, lambda: [f64; 2]) -> Result<Sweep> {
    let grid = env.grid();
    let diag = [env.b_diag(Species::One).on_grid(grid)?, env.b_diag(Species::Two).on_grid(grid)?];
    let cross = [env.bbar(Species::One).on_grid(grid)?, env.bbar(Species::Two).on_grid(grid)?];
    let mut pi = vec![[0.0; 2]; kt + 1];
    let mut left = vec![[0.0; 2]; kt + 1];
    let mut cur = lambda;
    pi[kt] = cur;
    for k in (1..=kt).rev() {
        cur = [
            cur[0] - diag[0].atoms[k] * cur[0] + cross[0].atoms[k] * cur[1],
            cur[1] - diag[1].atoms[k] * cur[1] + cross[1].atoms[k] * cur[0],
        ];
        left[k] = cur;
        let c = k - 1;
        let h = grid.cell_width(c);
        let a: Mat2 =
            [[-diag[0].density[c] * h, cross[0].density[c] * h], [cross[1].density[c] * h, -diag[1].density[c] * h]];
        cur = mat_vec(&expm2(&a), cur);
        if !(cur[0].is_finite() && cur[1].is_finite()) {
            return Err(Error::Overflow { time: grid.node(c) });
        }
        pi[c] = cur;
    }
    left[0] = pi[0];
    Ok((pi, left))
}

/// Solves for `pi_{r,t}(lambda)` at every node `r <= t`. Negative entries of
/// `lambda` are handled by solving the two axis problems with `|lambda_i|`
/// and recombining with signs.
pub fn solve_moment(env: &Environment, t: f64, lambda: [f64; 2]) -> Result<MomentSolution> {
    env.ensure_admissible()?;
    if lambda.iter().any(|l| !l.is_finite()) {
        return Err(Error::Domain(format!("lambda must be finite, got {lambda:?}")));
    }
    let kt = env.grid().require_node(t, "t")?;
    let mut pi = vec![[0.0; 2]; kt + 1];
    let mut pi_left = vec![[0.0; 2]; kt + 1];
    for i in 0..2 {
        if lambda[i] == 0.0 {
            continue;
        }
        let mut axis = [0.0; 2];
        axis[i] = lambda[i].abs();
        let sign = lambda[i].signum();
        let (p, l) = sweep(env, kt, axis)?;
        for k in 0..=kt {
            for j in 0..2 {
                pi[k][j] += sign * p[k][j];
                pi_left[k][j] += sign * l[k][j];
            }
        }
    }
    pi[kt] = lambda;
    Ok(MomentSolution { t, lambda, grid: env.grid().clone(), pi, pi_left })
}

/// Largest node-wise gap between `v_{r,t}(h lambda) / h` and `pi_{r,t}(lambda)`
/// per type, divided by `max(1, sup |pi_i|)`.
pub fn finite_diff_check(
    env: &Environment,
    t: f64,
    lambda: [f64; 2],
    h: f64,
    opts: &SolverOptions,
) -> Result<[f64; 2]> {
    if !(h > 0.0 && h <= 0.1) {
        return Err(Error::Domain(format!("h must lie in (0, 0.1], got {h}")));
    }
    let pi = solve_moment(env, t, lambda)?;
    let v = solve_general(env, t, [h * lambda[0], h * lambda[1]], opts)?;
    let mut gap = [0.0f64; 2];
    let mut size = [1.0f64; 2];
    for k in 0..=pi.last_node() {
        let (p, w) = (pi.at_node(k), v.at_node(k));
        for i in 0..2 {
            gap[i] = gap[i].max((w[i] / h - p[i]).abs());
            size[i] = size[i].max(p[i].abs());
        }
    }
    Ok([gap[0] / size[0], gap[1] / size[1]])
}

/// `<x, pi_{r,t}(lambda)>`: the mean of `<lambda, X_t>` given `X_r = x`.
pub fn mean_of_transition(env: &Environment, r: f64, t: f64, x: [f64; 2], lambda: [f64; 2]) -> Result<f64> {
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain(format!("x must be nonnegative, got {x:?}")));
    }
    if r > t {
        return Err(Error::Domain(format!("r = {r} > t = {t}")));
    }
    let p = solve_moment(env, t, lambda)?.value_at(r)?;
    Ok(x[0] * p[0] + x[1] * p[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::StieltjesMeasure;
    use approx::assert_abs_diff_eq;

    fn dens(v: f64) -> StieltjesMeasure {
        StieltjesMeasure::density(1.0, 0.0, 1.0, v).unwrap()
    }

    #[test]
    fn zero_env() {
        let env = Environment::zero(1.0, 20).unwrap();
        let p = solve_moment(&env, 1.0, [1.0, -2.0]).unwrap();
        assert!(p.values().iter().all(|v| *v == [1.0, -2.0]));
        assert_eq!(mean_of_transition(&env, 0.0, 1.0, [2.0, 1.0], [1.0, -2.0]).unwrap(), 0.0);
        assert_eq!(mean_of_transition(&env, 0.3, 1.0, [0.0, 0.0], [1.0, 5.0]).unwrap(), 0.0);
        let r = finite_diff_check(&env, 1.0, [1.0, 2.0], 1e-3, &SolverOptions::default()).unwrap();
        assert!(r[0] < 1e-12 && r[1] < 1e-12);
    }

    #[test]
    fn nilpotent_cross() {
        let env = Environment::builder(1.0).b12(dens(1.0)).build(50).unwrap();
        let p = solve_moment(&env, 1.0, [0.5, 2.0]).unwrap();
        for (r, v) in p.rows() {
            assert_abs_diff_eq!(v[0], 0.5 + (1.0 - r) * 2.0, epsilon = 1e-13);
            assert_eq!(v[1], 2.0);
        }
    }

    #[test]
    fn scalar_decay() {
        let env = Environment::builder(1.0).b11(dens(1.3)).build(1000).unwrap();
        let p = solve_moment(&env, 1.0, [2.0, 0.0]).unwrap();
        for (r, v) in p.rows() {
            assert_abs_diff_eq!(v[0], 2.0 * (-1.3 * (1.0 - r)).exp(), epsilon = 1e-6);
        }
    }

    #[test]
    fn atoms_and_left_limits() {
        let env = Environment::builder(1.0)
            .b11(StieltjesMeasure::point_mass(1.0, 0.5, 0.25).unwrap())
            .b12(StieltjesMeasure::point_mass(1.0, 0.5, 1.0).unwrap())
            .build(4)
            .unwrap();
        let p = solve_moment(&env, 1.0, [1.0, 1.0]).unwrap();
        assert_eq!(p.at_node(2), [1.0, 1.0]);
        assert_eq!(p.left_at_node(2), [1.75, 1.0]);
        assert_eq!(p.value_at(0.3).unwrap(), [1.75, 1.0]);
        assert!(p.value_at(1.5).is_err());
    }

    #[test]
    fn finite_difference_rejects_bad_h() {
        let env = Environment::zero(1.0, 4).unwrap();
        assert!(finite_diff_check(&env, 1.0, [1.0, 1.0], 0.0, &SolverOptions::default()).is_err());
        assert!(finite_diff_check(&env, 1.0, [1.0, 1.0], 0.5, &SolverOptions::default()).is_err());
    }
}
