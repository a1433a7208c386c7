//! Backward sweep with exact atoms and an exponential trapezoid rule on cells.
//!
//! On a cell of width `h` the diagonal part is integrated exactly through
//! `E = e^{a h}`; the remaining rate `g` is treated with a predictor
//! `E (y + h g_R(y))` followed by trapezoid corrections
//! `E y + h/2 (E g_R(y) + g_L(p))`.

use super::system::BackwardSystem;
use super::{check_lambda, CumulantSolution, Method, SolverOptions};
use crate::error::{Error, Result};

pub(crate) struct Settle {
    pub tol: f64,
    pub clamps: usize,
}

impl Settle {
    pub(crate) fn apply(&mut self, x: [f64; 2], time: f64) -> Result<[f64; 2]> {
        let mut out = x;
        for (i, v) in out.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::Overflow { time });
            }
            if *v < 0.0 {
                if *v >= -self.tol {
                    *v = 0.0;
                    self.clamps += 1;
                } else {
                    return Err(Error::Discretization { time, component: i + 1, value: *v });
                }
            }
        }
        Ok(out)
    }
}

/// Solves `sys` backward from `t` down to `stop` (both grid nodes).
pub fn solve_system(
    sys: &BackwardSystem,
    t: f64,
    lambda: [f64; 2],
    stop: f64,
    opts: &SolverOptions,
) -> Result<CumulantSolution> {
    opts.validate()?;
    check_lambda(lambda)?;
    let grid = sys.grid();
    let kt = grid.require_node(t, "t")?;
    let first = grid.require_node(stop, "r")?;
    if first > kt {
        return Err(Error::Domain(format!("r = {stop} > t = {t}")));
    }
    let count = kt - first + 1;
    let mut v = vec![[0.0; 2]; count];
    let mut v_left = vec![[0.0; 2]; count];
    let mut settle = Settle { tol: opts.negativity_tol * lambda[0].max(lambda[1]).max(1.0), clamps: 0 };
    let passes = opts.cell_fixed_point_iters;
    let mut max_change = 0.0f64;

    let mut y = lambda;
    v[count - 1] = lambda;
    for k in (first + 1..=kt).rev() {
        let time = grid.node(k);
        let yl = match sys.atom(k) {
            Some(a) => settle.apply(a.left_limit(y), time)?,
            None => y,
        };
        v_left[k - first] = yl;

        let cell = k - 1;
        let h = grid.cell_width(cell);
        let a = sys.diag(cell);
        let e = [(a[0] * h).exp(), (a[1] * h).exp()];
        let gr = sys.right(cell).rate(yl);
        let base = [e[0] * yl[0], e[1] * yl[1]];
        let mut p = [e[0] * (yl[0] + h * gr[0]), e[1] * (yl[1] + h * gr[1])];
        for _ in 1..passes {
            let gl = sys.left(cell).rate(p);
            let next = [base[0] + 0.5 * h * (e[0] * gr[0] + gl[0]), base[1] + 0.5 * h * (e[1] * gr[1] + gl[1])];
            max_change = max_change.max((next[0] - p[0]).abs()).max((next[1] - p[1]).abs());
            p = next;
        }
        y = settle.apply(p, grid.node(cell))?;
        v[cell - first] = y;
    }
    v_left[0] = v[0];

    let mut sol = CumulantSolution::new(t, lambda, grid.clone(), Method::GeneralBackward, first, v, v_left);
    sol.iterations_used = passes;
    sol.max_residual = max_change;
    sol.clamp_events = settle.clamps;
    if settle.clamps > 0 {
        log::info!("{} negative values within tolerance were set to zero", settle.clamps);
    }
    Ok(sol)
}
