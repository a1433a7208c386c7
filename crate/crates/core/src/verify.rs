//! Numerical checks of a single model, reported as pass/fail lines.

use std::fmt;

use log::info;

use crate::config::Model;
use crate::environment::{build_phi_n, Environment, SpecialForm, Species};
use crate::error::Result;
use crate::moments::finite_diff_check;
use crate::simulator::{mc_laplace, mc_mean, SeedSpec};
use crate::solver::{
    check_flow_with_cells, solve_general, solve_special, solve_special_picard_traced, upper_bound_u, SolverOptions,
};

pub const LADDER: [u32; 6] = [1, 2, 4, 8, 16, 32];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub note: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {:<20} value={:.6e} threshold={:.3e}", self.name, self.value, self.threshold)?;
        if !self.note.is_empty() {
            write!(f, "  {}", self.note)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    pub t: f64,
    pub r: f64,
    pub s: f64,
    pub lambda: [f64; 2],
    pub x0: [f64; 2],
    pub paths: usize,
    pub seed: SeedSpec,
    pub refine: usize,
    pub solver: SolverOptions,
}

impl VerifySettings {
    /// `t = T`, `s = T/2`, `r = 0`, `lambda = x0 = (1, 1)`.
    pub fn for_horizon(horizon: f64) -> Self {
        Self {
            t: horizon,
            r: 0.0,
            s: 0.5 * horizon,
            lambda: [1.0, 1.0],
            x0: [1.0, 1.0],
            paths: 10_000,
            seed: SeedSpec::new(0),
            refine: 4,
            solver: SolverOptions::default(),
        }
    }
}

/// Sup-node gap between the solution for `build_phi_n(env, n)` and the
/// solution for `env`, for every `n` in `ns`.
pub fn phi_n_gaps(
    env: &Environment,
    t: f64,
    lambda: [f64; 2],
    ns: &[u32],
    opts: &SolverOptions,
) -> Result<Vec<(u32, f64)>> {
    let v = solve_general(env, t, lambda, opts)?;
    ns.iter()
        .map(|&n| {
            let vn = solve_special(&build_phi_n(env, n)?, t, lambda, opts)?;
            Ok((n, sup_gap(v.values(), vn.values())))
        })
        .collect()
}

pub fn sup_gap(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x[0] - y[0]).abs().max((x[1] - y[1]).abs())).fold(0.0, f64::max)
}

/// Largest `v_i(r) / U_i(r, t, lambda)` over nodes and types (0 when `U = 0`).
pub fn upper_bound_ratio(env: &Environment, t: f64, lambda: [f64; 2], opts: &SolverOptions) -> Result<f64> {
    let sol = solve_general(env, t, lambda, opts)?;
    let mut worst = 0.0f64;
    for (r, v) in sol.rows() {
        for i in Species::BOTH {
            let u = upper_bound_u(env, i, r, t, lambda)?;
            let x = v[i.index()];
            worst = worst.max(if u > 0.0 {
                x / u
            } else if x > 0.0 {
                f64::INFINITY
            } else {
                0.0
            });
        }
    }
    Ok(worst)
}

fn outcome(name: &'static str, passed: bool, value: f64, threshold: f64, note: String) -> CheckOutcome {
    info!("{name}: value {value:e}, passed {passed}");
    CheckOutcome { name, passed, value, threshold, note }
}

fn general_checks(env: &Environment, set: &VerifySettings, out: &mut Vec<CheckOutcome>) -> Result<()> {
    let (r, s, t, lambda, opts) = (set.r, set.s, set.t, set.lambda, &set.solver);
    let cells = env.base_cells();
    let coarse = check_flow_with_cells(env, r, s, t, lambda, cells, opts)?;
    out.push(outcome("flow", coarse <= 1e-5, coarse, 1e-5, format!("{cells} cells per leg")));
    let fine = check_flow_with_cells(env, r, s, t, lambda, cells * set.refine, opts)?;
    let factor = if fine > 0.0 { coarse / fine } else { f64::INFINITY };
    out.push(outcome(
        "flow-refinement",
        factor >= 3.0 || fine <= 1e-12,
        fine,
        1e-12,
        format!("refine {} reduces the residual by {factor:.3}", set.refine),
    ));

    let ratio = upper_bound_ratio(env, t, lambda, opts)?;
    out.push(outcome("upper-bound", ratio <= 1.0, ratio, 1.0, "max v_i / U_i".into()));

    let fd = finite_diff_check(env, t, lambda, 1e-3, opts)?;
    let fd = fd[0].max(fd[1]);
    out.push(outcome("moment-identity", fd <= 5e-3, fd, 5e-3, "h = 1e-3".into()));

    let gaps = phi_n_gaps(env, t, lambda, &LADDER, opts)?;
    let monotone = gaps.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    let last = gaps.last().map_or(0.0, |g| g.1);
    let table: Vec<String> = gaps.iter().map(|(n, g)| format!("{n}:{g:.3e}")).collect();
    out.push(outcome("phi-n-ladder", monotone && last <= 1e-2, last, 1e-2, table.join(" ")));
    Ok(())
}

fn special_checks(sf: &SpecialForm, set: &VerifySettings, out: &mut Vec<CheckOutcome>) -> Result<()> {
    let (t, lambda) = (set.t, set.lambda);
    let (sol, trace) = solve_special_picard_traced(sf, t, lambda, &set.solver)?;
    let min_inc = trace.min_increment.iter().copied().fold(f64::INFINITY, f64::min);
    let excess = trace.max_value.iter().map(|m| m - trace.bound).fold(f64::NEG_INFINITY, f64::max);
    out.push(outcome(
        "picard-monotone",
        min_inc >= -1e-12,
        min_inc,
        -1e-12,
        format!("{} iterations", sol.iterations_used),
    ));
    out.push(outcome("picard-bound", excess <= 1e-9, excess, 1e-9, format!("bound {:.6e}", trace.bound)));

    let opts = SolverOptions { cell_fixed_point_iters: set.solver.cell_fixed_point_iters.max(8), ..set.solver };
    let general = solve_general(&sf.to_general()?, t, lambda, &opts)?;
    let gap = sup_gap(sol.values(), general.values());
    out.push(outcome("special-vs-general", gap <= 1e-8, gap, 1e-8, String::new()));

    let l = mc_laplace(sf, set.x0, t, lambda, set.paths, &set.seed, &set.solver)?;
    out.push(outcome(
        "mc-laplace",
        l.z_score.abs() <= 3.0,
        l.z_score.abs(),
        3.0,
        format!("estimate {:.6e} target {:.6e} se {:.3e}", l.estimate, l.target, l.std_error),
    ));
    let m = mc_mean(sf, set.x0, t, lambda, set.paths, &set.seed)?;
    out.push(outcome(
        "mc-mean",
        m.z_score.abs() <= 3.0,
        m.z_score.abs(),
        3.0,
        format!("estimate {:.6e} target {:.6e} se {:.3e}", m.estimate, m.target, m.std_error),
    ));
    Ok(())
}

/// Runs every check that applies to `model`.
pub fn verify(model: &Model, set: &VerifySettings) -> Result<Vec<CheckOutcome>> {
    let env = model.environment()?;
    env.ensure_admissible()?;
    let mut out = Vec::new();
    general_checks(&env, set, &mut out)?;
    if let Model::Special(sf) = model {
        special_checks(sf, set, &mut out)?;
    }
    Ok(out)
}
