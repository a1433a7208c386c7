//! A-priori bounds: the two-type Gronwall estimate, `rho` of the special
//! system and the upper bound `U_i` of the general solution.

use crate::environment::{Environment, SpecialForm, Species};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::measure::{GridMeasure, StieltjesMeasure};

/// `int_(kr, kt] f dmu` where the density part uses the trapezoid rule on
/// the right value at the left end and the left limit at the right end.
fn trapezoid(grid: &TimeGrid, m: &GridMeasure, f: &[f64], f_left: &[f64], kr: usize, kt: usize) -> f64 {
    let mut sum = 0.0;
    for k in kr + 1..=kt {
        let c = k - 1;
        sum += 0.5 * m.density[c] * grid.cell_width(c) * (f[c] + f_left[k]) + m.atoms[k] * f[k];
    }
    sum
}

/// Right side of the two-type Gronwall inequality at `t` for both types.
///
/// `beta[i][j]` are nondecreasing measures, `a` nondecreasing nonnegative
/// functions; integrals are node quadratures on `grid`. Using `a` at the
/// right value of every node only makes the bound larger.
pub fn gronwall_bound(
    beta: [[&StieltjesMeasure; 2]; 2],
    a: [&dyn Fn(f64) -> f64; 2],
    grid: &TimeGrid,
    t: f64,
) -> Result<[f64; 2]> {
    let kt = grid.require_node(t, "t")?;
    for row in &beta {
        for b in row {
            if !b.is_nonnegative() {
                return Err(Error::Domain("Gronwall measures must be nondecreasing".into()));
            }
        }
    }
    let gm: Vec<Vec<GridMeasure>> = beta
        .iter()
        .map(|row| row.iter().map(|b| b.on_grid(grid)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let nodes = grid.nodes();
    let a_vals: Vec<Vec<f64>> = a.iter().map(|f| nodes.iter().map(|&s| f(s)).collect()).collect();

    let mut out = [0.0; 2];
    for i in 0..2 {
        let j = 1 - i;
        let cum_jj = gm[j][j].cumulative_at_nodes(grid);
        let exp_jj: Vec<f64> = cum_jj.iter().map(|c| c.exp()).collect();
        let exp_jj_left: Vec<f64> = (0..grid.len()).map(|k| (cum_jj[k] - gm[j][j].atoms[k]).exp()).collect();

        let w: Vec<f64> = (0..grid.len()).map(|k| a_vals[j][k] * exp_jj[k]).collect();
        let w_left: Vec<f64> = (0..grid.len()).map(|k| a_vals[j][k] * exp_jj_left[k]).collect();
        let d = a_vals[i][kt] + trapezoid(grid, &gm[i][j], &w, &w_left, 0, kt);

        // inner(s) = int_(s,t] e^{beta_jj} dbeta_ij, with its left limits
        let mut inner = vec![0.0; kt + 1];
        let mut inner_left = vec![0.0; kt + 1];
        let mut acc = 0.0;
        for k in (1..=kt).rev() {
            inner[k] = acc;
            acc += gm[i][j].atoms[k] * exp_jj[k];
            inner_left[k] = acc;
            let c = k - 1;
            acc += 0.5 * gm[i][j].density[c] * grid.cell_width(c) * (exp_jj[c] + exp_jj_left[k]);
        }
        inner[0] = acc;
        inner_left[0] = acc;
        let double = trapezoid(grid, &gm[j][i], &inner, &inner_left, 0, kt);
        let beta_ii = gm[i][i].cumulative_at_nodes(grid)[kt];
        out[i] = d * (double + beta_ii).exp();
    }
    Ok(out)
}

/// `rho(t)` of the special system: total variations of
/// `rho_i = gamma_ii + int z_i mu_i` (taken as one measure), plus
/// `gamma_12`, `gamma_21` and the cross moments of `mu`.
pub fn special_estimate_rho(sf: &SpecialForm, t: f64) -> Result<f64> {
    let mut total = 0.0;
    for i in Species::BOTH {
        let k = i.index();
        let own = sf.mu(i).moment_measure(|z| z[k]);
        let rho_i = sf.gamma_diag(i).add(&own);
        total += rho_i.total_variation(t)?;
        total += sf.gamma_cross(i).cumulative(t)?;
        total += sf.mu(i).moment_measure(|z| z[1 - k]).cumulative(t)?;
    }
    Ok(total)
}

/// `U_i(r, t, lambda)`, with `|lambda|` the Euclidean norm.
pub fn upper_bound_u(env: &Environment, i: Species, r: f64, t: f64, lambda: [f64; 2]) -> Result<f64> {
    if r > t + 1e-12 * env.horizon() {
        return Err(Error::Domain(format!("r = {r} > t = {t}")));
    }
    let j = i.other();
    let norm = lambda[0].hypot(lambda[1]);
    let bbar_ij = env.bbar(i).cumulative(t)?;
    let var_jj = env.b_diag(j).total_variation(t)?;
    let b12 = env.bbar(Species::One).cumulative(t)?;
    let b21 = env.bbar(Species::Two).cumulative(t)?;
    let v11 = env.b_diag(Species::One).total_variation(t)?;
    let v22 = env.b_diag(Species::Two).total_variation(t)?;
    Ok(norm * (1.0 + bbar_ij) * (var_jj.exp() * b12 * b21 + v11 + v22).exp())
}
