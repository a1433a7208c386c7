//! Branching-mechanism functionals.

use crate::environment::{build_phi_n, moment_weight, Environment, SpecialForm, Species};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::jump::{GridJump, SpatialPoint};
use crate::measure::{EndpointRule, GridMeasure, StieltjesMeasure};

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `e^{-x} - 1 + x`, accurate for small `x`.
pub fn k_scalar(x: f64) -> f64 {
    if x.abs() < 0.5 {
        // sum_{k>=2} (-x)^k / k!
        let mut term = 0.5 * x * x;
        let mut sum = term;
        let mut k = 2.0;
        while term.abs() > 1e-18 * sum.abs() && k < 40.0 {
            k += 1.0;
            term *= -x / k;
            sum += term;
        }
        sum
    } else {
        (-x).exp_m1() + x
    }
}

/// `K_i(lambda, z) = e^{-<lambda, z>} - 1 + lambda_i z_i`.
pub fn kernel_ki(i: Species, lambda: [f64; 2], z: [f64; 2]) -> f64 {
    let k = i.index();
    let x = dot(lambda, z);
    k_scalar(x) - lambda[1 - k] * z[1 - k]
}

/// `K(lambda, z) = e^{-<lambda, z>} - 1 + <lambda, z>`.
pub fn kernel_k(lambda: [f64; 2], z: [f64; 2]) -> f64 {
    k_scalar(dot(lambda, z))
}

/// `1 - e^{-x}` without cancellation.
pub(crate) fn one_minus_exp(x: f64) -> f64 {
    -(-x).exp_m1()
}

pub(crate) fn sum_k(points: &[SpatialPoint], f: [f64; 2]) -> f64 {
    points.iter().fold(0.0, |acc, p| acc + k_scalar(p.dot(f)) * p.weight)
}

pub(crate) fn sum_one_minus_exp(points: &[SpatialPoint], f: [f64; 2]) -> f64 {
    points.iter().fold(0.0, |acc, p| acc + one_minus_exp(p.dot(f)) * p.weight)
}

/// Nonnegative pair-valued function on the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFunction {
    grid: TimeGrid,
    values: Vec<[f64; 2]>,
}

impl VectorFunction {
    pub fn new(grid: TimeGrid, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Contract(format!(
                "vector function has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) =
            values.iter().position(|v| !(v[0] >= 0.0 && v[1] >= 0.0 && v[0].is_finite() && v[1].is_finite()))
        {
            return Err(Error::Contract(format!("value at node {k} is negative or non-finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: TimeGrid, value: [f64; 2]) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![value; n])
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> [f64; 2]) -> Result<Self> {
        let values = grid.nodes().iter().map(|&s| f(s)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    fn component(&self, k: usize) -> impl Fn(usize) -> f64 + '_ {
        move |n| self.values[n][k]
    }
}

fn node_range(grid: &TimeGrid, f: &VectorFunction, r: f64, t: f64) -> Result<(usize, usize)> {
    if f.grid() != grid {
        return Err(Error::Contract("function and parameters live on different grids".into()));
    }
    if r > t {
        return Err(Error::Domain(format!("r = {r} > t = {t}")));
    }
    Ok((grid.require_node(r, "r")?, grid.require_node(t, "t")?))
}

/// Jump integral over `(kr, kt]` of the node function `g(points, f(node))`.
fn integrate_jumps(
    grid: &TimeGrid,
    jumps: &GridJump,
    f: &VectorFunction,
    kr: usize,
    kt: usize,
    rule: EndpointRule,
    g: impl Fn(&[SpatialPoint], [f64; 2]) -> f64,
) -> f64 {
    let v = f.values();
    let mut sum = 0.0;
    for k in kr + 1..=kt {
        let cell = k - 1;
        let pts = &jumps.kernels[cell];
        if !pts.is_empty() {
            let h = grid.cell_width(cell);
            sum += match rule {
                EndpointRule::Right => h * g(pts, v[k]),
                EndpointRule::Trapezoid => 0.5 * h * (g(pts, v[k - 1]) + g(pts, v[k])),
            };
        }
        if !jumps.atoms[k].is_empty() {
            sum += g(&jumps.atoms[k], v[k]);
        }
    }
    sum
}

fn ensure_valid(env: &Environment) -> Result<()> {
    env.ensure_admissible().map_err(|e| Error::Contract(format!("environment failed validation: {e}")))
}

/// `phi_i(f, (r, t])`.
pub fn phi_eval(env: &Environment, i: Species, f: &VectorFunction, r: f64, t: f64, rule: EndpointRule) -> Result<f64> {
    ensure_valid(env)?;
    let grid = env.grid();
    let (kr, kt) = node_range(grid, f, r, t)?;
    let (k, j) = (i.index(), 1 - i.index());
    let b = env.b_diag(i).on_grid(grid)?;
    let bbar = env.bbar(i).on_grid(grid)?;
    let c = env.c(i).on_grid(grid)?;
    let m = env.m(i).on_grid(grid)?;
    let drift = b.integrate(grid, f.component(k), kr, kt, rule);
    let cross = bbar.integrate(grid, f.component(j), kr, kt, rule);
    let quad = c.integrate(grid, |n| f.values()[n][k].powi(2), kr, kt, rule);
    let jump = integrate_jumps(grid, &m, f, kr, kt, rule, sum_k);
    Ok(drift - cross + quad + jump)
}

/// `phi_i(lambda, {s})`: the contribution of the atoms at `s`.
pub fn phi_atom(env: &Environment, i: Species, lambda: [f64; 2], s: f64) -> f64 {
    let (k, j) = (i.index(), 1 - i.index());
    let jumps = env.m(i).atom_at(s).map_or(0.0, |m| sum_k(m.points(), lambda));
    env.b_diag(i).atom_at(s) * lambda[k] - env.bbar(i).atom_at(s) * lambda[j] + jumps
}

/// `-int f_i dgamma_ii - int f_j dgamma_ij - int int (1 - e^{-<f, z>}) dmu_i`.
pub fn phi_special(
    sf: &SpecialForm,
    i: Species,
    f: &VectorFunction,
    r: f64,
    t: f64,
    rule: EndpointRule,
) -> Result<f64> {
    let grid = sf.grid();
    let (kr, kt) = node_range(grid, f, r, t)?;
    let (k, j) = (i.index(), 1 - i.index());
    let gd = sf.gamma_diag(i).on_grid(grid)?;
    let gc = sf.gamma_cross(i).on_grid(grid)?;
    let mu = sf.mu(i).on_grid(grid)?;
    let diag = gd.integrate(grid, f.component(k), kr, kt, rule);
    let cross = gc.integrate(grid, f.component(j), kr, kt, rule);
    let jump = integrate_jumps(grid, &mu, f, kr, kt, rule, sum_one_minus_exp);
    Ok(-diag - cross - jump)
}

/// `phi_{n,i}(f, (r, t])` through the special form of the ladder.
pub fn phi_n_eval(
    env: &Environment,
    n: u32,
    i: Species,
    f: &VectorFunction,
    r: f64,
    t: f64,
    rule: EndpointRule,
) -> Result<f64> {
    ensure_valid(env)?;
    phi_special(&build_phi_n(env, n)?, i, f, r, t, rule)
}

/// The constants of the Lipschitz estimate for `phi`.
pub fn lipschitz_constants(
    env: &Environment,
    f: &VectorFunction,
    g: &VectorFunction,
    t: f64,
) -> Result<(f64, StieltjesMeasure)> {
    let grid = env.grid();
    if f.grid() != grid || g.grid() != grid {
        return Err(Error::Contract("functions and parameters live on different grids".into()));
    }
    let kt = grid.require_node(t, "t")?;
    let c1 = (0..=kt)
        .map(|n| {
            let (a, b) = (f.values()[n], g.values()[n]);
            a[0] + a[1] + b[0] + b[1]
        })
        .fold(0.0, f64::max)
        + 1.0;
    let mut c2 = StieltjesMeasure::zero(env.horizon());
    for i in Species::BOTH {
        let k = i.index();
        c2 = c2
            .add(env.c(i))
            .add(&env.m(i).moment_measure(|z| moment_weight(k, z)).scaled(2.0))
            .add(&env.b_diag(i).abs())
            .add(env.b_cross(i));
    }
    Ok((c1, c2))
}

/// `C_1 int_(r,t] sup_i |f_i - g_i| dC_2` with the given rule.
pub fn lipschitz_rhs(
    env: &Environment,
    f: &VectorFunction,
    g: &VectorFunction,
    r: f64,
    t: f64,
    rule: EndpointRule,
) -> Result<f64> {
    let grid = env.grid();
    let (kr, kt) = node_range(grid, f, r, t)?;
    let (c1, c2) = lipschitz_constants(env, f, g, t)?;
    let gm: GridMeasure = c2.on_grid(grid)?;
    let diff = |n: usize| {
        let (a, b) = (f.values()[n], g.values()[n]);
        (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
    };
    Ok(c1 * gm.integrate(grid, diff, kr, kt, rule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::JumpMeasure;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_ki(Species::One, [0.0, 0.0], [1.0, 2.0]), 0.0);
        assert_abs_diff_eq!(kernel_ki(Species::One, [1.0, 0.0], [1.0, 0.0]), (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(kernel_ki(Species::One, [0.0, 1.0], [0.0, 1.0]), (-1.0f64).exp() - 1.0, epsilon = 1e-15);
        assert_eq!(kernel_k([0.0, 0.0], [1.0, 1.0]), 0.0);
        assert_abs_diff_eq!(kernel_k([1.0, 1.0], [1.0, 1.0]), (-2.0f64).exp() + 1.0, epsilon = 1e-15);
        // Taylor oracle x^2/2 - x^3/6 at x = 1e-4
        let x: f64 = 1e-4;
        let taylor = x * x / 2.0 - x * x * x / 6.0 + x.powi(4) / 24.0;
        let got = kernel_k([x, 0.0], [1.0, 0.0]);
        assert!((got - taylor).abs() <= 1e-12 * taylor);
        assert!((got - 5e-9).abs() < 1e-12);
    }

    #[test]
    fn k_scalar_is_continuous_at_branch_switch() {
        let below = k_scalar(0.5 - 1e-12);
        let above = k_scalar(0.5 + 1e-12);
        assert!((below - above).abs() < 1e-11);
        assert_abs_diff_eq!(k_scalar(0.3), (-0.3f64).exp() - 1.0 + 0.3, epsilon = 1e-16);
    }

    fn dens(v: f64) -> StieltjesMeasure {
        StieltjesMeasure::density(1.0, 0.0, 1.0, v).unwrap()
    }

    #[test]
    fn phi_examples() {
        let env = Environment::builder(1.0).b11(dens(0.7)).b12(dens(0.4)).c1(dens(2.0)).build(8).unwrap();
        let zero = VectorFunction::constant(env.grid().clone(), [0.0, 0.0]).unwrap();
        assert_eq!(phi_eval(&env, Species::One, &zero, 0.0, 1.0, EndpointRule::Right).unwrap(), 0.0);

        let (beta, gamma, a1, a2) = (0.7, 0.4, 1.5, 2.5);
        let env = Environment::builder(1.0).b11(dens(beta)).b12(dens(gamma)).build(8).unwrap();
        let f = VectorFunction::constant(env.grid().clone(), [a1, a2]).unwrap();
        let got = phi_eval(&env, Species::One, &f, 0.25, 1.0, EndpointRule::Right).unwrap();
        assert_abs_diff_eq!(got, 0.75 * (a1 * beta - a2 * gamma), epsilon = 1e-14);

        let (rho, a) = (1.3, 0.8);
        let env = Environment::builder(1.0)
            .m1(JumpMeasure::kernel(1.0, 0.0, 1.0, vec![SpatialPoint::new(1.0, 0.0, rho)]).unwrap())
            .build(8)
            .unwrap();
        let f = VectorFunction::constant(env.grid().clone(), [a, 0.0]).unwrap();
        let got = phi_eval(&env, Species::One, &f, 0.5, 1.0, EndpointRule::Right).unwrap();
        assert_abs_diff_eq!(got, 0.5 * rho * ((-a).exp() - 1.0 + a), epsilon = 1e-14);
    }

    #[test]
    fn phi_atom_examples() {
        let env = Environment::zero(1.0, 4).unwrap();
        assert_eq!(phi_atom(&env, Species::One, [1.0, 2.0], 0.5), 0.0);

        let env = Environment::builder(1.0).b11(StieltjesMeasure::point_mass(1.0, 0.5, 1.0).unwrap()).build(4).unwrap();
        assert_eq!(phi_atom(&env, Species::One, [3.0, 5.0], 0.5), 3.0);

        let env = Environment::builder(1.0).b12(StieltjesMeasure::point_mass(1.0, 0.5, 0.5).unwrap()).build(4).unwrap();
        assert_eq!(phi_atom(&env, Species::One, [0.0, 2.0], 0.5), -1.0);
    }

    #[test]
    fn lipschitz_examples() {
        let env = Environment::zero(1.0, 4).unwrap();
        let grid = env.grid().clone();
        let z = VectorFunction::constant(grid.clone(), [0.0, 0.0]).unwrap();
        let (c1, c2) = lipschitz_constants(&env, &z, &z, 1.0).unwrap();
        assert_eq!(c1, 1.0);
        assert!(c2.is_zero());

        let f = VectorFunction::constant(grid.clone(), [1.0, 1.0]).unwrap();
        let g = VectorFunction::constant(grid, [2.0, 2.0]).unwrap();
        assert_eq!(lipschitz_constants(&env, &f, &g, 1.0).unwrap().0, 7.0);

        let env = Environment::builder(1.0)
            .m1(JumpMeasure::kernel(1.0, 0.0, 1.0, vec![SpatialPoint::new(0.5, 0.5, 1.0)]).unwrap())
            .build(4)
            .unwrap();
        let z = VectorFunction::constant(env.grid().clone(), [0.0, 0.0]).unwrap();
        let (_, c2) = lipschitz_constants(&env, &z, &z, 1.0).unwrap();
        assert_abs_diff_eq!(c2.density_at(0.5), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn phi_n_matches_direct_formula() {
        // the ladder written with (b, c, m) directly, as an independent oracle
        let env = Environment::builder(1.0)
            .b11(dens(-0.3).add(&StieltjesMeasure::point_mass(1.0, 0.5, 0.4).unwrap()))
            .b12(dens(0.2))
            .c1(dens(0.8))
            .m1(JumpMeasure::kernel(
                1.0,
                0.0,
                1.0,
                vec![SpatialPoint::new(0.3, 0.6, 1.2), SpatialPoint::new(2.0, 0.0, 0.5)],
            )
            .unwrap())
            .build(8)
            .unwrap();
        let f = VectorFunction::from_fn(env.grid().clone(), |s| [1.0 + s, 0.5 * s]).unwrap();
        for n in [1u32, 3, 10] {
            let nf = f64::from(n);
            let en = (-nf).exp();
            let grid = env.grid();
            let mut direct = 0.0;
            for k in 1..grid.len() {
                let h = grid.cell_width(k - 1);
                let mid = 0.5 * (grid.node(k - 1) + grid.node(k));
                let fv = f.values()[k];
                let b = env.b_diag(Species::One);
                let bd = b.density_at(mid);
                let ba = b.atom_at(grid.node(k));
                direct += (bd * h + ba) * fv[0] - en * (bd.abs() * h + ba.abs()) * fv[0];
                direct -= env.bbar(Species::One).density_at(mid) * h * fv[1];
                let c = env.c(Species::One).density_at(mid);
                direct += 2.0 * nf * nf * k_scalar(fv[0] / nf) * c * h;
                for p in env.m(Species::One).kernel_at(mid).points() {
                    let thin = (1.0 - en) * (nf * p.norm()).min(1.0);
                    direct += thin * k_scalar(p.dot(fv)) * p.weight * h;
                }
            }
            let via = phi_n_eval(&env, n, Species::One, &f, 0.0, 1.0, EndpointRule::Right).unwrap();
            assert_abs_diff_eq!(via, direct, epsilon = 1e-12);
        }
    }
}
