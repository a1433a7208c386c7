use approx::assert_abs_diff_eq;
use cbve::solver::{
    check_flow, check_flow_with_cells, gronwall_bound, h_transform_params, h_transform_solution, solve_general,
    solve_special, solve_special_picard, solve_special_picard_traced, solve_system, special_estimate_rho,
    upper_bound_u, BackwardSystem, Method, SolverOptions, Zeta,
};
use cbve::{Environment, Error, JumpMeasure, SpatialPoint, SpecialForm, Species, StieltjesMeasure, TimeGrid};

fn dens(v: f64) -> StieltjesMeasure {
    StieltjesMeasure::density(1.0, 0.0, 1.0, v).unwrap()
}

fn feller(cells: usize) -> Environment {
    Environment::builder(1.0).b11(dens(1.0)).c1(dens(1.0)).build(cells).unwrap()
}

fn feller_exact(r: f64, lambda: f64) -> f64 {
    let e = (-(1.0 - r)).exp();
    lambda * e / (1.0 + lambda * (1.0 - e))
}

#[test]
fn zero_environment_keeps_lambda() {
    let env = Environment::zero(1.0, 50).unwrap();
    let sol = solve_general(&env, 1.0, [0.3, 2.0], &SolverOptions::default()).unwrap();
    assert_eq!(sol.method, Method::GeneralBackward);
    for (_, v) in sol.rows() {
        assert_eq!(v, [0.3, 2.0]);
    }
}

#[test]
fn feller_matches_riccati() {
    let sol = solve_general(&feller(2000), 1.0, [1.0, 0.0], &SolverOptions::default()).unwrap();
    let v0 = sol.at_node(0);
    assert_abs_diff_eq!(v0[0], 0.225400, epsilon = 1e-6);
    assert_eq!(v0[1], 0.0);
    for (r, v) in sol.rows() {
        assert_abs_diff_eq!(v[0], feller_exact(r, 1.0), epsilon = 1e-6);
    }
    assert_eq!(sol.at_node(2000), [1.0, 0.0]);
}

#[test]
fn feller_second_order() {
    let err = |cells| {
        let sol = solve_general(&feller(cells), 1.0, [2.0, 0.0], &SolverOptions::default()).unwrap();
        sol.rows().map(|(r, v)| (v[0] - feller_exact(r, 2.0)).abs()).fold(0.0, f64::max)
    };
    let ratio = err(100) / err(400);
    assert!(ratio > 12.0, "ratio {ratio}");
}

#[test]
fn bottleneck_annihilates_first_type() {
    let env = Environment::builder(1.0).b11(StieltjesMeasure::point_mass(1.0, 0.5, 1.0).unwrap()).build(10).unwrap();
    let sol = solve_general(&env, 1.0, [3.0, 5.0], &SolverOptions::default()).unwrap();
    for (r, v) in sol.rows() {
        if r < 0.5 {
            assert_eq!(v, [0.0, 5.0]);
        } else {
            assert_eq!(v, [3.0, 5.0]);
        }
    }
    assert_eq!(sol.value_at(0.45).unwrap(), [0.0, 5.0]);
    assert_eq!(sol.left_at_node(5), [0.0, 5.0]);
}

#[test]
fn solver_rejects_bad_input() {
    let bad = Environment::builder(1.0).b11(StieltjesMeasure::point_mass(1.0, 0.5, 2.0).unwrap()).build(10).unwrap();
    assert!(matches!(solve_general(&bad, 1.0, [1.0, 1.0], &SolverOptions::default()), Err(Error::Inadmissible(_))));
    let env = feller(10);
    assert!(matches!(solve_general(&env, 1.0, [-1.0, 0.0], &SolverOptions::default()), Err(Error::Domain(_))));
    assert!(solve_general(&env, 0.55, [1.0, 0.0], &SolverOptions::default()).is_err());
    let opts = SolverOptions { cell_fixed_point_iters: 0, ..Default::default() };
    assert!(solve_general(&env, 1.0, [1.0, 0.0], &opts).is_err());
}

#[test]
fn overflow_is_reported() {
    let env = Environment::builder(1.0).b11(dens(-800.0)).build(2).unwrap();
    let err = solve_general(&env, 1.0, [1.0, 0.0], &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Overflow { .. }), "{err:?}");
}

#[test]
fn coarse_grid_negativity_is_a_discretization_error() {
    let env = Environment::builder(1.0).c1(dens(1000.0)).build(2).unwrap();
    let err = solve_general(&env, 1.0, [10.0, 0.0], &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Discretization { .. }), "{err:?}");
}

#[test]
fn picard_trivial() {
    let sf = SpecialForm::zero(1.0, 20).unwrap();
    let sol = solve_special_picard(&sf, 1.0, [1.5, 0.5], &SolverOptions::default()).unwrap();
    assert_eq!(sol.iterations_used, 1);
    assert_eq!(sol.method, Method::SpecialPicard);
    for (_, v) in sol.rows() {
        assert_eq!(v, [1.5, 0.5]);
    }
}

#[test]
fn picard_linear_cross_term() {
    let sf = SpecialForm::builder(1.0).gamma12(dens(1.0)).build(100).unwrap();
    let sol = solve_special_picard(&sf, 1.0, [0.0, 1.0], &SolverOptions::default()).unwrap();
    for (r, v) in sol.rows() {
        assert_abs_diff_eq!(v[0], 1.0 - r, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 1.0, epsilon = 0.0);
    }
}

#[test]
fn picard_matches_scalar_ode() {
    let l0 = 0.7;
    let sf = SpecialForm::builder(1.0)
        .mu1(JumpMeasure::kernel(1.0, 0.0, 1.0, vec![SpatialPoint::new(1.0, 0.0, 1.0)]).unwrap())
        .build(1000)
        .unwrap();
    let sol = solve_special_picard(&sf, 1.0, [l0, 0.0], &SolverOptions::default()).unwrap();
    // e^v - 1 grows like e^{t - r}
    for (r, v) in sol.rows() {
        let exact = ((l0.exp() - 1.0) * (1.0 - r).exp()).ln_1p();
        assert_abs_diff_eq!(v[0], exact, epsilon = 1e-6);
        assert_eq!(v[1], 0.0);
    }
}

#[test]
fn picard_iterates_monotone_and_bounded() {
    let sf = SpecialForm::builder(1.0)
        .gamma11(dens(-1.5).add(&StieltjesMeasure::point_mass(1.0, 0.4, -0.6).unwrap()))
        .gamma22(dens(0.8))
        .gamma12(dens(0.5))
        .gamma21(StieltjesMeasure::point_mass(1.0, 0.7, 0.3).unwrap())
        .mu1(JumpMeasure::kernel(1.0, 0.0, 1.0, vec![SpatialPoint::new(1.0, 0.5, 2.0)]).unwrap())
        .mu2(JumpMeasure::point_atom(1.0, 0.2, vec![SpatialPoint::new(0.3, 0.0, 1.0)]).unwrap())
        .build(200)
        .unwrap();
    let (sol, trace) = solve_special_picard_traced(&sf, 1.0, [1.0, 2.0], &SolverOptions::default()).unwrap();
    assert!(trace.min_increment.iter().all(|&d| d >= -1e-12));
    assert!(trace.max_value.iter().all(|&m| m <= trace.bound + 1e-9));
    assert!(sol.max_residual < 1e-12);

    let opts = SolverOptions { cell_fixed_point_iters: 6, ..Default::default() };
    let general = solve_general(&sf.to_general().unwrap(), 1.0, [1.0, 2.0], &opts).unwrap();
    for k in 0..=200 {
        let (a, b) = (sol.at_node(k), general.at_node(k));
        assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-8);
        assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-8);
    }
}

#[test]
fn picard_reports_non_convergence() {
    let sf = SpecialForm::builder(1.0).gamma12(dens(5.0)).gamma21(dens(5.0)).build(50).unwrap();
    let opts = SolverOptions { picard_max_iter: 3, ..Default::default() };
    let err = solve_special_picard(&sf, 1.0, [1.0, 1.0], &opts).unwrap_err();
    assert!(matches!(err, Error::NonConvergence { iterations: 3, residual } if residual > 1e-12));
}

#[test]
fn h_transform_examples() {
    let sf = SpecialForm::zero(1.0, 10).unwrap();
    let sys = BackwardSystem::from_special(&sf).unwrap();
    let same = h_transform_params(&sf, &Zeta::zero(1.0)).unwrap();
    assert!(same.is_zero() && sys.is_zero());

    let zeta = Zeta::new([dens(0.7), StieltjesMeasure::zero(1.0)]);
    let t = h_transform_params(&sf, &zeta).unwrap();
    for c in 0..10 {
        assert_abs_diff_eq!(t.diag(c)[0], -0.7, epsilon = 1e-15);
        assert_eq!(t.diag(c)[1], 0.0);
    }

    let zeta = Zeta::new([StieltjesMeasure::point_mass(1.0, 0.5, 2f64.ln()).unwrap(), StieltjesMeasure::zero(1.0)]);
    let t = h_transform_params(&sf, &zeta).unwrap();
    assert_abs_diff_eq!(t.atom(5).unwrap().diag[0], -0.5, epsilon = 1e-15);
}

#[test]
fn h_transform_solution_examples() {
    let sf = SpecialForm::builder(1.0).gamma12(dens(1.0)).gamma22(dens(-0.5)).build(40).unwrap();
    let opts = SolverOptions::default();
    let u = solve_special(&sf, 1.0, [0.5, 1.0], &opts).unwrap();
    let same = h_transform_solution(&u, &Zeta::zero(1.0), [0.5, 1.0]).unwrap();
    assert_eq!(same.values(), u.values());

    let v = h_transform_solution(&u, &Zeta::constant(1.0, [2f64.ln(), 0.0]), [1.0, 1.0]).unwrap();
    for k in 0..=40 {
        assert_abs_diff_eq!(v.at_node(k)[0], 2.0 * u.at_node(k)[0], epsilon = 1e-15);
        assert_eq!(v.at_node(k)[1], u.at_node(k)[1]);
    }
    assert!(matches!(h_transform_solution(&u, &Zeta::constant(1.0, [1.0, 0.0]), [0.5, 1.0]), Err(Error::Contract(_))));
}

#[test]
fn h_transform_round_trip() {
    let sf = SpecialForm::builder(1.0)
        .gamma11(dens(0.4))
        .gamma12(dens(1.0))
        .gamma21(StieltjesMeasure::point_mass(1.0, 0.3, 0.5).unwrap())
        .mu1(JumpMeasure::kernel(1.0, 0.0, 1.0, vec![SpatialPoint::new(1.0, 2.0, 1.5)]).unwrap())
        .mu2(JumpMeasure::point_atom(1.0, 0.6, vec![SpatialPoint::new(0.5, 0.5, 1.0)]).unwrap())
        .build(400)
        .unwrap();
    let zeta = Zeta::new([
        dens(0.9).add(&StieltjesMeasure::point_mass(1.0, 0.6, 0.3).unwrap()),
        dens(-0.4).add(&StieltjesMeasure::point_mass(1.0, 0.3, -0.2).unwrap()),
    ]);
    let lambda = [0.8, 1.3];
    let opts = SolverOptions::default();
    let zt = zeta.value(1.0).unwrap();
    let u = solve_special(&sf, 1.0, [lambda[0] * (-zt[0]).exp(), lambda[1] * (-zt[1]).exp()], &opts).unwrap();
    let mapped = h_transform_solution(&u, &zeta, lambda).unwrap();
    let direct = solve_system(&h_transform_params(&sf, &zeta).unwrap(), 1.0, lambda, 0.0, &opts).unwrap();
    for k in 0..=400 {
        for i in 0..2 {
            assert_abs_diff_eq!(mapped.at_node(k)[i], direct.at_node(k)[i], epsilon = 1e-8);
            assert_abs_diff_eq!(mapped.left_at_node(k)[i], direct.left_at_node(k)[i], epsilon = 1e-8);
        }
    }
}

#[test]
fn gronwall_examples() {
    let grid = TimeGrid::uniform(1.0, 1000).unwrap();
    let zero = StieltjesMeasure::zero(1.0);
    let one = |_: f64| 1.0;
    let two = |s: f64| 2.0 + s;
    let b = gronwall_bound([[&zero, &zero], [&zero, &zero]], [&two, &one], &grid, 0.5).unwrap();
    assert_eq!(b, [2.5, 1.0]);

    let d = dens(1.0);
    let b = gronwall_bound([[&d, &zero], [&zero, &zero]], [&one, &one], &grid, 1.0).unwrap();
    assert_abs_diff_eq!(b[0], 1f64.exp(), epsilon = 1e-12);
    assert_abs_diff_eq!(b[1], 1.0, epsilon = 1e-15);

    let b = gronwall_bound([[&zero, &d], [&d, &zero]], [&one, &one], &grid, 1.0).unwrap();
    assert_abs_diff_eq!(b[0], 2.0 * 0.5f64.exp(), epsilon = 1e-12);
    assert_abs_diff_eq!(b[1], 2.0 * 0.5f64.exp(), epsilon = 1e-12);

    let neg = dens(-1.0);
    assert!(gronwall_bound([[&neg, &zero], [&zero, &zero]], [&one, &one], &grid, 1.0).is_err());
}

#[test]
fn gronwall_with_atoms_dominates_solution() {
    // u_1 = 1 + int u_1 dbeta_11 over (r, 1] with an atom: exact value 2e
    let beta = dens(1.0).add(&StieltjesMeasure::point_mass(1.0, 0.5, 1.0).unwrap());
    let grid = TimeGrid::uniform(1.0, 10).unwrap();
    let zero = StieltjesMeasure::zero(1.0);
    let one = |_: f64| 1.0;
    let b = gronwall_bound([[&beta, &zero], [&zero, &zero]], [&one, &one], &grid, 1.0).unwrap();
    assert_abs_diff_eq!(b[0], 2f64.exp(), epsilon = 1e-12);
    assert!(b[0] >= 2.0 * 1f64.exp());
}

#[test]
fn rho_examples() {
    assert_eq!(special_estimate_rho(&SpecialForm::zero(1.0, 10).unwrap(), 1.0).unwrap(), 0.0);
    let sf = SpecialForm::builder(1.0).gamma12(dens(1.0)).build(10).unwrap();
    assert_abs_diff_eq!(special_estimate_rho(&sf, 1.0).unwrap(), 1.0, epsilon = 1e-15);
    let sf = SpecialForm::builder(1.0)
        .gamma11(dens(-1.0))
        .mu1(JumpMeasure::kernel(1.0, 0.0, 1.0, vec![SpatialPoint::new(1.0, 0.0, 1.0)]).unwrap())
        .build(10)
        .unwrap();
    assert_eq!(special_estimate_rho(&sf, 1.0).unwrap(), 0.0);
}

#[test]
fn upper_bound_examples() {
    let env = Environment::zero(1.0, 10).unwrap();
    assert_eq!(upper_bound_u(&env, Species::One, 0.0, 1.0, [1.0, 0.0]).unwrap(), 1.0);
    let env = Environment::builder(1.0).b12(dens(1.0)).build(10).unwrap();
    let u = upper_bound_u(&env, Species::One, 0.0, 1.0, [1.0, 1.0]).unwrap();
    assert_abs_diff_eq!(u, 2.0 * 2f64.sqrt(), epsilon = 1e-14);
    let sol = solve_general(&feller(200), 1.0, [1.0, 0.0], &SolverOptions::default()).unwrap();
    let u1 = upper_bound_u(&feller(200), Species::One, 0.0, 1.0, [1.0, 0.0]).unwrap();
    assert!(sol.at_node(0)[0] <= u1);
}

#[test]
fn flow_examples() {
    let opts = SolverOptions::default();
    let zero = Environment::zero(1.0, 100).unwrap();
    assert_eq!(check_flow(&zero, 0.0, 0.5, 1.0, [1.0, 2.0], &opts).unwrap(), 0.0);
    let env = feller(10_000);
    assert_eq!(check_flow(&env, 0.2, 1.0, 1.0, [1.0, 2.0], &opts).unwrap(), 0.0);
    let res = check_flow(&env, 0.0, 0.5, 1.0, [1.0, 0.0], &opts).unwrap();
    assert!(res <= 1e-6, "residual {res}");
    let coarse = check_flow_with_cells(&env, 0.0, 0.5, 1.0, [1.0, 0.0], 20, &opts).unwrap();
    assert!(coarse > res);
    assert!(check_flow(&env, 0.5, 0.2, 1.0, [1.0, 0.0], &opts).is_err());
}
