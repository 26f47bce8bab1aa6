use std::sync::Arc;

use meanrefl_core::reflected::{PicardContext, DEFAULT_PICARD_TOL};
use meanrefl_core::skorokhod::DEFAULT_ROOT_TOL;
use meanrefl_core::*;

fn small(name: &str, n_particles: usize, n_steps: usize) -> ScenarioSpec {
    let mut spec = preset(name).unwrap();
    spec.n_particles = n_particles;
    spec.n_steps = n_steps;
    spec
}

fn sup_ms(a: &[f64], b: &[f64], np: usize) -> f64 {
    a.chunks(np)
        .zip(b.chunks(np))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / np as f64)
        .fold(0.0, f64::max)
}

#[test]
fn frozen_generator_substitutes_previous_iterate() {
    let grid = TimeGrid::new(1.0, 4).unwrap();
    let np = 50;
    let e = simulate_brownian(grid, 1, np, 3).unwrap();
    let mu0 = EmpiricalMeasure::new(1, vec![0.0]).unwrap();

    let mean_only = GeneratorKind::Affine { c0: 0.0, a_y: 0.0, a_mu: 1.0, a_z: 0.0, a_nu: 0.0 }.build(1).unwrap();
    let frozen = freeze_generator(&mean_only, &vec![2.0; 5 * np], &grid, np).unwrap();
    for k in 0..4 {
        let args = DriverArgs { node: k, particle: 7, t: grid.t(k), y: -9.0, mu: &mu0, z: &[0.3], nu: &mu0 };
        assert_eq!(frozen.value(&args), 2.0);
    }

    let y_plus_mean = GeneratorKind::Affine { c0: 0.0, a_y: 1.0, a_mu: 1.0, a_z: 0.0, a_nu: 0.0 }.build(1).unwrap();
    let b: Vec<f64> = (0..=4).flat_map(|k| e.paths_at(k).to_vec()).collect();
    let frozen = freeze_generator(&y_plus_mean, &b, &grid, np).unwrap();
    let k = 3;
    let mean_b = e.paths_at(k).iter().sum::<f64>() / np as f64;
    for i in [0, 11, 49] {
        let args = DriverArgs { node: k, particle: i, t: grid.t(k), y: 0.0, mu: &mu0, z: &[0.0], nu: &mu0 };
        assert!((frozen.value(&args) - (e.path(k, i)[0] + mean_b)).abs() < 1e-14);
    }

    assert!(freeze_generator(&mean_only, &[0.0; 3], &grid, np).is_err());
}

#[test]
fn reversed_data_for_affine_losses_and_terminal_mean() {
    let spec = small("constant_drift_lower_barrier", 400, 10);
    let sc = spec.build().unwrap();
    let ctx = PicardContext::new(&sc).unwrap();
    let y0 = ctx.initial_field(&Initializer::ConditionalTerminal).unwrap();
    let step = picard_step(&ctx, &y0).unwrap();
    let (input, cons) = build_skorokhod_data(&step.backward, &sc.losses, &ctx.ensemble).unwrap();

    let mean_xi = ctx.xi.iter().sum::<f64>() / 400.0;
    assert_eq!(input.values()[0], mean_xi);
    // Recentring cancels under affine losses: lbar = x - 10, rbar = x - 0.5.
    for (t, x) in [(0.0, 0.3), (0.4, -2.0), (1.0, 7.5)] {
        assert!((cons.lower(t, x) - (x - 10.0)).abs() < 1e-12);
        assert!((cons.upper(t, x) - (x - 0.5)).abs() < 1e-12);
    }
    assert_eq!((cons.c(), cons.big_c(), cons.gap()), (1.0, 1.0, 9.5));
}

#[test]
fn deterministic_y_makes_reversed_loss_a_time_flip() {
    let grid = TimeGrid::new(1.0, 4).unwrap();
    let e = simulate_brownian(grid, 1, 10, 1).unwrap();
    let y: Vec<f64> = (0..=4).flat_map(|k| vec![k as f64; 10]).collect();
    let sol = BackwardSolution {
        grid,
        dim: 1,
        n_particles: 10,
        ensemble_seed: 1,
        y,
        z: vec![0.0; 50],
        diagnostics: meanrefl_core::mfbsde::RegressionDiagnostics {
            basis_degree: 0,
            projection_residual: vec![0.0; 4],
            martingale_residual: vec![0.0; 4],
        },
    };
    let losses = LossKind::Arctan { amp: 0.5, levels: Levels { upper: 1.0, upper_drift: 0.5, lower: -1.0, lower_drift: 0.0 } }
        .build(1.0)
        .unwrap();
    let (input, cons) = build_skorokhod_data(&sol, &losses, &e).unwrap();
    assert_eq!(input.values(), &[4.0, 3.0, 2.0, 1.0, 0.0]);
    for j in 0..=4 {
        let t_fwd = grid.t(4 - j);
        for x in [-1.0, 0.2, 3.0] {
            assert!((cons.lower(grid.t(j), x) - losses.lower(t_fwd, x, &[0.0])).abs() < 1e-14);
        }
    }
}

#[test]
fn inactive_barriers_leave_the_unconstrained_solve() {
    let sc = small("inactive_barriers", 500, 20).build().unwrap();
    let ctx = PicardContext::new(&sc).unwrap();
    let y0 = ctx.initial_field(&Initializer::ConditionalTerminal).unwrap();
    let step = picard_step(&ctx, &y0).unwrap();
    assert!(step.k.iter().chain(&step.kr).chain(&step.kl).all(|&v| v == 0.0));
    assert_eq!(step.y, step.backward.y);
    assert_eq!(step.z, step.backward.z);
}

#[test]
fn generator_free_of_y_is_a_fixed_point_after_one_step() {
    let sc = small("constant_drift_lower_barrier", 500, 20).build().unwrap();
    let ctx = PicardContext::new(&sc).unwrap();
    let y0 = ctx.initial_field(&Initializer::ConditionalTerminal).unwrap();
    let s1 = picard_step(&ctx, &y0).unwrap();
    let s2 = picard_step(&ctx, &s1.y).unwrap();
    assert_eq!(s1.y, s2.y);
    assert_eq!(s1.k, s2.k);

    let sol = solve_reflected(&sc).unwrap();
    assert_eq!(sol.iterations(), 2);
    assert_eq!(sol.picard_history[1], 0.0);
}

/// Independent oracle: forward `K` for a mean path kept above `level`, by
/// clipping the reversed path from below with a running minimum.
fn clip_from_below_forward(grid: &TimeGrid, m: impl Fn(f64) -> f64, level: f64) -> Vec<f64> {
    let n = grid.n_steps();
    let mut kbar = Vec::with_capacity(n + 1);
    let mut push = 0.0_f64;
    for j in 0..=n {
        let s = m(grid.t(n - j));
        push = push.max(level - s);
        kbar.push(push);
    }
    (0..=n).map(|k| kbar[n] - kbar[n - k]).collect()
}

#[test]
fn constant_drift_matches_clipping_oracle() {
    let sc = small("constant_drift_lower_barrier", 4000, 50).build().unwrap();
    let sol = solve_reflected(&sc).unwrap();
    let oracle = clip_from_below_forward(&sc.grid, |t| 1.0 - (1.0 - t), 0.5);
    let err = sol.k.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 0.05, "{err}");
    assert!(sol.kl.iter().all(|&v| v == 0.0));

    let mean_y = sol.mean_y();
    let r = &sol.constraint_report;
    for k in 0..=50 {
        assert!(mean_y[k] >= 0.5 - r.tol_total[k], "k = {k}: {}", mean_y[k]);
    }
    assert!(r.satisfied);

    let audit = audit_solution(&sol, &sc).unwrap();
    assert!(audit.hard_invariants_hold());
    assert!(audit.flat_off_nodes_ok);
    let tol = audit.tol_total.iter().cloned().fold(0.0, f64::max);
    assert!(audit.flat_off_total() <= tol * audit.k_variation);
}

#[test]
fn linear_meanfield_mean_grows_exponentially() {
    let sc = small("linear_meanfield", 4000, 50).build().unwrap();
    let sol = solve_reflected(&sc).unwrap();
    assert!(sol.k.iter().all(|&v| v == 0.0));
    let mean_xi = sol.y_at(50).iter().sum::<f64>() / 4000.0;
    for (k, m) in sol.mean_y().iter().enumerate() {
        let exact = mean_xi * (1.0 - sc.grid.t(k)).exp();
        // Explicit Euler bias is about e * dt / 2 = 0.027 at n = 50.
        assert!((m - exact).abs() < 0.04, "k = {k}: {m} vs {exact}");
    }
}

#[test]
fn single_barrier_reduction_matches_running_max() {
    let mut spec = small("mao_log_driver", 2000, 25);
    spec.losses = LossKind::Affine { slope: 1.0, levels: Levels::constant(-1e3, 0.25) };
    let sc = spec.build().unwrap();
    let ctx = PicardContext::new(&sc).unwrap();
    let y0 = ctx.initial_field(&Initializer::ConditionalTerminal).unwrap();
    let step = picard_step(&ctx, &y0).unwrap();
    let (input, cons) = build_skorokhod_data(&step.backward, &sc.losses, &ctx.ensemble).unwrap();

    // Under an affine loss the zero of lbar(t, s + phi) is phi = 0.25 - s.
    let n = sc.grid.n_steps();
    let mut kbar_l = vec![0.0_f64; n + 1];
    for j in 1..=n {
        let phi = 0.25 - input.values()[j];
        kbar_l[j] = kbar_l[j - 1].max(-phi);
    }
    assert!(kbar_l[n] > 0.05, "barrier should bind: {}", kbar_l[n]);
    for k in 0..=n {
        let want = kbar_l[n] - kbar_l[n - k];
        assert!((step.kl[k] - want).abs() <= 10.0 * DEFAULT_ROOT_TOL, "k = {k}");
        assert_eq!(step.kr[k], 0.0);
    }
    assert!(cons.upper(0.0, 0.25) > 0.0);
}

#[test]
fn catalog_scenarios_converge_with_monotone_tail_and_clean_audits() {
    for name in PRESET_NAMES {
        let sc = small(name, 2000, 40).build().unwrap();
        let sol = solve_reflected(&sc).unwrap();
        let h = &sol.picard_history;
        assert!(h.windows(2).skip(1).all(|w| w[1] <= w[0]), "{name}: {h:?}");
        let audit = audit_solution(&sol, &sc).unwrap();
        assert!(audit.hard_invariants_hold(), "{name}");
        assert!(audit.constraints_ok && audit.flat_off_nodes_ok, "{name}: {audit:?}");
        assert!(audit.moment_bound.max_iterate_moment.is_finite());

        // One more step from the limit barely moves it.
        let ctx = PicardContext::new(&sc).unwrap();
        let extra = picard_step(&ctx, &sol.y).unwrap();
        assert!(sup_ms(&extra.y, &sol.y, 2000) <= 10.0 * sc.picard_tol, "{name}");
    }
}

#[test]
fn wide_barriers_have_zero_flat_off() {
    let sc = small("inactive_barriers", 1000, 20).build().unwrap();
    let sol = solve_reflected(&sc).unwrap();
    let audit = audit_solution(&sol, &sc).unwrap();
    assert_eq!(audit.flat_off_total(), 0.0);
    assert_eq!(audit.k_variation, 0.0);
}

#[test]
fn perturbed_k_raises_flat_off_and_breaks_assembly() {
    let sc = small("mao_log_driver", 1000, 20).build().unwrap();
    let sol = solve_reflected(&sc).unwrap();
    let clean = audit_solution(&sol, &sc).unwrap();
    let mut bad = sol.clone();
    let slack = clean.mean_l.iter().position(|v| v.abs() > 0.1).expect("a slack node");
    for v in bad.kl.iter_mut().skip(slack + 1) {
        *v += 0.05;
    }
    let dirty = audit_solution(&bad, &sc).unwrap();
    assert!(dirty.flat_off_l > clean.flat_off_l);
    assert!(!dirty.flat_off_nodes_ok);
    assert!(!dirty.assembly_ok);
}

#[test]
fn uniqueness_probe_agrees_across_initializers() {
    let sc = small("linear_meanfield", 1000, 20).build().unwrap();
    let same = uniqueness_probe(&sc, &Initializer::ConditionalTerminal).unwrap();
    assert_eq!(same.distance, 0.0);
    let zero = uniqueness_probe(&sc, &Initializer::Zero).unwrap();
    assert!(zero.distance <= 10.0 * DEFAULT_PICARD_TOL, "{zero:?}");
    let field = Initializer::Field(vec![3.0; 21 * 1000]);
    assert!(uniqueness_probe(&sc, &field).unwrap().distance <= 10.0 * DEFAULT_PICARD_TOL);
    assert!(matches!(uniqueness_probe(&sc, &Initializer::Field(vec![0.0; 5])), Err(Error::DimensionMismatch(_))));
}

#[test]
fn iteration_cap_reports_history() {
    let mut spec = small("linear_meanfield", 500, 20);
    spec.max_picard_iters = 2;
    let err = solve_reflected(&spec.build().unwrap()).unwrap_err();
    match err {
        Error::PicardNotConverged { history } => assert_eq!(history.len(), 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn inadmissible_terminal_is_rejected() {
    let mut spec = small("inactive_barriers", 500, 10);
    spec.losses = LossKind::Affine { slope: 1.0, levels: Levels::constant(2.0, 5.0) };
    assert!(matches!(solve_reflected(&spec.build().unwrap()), Err(Error::TerminalInadmissible { .. })));
}

#[test]
fn particle_dependent_losses_are_averaged_per_particle() {
    let spec = small("mao_log_driver", 2000, 25);
    let mut sc = spec.build().unwrap();
    let tilt = |w: &[f64]| 0.05 * w[0].tanh();
    sc.losses = LossFieldPair::new(
        "tilted",
        Arc::new(move |_, x, w| x - 0.25 + tilt(w)),
        Arc::new(move |_, x, w| x + 0.3 + tilt(w)),
        1.0,
        1.0,
        0.65,
        0.55,
    )
    .unwrap();
    let e = sc.ensemble().unwrap();
    sc.losses.check_assumptions(&e, (-3.0, 3.0), 500, 2).unwrap();
    let sol = solve_reflected(&sc).unwrap();
    assert!(sol.constraint_report.satisfied);
    assert!(sol.kl[25] > 0.0);
    let audit = audit_solution(&sol, &sc).unwrap();
    assert!(audit.flat_off_nodes_ok && audit.hard_invariants_hold());
}

#[test]
fn dynamics_residual_shrinks_as_steps_double() {
    let res: Vec<f64> = [25, 50, 100]
        .iter()
        .map(|&n| {
            let sc = small("linear_meanfield", 4000, n).build().unwrap();
            let sol = solve_reflected(&sc).unwrap();
            audit_solution(&sol, &sc).unwrap().dynamics_residual_max
        })
        .collect();
    assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
}

#[test]
fn solve_is_bitwise_reproducible() {
    let sc = small("nonlinear_losses", 800, 20).build().unwrap();
    assert_eq!(solve_reflected(&sc).unwrap(), solve_reflected(&sc).unwrap());
}
