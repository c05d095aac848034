use mhodge::analysis::random_field;
use mhodge::domains::{boundary_tangent_residual, generate_grid, presets, DomainSpec};
use mhodge::operators::MixedSystem;
use mhodge::solver::{
    add_fields, l2_distance, manufactured_solution, solve_bvp, solve_bvp_with, weak_defect_suite, white_noise, Forcing,
    SolveOptions,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn omega() -> DomainSpec {
    presets::omega(256)
}

fn smooth_forcing(seed: u64) -> Forcing {
    Forcing::Poly(random_field(&mut ChaCha8Rng::seed_from_u64(seed)))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn white_noise_inflates_weak_defects() {
    let d = omega();
    let s = MixedSystem::hodge();
    let u = manufactured_solution(&d).unwrap();
    let g = Forcing::Poly(s.apply_poly(&u).unwrap());
    let opts = SolveOptions {
        defect_samples: 0,
        ..SolveOptions::default()
    };
    let (uh, _) = solve_bvp_with(&s, &d, &g, 1.0 / 64.0, &opts).unwrap();
    let clean = weak_defect_suite(&s, &uh, &g, &d, 20, 11).unwrap();
    let noisy_u = add_fields(&uh, &white_noise(&uh, 1.0, 12));
    let noisy = weak_defect_suite(&s, &noisy_u, &g, &d, 20, 11).unwrap();
    assert!(
        mean(&noisy) >= 10.0 * mean(&clean),
        "noisy mean {} vs clean mean {}",
        mean(&noisy),
        mean(&clean)
    );
}

#[test]
fn minimizer_is_independent_of_initial_iterate() {
    let d = omega();
    let s = MixedSystem::hodge();
    let g = smooth_forcing(21);
    let h = 1.0 / 32.0;
    let tol = 1e-8;
    let grid = generate_grid(&d, h).unwrap();
    let start = grid.with_values(|p| [1.0 + p.x, p.y * p.y - 0.5]);
    let base = SolveOptions {
        tol,
        defect_samples: 0,
        ..SolveOptions::default()
    };
    let (a, ra) = solve_bvp_with(&s, &d, &g, h, &base).unwrap();
    let (b, rb) = solve_bvp_with(
        &s,
        &d,
        &g,
        h,
        &SolveOptions {
            initial: Some(start),
            ..base.clone()
        },
    )
    .unwrap();
    assert!(ra.converged && rb.converged);
    let dist = l2_distance(&a, &b);
    assert!(dist <= 10.0 * tol, "distance {dist}");
}

#[test]
fn solution_is_linear_in_forcing() {
    let d = omega();
    let s = MixedSystem::symmetric();
    let g = smooth_forcing(31);
    let h = 1.0 / 32.0;
    let tol = 1e-11;
    let (u1, _) = solve_bvp(&s, &d, &g, h, tol, 100_000).unwrap();
    let (u2, _) = solve_bvp(&s, &d, &g.scaled(2.0), h, tol, 100_000).unwrap();
    let mut doubled = u1.clone();
    doubled.values.iter_mut().for_each(|v| *v = [2.0 * v[0], 2.0 * v[1]]);
    let scale = l2_distance(&u2, &u2.with_values(|_| [0.0; 2]));
    assert!(l2_distance(&u2, &doubled) <= 1e-8 * scale.max(1.0));
}

#[test]
fn report_is_recomputed_from_returned_field() {
    let d = omega();
    let s = MixedSystem::hodge();
    let u = manufactured_solution(&d).unwrap();
    let g = Forcing::Poly(s.apply_poly(&u).unwrap());
    let (uh, rep) = solve_bvp(&s, &d, &g, 1.0 / 32.0, 1e-10, 100_000).unwrap();
    assert!(rep.converged);
    assert!(rep.objective_monotone);
    assert_eq!(rep.boundary_residual, boundary_tangent_residual(&uh).unwrap());
    assert!(rep.rows >= rep.unknowns);
    // The penalty keeps the tangential trace at discretization size.
    assert!(rep.boundary_residual <= 10.0 * rep.max_pointwise_residual);
    assert!(!rep.weak_defects.is_empty());
}

#[test]
fn non_convergence_returns_flagged_report() {
    let d = omega();
    let s = MixedSystem::hodge();
    let (uh, rep) = solve_bvp(&s, &d, &smooth_forcing(41), 1.0 / 32.0, 1e-14, 3).unwrap();
    assert!(!rep.converged);
    assert_eq!(rep.iterations, 3);
    assert!(uh.active().all(|k| uh.values[k].iter().all(|v| v.is_finite())));
}

#[test]
fn grid_forcing_round_trips_through_csv() {
    let d = omega();
    let s = MixedSystem::hodge();
    let h = 1.0 / 32.0;
    let grid = generate_grid(&d, h).unwrap();
    let field = random_field(&mut ChaCha8Rng::seed_from_u64(51));
    let sampled = grid.with_values(|p| field.eval(p));
    let mut csv = Vec::new();
    sampled.write_csv(&mut csv).unwrap();
    let back = grid.read_values_csv(std::str::from_utf8(&csv).unwrap()).unwrap();
    assert_eq!(l2_distance(&sampled, &back), 0.0);

    let (a, _) = solve_bvp(&s, &d, &Forcing::Grid(back), h, 1e-10, 100_000).unwrap();
    let (b, _) = solve_bvp(&s, &d, &Forcing::Poly(field), h, 1e-10, 100_000).unwrap();
    assert!(l2_distance(&a, &b) < 1e-12);
}
