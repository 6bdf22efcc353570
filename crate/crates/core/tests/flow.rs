use std::f64::consts::PI;

use ginibre_core::flow::*;
use ginibre_core::quadrature::integrate;
use ginibre_core::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest root of the velocity equation in `[lo, hi]` by scanning for sign
/// changes and bisecting.
fn largest_root_by_scan(a: f64, r: f64, tau: f64, lo: f64, hi: f64) -> f64 {
    let f = |v: f64| cardano_residual(v, a, r, tau);
    let steps = 20_000;
    let h = (hi - lo) / steps as f64;
    let mut best = None;
    for k in 0..steps {
        let (x0, x1) = (lo + k as f64 * h, lo + (k + 1) as f64 * h);
        if f(x0) == 0.0 {
            best = Some(x0);
        } else if f(x0).signum() != f(x1).signum() {
            best = Some(bisect(f, x0, x1));
        }
    }
    best.expect("no root in the scan window")
}

#[test]
fn physical_root_matches_bracketing_oracle() {
    let p = solve_v(c(1.0, 0.0), 0.5, 2.0).unwrap();
    let oracle = largest_root_by_scan(1.0, 0.5, 2.0, 0.0, 2.0);
    assert!((p.v - oracle).abs() < 1e-12, "{} vs {oracle}", p.v);
    assert!(cardano_residual(p.v, 1.0, 0.5, 2.0).abs() < 1e-12);
}

#[test]
fn oracle_agrees_across_the_caustic_region() {
    for (z, r, tau) in [(c(0.5, 0.5), 0.05, 1.0), (c(1.0, 0.0), 0.2, 2.0), (c(0.2, 0.0), 1.0, 0.5), (c(1.5, 0.0), 0.3, 1.0)] {
        let p = solve_v(z, r, tau).unwrap();
        let oracle = largest_root_by_scan(z.norm_sqr(), r, tau, -5.0, 5.0);
        assert!((p.v - oracle).abs() < 1e-11, "{z} {r} {tau}: {} vs {oracle}", p.v);
    }
}

#[test]
fn axis_limits() {
    for tau in [0.5, 1.0, 2.0] {
        for s in [0.0, 0.3, 0.6, 0.9, 1.1, 1.5, 3.0] {
            let z = Complex64::from_polar(s * f64::sqrt(tau), 0.4);
            let a = z.norm_sqr();
            let want = if a < tau { (tau - a).sqrt() / tau } else { 0.0 };
            for r in [0.0, 1e-13] {
                let v = solve_v(z, r, tau).unwrap().v;
                assert!((v - want).abs() < 1e-10, "τ={tau} |z|²={a} r={r}: {v} vs {want}");
            }
        }
    }
}

#[test]
fn small_time_limit_is_initial_velocity() {
    for abs_z in [0.0, 0.4, 1.0, 2.0] {
        for r in [0.3, 0.5, 1.0, 2.0] {
            let v = solve_v(c(abs_z, 0.0), r, 1e-8).unwrap().v;
            assert!((v - v0_initial(r, abs_z)).abs() < 1e-6);
        }
    }
}

fn dz<F: Fn(Complex64) -> f64>(f: F, z: Complex64, h: f64) -> Complex64 {
    let dx = (f(z + c(h, 0.0)) - f(z - c(h, 0.0))) / (2.0 * h);
    let dy = (f(z + c(0.0, h)) - f(z - c(0.0, h))) / (2.0 * h);
    c(0.5 * dx, -0.5 * dy)
}

#[test]
fn constraint_by_finite_differences() {
    let h = 1e-5;
    for (z, r, tau) in [(c(1.3, 0.4), 0.3, 1.0), (c(0.4, 0.0), 1.2, 1.0), (c(0.2, -0.5), 1.6, 2.0)] {
        assert_eq!(solve_v(z, r, tau).unwrap().branching, Branching::Unique);
        let lhs = dz(|zz| solve_v(zz, r, tau).unwrap().v, z, h);
        let rhs = (g_flow(z, r + h, tau).unwrap() - g_flow(z, r - h, tau).unwrap()) / (4.0 * h);
        assert!((lhs - rhs).norm() < 1e-8, "{z}: {lhs} vs {rhs}");
    }
}

#[test]
fn g_reconstructed_from_the_constraint() {
    let (z, tau) = (c(1.1, 0.6), 1.0);
    let big_r = 6.0;
    let h = 1e-5;
    let g_big = g_flow(z, big_r, tau).unwrap();
    for r in [0.05, 0.5, 2.0] {
        let out = integrate(
            |s| {
                let d = dz(|zz| solve_v(zz, s, tau).unwrap().v, z, h);
                [d.re, d.im]
            },
            &[r, big_r],
            1e-10,
            500,
        );
        assert!(out.converged);
        let rebuilt = g_big - 2.0 * c(out.value[0], out.value[1]);
        let direct = g_flow(z, r, tau).unwrap();
        assert!((rebuilt - direct).norm() < 1e-8, "r={r}: {rebuilt} vs {direct}");
    }
}

#[test]
fn gauss_law_away_from_the_boundary() {
    let h = 1e-5;
    for tau in [0.5, 1.0, 2.0] {
        for z in [c(0.1, 0.2), c(0.4 * f64::sqrt(tau), 0.0), c(1.5 * f64::sqrt(tau), 0.3), c(-2.0, 1.0)] {
            let g = |zz: Complex64| g_analytic(zz, tau).unwrap();
            let dx = (g(z + c(h, 0.0)) - g(z - c(h, 0.0))) / (2.0 * h);
            let dy = (g(z + c(0.0, h)) - g(z - c(0.0, h))) / (2.0 * h);
            let dzbar = 0.5 * (dx + Complex64::i() * dy);
            let rho = rho_analytic(z, tau).unwrap();
            assert!((dzbar / PI - rho).norm() < 1e-8, "τ={tau} z={z}");
        }
    }
}

#[test]
fn g_is_continuous_on_the_circle() {
    for tau in [0.3, 1.0, 2.7] {
        for phi in [0.0, 1.0, 2.5] {
            let z = Complex64::from_polar(f64::sqrt(tau), phi);
            let inner = z.conj() / tau;
            let outer = z.inv();
            assert!((inner - outer).norm() <= 4.0 * f64::EPSILON * outer.norm());
            assert!((g_analytic(z * (1.0 + 1e-12), tau).unwrap() - g_analytic(z * (1.0 - 1e-12), tau).unwrap()).norm() < 1e-10);
        }
    }
}

#[test]
fn velocity_is_constant_along_characteristics() {
    let fan = characteristics_fan(1.0, 3.0, &[0.0, 0.2, 0.5, 1.0, 2.0, 3.0]).unwrap();
    for ch in &fan {
        let (t0, t1) = ch.tau_range;
        let v0 = v0_initial(ch.xi, 1.0);
        for k in 1..20 {
            let tau = t0 + (t1 - t0) * k as f64 / 20.0;
            let r = ch.r_at(tau);
            assert!(r >= 0.0);
            let v = solve_v(c(1.0, 0.0), r, tau).unwrap().v;
            assert!((v - v0).abs() < 1e-10, "ξ={} τ={tau}: {v} vs {v0}", ch.xi);
        }
    }
}

#[test]
fn caustic_points_solve_both_defining_equations() {
    for (abs_z, tau) in [(1.0, 2.0), (0.5, 0.3), (1.5, 4.0)] {
        let pts = caustic_locus(abs_z, tau).unwrap();
        assert_eq!(pts.len(), 1);
        let a = abs_z * abs_z;
        let f = |x: f64| tau * (a - x * x) - (a + x * x).powi(2);
        let oracle = bisect(f, 0.0, abs_z);
        let cp = pts[0];
        assert!((cp.xi_star - oracle).abs() < 1e-12);
        assert!((1.0 - tau * v0_derivative(cp.xi_star, abs_z)).abs() < 1e-12);
        assert!((cp.r_star - (cp.xi_star - tau * v0_initial(cp.xi_star, abs_z))).abs() < 1e-15);
        assert!(cp.r_star <= 0.0);
    }
    assert!(caustic_locus(1.0, 0.5).unwrap().is_empty());
}

#[test]
fn shock_is_born_at_the_radius_squared() {
    for abs_z in [0.1, 0.3, 0.7, 1.0, 1.5, 2.0] {
        let t = shock_birth_time(abs_z).unwrap();
        assert!((t - abs_z * abs_z).abs() < 1e-10, "{abs_z}: {t}");
    }
}

#[test]
fn pluggable_initial_velocity() {
    struct Linear;
    impl InitialVelocity for Linear {
        fn v0(&self, xi: f64) -> f64 {
            xi
        }
    }
    let lines = characteristic_lines(&Linear, 5.0, &[0.5, 2.0]).unwrap();
    assert_eq!(lines[0].slope, -0.5);
    assert_eq!(lines[0].tau_shock, Some(1.0));
    assert_eq!(lines[1].tau_range, (0.0, 1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn residual_and_branch(x in -2.0f64..2.0, y in -2.0f64..2.0, r in 0.0f64..2.0, tau in 0.01f64..3.0) {
        let z = c(x, y);
        let p = solve_v(z, r, tau).unwrap();
        prop_assert!(cardano_residual(p.v, z.norm_sqr(), r, tau).abs() < 1e-12);
        let roots = cubic_roots(z, r, tau).unwrap();
        for v in &roots {
            prop_assert!(cardano_residual(*v, z.norm_sqr(), r, tau).abs() < 1e-12);
            prop_assert!(p.v >= v - 1e-9);
        }
        prop_assert!(p.v >= 0.0);
        let q = solve_v_section(z, -r, tau).unwrap();
        prop_assert_eq!(q.v.abs(), p.v.abs());
    }
}
