//! Inviscid Burgers flow for the Ginibre determinant started from `X0 = 0`:
//! initial velocity, characteristics, the Cardano roots, caustics and the
//! shock on `r = 0`, and the resulting closed-form observables.
//!
//! Most of the algebra runs in `ξ = r + τ v`, where the velocity equation
//! `v (|z|^2 + (r + τ v)^2) = r + τ v` becomes
//! `ξ^3 - r ξ^2 + (|z|^2 - τ) ξ - r |z|^2 = 0` and `v = ξ / (|z|^2 + ξ^2)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// `v0(ξ) = ξ / (|z|^2 + ξ^2)`; odd, and zero at `ξ = 0` even when `z = 0`.
pub fn v0_initial(xi: f64, abs_z: f64) -> f64 {
    if xi == 0.0 {
        return 0.0;
    }
    xi / (abs_z * abs_z + xi * xi)
}

/// `v0'(ξ) = (|z|^2 - ξ^2) / (|z|^2 + ξ^2)^2`.
pub fn v0_derivative(xi: f64, abs_z: f64) -> f64 {
    let a = abs_z * abs_z;
    let d = a + xi * xi;
    (a - xi * xi) / (d * d)
}

/// A pluggable initial velocity profile for drawing characteristics.
pub trait InitialVelocity {
    fn v0(&self, xi: f64) -> f64;
}

/// The profile generated by `X0 = 0` at fixed `|z|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GinibreVelocity {
    pub abs_z: f64,
}

impl InitialVelocity for GinibreVelocity {
    fn v0(&self, xi: f64) -> f64 {
        v0_initial(xi, self.abs_z)
    }
}

/// Shape of the real root set of the velocity cubic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branching {
    /// One real root.
    Unique,
    /// Three distinct real roots (between the caustics).
    MultiValued,
    /// On a caustic: a simple root and a double root.
    Caustic,
    /// All three roots coincide.
    Cusp,
}

impl Branching {
    /// Largest number of coincident real roots.
    pub fn multiplicity(self) -> u8 {
        match self {
            Branching::Unique | Branching::MultiValued => 1,
            Branching::Caustic => 2,
            Branching::Cusp => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowPoint {
    pub z: Complex64,
    pub r: f64,
    pub tau: f64,
    pub v: f64,
    pub g: Complex64,
    pub xi: f64,
    pub branching: Branching,
    /// The double root in `v` when the point sits on a caustic.
    pub caustic_root: Option<f64>,
}

impl FlowPoint {
    pub fn multiplicity(&self) -> u8 {
        self.branching.multiplicity()
    }
}

/// `v (|z|^2 + (r + τ v)^2) - (r + τ v)`.
pub fn cardano_residual(v: f64, abs_z_sq: f64, r: f64, tau: f64) -> f64 {
    let xi = r + tau * v;
    v * (abs_z_sq + xi * xi) - xi
}

fn residual_slope(v: f64, a: f64, r: f64, tau: f64) -> f64 {
    3.0 * tau * tau * v * v + 4.0 * r * tau * v + a + r * r - tau
}

struct XiRoots {
    /// Ascending; one entry when there is a single real root.
    roots: Vec<f64>,
    branching: Branching,
    double: Option<f64>,
}

const DISCRIMINANT_TOL: f64 = 1e-12;

/// Real roots of `ξ^3 - r ξ^2 + (a - τ) ξ - r a`.
fn xi_roots(a: f64, r: f64, tau: f64) -> XiRoots {
    // depressed cubic t^3 + p t + q with ξ = t + r/3
    let shift = r / 3.0;
    let p = (a - tau) - r * r / 3.0;
    let q = -2.0 * r * r * r / 27.0 + r * (a - tau) / 3.0 - r * a;
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let cube = third_p * third_p * third_p;
    let disc = half_q * half_q + cube;
    let scale = half_q * half_q + cube.abs();

    if scale == 0.0 || (p.abs() <= 1e-14 * (a + tau + r * r) && q.abs() <= 1e-14 * (a + tau + r * r).powf(1.5)) {
        return XiRoots {
            roots: vec![shift],
            branching: Branching::Cusp,
            double: Some(shift),
        };
    }
    if disc.abs() <= DISCRIMINANT_TOL * scale {
        // simple root -2 cbrt(q/2), double root cbrt(q/2)
        let u = (-half_q).cbrt();
        let single = 2.0 * u + shift;
        let double = -u + shift;
        let mut roots = vec![single, double];
        roots.sort_by(f64::total_cmp);
        return XiRoots {
            roots,
            branching: Branching::Caustic,
            double: Some(double),
        };
    }
    if disc > 0.0 {
        let s = disc.sqrt();
        let big = -(half_q.signum()) * (half_q.abs() + s).cbrt();
        let t = if big != 0.0 { big - third_p / big } else { 0.0 };
        return XiRoots {
            roots: vec![t + shift],
            branching: Branching::Unique,
            double: None,
        };
    }
    let m = 2.0 * (-third_p).sqrt();
    let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
    let phi = arg.acos() / 3.0;
    let mut roots: Vec<f64> = (0..3)
        .map(|k| m * (phi - 2.0 * PI * k as f64 / 3.0).cos() + shift)
        .collect();
    roots.sort_by(f64::total_cmp);
    XiRoots {
        roots,
        branching: Branching::MultiValued,
        double: None,
    }
}

fn v_from_xi(xi: f64, a: f64) -> f64 {
    if xi == 0.0 {
        0.0
    } else {
        xi / (a + xi * xi)
    }
}

/// Newton steps on the residual, kept only while they reduce it.
fn polish(v: f64, a: f64, r: f64, tau: f64) -> f64 {
    let mut best = v;
    let mut best_res = cardano_residual(v, a, r, tau).abs();
    for _ in 0..3 {
        if best_res == 0.0 {
            break;
        }
        let slope = residual_slope(best, a, r, tau);
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let cand = best - cardano_residual(best, a, r, tau) / slope;
        let res = cardano_residual(cand, a, r, tau).abs();
        if res < best_res {
            best = cand;
            best_res = res;
        } else {
            break;
        }
    }
    best
}

fn check_point(r: f64, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid(format!("tau must be positive, got {tau}")));
    }
    if !r.is_finite() {
        return Err(invalid("r must be finite"));
    }
    Ok(())
}

/// Real roots `v` of the velocity cubic at `(z, r, τ)`, ascending, each
/// listed once.
pub fn cubic_roots(z: Complex64, r: f64, tau: f64) -> Result<Vec<f64>> {
    check_point(r, tau)?;
    let a = z.norm_sqr();
    let mut vs: Vec<f64> = xi_roots(a, r, tau)
        .roots
        .into_iter()
        .map(|xi| polish(v_from_xi(xi, a), a, r, tau))
        .collect();
    vs.sort_by(f64::total_cmp);
    Ok(vs)
}

/// Physical velocity at `(z, r, τ)` for `r ≥ 0`.
///
/// The selected root is the one carried by characteristics arriving from
/// `r > 0` (largest `ξ`), which pins the shock at `r = 0`. On a caustic the
/// returned `v` stays on that branch; the double root is reported in
/// [`FlowPoint::caustic_root`].
pub fn solve_v(z: Complex64, r: f64, tau: f64) -> Result<FlowPoint> {
    check_point(r, tau)?;
    if r < 0.0 {
        return Err(invalid("solve_v needs r >= 0; use solve_v_section for signed r"));
    }
    Ok(solve_upper(z, r, tau))
}

fn solve_upper(z: Complex64, r: f64, tau: f64) -> FlowPoint {
    let a = z.norm_sqr();
    let roots = xi_roots(a, r, tau);
    let xi_raw = *roots.roots.last().expect("cubic has a real root");
    let v = polish(v_from_xi(xi_raw, a), a, r, tau);
    let xi = r + tau * v;
    let caustic_root = roots.double.map(|d| polish(v_from_xi(d, a), a, r, tau));
    FlowPoint {
        z,
        r,
        tau,
        v,
        g: g_from_xi(z, xi),
        xi,
        branching: roots.branching,
        caustic_root,
    }
}

/// Velocity on the real-`w` section with signed `μ`. Negative `μ` is the
/// mirror image: `v(-μ) = -v(μ)`, so both Cardano equations of the pair give
/// the same `|v|`.
pub fn solve_v_section(z: Complex64, mu: f64, tau: f64) -> Result<FlowPoint> {
    check_point(mu, tau)?;
    if mu >= 0.0 {
        return Ok(solve_upper(z, mu, tau));
    }
    let up = solve_upper(z, -mu, tau);
    Ok(FlowPoint {
        r: mu,
        v: -up.v,
        xi: -up.xi,
        caustic_root: up.caustic_root.map(|d| -d),
        ..up
    })
}

fn g_from_xi(z: Complex64, xi: f64) -> Complex64 {
    z.conj() / (z.norm_sqr() + xi * xi)
}

/// `g = z̄ / (|z|^2 + ξ^2)` on the physical branch; reduces to
/// [`g_analytic`] at `r = 0`.
pub fn g_flow(z: Complex64, r: f64, tau: f64) -> Result<Complex64> {
    Ok(solve_v(z, r, tau)?.g)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Characteristic {
    pub xi: f64,
    /// `dr/dτ = -v0(ξ)`.
    pub slope: f64,
    /// `(0, τ_end)`: the line carries `v0(ξ)` as the unique root until it
    /// enters the caustic region, reaches the shock, or hits `tau_max`.
    pub tau_range: (f64, f64),
    /// When the line crosses the caustic at `r > 0`.
    pub tau_caustic: Option<f64>,
    /// When the line reaches `r = 0`.
    pub tau_shock: Option<f64>,
}

impl Characteristic {
    pub fn r_at(&self, tau: f64) -> f64 {
        self.xi + self.slope * tau
    }
}

/// Straight lines `r = ξ - v0(ξ) τ` for an arbitrary profile. Only the
/// shock crossing is located.
pub fn characteristic_lines<V: InitialVelocity>(v0: &V, tau_max: f64, xi_grid: &[f64]) -> Result<Vec<Characteristic>> {
    if !(tau_max > 0.0) {
        return Err(invalid("tau_max must be positive"));
    }
    xi_grid
        .iter()
        .map(|&xi| {
            if !(xi >= 0.0) {
                return Err(invalid(format!("characteristic labels must be >= 0, got {xi}")));
            }
            let slope = -v0.v0(xi);
            let tau_shock = (slope < 0.0).then(|| xi / -slope);
            let end = tau_shock.map_or(tau_max, |t| t.min(tau_max));
            Ok(Characteristic {
                xi,
                slope,
                tau_range: (0.0, end),
                tau_caustic: None,
                tau_shock,
            })
        })
        .collect()
}

/// Characteristics of the Ginibre flow at fixed `|z|`, with the caustic
/// crossing located by bisection.
pub fn characteristics_fan(abs_z: f64, tau_max: f64, xi_grid: &[f64]) -> Result<Vec<Characteristic>> {
    let a = abs_z * abs_z;
    let mut lines = characteristic_lines(&GinibreVelocity { abs_z }, tau_max, xi_grid)?;
    for c in &mut lines {
        if c.xi == 0.0 {
            // parked on the shock line; it becomes multi-valued at birth
            c.tau_shock = Some(a);
            c.tau_caustic = (a > 0.0).then_some(a);
        } else {
            c.tau_shock = Some(a + c.xi * c.xi);
            if a > 0.0 {
                let gap = |tau: f64| c.r_at(tau) - caustic_position(abs_z, tau).unwrap_or(0.0);
                c.tau_caustic = Some(bisect(gap, a, a + c.xi * c.xi));
            }
        }
        let stop = c.tau_caustic.or(c.tau_shock).unwrap_or(tau_max);
        c.tau_range = (0.0, stop.min(tau_max));
    }
    Ok(lines)
}

/// Root of `f` on `[lo, hi]` with `f(lo) ≥ 0 ≥ f(hi)` (or the reverse).
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    if f_lo == 0.0 {
        return lo;
    }
    let lo_positive = f_lo > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CausticPoint {
    pub tau: f64,
    pub r_star: f64,
    pub xi_star: f64,
}

/// Signed larger root `s` of `s^2 + (2a + τ) s + a (a - τ) = 0`; the caustic
/// label is `ξ* = √s` whenever `s ≥ 0`.
fn caustic_label_sq(a: f64, tau: f64) -> f64 {
    let b = 2.0 * a + tau;
    let disc = tau * tau + 8.0 * a * tau;
    2.0 * a * (tau - a) / (b + disc.sqrt())
}

/// Points with `1 = τ v0'(ξ)` and `ξ ≥ 0`, with `r* = ξ - τ v0(ξ)`. Empty
/// before the shock is born and for `z = 0`.
pub fn caustic_locus(abs_z: f64, tau: f64) -> Result<Vec<CausticPoint>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid(format!("tau must be positive, got {tau}")));
    }
    let a = abs_z * abs_z;
    if a == 0.0 {
        return Ok(Vec::new());
    }
    let s = caustic_label_sq(a, tau);
    if s < 0.0 {
        return Ok(Vec::new());
    }
    let xi = s.sqrt();
    Ok(vec![CausticPoint {
        tau,
        r_star: xi - tau * v0_initial(xi, abs_z),
        xi_star: xi,
    }])
}

/// `|r*|`: the caustic bounding the multi-valued region on the `r > 0` side.
pub fn caustic_position(abs_z: f64, tau: f64) -> Option<f64> {
    caustic_locus(abs_z, tau).ok()?.first().map(|c| c.r_star.abs())
}

/// First time a caustic exists, by bisection on the signed caustic label.
pub fn shock_birth_time(abs_z: f64) -> Result<f64> {
    let a = abs_z * abs_z;
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid("shock birth needs |z| > 0"));
    }
    let mut hi = 1.0;
    while caustic_label_sq(a, hi) < 0.0 {
        hi *= 2.0;
    }
    Ok(bisect(|t| -caustic_label_sq(a, t), 0.0, hi))
}

/// `1/z` outside the disc `|z|^2 ≤ τ`, `z̄/τ` inside.
pub fn g_analytic(z: Complex64, tau: f64) -> Result<Complex64> {
    if !(tau > 0.0) {
        return Err(invalid("tau must be positive"));
    }
    if z.norm_sqr() > tau {
        Ok(z.inv())
    } else {
        Ok(z.conj() / tau)
    }
}

/// Uniform density `1/(πτ)` on the disc `|z|^2 < τ`.
pub fn rho_analytic(z: Complex64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(invalid("tau must be positive"));
    }
    Ok(if z.norm_sqr() < tau { 1.0 / (PI * tau) } else { 0.0 })
}

/// `K/N = 1 - |z|^2/τ` on the disc; `None` outside the support.
pub fn petermann_analytic(z: Complex64, tau: f64) -> Result<Option<f64>> {
    if !(tau > 0.0) {
        return Err(invalid("tau must be positive"));
    }
    let a = z.norm_sqr();
    Ok((a <= tau).then(|| 1.0 - a / tau))
}

/// `v^2 = (τ - |z|^2)/τ^2` at `r = 0` inside the disc, zero outside.
pub fn v_squared_analytic(z: Complex64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(invalid("tau must be positive"));
    }
    Ok(((tau - z.norm_sqr()) / (tau * tau)).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn initial_velocity_values() {
        assert_eq!(v0_initial(0.0, 0.7), 0.0);
        assert_eq!(v0_initial(1.0, 1.0), 0.5);
        assert_eq!(v0_initial(2.0, 0.0), 0.5);
        assert_eq!(v0_initial(0.0, 0.0), 0.0);
    }

    #[test]
    fn shock_limits_on_the_axis() {
        let p = solve_v(c(0.0, 0.0), 0.0, 1.0).unwrap();
        assert!((p.v - 1.0).abs() < 1e-15);
        let p = solve_v(c(2f64.sqrt(), 0.0), 0.0, 1.0).unwrap();
        assert_eq!(p.v, 0.0);
        let z = c(0.3, 0.4);
        let p = solve_v(z, 0.0, 1.0).unwrap();
        assert!((p.v - 0.75f64.sqrt()).abs() < 1e-14);
        assert!((p.g - z.conj()).norm() < 1e-14);
    }

    #[test]
    fn rejects_bad_time() {
        assert!(solve_v(c(0.1, 0.0), 0.1, 0.0).is_err());
        assert!(solve_v(c(0.1, 0.0), 0.1, -1.0).is_err());
        assert!(solve_v(c(0.1, 0.0), -0.1, 1.0).is_err());
    }

    #[test]
    fn branch_classification() {
        // |z| = 1, τ = 2 is past shock birth; r = 0 lies between the caustics
        assert_eq!(solve_v(c(1.0, 0.0), 0.0, 2.0).unwrap().branching, Branching::MultiValued);
        assert_eq!(solve_v(c(1.0, 0.0), 5.0, 2.0).unwrap().branching, Branching::Unique);
        let cp = caustic_locus(1.0, 2.0).unwrap()[0];
        let p = solve_v(c(1.0, 0.0), cp.r_star.abs(), 2.0).unwrap();
        assert_eq!(p.multiplicity(), 2);
        let d = p.caustic_root.unwrap();
        assert!(cardano_residual(d, 1.0, cp.r_star.abs(), 2.0).abs() < 1e-12);
        // the double root belongs to the mirrored label -ξ*
        assert!((d - v0_initial(-cp.xi_star, 1.0)).abs() < 1e-6);
        assert!(p.v > 0.0);
        let cusp = solve_v(c(1.0, 0.0), 0.0, 1.0).unwrap();
        assert_eq!(cusp.multiplicity(), 3);
        assert_eq!(cusp.v, 0.0);
    }

    #[test]
    fn cubic_roots_all_solve_the_equation() {
        let roots = cubic_roots(c(0.6, 0.2), 0.05, 1.5).unwrap();
        assert_eq!(roots.len(), 3);
        for v in roots {
            assert!(cardano_residual(v, 0.4, 0.05, 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn section_is_mirror_symmetric() {
        let z = c(0.5, -0.3);
        for mu in [0.01, 0.2, 1.3] {
            let up = solve_v_section(z, mu, 1.2).unwrap();
            let down = solve_v_section(z, -mu, 1.2).unwrap();
            assert_eq!(up.v, -down.v);
            assert_eq!(up.g, down.g);
            assert!(cardano_residual(down.v, z.norm_sqr(), -mu, 1.2).abs() < 1e-12);
        }
    }

    #[test]
    fn caustic_example_and_birth() {
        let pts = caustic_locus(1.0, 2.0).unwrap();
        assert_eq!(pts.len(), 1);
        let x = pts[0].xi_star;
        assert!((2.0 * (1.0 - x * x) - (1.0 + x * x).powi(2)).abs() < 1e-12);
        assert!((1.0 - 2.0 * v0_derivative(x, 1.0)).abs() < 1e-12);
        assert!((x * x - (5f64.sqrt() - 2.0)).abs() < 1e-15);
        assert!(caustic_locus(1.0, 0.9).unwrap().is_empty());
        assert!(caustic_locus(0.0, 3.0).unwrap().is_empty());
        let birth = caustic_locus(0.5, 0.25).unwrap();
        assert_eq!(birth[0].xi_star, 0.0);
        assert_eq!(birth[0].r_star, 0.0);
        assert!((shock_birth_time(0.8).unwrap() - 0.64).abs() < 1e-12);
    }

    #[test]
    fn fan_lines() {
        let fan = characteristics_fan(1.0, 3.0, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(fan[0].slope, 0.0);
        assert_eq!(fan[0].r_at(2.5), 0.0);
        assert_eq!(fan[1].slope, -0.5);
        assert_eq!(fan[1].tau_shock, Some(2.0));
        assert_eq!(fan[1].r_at(2.0), 0.0);
        let tc = fan[1].tau_caustic.unwrap();
        assert!(tc > 1.0 && tc < 2.0);
        assert!((fan[1].r_at(tc) - caustic_position(1.0, tc).unwrap()).abs() < 1e-12);
        assert!(characteristics_fan(1.0, 3.0, &[-0.1]).is_err());
    }

    #[test]
    fn closed_forms() {
        assert_eq!(g_analytic(c(2.0, 0.0), 1.0).unwrap(), c(0.5, 0.0));
        assert_eq!(g_analytic(c(0.3, 0.4), 1.0).unwrap(), c(0.3, -0.4));
        assert_eq!(rho_analytic(c(0.0, 0.0), 1.0).unwrap(), 1.0 / PI);
        assert_eq!(rho_analytic(c(1.1, 0.0), 1.0).unwrap(), 0.0);
        assert_eq!(petermann_analytic(c(0.0, 0.0), 3.0).unwrap(), Some(1.0));
        assert_eq!(petermann_analytic(c(0.5, 0.0), 1.0).unwrap(), Some(0.75));
        assert_eq!(petermann_analytic(c(1.0, 0.0), 1.0).unwrap(), Some(0.0));
        assert_eq!(petermann_analytic(c(1.0, 0.1), 1.0).unwrap(), None);
        for t in [0.5f64, 1.0, 2.0] {
            let z = Complex64::from_polar(t.sqrt(), 0.7);
            let outer = z.inv();
            let inner = z.conj() / t;
            assert!((outer - inner).norm() < 1e-15);
        }
    }
}
