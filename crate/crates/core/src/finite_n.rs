//! Exact finite-N determinant from the radial heat kernel, the finite-N
//! density and its edge profile, and finite-difference checks of the
//! viscid Burgers equations obeyed by `v` and `g`.
//!
//! The kernel integral
//!
//! ```text
//! I(z, r, τ) = ∫_0^∞ q e^{-N(q^2 + r^2)/τ} I_0(2Nqr/τ) (q^2 + |z|^2)^N dq
//! ```
//!
//! is evaluated in log space with the scaled Bessel function. The averaged
//! determinant itself is `D = (2N/τ) I`; the factor makes the kernel a
//! probability density in `q` and is what Monte Carlo averages reproduce.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::quadrature::integrate;
use crate::spectral::LogDeterminant;
use crate::special::{bessel_ratio, erfc, gamma_p, gamma_q, i0e, ln_gamma};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Integrate up to `q_peak + cutoff_widths * width`, then confirm the
    /// tail on `[cutoff, 2 cutoff]` is below `rel_tol`.
    pub cutoff_widths: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_subdivisions: 2000,
            cutoff_widths: 12.0,
        }
    }
}

impl QuadratureSpec {
    /// Tight tolerance for finite-difference checks.
    pub fn fine() -> Self {
        Self {
            rel_tol: 1e-13,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || self.max_subdivisions == 0 || !(self.cutoff_widths > 0.0) {
            return Err(invalid("quadrature spec needs rel_tol > 0, max_subdivisions > 0, cutoff_widths > 0"));
        }
        Ok(())
    }
}

/// Edge scaling variables: `|z| = √τ + η N^{-1/2}`, `q = θ N^{-1/4}`,
/// `r = ω N^{-3/4}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeCoords {
    pub eta: f64,
    pub theta: f64,
    pub omega: f64,
}

impl EdgeCoords {
    pub fn from_physical(abs_z: f64, q: f64, r: f64, tau: f64, n: usize) -> Self {
        let nf = n as f64;
        Self {
            eta: (abs_z - tau.sqrt()) * nf.sqrt(),
            theta: q * nf.powf(0.25),
            omega: r * nf.powf(0.75),
        }
    }

    pub fn abs_z(&self, tau: f64, n: usize) -> f64 {
        tau.sqrt() + self.eta / (n as f64).sqrt()
    }

    pub fn q(&self, n: usize) -> f64 {
        self.theta * (n as f64).powf(-0.25)
    }

    pub fn r(&self, n: usize) -> f64 {
        self.omega * (n as f64).powf(-0.75)
    }
}

fn check(tau: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("N must be at least 1"));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

/// Log of the kernel integral and its derivatives in `r` and `a = |z|^2`.
#[derive(Clone, Copy, Debug)]
pub struct KernelIntegral {
    pub z: Complex64,
    pub r: f64,
    pub tau: f64,
    pub n: usize,
    /// `ln I`, without the `2N/τ` factor.
    pub log_integral: f64,
    pub dlog_dr: f64,
    pub dlog_da: f64,
    /// Estimated relative error of the integral.
    pub rel_error: f64,
    pub cutoff: f64,
    pub intervals: usize,
}

impl KernelIntegral {
    /// `ln D = ln(2N/τ) + ln I`.
    pub fn log_determinant(&self) -> f64 {
        (2.0 * self.n as f64 / self.tau).ln() + self.log_integral
    }

    /// `v = (1/2N) ∂_r ln D`.
    pub fn v(&self) -> f64 {
        self.dlog_dr / (2.0 * self.n as f64)
    }

    /// `g = (1/N) ∂_z ln D = (z̄/N) ∂_a ln D`.
    pub fn g(&self) -> Complex64 {
        self.z.conj() * (self.dlog_da / self.n as f64)
    }
}

struct Integrand {
    n: f64,
    tau: f64,
    r: f64,
    a: f64,
}

impl Integrand {
    fn log_weight(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let d = q - self.r;
        let base = q.ln() - self.n * d * d / self.tau + self.n * (q * q + self.a).ln();
        if self.r == 0.0 {
            base
        } else {
            base + i0e(2.0 * self.n * q * self.r / self.tau).ln()
        }
    }

    fn dlog_dr(&self, q: f64) -> f64 {
        if self.r == 0.0 {
            return 0.0;
        }
        let x = 2.0 * self.n * q * self.r / self.tau;
        2.0 * self.n / self.tau * (q * bessel_ratio(x) - self.r)
    }

    fn dlog_da(&self, q: f64) -> f64 {
        self.n / (q * q + self.a)
    }

    fn peak(&self) -> (f64, f64) {
        let hi = 2.0 * (self.r + self.a.sqrt() + self.tau.sqrt()) + 10.0 * (self.tau / self.n).sqrt();
        let m = 400;
        let h = hi / m as f64;
        let mut best = 1;
        let mut best_l = self.log_weight(h);
        for i in 2..=m {
            let l = self.log_weight(i as f64 * h);
            if l > best_l {
                best = i;
                best_l = l;
            }
        }
        // golden-section refinement on the bracketing cells
        let (mut lo, mut up) = ((best - 1) as f64 * h, (best + 1) as f64 * h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = up - g * (up - lo);
        let mut x2 = lo + g * (up - lo);
        let (mut f1, mut f2) = (self.log_weight(x1), self.log_weight(x2));
        for _ in 0..80 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (up - lo);
                f2 = self.log_weight(x2);
            } else {
                up = x2;
                x2 = x1;
                f2 = f1;
                x1 = up - g * (up - lo);
                f1 = self.log_weight(x1);
            }
        }
        let q0 = 0.5 * (lo + up);
        let dq = 1e-3 * h.max(1e-3 * q0);
        let curv = (self.log_weight(q0 + dq) - 2.0 * self.log_weight(q0) + self.log_weight(q0 - dq)) / (dq * dq);
        let width = if curv < 0.0 && curv.is_finite() {
            (1.0 / (-curv).sqrt()).min(hi)
        } else {
            hi / 10.0
        };
        (q0, width)
    }
}

/// The kernel integral at `(z, r, τ)` for size `N`.
pub fn kernel_integral(z: Complex64, r: f64, tau: f64, n: usize, spec: &QuadratureSpec) -> Result<KernelIntegral> {
    check(tau, n)?;
    spec.validate()?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid("r must be finite and non-negative"));
    }
    let f = Integrand {
        n: n as f64,
        tau,
        r,
        a: z.norm_sqr(),
    };
    let (q0, width) = f.peak();
    let l_max = f.log_weight(q0);
    let weight = |q: f64| (f.log_weight(q) - l_max).exp();
    let integrand = |q: f64| {
        let w = weight(q);
        if w == 0.0 {
            return [0.0; 3];
        }
        [w, w * f.dlog_dr(q), w * f.dlog_da(q)]
    };

    let mut cutoff = q0 + spec.cutoff_widths * width;
    for _ in 0..8 {
        let tail = integrate(|q| [weight(q)], &[cutoff, 2.0 * cutoff], 1e-3, 200);
        let body = integrate(|q| [weight(q)], &[0.0, q0, cutoff], 1e-3, 200);
        if tail.value[0] <= spec.rel_tol * body.value[0] {
            break;
        }
        cutoff *= 2.0;
    }

    let mut breaks = vec![0.0];
    for k in [-6.0, -2.0, 0.0, 2.0, 6.0] {
        let b = q0 + k * width;
        if b > *breaks.last().unwrap() && b < cutoff {
            breaks.push(b);
        }
    }
    breaks.push(cutoff);
    let out = integrate(integrand, &breaks, spec.rel_tol, spec.max_subdivisions);
    let total = out.value[0];
    if !out.converged || !(total > 0.0) {
        return Err(Error::QuadratureNotConverged {
            estimate: l_max + total.ln(),
            error: out.abs_error[0] / total,
        });
    }
    Ok(KernelIntegral {
        z,
        r,
        tau,
        n,
        log_integral: l_max + total.ln(),
        dlog_dr: out.value[1] / total,
        dlog_da: out.value[2] / total,
        rel_error: out.abs_error[0] / total,
        cutoff,
        intervals: out.intervals,
    })
}

/// `ln` of the bare kernel integral `I`.
pub fn heat_integral(z: Complex64, r: f64, tau: f64, n: usize, spec: &QuadratureSpec) -> Result<LogDeterminant> {
    Ok(LogDeterminant(kernel_integral(z, r, tau, n, spec)?.log_integral))
}

/// `ln <det(|z - X|^2 + r^2)>` for `X0 = 0`, i.e. `ln((2N/τ) I)`.
pub fn d_quadrature(z: Complex64, r: f64, tau: f64, n: usize, spec: &QuadratureSpec) -> Result<LogDeterminant> {
    Ok(LogDeterminant(kernel_integral(z, r, tau, n, spec)?.log_determinant()))
}

/// `ln C_N = ln(2/(πτ)) - ln (N-1)! + N ln(N/τ)`.
pub fn log_density_prefactor(tau: f64, n: usize) -> f64 {
    let nf = n as f64;
    (2.0 / (PI * tau)).ln() - ln_gamma(nf) + nf * (nf / tau).ln()
}

/// `C_N e^{-N|z|^2/τ} I(z, 0, τ)` exactly as the prefactor is written. Its
/// total mass is `τ (N + 1)/N` rather than one; see [`density_mass`].
pub fn rho_finite(z: Complex64, tau: f64, n: usize) -> Result<f64> {
    rho_finite_with(z, tau, n, &QuadratureSpec::default())
}

pub fn rho_finite_with(z: Complex64, tau: f64, n: usize, spec: &QuadratureSpec) -> Result<f64> {
    check(tau, n)?;
    let log_p = -(n as f64) * z.norm_sqr() / tau;
    let log_i = kernel_integral(z, 0.0, tau, n, spec)?.log_integral;
    Ok((log_density_prefactor(tau, n) + log_p + log_i).exp())
}

/// `∫ ρ_finite d^2z`, integrated numerically over `|z|`.
pub fn density_mass(tau: f64, n: usize, spec: &QuadratureSpec) -> Result<f64> {
    check(tau, n)?;
    let nf = n as f64;
    let edge = tau.sqrt();
    let w = (tau / nf).sqrt();
    let x_up = (nf.sqrt() + 9.0).powi(2) + 20.0;
    let s_up = (tau * x_up / nf).sqrt();
    let mut breaks = vec![0.0];
    for k in [-6.0, -2.0, 0.0, 2.0, 6.0] {
        let b = edge + k * w;
        if b > *breaks.last().unwrap() && b < s_up {
            breaks.push(b);
        }
    }
    breaks.push(s_up);
    let failure = std::cell::Cell::new(None);
    let out = integrate(
        |s| match rho_finite_with(Complex64::new(s, 0.0), tau, n, spec) {
            Ok(rho) => [2.0 * PI * s * rho],
            Err(e) => {
                failure.set(Some(e));
                [0.0]
            }
        },
        &breaks,
        1e-9,
        500,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    if !out.converged {
        return Err(Error::QuadratureNotConverged {
            estimate: out.value[0],
            error: out.abs_error[0],
        });
    }
    Ok(out.value[0])
}

/// Finite-N density with the prefactor as written and renormalized to unit
/// mass; the mass is computed once.
#[derive(Clone, Copy, Debug)]
pub struct FiniteDensity {
    pub tau: f64,
    pub n: usize,
    pub mass: f64,
    pub spec: QuadratureSpec,
}

impl FiniteDensity {
    pub fn new(tau: f64, n: usize, spec: QuadratureSpec) -> Result<Self> {
        let mass = density_mass(tau, n, &spec)?;
        Ok(Self { tau, n, mass, spec })
    }

    pub fn as_written(&self, z: Complex64) -> Result<f64> {
        rho_finite_with(z, self.tau, self.n, &self.spec)
    }

    pub fn renormalized(&self, z: Complex64) -> Result<f64> {
        Ok(self.as_written(z)? / self.mass)
    }
}

/// `ρ_finite / ∫ ρ_finite`.
pub fn rho_finite_renormalized(z: Complex64, tau: f64, n: usize) -> Result<f64> {
    FiniteDensity::new(tau, n, QuadratureSpec::default())?.renormalized(z)
}

/// Exact mean density of `X = √τ G`: `Q(N, N|z|^2/τ) / (πτ)`, with `Q` the
/// regularized upper incomplete gamma function.
pub fn rho_ginibre_exact(z: Complex64, tau: f64, n: usize) -> Result<f64> {
    check(tau, n)?;
    let nf = n as f64;
    Ok(gamma_q(nf, nf * z.norm_sqr() / tau) / (PI * tau))
}

/// Fraction of eigenvalues of `X = √τ G` inside `|λ| < abs_z`:
/// `X Q(N, X)/N + P(N + 1, X)` with `X = N |z|^2/τ`.
pub fn cumulative_mass_exact(abs_z: f64, tau: f64, n: usize) -> Result<f64> {
    check(tau, n)?;
    let nf = n as f64;
    let x = nf * abs_z * abs_z / tau;
    Ok(x * gamma_q(nf, x) / nf + gamma_p(nf + 1.0, x))
}

/// Mean resolvent `<(1/N) Tr (z - X)^{-1}>` of `X = √τ G`; for a radial
/// density it is the enclosed mass over `z`.
pub fn resolvent_exact(z: Complex64, tau: f64, n: usize) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Ok(z);
    }
    Ok(z.inv() * cumulative_mass_exact(z.norm(), tau, n)?)
}

/// `(1/(2πτ)) erfc(√(2/τ) η)`.
pub fn rho_edge_erfc(eta: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(invalid("tau must be positive"));
    }
    Ok(erfc((2.0 / tau).sqrt() * eta) / (2.0 * PI * tau))
}

/// Outcome of a finite-difference PDE check.
#[derive(Clone, Copy, Debug)]
pub struct PdeCheck {
    /// `|lhs - rhs|` at `fd_step`.
    pub residual: f64,
    /// The same at `fd_step / 2`.
    pub residual_half_step: f64,
    /// Richardson estimate of the truncation error in `residual`.
    pub truncation_estimate: f64,
    /// Magnitudes of the individual terms at `fd_step`.
    pub time_derivative: f64,
    pub advection: f64,
    pub viscous: f64,
    pub fd_step: f64,
    /// True when the residual cannot be told apart from truncation error.
    pub inconclusive: bool,
}

impl PdeCheck {
    /// `residual / residual_half_step`; about 4 for second-order stencils.
    pub fn convergence_ratio(&self) -> f64 {
        self.residual / self.residual_half_step
    }
}

struct Terms {
    residual: Complex64,
    time: f64,
    advection: f64,
    viscous: f64,
}

fn pde_check<F: Fn(f64) -> Result<Terms>>(fd_step: f64, eval: F) -> Result<PdeCheck> {
    let full = eval(fd_step)?;
    let half = eval(0.5 * fd_step)?;
    let trunc = (full.residual - half.residual).norm() * 4.0 / 3.0;
    let residual = full.residual.norm();
    Ok(PdeCheck {
        residual,
        residual_half_step: half.residual.norm(),
        truncation_estimate: trunc,
        time_derivative: full.time,
        advection: full.advection,
        viscous: full.viscous,
        fd_step,
        inconclusive: trunc > residual,
    })
}

fn check_stencil(r: f64, tau: f64, n: usize, fd_step: f64) -> Result<()> {
    check(tau, n)?;
    if !(fd_step > 0.0) || !(r > 2.0 * fd_step) || !(tau > 2.0 * fd_step) {
        return Err(invalid("need fd_step > 0 with r and tau larger than 2 fd_step"));
    }
    Ok(())
}

/// Which terms of the velocity equation to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Viscosity {
    Included,
    Dropped,
}

/// Residual of `∂_τ v = v ∂_r v + (1/N)(Δ_r - 1/(4r^2)) v` with
/// `Δ_r = (∂_rr + ∂_r / r)/4`; `fd_step` is an absolute step in `r` and `τ`.
pub fn burgers_residual_v(
    z: Complex64,
    r: f64,
    tau: f64,
    n: usize,
    fd_step: f64,
    viscosity: Viscosity,
    spec: &QuadratureSpec,
) -> Result<PdeCheck> {
    check_stencil(r, tau, n, fd_step)?;
    let v = |rr: f64, tt: f64| kernel_integral(z, rr, tt, n, spec).map(|k| k.v());
    let nf = n as f64;
    pde_check(fd_step, |h| {
        let vc = v(r, tau)?;
        let (vrp, vrm) = (v(r + h, tau)?, v(r - h, tau)?);
        let (vtp, vtm) = (v(r, tau + h)?, v(r, tau - h)?);
        let vt = (vtp - vtm) / (2.0 * h);
        let vr = (vrp - vrm) / (2.0 * h);
        let vrr = (vrp - 2.0 * vc + vrm) / (h * h);
        let adv = vc * vr;
        let visc = match viscosity {
            Viscosity::Included => (0.25 * (vrr + vr / r) - vc / (4.0 * r * r)) / nf,
            Viscosity::Dropped => 0.0,
        };
        Ok(Terms {
            residual: Complex64::new(vt - adv - visc, 0.0),
            time: vt.abs(),
            advection: adv.abs(),
            viscous: visc.abs(),
        })
    })
}

/// Residual of `∂_τ g = v ∂_r g + (1/N) Δ_r g`.
pub fn burgers_residual_g(z: Complex64, r: f64, tau: f64, n: usize, fd_step: f64, spec: &QuadratureSpec) -> Result<PdeCheck> {
    check_stencil(r, tau, n, fd_step)?;
    let k = |rr: f64, tt: f64| kernel_integral(z, rr, tt, n, spec);
    let nf = n as f64;
    pde_check(fd_step, |h| {
        let c = k(r, tau)?;
        let (gc, vc) = (c.g(), c.v());
        let (grp, grm) = (k(r + h, tau)?.g(), k(r - h, tau)?.g());
        let (gtp, gtm) = (k(r, tau + h)?.g(), k(r, tau - h)?.g());
        let gt = (gtp - gtm) / (2.0 * h);
        let gr = (grp - grm) / (2.0 * h);
        let grr = (grp - 2.0 * gc + grm) / (h * h);
        let adv = gr * vc;
        let visc = (grr + gr / r) * (0.25 / nf);
        Ok(Terms {
            residual: gt - adv - visc,
            time: gt.norm(),
            advection: adv.norm(),
            viscous: visc.norm(),
        })
    })
}

/// `|∂_z v - ½ ∂_r g|`, with `∂_z = (∂_x - i ∂_y)/2` by central differences.
#[derive(Clone, Copy, Debug)]
pub struct ConstraintCheck {
    pub residual: f64,
    pub dz_v: Complex64,
    pub half_dr_g: Complex64,
}

pub fn constraint_residual(z: Complex64, r: f64, tau: f64, n: usize, fd_step: f64, spec: &QuadratureSpec) -> Result<ConstraintCheck> {
    check_stencil(r, tau, n, fd_step)?;
    let h = fd_step;
    let v = |zz: Complex64| kernel_integral(zz, r, tau, n, spec).map(|k| k.v());
    let g = |rr: f64| kernel_integral(z, rr, tau, n, spec).map(|k| k.g());
    let dx = (v(z + Complex64::new(h, 0.0))? - v(z - Complex64::new(h, 0.0))?) / (2.0 * h);
    let dy = (v(z + Complex64::new(0.0, h))? - v(z - Complex64::new(0.0, h))?) / (2.0 * h);
    let dz_v = Complex64::new(0.5 * dx, -0.5 * dy);
    let half_dr_g = (g(r + h)? - g(r - h)?) / (4.0 * h);
    Ok(ConstraintCheck {
        residual: (dz_v - half_dr_g).norm(),
        dz_v,
        half_dr_g,
    })
}
