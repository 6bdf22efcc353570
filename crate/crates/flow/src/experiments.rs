//! The seven experiments. Each returns its tables, summary statistics and
//! embedded checks; [`run`] writes them with a manifest.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use ginibre_core::dynamics::{make_initial, DiffusionParams, InitialCondition};
use ginibre_core::estimators::{
    ensemble_log_determinants, estimate_density, estimate_petermann, fraction_outside, mean_from_log_values,
    mean_resolvent_rotated, sample_eigenvalues, sample_spectra, spectra_from_eigenvalues, RadialBins,
};
use ginibre_core::finite_n::{
    cumulative_mass_exact, d_quadrature, resolvent_exact, rho_edge_erfc, rho_ginibre_exact, burgers_residual_g,
    burgers_residual_v, constraint_residual, FiniteDensity, PdeCheck, Viscosity,
};
use ginibre_core::flow::{caustic_locus, characteristics_fan, g_analytic, petermann_analytic, shock_birth_time, solve_v, v0_derivative};
use ginibre_core::spectral::{quaternionic_determinant, EigenOptions, QuaternionPoint};
use ginibre_core::Complex64;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{config_err, Result};
use crate::output::{fmt, Check, RunManifest, SeedRecord, Sink, Table};

/// Tables, summary and checks produced by one experiment.
#[derive(Default)]
pub struct Outcome {
    pub tables: Vec<(String, Table)>,
    pub summary: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub lineage: Vec<SeedRecord>,
}

/// Seed for the `k`-th time slice; slice 0 uses the master seed itself.
pub fn derive_seed(master: u64, k: usize) -> u64 {
    master.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn tau_tag(tau: f64) -> String {
    format!("{tau}")
}

fn params_for(c: &ExperimentConfig, k: usize, tau: f64, out: &mut Outcome) -> Result<DiffusionParams> {
    let seed = derive_seed(c.master_seed, k);
    out.lineage.push(SeedRecord {
        tau,
        master_seed: c.master_seed,
        stream_seed: seed,
        sample_indices: [0, c.num_samples],
    });
    Ok(DiffusionParams::new(c.n, tau, seed, c.num_samples)?)
}

fn uniform_bins(c: &ExperimentConfig, tau: f64) -> Result<RadialBins> {
    if let Some(e) = &c.bin_edges {
        return Ok(RadialBins::from_edges(e)?);
    }
    let w = c.bin_width.unwrap_or(0.05 * tau.sqrt());
    let r_max = c.r_max.unwrap_or(1.3 * tau.sqrt());
    Ok(RadialBins::uniform(0.0, r_max, w)?)
}

/// One bin per configured radius: equal-area when `bin_area` is set,
/// otherwise of width `bin_width` (a disc for a zero center). Bins may
/// overlap, so each is estimated on its own.
pub fn centered_bins(c: &ExperimentConfig, tau: f64) -> Result<Vec<RadialBins>> {
    let centers = c.radii(tau);
    if let Some(a) = c.bin_area {
        return centers
            .iter()
            .map(|&x| Ok(RadialBins::single_equal_area(x, a * PI * tau)?))
            .collect();
    }
    let w = c.bin_width.unwrap_or(0.05 * tau.sqrt());
    centers
        .iter()
        .map(|&x| {
            let iv = if x <= 0.5 * w { (0.0, (x + 0.5 * w).max(0.5 * w)) } else { (x - 0.5 * w, x + 0.5 * w) };
            Ok(RadialBins::from_intervals(vec![iv])?)
        })
        .collect()
}

/// `1 - <|z|^2>/τ` over an annulus inside the disc; NaN if it reaches past
/// the edge.
pub fn petermann_bin_theory(lo: f64, hi: f64, tau: f64) -> f64 {
    if hi * hi > tau {
        return f64::NAN;
    }
    1.0 - 0.5 * (lo * lo + hi * hi) / tau
}

pub fn density(c: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut worst_z = 0.0f64;
    for (k, &tau) in c.tau_grid.iter().enumerate() {
        let p = params_for(c, k, tau, &mut out)?;
        let spectra = spectra_from_eigenvalues(sample_eigenvalues(&p, &InitialCondition::Zero, c.execution())?);
        let bins = uniform_bins(c, tau)?;
        let prof = estimate_density(&spectra, &bins)?;
        let mut t = Table::new(&["bin_lo", "bin_hi", "value", "std_error", "count", "exact_finite_n"]);
        let mut bulk_dev = 0.0f64;
        for (b, &(lo, hi)) in bins.intervals().iter().enumerate() {
            let reference = (cumulative_mass_exact(hi, tau, c.n)? - cumulative_mass_exact(lo, tau, c.n)?) / bins.area(b);
            t.push(vec![fmt(lo), fmt(hi), fmt(prof.values[b]), fmt(prof.std_errors[b]), prof.counts[b].to_string(), fmt(reference)]);
            let expected_count = reference * bins.area(b) * (c.n * c.num_samples) as f64;
            if expected_count >= 10.0 && prof.std_errors[b] > 0.0 {
                worst_z = worst_z.max((prof.values[b] - reference).abs() / prof.std_errors[b]);
            }
            if hi <= 0.9 * tau.sqrt() {
                bulk_dev = bulk_dev.max((prof.values[b] * PI * tau - 1.0).abs());
            }
        }
        let tag = tau_tag(tau);
        out.summary.insert(format!("tau_{tag}.max_rel_dev_inside_0.9"), json!(bulk_dev));
        out.summary.insert(format!("tau_{tag}.fraction_outside_1.1"), json!(fraction_outside(&spectra, 1.1 * tau.sqrt())));
        out.tables.push((format!("density_tau_{tag}.csv"), t));
    }
    out.checks.push(Check::below("density matches exact finite-N profile (max z-score)", worst_z, 5.0));
    Ok(out)
}

pub fn petermann(c: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let opts = EigenOptions {
        full_overlaps: false,
        condition_threshold: c.condition_threshold,
    };
    let nf = c.n as f64;
    let mut t = Table::new(&["tau", "abs_z", "bin_lo", "bin_hi", "value", "std_error", "count", "theory", "excluded_samples"]);
    let mut excluded = 0usize;
    for (k, &tau) in c.tau_grid.iter().enumerate() {
        let p = params_for(c, k, tau, &mut out)?;
        let spectra = sample_spectra(&p, &InitialCondition::Zero, &opts, c.execution())?;
        let mut excluded_here = 0;
        for (bins, center) in centered_bins(c, tau)?.iter().zip(c.radii(tau)) {
            let est = estimate_petermann(&spectra, bins)?;
            excluded_here = est.excluded_samples;
            let prof = est.profile.scaled(1.0 / nf);
            let (lo, hi) = bins.intervals()[0];
            let theory = petermann_bin_theory(lo, hi, tau);
            t.push(vec![
                fmt(tau),
                fmt(center),
                fmt(lo),
                fmt(hi),
                fmt(prof.values[0]),
                fmt(prof.std_errors[0]),
                prof.counts[0].to_string(),
                fmt(theory),
                est.excluded_samples.to_string(),
            ]);
            out.summary.insert(format!("tau_{}.abs_z_{center}.rel_dev", tau_tag(tau)), json!((prof.values[0] - theory) / theory));
        }
        excluded += excluded_here;
    }
    out.tables.push(("petermann.csv".into(), t));

    let t_hi = c.tau_grid.iter().copied().fold(0.0, f64::max) * 1.1;
    let mut th = Table::new(&["tau", "abs_z", "value"]);
    for &z in &c.abs_z {
        for i in 1..=200 {
            let tau = t_hi * i as f64 / 200.0;
            let zz = if c.scale_abs_z { z * tau.sqrt() } else { z };
            let v = petermann_analytic(Complex64::new(zz, 0.0), tau)?.unwrap_or(f64::NAN);
            th.push(vec![fmt(tau), fmt(zz), fmt(v)]);
        }
    }
    out.tables.push(("petermann_theory.csv".into(), th));
    out.summary.insert("excluded_samples".into(), json!(excluded));
    Ok(out)
}

pub fn greens(c: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut t = Table::new(&[
        "tau", "abs_z", "re", "im", "std_error_re", "std_error_im", "theory_re", "theory_im", "exact_re", "exact_im",
    ]);
    let mut worst = 0.0f64;
    for (k, &tau) in c.tau_grid.iter().enumerate() {
        let p = params_for(c, k, tau, &mut out)?;
        let eigs = sample_eigenvalues(&p, &InitialCondition::Zero, c.execution())?;
        for a in c.radii(tau) {
            if a == 0.0 {
                return Err(config_err("greens needs abs_z > 0"));
            }
            let z = Complex64::new(a, 0.0);
            let m = mean_resolvent_rotated(&eigs, z, c.angles)?;
            let th = g_analytic(z, tau)?;
            let ex = resolvent_exact(z, tau, c.n)?;
            t.push(vec![
                fmt(tau),
                fmt(a),
                fmt(m.mean.re),
                fmt(m.mean.im),
                fmt(m.std_error_re),
                fmt(m.std_error_im),
                fmt(th.re),
                fmt(th.im),
                fmt(ex.re),
                fmt(ex.im),
            ]);
            // sample errors miss rare eigenvalues beyond |z|, so floor them
            let se = m.std_error_re.hypot(m.std_error_im).max(1e-5 * ex.norm());
            worst = worst.max((m.mean - ex).norm() / se);
            out.summary.insert(format!("tau_{}.abs_z_{a}.rel_err_vs_theory", tau_tag(tau)), json!((m.mean - th).norm() / th.norm()));
        }
    }
    out.tables.push(("greens.csv".into(), t));
    out.checks.push(Check::below("resolvent matches exact finite-N mean (max z-score, error floored at 1e-5 relative)", worst, 5.0));
    Ok(out)
}

pub fn characteristics(c: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let abs_z = *c.abs_z.first().ok_or_else(|| config_err("characteristics needs abs_z"))?;
    let a = abs_z * abs_z;
    let fan = characteristics_fan(abs_z, c.tau_max, &c.xi_grid)?;
    let mut lines = Table::new(&["xi", "tau", "r"]);
    let mut meta = Table::new(&["xi", "slope", "tau_caustic", "tau_shock", "tau_end"]);
    for ch in &fan {
        let end = ch.tau_shock.unwrap_or(c.tau_max).min(c.tau_max);
        for i in 0..c.points_per_line {
            let tau = end * i as f64 / (c.points_per_line - 1) as f64;
            lines.push(vec![fmt(ch.xi), fmt(tau), fmt(ch.r_at(tau))]);
        }
        let opt = |x: Option<f64>| fmt(x.unwrap_or(f64::NAN));
        meta.push(vec![fmt(ch.xi), fmt(ch.slope), opt(ch.tau_caustic), opt(ch.tau_shock), fmt(ch.tau_range.1)]);
    }
    let mut caustics = Table::new(&["xi", "tau", "r"]);
    let mut shock = Table::new(&["tau", "r"]);
    let mut worst = 0.0f64;
    if a > 0.0 && a < c.tau_max {
        let m = 2 * c.points_per_line;
        for i in 0..m {
            let tau = a + (c.tau_max - a) * i as f64 / (m - 1) as f64;
            for cp in caustic_locus(abs_z, tau)? {
                worst = worst.max((1.0 - tau * v0_derivative(cp.xi_star, abs_z)).abs());
                caustics.push(vec![fmt(cp.xi_star), fmt(tau), fmt(cp.r_star)]);
                caustics.push(vec![fmt(-cp.xi_star), fmt(tau), fmt(-cp.r_star)]);
            }
        }
        shock.push(vec![fmt(a), fmt(0.0)]);
        shock.push(vec![fmt(c.tau_max), fmt(0.0)]);
    }
    let mut v_axis = Table::new(&["tau", "value"]);
    for i in 1..=200 {
        let tau = c.tau_max * i as f64 / 200.0;
        v_axis.push(vec![fmt(tau), fmt(solve_v(Complex64::new(abs_z, 0.0), 0.0, tau)?.v)]);
    }
    out.tables.push(("characteristics.csv".into(), lines));
    out.tables.push(("characteristic_lines.csv".into(), meta));
    out.tables.push(("caustics.csv".into(), caustics));
    out.tables.push(("shock.csv".into(), shock));
    out.tables.push(("v_axis.csv".into(), v_axis));
    out.checks.push(Check::below("caustic points satisfy 1 = tau v0'(xi)", worst, 1e-12));
    if a > 0.0 {
        let birth = shock_birth_time(abs_z)?;
        out.summary.insert("shock_birth_time".into(), json!(birth));
        out.checks.push(Check::near("shock birth at |z|^2", birth, a, 1e-10));
    }
    Ok(out)
}

pub fn edge(c: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let nf = c.n as f64;
    for &tau in &c.tau_grid {
        let fd = FiniteDensity::new(tau, c.n, c.quadrature())?;
        let mut t = Table::new(&["eta", "value", "reference_value", "value_renormalized", "exact_finite_n"]);
        let mut worst = 0.0f64;
        for i in 0..c.eta_points {
            let eta = c.eta_min + (c.eta_max - c.eta_min) * i as f64 / (c.eta_points - 1) as f64;
            let z = Complex64::new(tau.sqrt() + eta / nf.sqrt(), 0.0);
            let v = fd.as_written(z)?;
            let r = rho_edge_erfc(eta, tau)?;
            worst = worst.max((v - r).abs() * PI * tau);
            t.push(vec![fmt(eta), fmt(v), fmt(r), fmt(v / fd.mass), fmt(rho_ginibre_exact(z, tau, c.n)?)]);
        }
        let tag = tau_tag(tau);
        let mid = fd.as_written(Complex64::new(tau.sqrt(), 0.0))? * PI * tau;
        out.summary.insert(format!("tau_{tag}.mass_as_written"), json!(fd.mass));
        out.summary.insert(format!("tau_{tag}.max_dev_times_pi_tau"), json!(worst));
        out.summary.insert(format!("tau_{tag}.ratio_at_eta_0"), json!(mid));
        if c.n >= 200 {
            out.checks.push(Check::below(format!("tau {tag}: erfc edge deviation x pi tau"), worst, 0.04));
            out.checks.push(Check::near(format!("tau {tag}: density/bulk at eta 0"), mid, 0.5, 0.05));
        }
        out.tables.push((format!("edge_tau_{tag}.csv"), t));
    }
    Ok(out)
}

fn pde_row(t: &mut Table, eq: &str, z: Complex64, r: f64, tau: f64, n: usize, p: &PdeCheck) {
    t.push(vec![
        eq.into(),
        fmt(z.re),
        fmt(z.im),
        fmt(r),
        fmt(tau),
        n.to_string(),
        fmt(p.fd_step),
        fmt(p.residual),
        fmt(p.residual_half_step),
        fmt(p.truncation_estimate),
        fmt(p.convergence_ratio()),
        fmt(p.time_derivative),
        fmt(p.advection),
        fmt(p.viscous),
    ]);
}

pub fn verify_burgers(c: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let spec = c.quadrature();
    let mut t = Table::new(&[
        "equation", "z_re", "z_im", "r", "tau", "n", "fd_step", "residual", "residual_half_step", "truncation_estimate",
        "convergence_ratio", "time_derivative", "advection", "viscous",
    ]);
    for &tau in &c.tau_grid {
        for p in &c.points {
            let z = Complex64::new(p.re, p.im);
            let label = format!("z={z} r={} tau={tau}", p.r);
            let v = burgers_residual_v(z, p.r, tau, c.n, c.fd_step, Viscosity::Included, &spec)?;
            let vi = burgers_residual_v(z, p.r, tau, c.n, c.fd_step, Viscosity::Dropped, &spec)?;
            let g = burgers_residual_g(z, p.r, tau, c.n, c.fd_step, &spec)?;
            let k = constraint_residual(z, p.r, tau, c.n, c.fd_step, &spec)?;
            pde_row(&mut t, "v", z, p.r, tau, c.n, &v);
            pde_row(&mut t, "v_without_viscosity", z, p.r, tau, c.n, &vi);
            pde_row(&mut t, "g", z, p.r, tau, c.n, &g);
            let nan = fmt(f64::NAN);
            t.push(vec![
                "constraint".into(),
                fmt(z.re),
                fmt(z.im),
                fmt(p.r),
                fmt(tau),
                c.n.to_string(),
                fmt(c.fd_step),
                fmt(k.residual),
                nan.clone(),
                nan.clone(),
                nan.clone(),
                nan.clone(),
                nan.clone(),
                nan,
            ]);
            out.checks.push(Check::below(format!("{label}: v residual"), v.residual, 1e-5));
            out.checks.push(Check::between(format!("{label}: v step-halving ratio"), v.convergence_ratio(), 3.5, 4.5));
            out.checks.push(Check::below(format!("{label}: g residual"), g.residual, 1e-5));
            out.checks.push(Check::between(format!("{label}: g step-halving ratio"), g.convergence_ratio(), 3.5, 4.5));
            out.checks.push(Check::below(format!("{label}: constraint"), k.residual, 1e-6));
            out.summary.insert(format!("{label}.inviscid_over_viscid"), json!(vi.residual / v.residual));
        }
    }
    out.tables.push(("burgers.csv".into(), t));
    Ok(out)
}

/// Twenty `(z, w)` points spread over a few radii and phases.
pub fn determinant_grid() -> Vec<QuaternionPoint> {
    (0..20)
        .map(|k| {
            let z = Complex64::from_polar(0.15 + 0.1 * k as f64, 0.7 * k as f64);
            let w = Complex64::from_polar(0.05 * (k % 7) as f64, 1.3 * k as f64);
            QuaternionPoint::new(z, w)
        })
        .collect()
}

/// `ln D0` and `ln D0'` at a point.
pub fn initial_determinant_forms(p: &QuaternionPoint, n: usize) -> (f64, f64) {
    let s = p.z.norm_sqr() + p.r * p.r;
    let nf = n as f64;
    (nf * s.ln(), nf * s.ln() + (1.0 + p.r * p.r / (s * s)).ln())
}

/// Largest relative error of the two initial determinants over the grid.
pub fn initial_determinant_error(n: usize, t: Option<&mut Table>) -> Result<f64> {
    let zero = make_initial(&InitialCondition::Zero, n)?;
    let nil = make_initial(&InitialCondition::Nilpotent(Complex64::new(1.0, 0.0)), n)?;
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for p in determinant_grid() {
        let (d0, d1) = initial_determinant_forms(&p, n);
        for (kind, x, want) in [("zero", &zero, d0), ("nilpotent", &nil, d1)] {
            let got = quaternionic_determinant(x, &p).ln();
            let rel = (got - want).exp_m1().abs();
            worst = worst.max(rel);
            rows.push(vec![kind.to_string(), n.to_string(), fmt(p.z.re), fmt(p.z.im), fmt(p.w.re), fmt(p.w.im), fmt(got), fmt(want), fmt(rel)]);
        }
    }
    if let Some(t) = t {
        for r in rows {
            t.push(r);
        }
    }
    Ok(worst)
}

pub fn determinant_check(c: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut init = Table::new(&["kind", "n", "z_re", "z_im", "w_re", "w_im", "log_value", "log_reference", "rel_error"]);
    if c.n >= 2 {
        let worst = initial_determinant_error(c.n, Some(&mut init))?;
        out.checks.push(Check::below("initial determinants match closed forms", worst, 1e-10));
    }
    out.tables.push(("initial_determinants.csv".into(), init));

    let spec = c.quadrature();
    let tau = c.tau_grid[0];
    let p = params_for(c, 0, tau, &mut out)?;
    let pts: Vec<QuaternionPoint> = c.points.iter().map(|q| QuaternionPoint::radial(Complex64::new(q.re, q.im), q.r)).collect();
    let logs = ensemble_log_determinants(&p, &InitialCondition::Zero, &pts, c.execution())?;
    let mut t = Table::new(&["z_re", "z_im", "r", "tau", "mc_log_mean", "mc_log_std_error", "effective_samples", "quadrature_log", "sigma"]);
    for (q, l) in pts.iter().zip(&logs) {
        let m = mean_from_log_values(l)?;
        let d = d_quadrature(q.z, q.r, tau, c.n, &spec)?.ln();
        let sigma = (m.log_mean - d) / m.log_std_error;
        t.push(vec![
            fmt(q.z.re),
            fmt(q.z.im),
            fmt(q.r),
            fmt(tau),
            fmt(m.log_mean),
            fmt(m.log_std_error),
            fmt(m.effective_sample_size),
            fmt(d),
            fmt(sigma),
        ]);
        out.checks.push(Check::below(format!("z={} r={}: |MC - quadrature| in standard errors", q.z, q.r), sigma.abs(), 3.0));
        if m.dominated {
            out.summary.insert(format!("z={} r={}.dominated", q.z, q.r), json!(true));
        }
    }
    out.tables.push(("quadrature_vs_mc.csv".into(), t));
    Ok(out)
}

pub fn execute(c: &ExperimentConfig) -> Result<Outcome> {
    match c.experiment {
        Experiment::Density => density(c),
        Experiment::Petermann => petermann(c),
        Experiment::Greens => greens(c),
        Experiment::Characteristics => characteristics(c),
        Experiment::Edge => edge(c),
        Experiment::VerifyBurgers => verify_burgers(c),
        Experiment::DeterminantCheck => determinant_check(c),
    }
}

pub fn worker_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Runs the experiment, writes its CSV files and `manifest.json` into
/// `out_dir`, and returns the manifest.
pub fn run(c: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    c.validate()?;
    let start = Instant::now();
    let outcome = execute(c)?;
    let mut sink = Sink::new(out_dir)?;
    for (name, table) in &outcome.tables {
        sink.write(name, table)?;
    }
    let passed = outcome.checks.iter().all(|ch| ch.passed);
    let manifest = RunManifest {
        experiment: c.experiment.name().into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: c.clone(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        worker_threads: worker_threads(),
        summary: outcome.summary,
        checks: outcome.checks,
        passed,
        rng_lineage: outcome.lineage,
        files: sink.files.clone(),
    };
    sink.write_json("manifest.json", &manifest)?;
    Ok(manifest)
}
