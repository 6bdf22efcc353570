//! The acceptance suite: each criterion runs its own small experiment and
//! reports a list of checks.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ginibre_core::dynamics::{DiffusionParams, InitialCondition};
use ginibre_core::estimators::{
    ensemble_log_determinants, estimate_density, estimate_petermann, fraction_outside, mean_from_log_values,
    mean_resolvent, mean_resolvent_rotated, sample_spectra, RadialBins,
};
use ginibre_core::finite_n::{
    burgers_residual_g, burgers_residual_v, constraint_residual, d_quadrature, rho_edge_erfc, FiniteDensity,
    QuadratureSpec, Viscosity,
};
use ginibre_core::flow::{cardano_residual, cubic_roots, shock_birth_time, solve_v, FlowPoint};
use ginibre_core::rng::SampleStream;
use ginibre_core::spectral::{EigenOptions, QuaternionPoint, SpectralSample};
use ginibre_core::{Complex64, Execution};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{config_err, FlowError, Result};
use crate::experiments::{derive_seed, initial_determinant_error, petermann_bin_theory, run};
use crate::output::{fmt, Check, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    /// Small N and few samples; statistical tolerances widened by 4 standard errors.
    Quick,
    /// Full-size runs with the stated tolerances.
    Full,
}

impl FromStr for Level {
    type Err = FlowError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            _ => Err(config_err(format!("unknown level '{s}' (quick or full)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    Petermann,
    Density,
    Greens,
    Cardano,
    CausticBirth,
    InitialDeterminants,
    QuadratureVsMc,
    Burgers,
    ErfcEdge,
    Reproducibility,
}

impl Criterion {
    pub const ALL: [Criterion; 10] = [
        Criterion::Petermann,
        Criterion::Density,
        Criterion::Greens,
        Criterion::Cardano,
        Criterion::CausticBirth,
        Criterion::InitialDeterminants,
        Criterion::QuadratureVsMc,
        Criterion::Burgers,
        Criterion::ErfcEdge,
        Criterion::Reproducibility,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Petermann => "petermann-factor",
            Criterion::Density => "uniform-disc-density",
            Criterion::Greens => "greens-function",
            Criterion::Cardano => "cardano-shock-limits",
            Criterion::CausticBirth => "caustic-shock-birth",
            Criterion::InitialDeterminants => "initial-determinants",
            Criterion::QuadratureVsMc => "quadrature-vs-monte-carlo",
            Criterion::Burgers => "viscid-burgers-exactness",
            Criterion::ErfcEdge => "erfc-edge",
            Criterion::Reproducibility => "reproducibility",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The velocity solver under test; swappable so a broken one can be shown
/// to fail the suite.
pub type Solver = fn(Complex64, f64, f64) -> ginibre_core::Result<FlowPoint>;

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub level: Level,
    pub solver: Solver,
    pub master_seed: u64,
    pub criteria: Vec<Criterion>,
}

impl VerifyOptions {
    pub fn new(level: Level) -> Self {
        Self {
            level,
            solver: solve_v,
            master_seed: 20_240_601,
            criteria: Criterion::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CriterionReport {
    pub criterion: Criterion,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// `PASS name: ...` or `FAIL name: ...` with the failing checks.
    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let shown: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !self.passed() == !c.passed || self.passed())
            .map(|c| format!("{} = {:.4e} (expected {:.4e} +/- {:.2e})", c.name, c.measured, c.expected, c.tolerance))
            .collect();
        let mut s = format!("{verdict} {}: {} checks, {:.1}s", self.criterion, self.checks.len(), self.seconds);
        let limit = if self.passed() { 3 } else { shown.len() };
        for d in shown.iter().take(limit) {
            s.push_str("; ");
            s.push_str(d);
        }
        if shown.len() > limit {
            s.push_str(&format!("; ... {} more", shown.len() - limit));
        }
        s
    }
}

/// Sizes for the shared N-large ensemble and per-criterion runs.
struct Scale {
    big_n: usize,
    big_samples: usize,
    pet_n: usize,
    pet_samples: usize,
    pet_taus: Vec<f64>,
    mc_samples: usize,
    widen: f64,
}

impl Scale {
    fn for_level(level: Level) -> Self {
        match level {
            Level::Full => Scale {
                big_n: 200,
                big_samples: 1000,
                pet_n: 100,
                pet_samples: 3000,
                pet_taus: vec![0.5, 1.0, 2.0],
                mc_samples: 100_000,
                widen: 0.0,
            },
            Level::Quick => Scale {
                big_n: 100,
                big_samples: 300,
                pet_n: 50,
                pet_samples: 500,
                pet_taus: vec![1.0],
                mc_samples: 20_000,
                widen: 4.0,
            },
        }
    }
}

/// Spectra with overlaps at `tau = 1`, shared by the density, resolvent
/// and edge Petermann checks.
struct Shared {
    big: Option<Vec<SpectralSample>>,
}

fn big_ensemble<'a>(shared: &'a mut Shared, s: &Scale, seed: u64) -> Result<&'a [SpectralSample]> {
    if shared.big.is_none() {
        let p = DiffusionParams::new(s.big_n, 1.0, derive_seed(seed, 100), s.big_samples)?;
        shared.big = Some(sample_spectra(&p, &InitialCondition::Zero, &EigenOptions::default(), Execution::Parallel)?);
    }
    Ok(shared.big.as_deref().unwrap_or_default())
}

/// Runs the selected criteria in order.
pub fn verify_all(opts: &VerifyOptions) -> Result<Vec<CriterionReport>> {
    let mut shared = Shared { big: None };
    opts.criteria.iter().map(|&c| verify_one(c, opts, &mut shared)).collect()
}

/// Runs a single criterion on its own.
pub fn verify_criterion(c: Criterion, opts: &VerifyOptions) -> Result<CriterionReport> {
    verify_one(c, opts, &mut Shared { big: None })
}

fn verify_one(c: Criterion, opts: &VerifyOptions, shared: &mut Shared) -> Result<CriterionReport> {
    let start = Instant::now();
    let s = Scale::for_level(opts.level);
    let mut notes = Vec::new();
    let checks = match c {
        Criterion::Petermann => petermann(opts, &s, shared, &mut notes)?,
        Criterion::Density => density(opts, &s, shared, &mut notes)?,
        Criterion::Greens => greens(opts, &s, shared)?,
        Criterion::Cardano => cardano(opts)?,
        Criterion::CausticBirth => caustic_birth()?,
        Criterion::InitialDeterminants => initial_determinants()?,
        Criterion::QuadratureVsMc => quadrature_vs_mc(opts, &s, &mut notes)?,
        Criterion::Burgers => burgers()?,
        Criterion::ErfcEdge => erfc_edge()?,
        Criterion::Reproducibility => reproducibility(&mut notes)?,
    };
    Ok(CriterionReport {
        criterion: c,
        checks,
        notes,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn petermann(opts: &VerifyOptions, s: &Scale, shared: &mut Shared, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let centers = [0.0, 0.5, 0.8];
    let edge_center = 0.95;
    let eopts = EigenOptions::default();
    let mut edge_small = f64::NAN;
    for (k, &tau) in s.pet_taus.iter().enumerate() {
        let p = DiffusionParams::new(s.pet_n, tau, derive_seed(opts.master_seed, k), s.pet_samples)?;
        let spectra = sample_spectra(&p, &InitialCondition::Zero, &eopts, Execution::Parallel)?;
        let mut bins = Vec::new();
        for &c in &centers {
            bins.push(RadialBins::single_equal_area(c * tau.sqrt(), 0.2 * PI * tau)?);
        }
        bins.push(RadialBins::single_equal_area(edge_center * tau.sqrt(), 0.1 * PI * tau)?);
        let mut rel = Vec::new();
        for b in &bins {
            let est = estimate_petermann(&spectra, b)?;
            if est.excluded_samples > 0 && rel.is_empty() {
                notes.push(format!("tau {tau}: {} ill-conditioned samples excluded", est.excluded_samples));
            }
            let prof = est.profile.scaled(1.0 / s.pet_n as f64);
            let (lo, hi) = b.intervals()[0];
            let theory = petermann_bin_theory(lo, hi, tau);
            rel.push((prof.values[0] / theory, prof.std_errors[0] / theory));
        }
        for (&c, &(ratio, se)) in centers.iter().zip(&rel) {
            checks.push(Check::near(
                format!("tau {tau} |z|={c}sqrt(tau) K/N relative to theory"),
                ratio,
                1.0,
                0.05 + s.widen * se,
            ));
        }
        if tau == 1.0 {
            edge_small = (rel[3].0 - 1.0).abs();
        }
    }
    // the same edge bin at twice the size
    let big = big_ensemble(shared, s, opts.master_seed)?;
    let bins = RadialBins::single_equal_area(edge_center, 0.1 * PI)?;
    let est = estimate_petermann(big, &bins)?;
    let (lo, hi) = bins.intervals()[0];
    let edge_big = (est.profile.values[0] / s.big_n as f64 / petermann_bin_theory(lo, hi, 1.0) - 1.0).abs();
    checks.push(Check::below(
        format!("edge |z|={edge_center}: deviation at N={} below N={} value", s.big_n, s.pet_n),
        edge_big,
        edge_small,
    ));
    Ok(checks)
}

fn density(opts: &VerifyOptions, s: &Scale, shared: &mut Shared, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let big = big_ensemble(shared, s, opts.master_seed)?;
    let bins = RadialBins::equal_area(0.9, 18)?;
    let prof = estimate_density(big, &bins)?;
    let (mut worst, mut worst_tol) = (f64::NAN, f64::NAN);
    for b in 0..bins.len() {
        let dev = (prof.values[b] * PI - 1.0).abs();
        let tol = 0.05 + s.widen * prof.std_errors[b] * PI;
        if b == 0 || dev - tol > worst - worst_tol {
            worst = dev;
            worst_tol = tol;
        }
    }
    notes.push(format!("{} equal-area annuli inside |z| < 0.9", bins.len()));
    let outside = fraction_outside(big, 1.1);
    Ok(vec![
        Check::below("worst annulus |pi rho - 1| inside 0.9", worst, worst_tol),
        Check::below("fraction outside |z| = 1.1", outside, 0.005),
    ])
}

fn greens(opts: &VerifyOptions, s: &Scale, shared: &mut Shared) -> Result<Vec<Check>> {
    let big = big_ensemble(shared, s, opts.master_seed)?;
    let eigs: Vec<Vec<Complex64>> = big.iter().map(|x| x.eigenvalues.clone()).collect();
    let out_z = Complex64::new(1.5, 0.0);
    let m = mean_resolvent(&eigs, out_z)?;
    let th = 1.0 / out_z;
    let tol = 0.01 + s.widen * m.std_error_re.hypot(m.std_error_im) / th.norm();
    let in_z = Complex64::new(0.5, 0.0);
    let mi = mean_resolvent_rotated(&eigs, in_z, 64)?;
    let thi = in_z.conj();
    let toli = 0.02 + s.widen * mi.std_error_re.hypot(mi.std_error_im) / thi.norm();
    Ok(vec![
        Check::below("|z|=1.5: |G - 1/z| / |1/z|", (m.mean - th).norm() / th.norm(), tol),
        Check::below("|z|=0.5: |G - conj(z)/tau| / |z/tau|", (mi.mean - thi).norm() / thi.norm(), toli),
    ])
}

fn cardano(opts: &VerifyOptions) -> Result<Vec<Check>> {
    let solver = opts.solver;
    let mut stream = SampleStream::new(opts.master_seed, 0);
    let mut worst_res = 0.0f64;
    let mut worst_branch = 0.0f64;
    for _ in 0..1000 {
        let z = Complex64::new(4.0 * stream.uniform() - 2.0, 4.0 * stream.uniform() - 2.0);
        let r = 2.0 * stream.uniform();
        let tau = 0.01 + 2.99 * stream.uniform();
        let p = solver(z, r, tau)?;
        worst_res = worst_res.max(cardano_residual(p.v, z.norm_sqr(), r, tau).abs());
        for v in cubic_roots(z, r, tau)? {
            worst_branch = worst_branch.max(v - p.v);
        }
    }
    let mut worst_axis = 0.0f64;
    for tau in [0.5, 1.0, 2.0] {
        for k in 0..=20 {
            let a = 1.5 * k as f64 / 20.0;
            let want = if a * a < tau { (tau - a * a).sqrt() / tau } else { 0.0 };
            if (a * a - tau).abs() < 0.05 {
                continue;
            }
            let got = solver(Complex64::new(a, 0.0), 1e-15, tau)?.v;
            worst_axis = worst_axis.max((got - want).abs());
        }
    }
    Ok(vec![
        Check::below("max cubic residual over 1000 random points", worst_res, 1e-12),
        Check::below("largest root not selected (max excess of another root)", worst_branch, 1e-9),
        Check::below("r -> 0 limit error", worst_axis, 1e-10),
    ])
}

fn caustic_birth() -> Result<Vec<Check>> {
    let mut worst = 0.0f64;
    for a in [0.3, 0.5, 0.8, 1.0, 1.3] {
        worst = worst.max((shock_birth_time(a)? - a * a).abs());
    }
    Ok(vec![Check::below("max |tau_birth - |z|^2|", worst, 1e-10)])
}

fn initial_determinants() -> Result<Vec<Check>> {
    [2, 5, 20]
        .iter()
        .map(|&n| Ok(Check::below(format!("N={n}: max relative error"), initial_determinant_error(n, None)?, 1e-10)))
        .collect()
}

fn quadrature_vs_mc(opts: &VerifyOptions, s: &Scale, notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let c = ExperimentConfig::defaults(Experiment::DeterminantCheck);
    let tau = 1.0;
    let p = DiffusionParams::new(c.n, tau, derive_seed(opts.master_seed, 200), s.mc_samples)?;
    let pts: Vec<QuaternionPoint> = c.points.iter().map(|q| QuaternionPoint::radial(Complex64::new(q.re, q.im), q.r)).collect();
    let logs = ensemble_log_determinants(&p, &InitialCondition::Zero, &pts, Execution::Parallel)?;
    let spec = QuadratureSpec::default();
    let mut checks = Vec::new();
    for (q, l) in pts.iter().zip(&logs) {
        let m = mean_from_log_values(l)?;
        if m.dominated {
            notes.push(format!("z={} r={}: effective sample size {:.1}", q.z, q.r, m.effective_sample_size));
        }
        let d = d_quadrature(q.z, q.r, tau, c.n, &spec)?.ln();
        checks.push(Check::below(
            format!("z={} r={}: |MC - quadrature| / SE", q.z, q.r),
            ((m.log_mean - d) / m.log_std_error).abs(),
            3.0,
        ));
    }
    Ok(checks)
}

fn burgers() -> Result<Vec<Check>> {
    let c = ExperimentConfig::defaults(Experiment::VerifyBurgers);
    let spec = c.quadrature();
    let mut checks = Vec::new();
    for p in &c.points {
        let z = Complex64::new(p.re, p.im);
        let tag = format!("z={z} r={}", p.r);
        let v = burgers_residual_v(z, p.r, 1.0, c.n, c.fd_step, Viscosity::Included, &spec)?;
        let g = burgers_residual_g(z, p.r, 1.0, c.n, c.fd_step, &spec)?;
        let k = constraint_residual(z, p.r, 1.0, c.n, c.fd_step, &spec)?;
        checks.push(Check::below(format!("{tag}: v residual"), v.residual, 1e-5));
        checks.push(Check::between(format!("{tag}: v halving ratio"), v.convergence_ratio(), 3.5, 4.5));
        checks.push(Check::below(format!("{tag}: g residual"), g.residual, 1e-5));
        checks.push(Check::between(format!("{tag}: g halving ratio"), g.convergence_ratio(), 3.5, 4.5));
        checks.push(Check::below(format!("{tag}: constraint"), k.residual, 1e-6));
    }
    Ok(checks)
}

fn erfc_edge() -> Result<Vec<Check>> {
    let (n, tau) = (200usize, 1.0);
    let fd = FiniteDensity::new(tau, n, QuadratureSpec::default())?;
    let mut worst = 0.0f64;
    for i in 0..=120 {
        let eta = -3.0 + 6.0 * i as f64 / 120.0;
        let z = Complex64::new(tau.sqrt() + eta / (n as f64).sqrt(), 0.0);
        worst = worst.max((fd.as_written(z)? - rho_edge_erfc(eta, tau)?).abs());
    }
    let mid = fd.as_written(Complex64::new(tau.sqrt(), 0.0))? * PI * tau;
    Ok(vec![
        Check::below("max |rho_N - erfc profile| x pi tau", worst * PI * tau, 0.04),
        Check::near("density / bulk at eta = 0", mid, 0.5, 0.05),
    ])
}

fn small_configs() -> Result<Vec<ExperimentConfig>> {
    let set = |e: Experiment, pairs: &[(&str, &str)]| {
        let raw = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        ExperimentConfig::from_pairs(e, raw)
    };
    Ok(vec![
        set(Experiment::Density, &[("n", "20"), ("num_samples", "40"), ("tau_grid", "0.5,1")])?,
        set(Experiment::Petermann, &[("n", "20"), ("num_samples", "40"), ("bin_area", "0.2")])?,
        set(Experiment::Greens, &[("n", "20"), ("num_samples", "40"), ("angles", "8")])?,
        set(Experiment::Characteristics, &[("xi_grid", "0,0.5,1"), ("points_per_line", "5")])?,
        set(Experiment::DeterminantCheck, &[("n", "6"), ("num_samples", "200")])?,
    ])
}

fn csv_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            files.push((name, std::fs::read(&path)?));
        }
    }
    files.sort();
    Ok(files)
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| config_err(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

fn reproducibility(notes: &mut Vec<String>) -> Result<Vec<Check>> {
    let root = tempfile::tempdir()?;
    let mut checks = Vec::new();
    for c in small_configs()? {
        let mut outputs = Vec::new();
        for (i, (threads, sequential)) in [(1, false), (3, false), (2, true)].into_iter().enumerate() {
            let dir = root.path().join(format!("{}-{i}", c.experiment));
            let mut cfg = c.clone();
            cfg.sequential = sequential;
            with_threads(threads, || run(&cfg, &dir))??;
            outputs.push(csv_bytes(&dir)?);
        }
        let same = outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty();
        notes.push(format!("{}: {} files compared", c.experiment, outputs[0].len()));
        checks.push(Check::near(format!("{}: CSVs identical across 1/3 threads and sequential", c.experiment), f64::from(u8::from(same)), 1.0, 0.5));
    }
    Ok(checks)
}

/// One row per check: criterion, check, measured, expected, tolerance, verdict.
pub fn report_table(reports: &[CriterionReport]) -> Table {
    let mut t = Table::new(&["criterion", "check", "measured", "expected", "tolerance", "verdict"]);
    for r in reports {
        for c in &r.checks {
            t.push(vec![
                r.criterion.name().into(),
                c.name.clone(),
                fmt(c.measured),
                fmt(c.expected),
                fmt(c.tolerance),
                if c.passed { "pass" } else { "fail" }.into(),
            ]);
        }
    }
    t
}
