//! Ginibre matrices whose entries perform independent complex Brownian
//! motion with `<δX_ab δX̄_cd> = (δτ/N) δ_ac δ_bd`.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::rng::SampleStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionParams {
    pub n: usize,
    pub tau: f64,
    pub master_seed: u64,
    pub num_samples: usize,
}

impl DiffusionParams {
    pub fn new(n: usize, tau: f64, master_seed: u64, num_samples: usize) -> Result<Self> {
        let p = Self {
            n,
            tau,
            master_seed,
            num_samples,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("matrix dimension N must be at least 1"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(invalid(format!("tau must be finite and >= 0, got {}", self.tau)));
        }
        if self.num_samples == 0 {
            return Err(invalid("num_samples must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum InitialCondition {
    Zero,
    /// All zeros except entry (1,2) (first row, second column).
    Nilpotent(Complex64),
    Custom(Mat<Complex64>),
}

/// Where a sample came from: enough to regenerate it bit for bit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SeedLineage {
    pub master_seed: u64,
    pub sample_index: u64,
    pub step_count: u64,
}

#[derive(Clone, Debug)]
pub struct MatrixState {
    pub entries: Mat<Complex64>,
    pub tau: f64,
    pub lineage: Option<SeedLineage>,
}

impl MatrixState {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `(1/N) Tr X X†`.
    pub fn normalized_power(&self) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                s += self.entries[(i, j)].norm_sqr();
            }
        }
        s / n as f64
    }

    pub fn is_finite(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| self.entries[(i, j)].is_finite()))
    }
}

pub fn make_initial(kind: &InitialCondition, n: usize) -> Result<MatrixState> {
    if n == 0 {
        return Err(invalid("matrix dimension N must be at least 1"));
    }
    let entries = match kind {
        InitialCondition::Zero => Mat::zeros(n, n),
        InitialCondition::Nilpotent(a) => {
            if n < 2 {
                return Err(invalid("nilpotent initial condition needs N >= 2"));
            }
            let mut m = Mat::zeros(n, n);
            m[(0, 1)] = *a;
            m
        }
        InitialCondition::Custom(m) => {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    rows: m.nrows(),
                    cols: m.ncols(),
                });
            }
            m.clone()
        }
    };
    Ok(MatrixState {
        entries,
        tau: 0.0,
        lineage: None,
    })
}

/// Draws `X = X0 + sqrt(tau) G` directly, `G` having i.i.d. circular
/// complex Gaussian entries of variance `1/N`. The stream for
/// `(master_seed, sample_index)` is consumed column by column.
pub fn sample_at_time(
    params: &DiffusionParams,
    init: &InitialCondition,
    sample_index: usize,
) -> Result<MatrixState> {
    params.validate()?;
    if sample_index >= params.num_samples {
        return Err(invalid(format!(
            "sample_index {sample_index} out of range 0..{}",
            params.num_samples
        )));
    }
    let mut state = make_initial(init, params.n)?;
    state.lineage = Some(SeedLineage {
        master_seed: params.master_seed,
        sample_index: sample_index as u64,
        step_count: 0,
    });
    if params.tau == 0.0 {
        return Ok(state);
    }
    let mut stream = SampleStream::new(params.master_seed, sample_index as u64);
    add_gaussian(&mut state.entries, params.tau / params.n as f64, &mut stream);
    state.tau = params.tau;
    Ok(state)
}

fn add_gaussian(m: &mut Mat<Complex64>, variance: f64, stream: &mut SampleStream) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] += stream.complex_gaussian(variance);
        }
    }
}

/// Adds one Brownian increment of duration `dtau` drawn from `stream`.
pub fn evolve_increment(
    state: &MatrixState,
    dtau: f64,
    stream: &mut SampleStream,
) -> Result<MatrixState> {
    if !(dtau > 0.0 && dtau.is_finite()) {
        return Err(invalid(format!("dtau must be positive, got {dtau}")));
    }
    let mut next = state.clone();
    add_gaussian(&mut next.entries, dtau / state.dim() as f64, stream);
    next.tau = state.tau + dtau;
    if let Some(l) = next.lineage.as_mut() {
        l.step_count += 1;
    }
    Ok(next)
}

/// Evolves one path in `steps` equal increments up to `params.tau`,
/// returning every intermediate state (the initial one included).
pub fn sample_path(
    params: &DiffusionParams,
    init: &InitialCondition,
    sample_index: usize,
    steps: usize,
) -> Result<Vec<MatrixState>> {
    params.validate()?;
    if steps == 0 || params.tau == 0.0 {
        return Err(invalid("a path needs steps >= 1 and tau > 0"));
    }
    let mut state = make_initial(init, params.n)?;
    state.lineage = Some(SeedLineage {
        master_seed: params.master_seed,
        sample_index: sample_index as u64,
        step_count: 0,
    });
    let mut stream = SampleStream::new(params.master_seed, sample_index as u64);
    let dtau = params.tau / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state.clone());
    for _ in 0..steps {
        state = evolve_increment(&state, dtau, &mut stream)?;
        out.push(state.clone());
    }
    Ok(out)
}

/// Maps `f` over every sample of the ensemble without keeping the matrices.
pub fn map_ensemble<T, F>(
    params: &DiffusionParams,
    init: &InitialCondition,
    exec: Execution,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&MatrixState) -> Result<T> + Sync + Send,
{
    params.validate()?;
    if let InitialCondition::Custom(_) | InitialCondition::Nilpotent(_) = init {
        make_initial(init, params.n)?;
    }
    exec.try_map_indexed(params.num_samples, |i| {
        let x = sample_at_time(params, init, i)?;
        f(&x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn initial_conditions() {
        let z = make_initial(&InitialCondition::Zero, 3).unwrap();
        assert_eq!(z.dim(), 3);
        assert_eq!(z.normalized_power(), 0.0);

        let nil = make_initial(&InitialCondition::Nilpotent(c(1.0, 0.0)), 2).unwrap();
        assert_eq!(nil.entries[(0, 1)], c(1.0, 0.0));
        assert_eq!(nil.entries[(0, 0)], c(0.0, 0.0));
        assert_eq!(nil.entries[(1, 0)], c(0.0, 0.0));
        assert_eq!(nil.entries[(1, 1)], c(0.0, 0.0));

        let m = Mat::from_fn(2, 2, |i, j| c(i as f64, j as f64));
        let s = make_initial(&InitialCondition::Custom(m.clone()), 2).unwrap();
        assert_eq!(s.entries, m);
        assert_eq!(s.tau, 0.0);
    }

    #[test]
    fn initial_condition_errors() {
        assert!(make_initial(&InitialCondition::Zero, 0).is_err());
        let m = Mat::<Complex64>::zeros(3, 3);
        assert!(matches!(
            make_initial(&InitialCondition::Custom(m), 2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn params_validation() {
        assert!(DiffusionParams::new(0, 1.0, 0, 1).is_err());
        assert!(DiffusionParams::new(2, -1.0, 0, 1).is_err());
        assert!(DiffusionParams::new(2, 1.0, 0, 0).is_err());
        assert!(DiffusionParams::new(2, f64::NAN, 0, 1).is_err());
        let p = DiffusionParams::new(2, 1.0, 0, 3).unwrap();
        assert!(sample_at_time(&p, &InitialCondition::Zero, 3).is_err());
    }

    #[test]
    fn zero_time_returns_initial_matrix() {
        let init = InitialCondition::Nilpotent(c(0.5, -2.0));
        let p = DiffusionParams::new(4, 0.0, 9, 2).unwrap();
        let x = sample_at_time(&p, &init, 1).unwrap();
        assert_eq!(x.entries, make_initial(&init, 4).unwrap().entries);
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = DiffusionParams::new(5, 0.7, 1234, 10).unwrap();
        let a = sample_at_time(&p, &InitialCondition::Zero, 6).unwrap();
        let b = sample_at_time(&p, &InitialCondition::Zero, 6).unwrap();
        assert_eq!(a.entries, b.entries);
        assert_eq!(a.lineage.unwrap().sample_index, 6);
        let other = sample_at_time(&p, &InitialCondition::Zero, 7).unwrap();
        assert_ne!(a.entries, other.entries);
    }

    #[test]
    fn increment_bookkeeping_and_errors() {
        let p = DiffusionParams::new(3, 0.5, 1, 1).unwrap();
        let x = sample_at_time(&p, &InitialCondition::Zero, 0).unwrap();
        let mut s = SampleStream::new(5, 5);
        let y = evolve_increment(&x, 0.25, &mut s).unwrap();
        assert_eq!(y.tau, 0.75);
        assert_eq!(y.lineage.unwrap().step_count, 1);
        assert!(evolve_increment(&x, 0.0, &mut s).is_err());
        assert!(evolve_increment(&x, -1.0, &mut s).is_err());
    }

    #[test]
    fn single_step_path_equals_direct_sample() {
        // both consume the same stream in the same order
        let p = DiffusionParams::new(6, 1.3, 77, 4).unwrap();
        let direct = sample_at_time(&p, &InitialCondition::Zero, 2).unwrap();
        let path = sample_path(&p, &InitialCondition::Zero, 2, 1).unwrap();
        assert_eq!(path.len(), 2);
        let end = &path[1];
        assert!((end.tau - 1.3).abs() < 1e-15);
        for j in 0..6 {
            for i in 0..6 {
                assert!((end.entries[(i, j)] - direct.entries[(i, j)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn tau_is_non_decreasing_along_path() {
        let p = DiffusionParams::new(3, 1.0, 3, 1).unwrap();
        let path = sample_path(&p, &InitialCondition::Zero, 0, 8).unwrap();
        assert!(path.windows(2).all(|w| w[1].tau > w[0].tau));
        assert!(path.iter().all(MatrixState::is_finite));
    }
}
