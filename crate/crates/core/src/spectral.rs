//! Per-sample spectral data: eigenvalues, bi-orthogonal eigenvectors and
//! their overlaps, resolvent traces, and `det(|z - X|^2 + |w|^2)`.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::dynamics::MatrixState;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_CONDITION_THRESHOLD: f64 = 1e12;

/// Right eigenvectors as columns of `right`, left eigenvectors as rows of
/// `left = right^{-1}`, so `<L_i|R_j> = δ_ij` by construction.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub eigenvalues: Vec<Complex64>,
    pub right: Mat<Complex64>,
    pub left: Mat<Complex64>,
}

#[derive(Clone, Debug)]
pub struct SpectralSample {
    pub eigenvalues: Vec<Complex64>,
    /// `O_ii = <L_i|L_i><R_i|R_i>`, at least 1.
    pub diag_overlaps: Vec<f64>,
    /// `A_ij = <L_i|L_j><R_j|R_i>` when requested.
    pub full_overlaps: Option<Mat<Complex64>>,
    /// `||R||_F ||R^{-1}||_F`, an upper bound on the 2-norm condition number.
    pub condition_number: f64,
    pub condition_flag: bool,
}

impl SpectralSample {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub full_overlaps: bool,
    pub condition_threshold: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            full_overlaps: false,
            condition_threshold: DEFAULT_CONDITION_THRESHOLD,
        }
    }
}

fn frobenius(m: &Mat<Complex64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn eigensystem(state: &MatrixState) -> Result<Eigensystem> {
    let x = &state.entries;
    if !state.is_finite() {
        return Err(Error::Decomposition("matrix has non-finite entries".into()));
    }
    let evd = x
        .eigen()
        .map_err(|e| Error::Decomposition(format!("{e:?}")))?;
    let n = x.nrows();
    let s = evd.S().column_vector();
    let eigenvalues: Vec<Complex64> = (0..n).map(|i| s[i]).collect();
    let right = evd.U().to_owned();
    let left = right.partial_piv_lu().inverse();
    Ok(Eigensystem {
        eigenvalues,
        right,
        left,
    })
}

impl Eigensystem {
    pub fn condition_number(&self) -> f64 {
        frobenius(&self.right) * frobenius(&self.left)
    }

    pub fn diag_overlaps(&self) -> Vec<f64> {
        let n = self.eigenvalues.len();
        (0..n)
            .map(|i| {
                let l: f64 = (0..n).map(|k| self.left[(i, k)].norm_sqr()).sum();
                let r: f64 = (0..n).map(|k| self.right[(k, i)].norm_sqr()).sum();
                l * r
            })
            .collect()
    }

    /// `A_ij = <L_i|L_j><R_j|R_i>`.
    pub fn full_overlaps(&self) -> Mat<Complex64> {
        let ll = &self.left * self.left.adjoint();
        let rr = self.right.adjoint() * &self.right;
        let n = self.eigenvalues.len();
        Mat::from_fn(n, n, |i, j| ll[(i, j)] * rr[(j, i)])
    }

    /// `Σ_i λ_i |R_i><L_i|`.
    pub fn reconstruct(&self) -> Mat<Complex64> {
        let n = self.eigenvalues.len();
        let scaled = Mat::from_fn(n, n, |i, j| self.right[(i, j)] * self.eigenvalues[j]);
        &scaled * &self.left
    }

    /// `max_ij |<L_i|R_j> - δ_ij|`.
    pub fn biorthogonality_error(&self) -> f64 {
        let p = &self.left * &self.right;
        let n = self.eigenvalues.len();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let id = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p[(i, j)] - Complex64::new(id, 0.0)).norm());
            }
        }
        worst
    }
}

pub fn eigen_full(state: &MatrixState) -> Result<SpectralSample> {
    eigen_with(state, &EigenOptions::default())
}

pub fn eigen_with(state: &MatrixState, opts: &EigenOptions) -> Result<SpectralSample> {
    let sys = eigensystem(state)?;
    let condition_number = sys.condition_number();
    let condition_flag = !(condition_number <= opts.condition_threshold);
    Ok(SpectralSample {
        diag_overlaps: sys.diag_overlaps(),
        full_overlaps: opts.full_overlaps.then(|| sys.full_overlaps()),
        eigenvalues: sys.eigenvalues,
        condition_number,
        condition_flag,
    })
}

/// Eigenvalues only, skipping the eigenvector back-substitution.
pub fn eigenvalues(state: &MatrixState) -> Result<Vec<Complex64>> {
    if !state.is_finite() {
        return Err(Error::Decomposition("matrix has non-finite entries".into()));
    }
    state
        .entries
        .eigenvalues()
        .map_err(|e| Error::Decomposition(format!("{e:?}")))
}

fn shifted(state: &MatrixState, z: Complex64) -> Mat<Complex64> {
    let x = &state.entries;
    let n = x.nrows();
    Mat::from_fn(n, n, |i, j| if i == j { z - x[(i, j)] } else { -x[(i, j)] })
}

/// `(1/N) Tr (z - X)^{-1}` from an LU factorization of `z - X`.
pub fn resolvent_trace(state: &MatrixState, z: Complex64) -> Result<Complex64> {
    let a = shifted(state, z);
    let n = a.nrows();
    let lu = a.partial_piv_lu();
    let u = lu.U();
    let scale = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .map(|(i, j)| a[(i, j)].norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let min_pivot = (0..n).map(|k| u[(k, k)].norm()).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-13 * scale {
        return Err(Error::OnSpectrum {
            z,
            distance: min_pivot,
        });
    }
    let inv = lu.inverse();
    let tr: Complex64 = (0..n).map(|k| inv[(k, k)]).sum();
    Ok(tr / n as f64)
}

/// `(1/N) Σ_i 1/(z - λ_i)`.
pub fn resolvent_trace_from_eigenvalues(eigs: &[Complex64], z: Complex64) -> Result<Complex64> {
    if eigs.is_empty() {
        return Err(invalid("empty spectrum"));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for &l in eigs {
        let d = z - l;
        if d.norm() <= 1e-13 * (1.0 + z.norm()) {
            return Err(Error::OnSpectrum {
                z,
                distance: d.norm(),
            });
        }
        sum += d.inv();
    }
    Ok(sum / eigs.len() as f64)
}

/// A point `(z, w)` of the quaternionic argument space; `r = |w|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuaternionPoint {
    pub z: Complex64,
    pub w: Complex64,
    pub r: f64,
}

impl QuaternionPoint {
    pub fn new(z: Complex64, w: Complex64) -> Self {
        Self { z, w, r: w.norm() }
    }

    /// `w = r` on the positive real axis.
    pub fn radial(z: Complex64, r: f64) -> Self {
        Self::new(z, Complex64::new(r, 0.0))
    }
}

/// Natural log of a non-negative determinant; `-inf` marks a singular
/// point.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogDeterminant(pub f64);

impl LogDeterminant {
    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0.exp()
    }

    pub fn is_singular(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

fn log_abs_det_lu(a: &Mat<Complex64>) -> f64 {
    let lu = a.partial_piv_lu();
    let u = lu.U();
    let mut acc = 0.0;
    for k in 0..a.nrows() {
        let d = u[(k, k)].norm();
        // an exactly zero pivot poisons the rest of the factorization with NaN
        if !(d > 0.0) {
            return f64::NEG_INFINITY;
        }
        acc += d.ln();
    }
    acc
}

/// `ln det[(z - X)(z̄ - X†) + |w|^2]`.
///
/// At `w = 0` this is `2 ln|det(z - X)|` from an LU factorization; otherwise
/// a Cholesky factorization of the Hermitian positive definite matrix, with
/// the `2N × 2N` block form `[[z - X, -w̄], [w, z̄ - X†]]` as a fallback when
/// the Gram matrix is numerically indefinite.
pub fn quaternionic_determinant(state: &MatrixState, p: &QuaternionPoint) -> LogDeterminant {
    let a = shifted(state, p.z);
    let n = a.nrows();
    if p.r == 0.0 {
        return LogDeterminant(2.0 * log_abs_det_lu(&a));
    }
    let r2 = p.r * p.r;
    let mut m = &a * a.adjoint();
    for k in 0..n {
        m[(k, k)] += Complex64::new(r2, 0.0);
    }
    match m.llt(Side::Lower) {
        Ok(llt) => {
            let l = llt.L();
            LogDeterminant(2.0 * (0..n).map(|k| l[(k, k)].re.ln()).sum::<f64>())
        }
        Err(_) => {
            let w = p.w;
            let block = Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
                (true, true) => a[(i, j)],
                (true, false) => {
                    if i == j - n {
                        -w.conj()
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                }
                (false, true) => {
                    if i - n == j {
                        w
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                }
                (false, false) => a[(j - n, i - n)].conj(),
            });
            LogDeterminant(log_abs_det_lu(&block))
        }
    }
}
