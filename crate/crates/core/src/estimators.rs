//! Ensemble estimators: annulus-binned density and Petermann factor,
//! averaged resolvent, and the log-domain mean of the quaternionic
//! determinant.
//!
//! Per-sample quantities are computed independently and collected in
//! sample order; every reduction below walks that order, so estimates are
//! bit-identical however the samples were scheduled.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::dynamics::{map_ensemble, DiffusionParams, InitialCondition, MatrixState};
use crate::error::{invalid, Error, Result};
use crate::exec::{pairwise_sum, pairwise_sum_by, Execution};
use crate::spectral::{
    eigen_with, eigenvalues, quaternionic_determinant, resolvent_trace_from_eigenvalues,
    EigenOptions, QuaternionPoint, SpectralSample,
};

/// Sorted, non-overlapping half-open annuli `[lo, hi)` in `|z|`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialBins {
    intervals: Vec<(f64, f64)>,
}

fn equal_area_interval(center: f64, area: f64) -> (f64, f64) {
    if center == 0.0 {
        (0.0, (area / PI).sqrt())
    } else {
        let h = area / (4.0 * PI * center);
        (center - h, center + h)
    }
}

impl RadialBins {
    pub fn from_intervals(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(invalid("at least one bin is required"));
        }
        for &(lo, hi) in &intervals {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return Err(invalid(format!("bad bin [{lo}, {hi})")));
            }
        }
        if intervals.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(invalid("bins must be sorted and non-overlapping"));
        }
        Ok(Self { intervals })
    }

    /// Contiguous bins from increasing edges.
    pub fn from_edges(edges: &[f64]) -> Result<Self> {
        if edges.len() < 2 {
            return Err(invalid("need at least two bin edges"));
        }
        Self::from_intervals(edges.windows(2).map(|w| (w[0], w[1])).collect())
    }

    pub fn uniform(lo: f64, hi: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !(hi > lo) {
            return Err(invalid("uniform bins need hi > lo and width > 0"));
        }
        let count = ((hi - lo) / width - 1e-9).ceil().max(1.0) as usize;
        let edges: Vec<f64> = (0..=count)
            .map(|k| (lo + k as f64 * width).min(hi))
            .collect();
        Self::from_edges(&edges)
    }

    /// Width `0.05 sqrt(tau)` from the origin out to `r_max`.
    pub fn default_for_tau(tau: f64, r_max: f64) -> Result<Self> {
        Self::uniform(0.0, r_max, 0.05 * tau.sqrt())
    }

    /// `count` annuli of equal area covering the disc of radius `r_max`.
    pub fn equal_area(r_max: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(invalid("equal_area needs count >= 1"));
        }
        let edges: Vec<f64> = (0..=count)
            .map(|k| r_max * (k as f64 / count as f64).sqrt())
            .collect();
        Self::from_edges(&edges)
    }

    /// One bin per center with area `area` each: a disc for a zero center,
    /// otherwise the annulus `[c - h, c + h)` with `4 c h = area / π`.
    pub fn equal_area_around(centers: &[f64], area: f64) -> Result<Self> {
        Self::from_intervals(centers.iter().map(|&c| equal_area_interval(c, area)).collect())
    }

    /// A single-bin set around one center; see [`RadialBins::equal_area_around`].
    pub fn single_equal_area(center: f64, area: f64) -> Result<Self> {
        Self::from_intervals(vec![equal_area_interval(center, area)])
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn area(&self, b: usize) -> f64 {
        let (lo, hi) = self.intervals[b];
        PI * (hi * hi - lo * lo)
    }

    /// Mean of `|z|^2` over the annulus with uniform area weight.
    pub fn mean_abs_sq(&self, b: usize) -> f64 {
        let (lo, hi) = self.intervals[b];
        0.5 * (lo * lo + hi * hi)
    }

    pub fn locate(&self, abs_z: f64) -> Option<usize> {
        let i = self.intervals.partition_point(|&(lo, _)| lo <= abs_z);
        if i == 0 {
            return None;
        }
        let (_, hi) = self.intervals[i - 1];
        (abs_z < hi).then_some(i - 1)
    }
}

#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub bins: RadialBins,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub counts: Vec<u64>,
    /// False where the estimate has no support (empty bin).
    pub defined: Vec<bool>,
}

impl RadialProfile {
    pub fn scaled(mut self, factor: f64) -> Self {
        for v in &mut self.values {
            *v *= factor;
        }
        for e in &mut self.std_errors {
            *e *= factor;
        }
        self
    }

    /// Columns `bin_lo, bin_hi, value, std_error, count`, floats with 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["bin_lo", "bin_hi", "value", "std_error", "count"])?;
        for (b, &(lo, hi)) in self.bins.intervals().iter().enumerate() {
            out.write_record([
                fmt_f64(lo),
                fmt_f64(hi),
                fmt_f64(self.values[b]),
                fmt_f64(self.std_errors[b]),
                self.counts[b].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Scientific notation with 17 significant digits; round-trips exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = pairwise_sum_by(xs, &|x| (x - mean) * (x - mean));
    (mean, (ss / (n - 1.0) / n).sqrt())
}

struct BinTallies {
    // [sample][bin]
    counts: Vec<Vec<u32>>,
    overlap_sums: Vec<Vec<f64>>,
}

fn tally(samples: &[&SpectralSample], bins: &RadialBins) -> BinTallies {
    let nb = bins.len();
    let mut counts = Vec::with_capacity(samples.len());
    let mut overlap_sums = Vec::with_capacity(samples.len());
    for s in samples {
        let mut c = vec![0u32; nb];
        let mut o = vec![0.0; nb];
        for (i, l) in s.eigenvalues.iter().enumerate() {
            if let Some(b) = bins.locate(l.norm()) {
                c[b] += 1;
                if let Some(&oii) = s.diag_overlaps.get(i) {
                    o[b] += oii;
                }
            }
        }
        counts.push(c);
        overlap_sums.push(o);
    }
    BinTallies {
        counts,
        overlap_sums,
    }
}

fn check_dims(samples: &[&SpectralSample]) -> Result<usize> {
    let n = samples
        .first()
        .map(|s| s.dim())
        .ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
    if samples.iter().any(|s| s.dim() != n) {
        return Err(invalid("all samples must have the same dimension"));
    }
    Ok(n)
}

/// Eigenvalue density per annulus, normalized so that `Σ ρ̂ · area` is the
/// fraction of eigenvalues falling inside the bins.
pub fn estimate_density(samples: &[SpectralSample], bins: &RadialBins) -> Result<RadialProfile> {
    let refs: Vec<&SpectralSample> = samples.iter().collect();
    density_of(&refs, bins)
}

fn density_of(samples: &[&SpectralSample], bins: &RadialBins) -> Result<RadialProfile> {
    let n = check_dims(samples)? as f64;
    let t = tally(samples, bins);
    let nb = bins.len();
    let mut values = Vec::with_capacity(nb);
    let mut std_errors = Vec::with_capacity(nb);
    let mut counts = Vec::with_capacity(nb);
    for b in 0..nb {
        let per: Vec<f64> = t.counts.iter().map(|c| c[b] as f64).collect();
        let (mean, se) = mean_and_se(&per);
        let norm = n * bins.area(b);
        values.push(mean / norm);
        std_errors.push(se / norm);
        counts.push(t.counts.iter().map(|c| c[b] as u64).sum());
    }
    let defined = counts.iter().map(|&c| c > 0).collect();
    Ok(RadialProfile {
        bins: bins.clone(),
        values,
        std_errors,
        counts,
        defined,
    })
}

/// Fraction of all eigenvalues with `|λ| > radius`.
pub fn fraction_outside(samples: &[SpectralSample], radius: f64) -> f64 {
    let total: usize = samples.iter().map(|s| s.dim()).sum();
    let out: usize = samples
        .iter()
        .map(|s| s.eigenvalues.iter().filter(|l| l.norm() > radius).count())
        .sum();
    out as f64 / total as f64
}

#[derive(Clone, Debug)]
pub struct PetermannProfile {
    /// Mean diagonal overlap per annulus (not divided by N).
    pub profile: RadialProfile,
    pub excluded_samples: usize,
    pub total_samples: usize,
}

impl PetermannProfile {
    pub fn exclusion_rate(&self) -> f64 {
        self.excluded_samples as f64 / self.total_samples as f64
    }
}

fn usable(samples: &[SpectralSample]) -> Vec<&SpectralSample> {
    samples.iter().filter(|s| !s.condition_flag).collect()
}

/// Mean of `O_ii` over eigenvalues in each annulus, pooled across samples.
/// Samples flagged as near-defective are excluded and counted.
pub fn estimate_petermann(samples: &[SpectralSample], bins: &RadialBins) -> Result<PetermannProfile> {
    let kept = usable(samples);
    if kept.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if kept.iter().any(|s| s.diag_overlaps.len() != s.dim()) {
        return Err(invalid("samples lack diagonal overlaps"));
    }
    check_dims(&kept)?;
    let t = tally(&kept, bins);
    let s_count = kept.len() as f64;
    let nb = bins.len();
    let mut values = Vec::with_capacity(nb);
    let mut std_errors = Vec::with_capacity(nb);
    let mut counts = Vec::with_capacity(nb);
    let mut defined = Vec::with_capacity(nb);
    for b in 0..nb {
        let a: Vec<f64> = t.overlap_sums.iter().map(|o| o[b]).collect();
        let c: Vec<f64> = t.counts.iter().map(|c| c[b] as f64).collect();
        let sum_a = pairwise_sum(&a);
        let sum_c = pairwise_sum(&c);
        let count: u64 = t.counts.iter().map(|c| c[b] as u64).sum();
        counts.push(count);
        if count == 0 {
            values.push(f64::NAN);
            std_errors.push(f64::NAN);
            defined.push(false);
            continue;
        }
        // ratio estimator; delta-method error from per-sample residuals
        let k = sum_a / sum_c;
        let resid: Vec<f64> = a.iter().zip(&c).map(|(ai, ci)| ai - k * ci).collect();
        let ss = pairwise_sum_by(&resid, &|e| e * e);
        let cbar = sum_c / s_count;
        let se = if kept.len() > 1 {
            (ss / (s_count * (s_count - 1.0))).sqrt() / cbar
        } else {
            0.0
        };
        values.push(k);
        std_errors.push(se);
        defined.push(true);
    }
    Ok(PetermannProfile {
        profile: RadialProfile {
            bins: bins.clone(),
            values,
            std_errors,
            counts,
            defined,
        },
        excluded_samples: samples.len() - kept.len(),
        total_samples: samples.len(),
    })
}

/// Binned eigenvector correlator `v^2 = (π/N^2) <Σ_i O_ii δ^2(z - λ_i)>`
/// over the samples kept by [`estimate_petermann`].
pub fn estimate_v_squared(samples: &[SpectralSample], bins: &RadialBins) -> Result<RadialProfile> {
    let kept = usable(samples);
    if kept.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let n = check_dims(&kept)? as f64;
    let t = tally(&kept, bins);
    let nb = bins.len();
    let mut values = Vec::with_capacity(nb);
    let mut std_errors = Vec::with_capacity(nb);
    let mut counts = Vec::with_capacity(nb);
    for b in 0..nb {
        let a: Vec<f64> = t.overlap_sums.iter().map(|o| o[b]).collect();
        let (mean, se) = mean_and_se(&a);
        let norm = PI / (n * n) / bins.area(b);
        values.push(mean * norm);
        std_errors.push(se * norm);
        counts.push(t.counts.iter().map(|c| c[b] as u64).sum());
    }
    let defined = counts.iter().map(|&c| c > 0).collect();
    Ok(RadialProfile {
        bins: bins.clone(),
        values,
        std_errors,
        counts,
        defined,
    })
}

/// Density over the same kept samples as [`estimate_petermann`], so that
/// `K̂ = N v̂² / (π ρ̂)` holds bin by bin.
pub fn estimate_density_of_kept(samples: &[SpectralSample], bins: &RadialBins) -> Result<RadialProfile> {
    density_of(&usable(samples), bins)
}

#[derive(Clone, Copy, Debug)]
pub struct ComplexMean {
    pub mean: Complex64,
    pub std_error_re: f64,
    pub std_error_im: f64,
}

/// Ensemble average of `(1/N) Tr (z - X)^{-1}` from stored spectra.
pub fn mean_resolvent(spectra: &[Vec<Complex64>], z: Complex64) -> Result<ComplexMean> {
    if spectra.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let g: Vec<Complex64> = spectra
        .iter()
        .map(|e| resolvent_trace_from_eigenvalues(e, z))
        .collect::<Result<_>>()?;
    let re: Vec<f64> = g.iter().map(|x| x.re).collect();
    let im: Vec<f64> = g.iter().map(|x| x.im).collect();
    let (mr, sr) = mean_and_se(&re);
    let (mi, si) = mean_and_se(&im);
    Ok(ComplexMean {
        mean: Complex64::new(mr, mi),
        std_error_re: sr,
        std_error_im: si,
    })
}

/// Rotation-averaged resolvent for rotation-invariant ensembles: each sample
/// contributes `(1/K) Σ_k e^{iφ_k} G(z e^{iφ_k})` over `K` equally spaced
/// angles, which has the same mean as `G(z)`.
pub fn mean_resolvent_rotated(spectra: &[Vec<Complex64>], z: Complex64, angles: usize) -> Result<ComplexMean> {
    if angles == 0 {
        return Err(invalid("need at least one angle"));
    }
    if spectra.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let phases: Vec<Complex64> = (0..angles)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / angles as f64))
        .collect();
    let mut re = Vec::with_capacity(spectra.len());
    let mut im = Vec::with_capacity(spectra.len());
    for e in spectra {
        let mut acc = Complex64::new(0.0, 0.0);
        for ph in &phases {
            acc += ph * resolvent_trace_from_eigenvalues(e, z * ph)?;
        }
        acc /= angles as f64;
        re.push(acc.re);
        im.push(acc.im);
    }
    let (mr, sr) = mean_and_se(&re);
    let (mi, si) = mean_and_se(&im);
    Ok(ComplexMean {
        mean: Complex64::new(mr, mi),
        std_error_re: sr,
        std_error_im: si,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct MeanDeterminant {
    /// `ln <D>`.
    pub log_mean: f64,
    /// Standard error of `ln <D>` (relative error of the mean).
    pub log_std_error: f64,
    /// `(Σ w)^2 / Σ w^2` for the weights `w_i = D_i / max D`.
    pub effective_sample_size: f64,
    /// Set when a handful of samples carry the whole mean.
    pub dominated: bool,
    pub num_samples: usize,
}

pub const MIN_EFFECTIVE_SAMPLES: f64 = 10.0;

/// Log of the sample mean of `exp(logs)`, shifted by the maximum so nothing
/// overflows.
pub fn mean_from_log_values(logs: &[f64]) -> Result<MeanDeterminant> {
    if logs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: logs.len(),
        });
    }
    let n = logs.len() as f64;
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Ok(MeanDeterminant {
            log_mean: m,
            log_std_error: 0.0,
            effective_sample_size: 0.0,
            dominated: true,
            num_samples: logs.len(),
        });
    }
    let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let sum_w = pairwise_sum(&w);
    let sum_w2 = pairwise_sum_by(&w, &|x| x * x);
    let mean = sum_w / n;
    let ss = pairwise_sum_by(&w, &|x| (x - mean) * (x - mean));
    let se = (ss / (n - 1.0) / n).sqrt();
    let ess = sum_w * sum_w / sum_w2;
    Ok(MeanDeterminant {
        log_mean: m + mean.ln(),
        log_std_error: se / mean,
        effective_sample_size: ess,
        dominated: ess < MIN_EFFECTIVE_SAMPLES,
        num_samples: logs.len(),
    })
}

pub fn estimate_mean_determinant(samples: &[MatrixState], p: &QuaternionPoint) -> Result<MeanDeterminant> {
    let logs: Vec<f64> = samples
        .iter()
        .map(|x| quaternionic_determinant(x, p).ln())
        .collect();
    mean_from_log_values(&logs)
}

/// Streams the ensemble once and returns, for each point, the per-sample
/// log-determinants in sample order. Matrices are dropped as soon as they
/// are used.
pub fn ensemble_log_determinants(
    params: &DiffusionParams,
    init: &InitialCondition,
    points: &[QuaternionPoint],
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    let per_sample = map_ensemble(params, init, exec, |x| {
        Ok(points
            .iter()
            .map(|p| quaternionic_determinant(x, p).ln())
            .collect::<Vec<f64>>())
    })?;
    Ok((0..points.len())
        .map(|k| per_sample.iter().map(|row| row[k]).collect())
        .collect())
}

/// Eigenvalues and overlaps for every sample of the ensemble.
pub fn sample_spectra(
    params: &DiffusionParams,
    init: &InitialCondition,
    opts: &EigenOptions,
    exec: Execution,
) -> Result<Vec<SpectralSample>> {
    map_ensemble(params, init, exec, |x| eigen_with(x, opts))
}

/// Eigenvalues only for every sample of the ensemble.
pub fn sample_eigenvalues(
    params: &DiffusionParams,
    init: &InitialCondition,
    exec: Execution,
) -> Result<Vec<Vec<Complex64>>> {
    map_ensemble(params, init, exec, eigenvalues)
}

/// Wraps bare spectra (no overlaps) so the density estimator can use them.
pub fn spectra_from_eigenvalues(eigs: Vec<Vec<Complex64>>) -> Vec<SpectralSample> {
    eigs.into_iter()
        .map(|e| SpectralSample {
            eigenvalues: e,
            diag_overlaps: Vec::new(),
            full_overlaps: None,
            condition_number: f64::NAN,
            condition_flag: false,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigen_full;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bins_validate_and_locate() {
        assert!(RadialBins::from_edges(&[0.0]).is_err());
        assert!(RadialBins::from_edges(&[0.0, 0.5, 0.4]).is_err());
        assert!(RadialBins::from_intervals(vec![(0.0, 0.5), (0.4, 0.6)]).is_err());
        let b = RadialBins::from_intervals(vec![(0.0, 0.1), (0.45, 0.55)]).unwrap();
        assert_eq!(b.locate(0.0), Some(0));
        assert_eq!(b.locate(0.1), None);
        assert_eq!(b.locate(0.3), None);
        assert_eq!(b.locate(0.5), Some(1));
        assert_eq!(b.locate(0.55), None);
        let u = RadialBins::default_for_tau(4.0, 1.0).unwrap();
        assert_eq!(u.len(), 10);
        assert!((u.intervals()[9].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equal_area_bins_have_equal_area() {
        let b = RadialBins::equal_area(0.9, 20).unwrap();
        for i in 0..20 {
            assert!((b.area(i) - b.area(0)).abs() < 1e-14);
        }
        let around = RadialBins::equal_area_around(&[0.0, 0.5, 0.8], 0.1 * PI).unwrap();
        for i in 0..3 {
            assert!((around.area(i) - 0.1 * PI).abs() < 1e-14);
        }
    }

    #[test]
    fn density_counts_every_eigenvalue_once() {
        let p = DiffusionParams::new(30, 1.0, 4, 40).unwrap();
        let spectra =
            spectra_from_eigenvalues(sample_eigenvalues(&p, &InitialCondition::Zero, Execution::Parallel).unwrap());
        let rmax = spectra
            .iter()
            .flat_map(|s| s.eigenvalues.iter().map(|l| l.norm()))
            .fold(0.0, f64::max);
        let bins = RadialBins::uniform(0.0, rmax * 1.001, 0.05).unwrap();
        let prof = estimate_density(&spectra, &bins).unwrap();
        let total: f64 = (0..bins.len()).map(|b| prof.values[b] * bins.area(b)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(prof.counts.iter().sum::<u64>(), 30 * 40);
    }

    #[test]
    fn empty_bins_are_flagged() {
        let s = spectra_from_eigenvalues(vec![vec![c(0.1, 0.0)], vec![c(0.0, 0.12)]]);
        let bins = RadialBins::from_edges(&[0.0, 0.5, 1.0]).unwrap();
        let d = estimate_density(&s, &bins).unwrap();
        assert_eq!(d.values[1], 0.0);
        assert!(!d.defined[1]);
        assert!(d.defined[0]);
    }

    #[test]
    fn scalar_ensemble_has_unit_petermann_factor() {
        let p = DiffusionParams::new(1, 1.0, 8, 200).unwrap();
        let spectra =
            sample_spectra(&p, &InitialCondition::Zero, &EigenOptions::default(), Execution::Parallel).unwrap();
        let bins = RadialBins::uniform(0.0, 3.0, 0.5).unwrap();
        let k = estimate_petermann(&spectra, &bins).unwrap();
        for b in 0..bins.len() {
            if k.profile.defined[b] {
                assert!((k.profile.values[b] - 1.0).abs() < 1e-14);
            }
        }
        assert_eq!(k.excluded_samples, 0);
    }

    #[test]
    fn petermann_equals_ratio_of_correlator_to_density() {
        let p = DiffusionParams::new(20, 1.5, 21, 50).unwrap();
        let spectra =
            sample_spectra(&p, &InitialCondition::Zero, &EigenOptions::default(), Execution::Sequential).unwrap();
        let bins = RadialBins::default_for_tau(1.5, 1.4).unwrap();
        let k = estimate_petermann(&spectra, &bins).unwrap().profile;
        let v2 = estimate_v_squared(&spectra, &bins).unwrap();
        let rho = estimate_density_of_kept(&spectra, &bins).unwrap();
        let n = 20.0;
        for b in 0..bins.len() {
            if !k.defined[b] {
                continue;
            }
            let ratio = n * v2.values[b] / (PI * rho.values[b]);
            assert!((ratio - k.values[b]).abs() <= 1e-12 * k.values[b], "bin {b}");
        }
    }

    #[test]
    fn flagged_samples_are_excluded_from_overlaps() {
        let p = DiffusionParams::new(5, 1.0, 2, 3).unwrap();
        let mut spectra =
            sample_spectra(&p, &InitialCondition::Zero, &EigenOptions::default(), Execution::Sequential).unwrap();
        spectra[1].condition_flag = true;
        spectra[1].diag_overlaps.iter_mut().for_each(|o| *o = 1e30);
        let bins = RadialBins::uniform(0.0, 3.0, 3.0).unwrap();
        let k = estimate_petermann(&spectra, &bins).unwrap();
        assert_eq!(k.excluded_samples, 1);
        assert!(k.profile.values[0] < 1e6);
        assert!((k.exclusion_rate() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_ensemble_has_exact_mean_determinant() {
        let p = DiffusionParams::new(6, 0.0, 1, 5).unwrap();
        let q = QuaternionPoint::radial(c(0.3, 0.4), 0.5);
        let logs = ensemble_log_determinants(&p, &InitialCondition::Zero, &[q], Execution::Sequential).unwrap();
        let m = mean_from_log_values(&logs[0]).unwrap();
        let want = 6.0 * (0.25f64 + 0.25).ln();
        assert!((m.log_mean - want).abs() < 1e-14);
        assert_eq!(m.log_std_error, 0.0);
        assert!((m.effective_sample_size - 5.0).abs() < 1e-12);
    }

    #[test]
    fn log_mean_survives_huge_values_and_flags_domination() {
        let logs = [1000.0, 1000.0 + 2f64.ln(), 0.0];
        let m = mean_from_log_values(&logs).unwrap();
        let want = 1000.0 + (3.0f64 / 3.0).ln() + (1.0f64 + 2.0).ln() - 3f64.ln() + 0.0;
        assert!((m.log_mean - want).abs() < 1e-12);
        assert!(m.dominated);
        assert!(mean_from_log_values(&[1.0]).is_err());
    }

    #[test]
    fn phase_of_w_does_not_change_per_sample_logs() {
        let p = DiffusionParams::new(8, 1.0, 3, 10).unwrap();
        let z = c(0.5, 0.1);
        let pts = [
            QuaternionPoint::radial(z, 0.4),
            QuaternionPoint::new(z, Complex64::from_polar(0.4, 2.1)),
        ];
        let logs = ensemble_log_determinants(&p, &InitialCondition::Zero, &pts, Execution::Parallel).unwrap();
        for (a, b) in logs[0].iter().zip(&logs[1]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_determinant_matches_direct_average() {
        let p = DiffusionParams::new(4, 1.0, 9, 30).unwrap();
        let q = QuaternionPoint::radial(c(0.2, 0.0), 0.3);
        let states: Vec<MatrixState> = (0..30)
            .map(|i| crate::dynamics::sample_at_time(&p, &InitialCondition::Zero, i).unwrap())
            .collect();
        let m = estimate_mean_determinant(&states, &q).unwrap();
        let direct: f64 = states
            .iter()
            .map(|x| quaternionic_determinant(x, &q).value())
            .sum::<f64>()
            / 30.0;
        assert!((m.log_mean - direct.ln()).abs() < 1e-13);
    }

    #[test]
    fn rotated_resolvent_with_one_angle_is_plain_mean() {
        let eigs = vec![vec![c(0.1, 0.2), c(-0.3, 0.0)], vec![c(0.5, -0.5), c(0.0, 0.1)]];
        let z = c(0.7, 0.1);
        let a = mean_resolvent(&eigs, z).unwrap();
        let b = mean_resolvent_rotated(&eigs, z, 1).unwrap();
        assert!((a.mean - b.mean).norm() < 1e-15);
        // a rotation-symmetric spectrum gives the same value at every angle
        let ring: Vec<Complex64> = (0..8).map(|k| Complex64::from_polar(0.4, PI * k as f64 / 4.0)).collect();
        let r1 = mean_resolvent(std::slice::from_ref(&ring), z).unwrap();
        let r8 = mean_resolvent_rotated(&[ring], z, 8).unwrap();
        assert!((r1.mean - r8.mean).norm() < 1e-14);
    }

    #[test]
    fn csv_has_documented_columns() {
        let s = vec![eigen_full(&crate::dynamics::make_initial(&InitialCondition::Zero, 1).unwrap()).unwrap()];
        let bins = RadialBins::from_edges(&[0.0, 1.0]).unwrap();
        let prof = estimate_density(&s, &bins).unwrap();
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "bin_lo,bin_hi,value,std_error,count");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 5);
        assert_eq!(row[1].parse::<f64>().unwrap(), 1.0);
        assert_eq!(row[2].parse::<f64>().unwrap(), 1.0 / PI);
        assert_eq!(row[4], "1");
    }
}
