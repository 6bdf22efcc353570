//! Sample-parallel execution with a sequential fallback.
//!
//! Every ensemble computation in this crate is a map over sample indices
//! followed by a reduction over the index-ordered results. Because each
//! sample owns its random stream and the reduction order is fixed, the
//! output does not depend on the execution mode or the worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How per-sample work is scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses the ambient rayon pool. Falls back to sequential when the
    /// `parallel` feature is disabled.
    #[default]
    Parallel,
}

impl Execution {
    /// Evaluates `f(0..n)` and returns the results in index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => (0..n).map(f).collect(),
        }
    }

    /// Like [`Execution::map_indexed`] but stops at the first error.
    pub fn try_map_indexed<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => (0..n).map(f).collect(),
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Pairwise (cascade) summation over a slice in its given order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let (lo, hi) = xs.split_at(xs.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

/// Pairwise sum of `f(x)` without materializing the mapped slice.
pub fn pairwise_sum_by<T>(xs: &[T], f: &impl Fn(&T) -> f64) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().map(f).sum();
    }
    let (lo, hi) = xs.split_at(xs.len() / 2);
    pairwise_sum_by(lo, f) + pairwise_sum_by(hi, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_bitwise() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        let a = Execution::Sequential.map_indexed(1000, f);
        let b = Execution::Parallel.map_indexed(1000, f);
        assert_eq!(a, b);
        assert_eq!(pairwise_sum(&a).to_bits(), pairwise_sum(&b).to_bits());
    }

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs = [1.0, 2.0, 3.5];
        assert_eq!(pairwise_sum(&xs), 6.5);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn pairwise_is_accurate() {
        // 1 + 1e6 * 1e-10 summed naively drifts; cascade stays within a few ulps
        let mut xs = vec![1e-10; 1_000_000];
        xs.insert(0, 1.0);
        let s = pairwise_sum(&xs);
        assert!((s - 1.0001).abs() < 1e-14);
    }

    #[test]
    fn try_map_short_circuits_on_error() {
        let r: Result<Vec<usize>, String> = Execution::Parallel.try_map_indexed(10, |i| {
            if i == 7 {
                Err("seven".to_string())
            } else {
                Ok(i)
            }
        });
        assert_eq!(r.unwrap_err(), "seven");
    }
}
