//! Execution policy for the grid-shaped hot loops.
//!
//! Every reduction is split into fixed-size chunks whose partial sums are
//! combined in index order, so sequential and parallel runs produce
//! bit-identical results.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Parallel when the `parallel` feature is compiled in, sequential otherwise.
    pub fn effective(self) -> Self {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }

    /// `f(0) + f(1) + … + f(n-1)` with a deterministic summation tree.
    pub fn sum<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let chunks = chunk_ranges(n);
        let partial: Vec<f64> = self.map_ranges(&chunks, |r| r.map(&f).sum());
        partial.into_iter().sum()
    }

    /// Sum of several accumulators at once; each index contributes an array.
    pub fn sum_n<const M: usize, F>(self, n: usize, f: F) -> [f64; M]
    where
        F: Fn(usize) -> [f64; M] + Sync + Send,
    {
        let chunks = chunk_ranges(n);
        let partial: Vec<[f64; M]> = self.map_ranges(&chunks, |r| {
            let mut acc = [0.0; M];
            for i in r {
                let v = f(i);
                for (a, b) in acc.iter_mut().zip(v) {
                    *a += b;
                }
            }
            acc
        });
        let mut total = [0.0; M];
        for p in partial {
            for (a, b) in total.iter_mut().zip(p) {
                *a += b;
            }
        }
        total
    }

    /// Fold of `(min, max)` over `f(0..n)`; NaN values propagate.
    pub fn min_max<F>(self, n: usize, f: F) -> (f64, f64)
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let chunks = chunk_ranges(n);
        let partial: Vec<(f64, f64)> = self.map_ranges(&chunks, |r| {
            r.map(&f).fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), v| {
                    if v.is_nan() {
                        (f64::NAN, f64::NAN)
                    } else {
                        (lo.min(v), hi.max(v))
                    }
                },
            )
        });
        partial.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
            if a.is_nan() || lo.is_nan() {
                (f64::NAN, f64::NAN)
            } else {
                (lo.min(a), hi.max(b))
            }
        })
    }

    /// `(0..n).map(f).collect()`, in order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self.effective() {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => unreachable!(),
        }
    }

    fn map_ranges<T, F>(self, ranges: &[Range<usize>], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync + Send,
    {
        match self.effective() {
            Execution::Sequential => ranges.iter().cloned().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => ranges.par_iter().cloned().map(f).collect(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => unreachable!(),
        }
    }
}

fn chunk_ranges(n: usize) -> Vec<Range<usize>> {
    (0..n.div_ceil(CHUNK)).map(|c| c * CHUNK..((c + 1) * CHUNK).min(n)).collect()
}

/// Sizes the global worker pool. Only the first call can take effect; without
/// the `parallel` feature this does nothing.
pub fn set_worker_threads(n: usize) -> std::result::Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_sums_are_bit_identical() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        let a = Execution::Sequential.sum(100_003, f);
        let b = Execution::Parallel.sum(100_003, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn sum_n_and_min_max() {
        let s = Execution::Parallel.sum_n(1000, |i| [1.0, i as f64]);
        assert_eq!(s, [1000.0, 499_500.0]);
        let (lo, hi) = Execution::Parallel.min_max(1000, |i| (i as f64 - 300.0).abs());
        assert_eq!((lo, hi), (0.0, 699.0));
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(Execution::Parallel.sum(0, |_| 1.0), 0.0);
        assert!(Execution::Sequential.map(0, |i| i).is_empty());
    }

    #[test]
    fn map_preserves_order() {
        let v = Execution::Parallel.map(5000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
