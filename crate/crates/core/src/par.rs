//! Execution policy for the data-parallel inner loops.
//!
//! Every parallel path computes each output element with exactly the same
//! arithmetic as the sequential path, so results are bit-identical whatever
//! the thread count. Without the `parallel` feature, `Parallelism::Parallel`
//! falls back to sequential execution.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    Parallel,
}

impl Default for Parallelism {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Parallelism::Parallel
        } else {
            Parallelism::Sequential
        }
    }
}

/// Fills a row-major `nrows x ncols` buffer by calling `f(row, out_row)` for every row.
pub(crate) fn fill_rows<F>(nrows: usize, ncols: usize, par: Parallelism, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let mut buf = vec![0.0; nrows * ncols];
    if ncols == 0 {
        return buf;
    }
    match par {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => buf
            .par_chunks_mut(ncols)
            .enumerate()
            .for_each(|(i, row)| f(i, row)),
        _ => buf
            .chunks_mut(ncols)
            .enumerate()
            .for_each(|(i, row)| f(i, row)),
    }
    buf
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_indexed<T, F>(n: usize, par: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match par {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}
