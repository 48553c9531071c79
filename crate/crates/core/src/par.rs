//! Row-parallel loops with a sequential fallback.
//!
//! Work is always split into whole image rows, and reductions collect one
//! partial result per row in row order, so results do not depend on the
//! execution mode or the number of threads.

/// How data-parallel loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Rows are distributed over the rayon pool. Without the `parallel`
    /// feature this behaves like [`Execution::Sequential`].
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    #[cfg(feature = "parallel")]
    fn is_parallel(self) -> bool {
        self == Execution::Parallel
    }
}

/// Calls `f(row, chunk)` for every `row_len`-sized chunk of `data`.
pub fn for_each_row<T, F>(exec: Execution, data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(r, chunk)| f(r, chunk));
        return;
    }
    let _ = exec;
    data.chunks_mut(row_len).enumerate().for_each(|(r, chunk)| f(r, chunk));
}

/// Like [`for_each_row`] over two buffers split into rows of their own lengths.
pub fn for_each_row2<A, B, F>(exec: Execution, a: &mut [A], a_len: usize, b: &mut [B], b_len: usize, f: F)
where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        a.par_chunks_mut(a_len)
            .zip(b.par_chunks_mut(b_len))
            .enumerate()
            .for_each(|(r, (ca, cb))| f(r, ca, cb));
        return;
    }
    let _ = exec;
    a.chunks_mut(a_len)
        .zip(b.chunks_mut(b_len))
        .enumerate()
        .for_each(|(r, (ca, cb))| f(r, ca, cb));
}

/// Evaluates `f` for every row and returns the results in row order.
pub fn map_rows<R, F>(exec: Execution, rows: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..rows).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..rows).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let mut a = vec![0.0f64; 60];
        let mut b = a.clone();
        let work = |r: usize, chunk: &mut [f64]| {
            for (j, x) in chunk.iter_mut().enumerate() {
                *x = (r * 100 + j) as f64 * 0.1;
            }
        };
        for_each_row(Execution::Parallel, &mut a, 6, work);
        for_each_row(Execution::Sequential, &mut b, 6, work);
        assert_eq!(a, b);
        let sums = |e| map_rows(e, 10, |r| a[r * 6..(r + 1) * 6].iter().sum::<f64>());
        assert_eq!(sums(Execution::Parallel), sums(Execution::Sequential));
    }
}
