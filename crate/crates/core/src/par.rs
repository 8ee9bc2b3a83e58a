//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it, or with [`Parallelism::Sequential`], every helper runs on the
//! calling thread. Results never depend on the choice.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    #[default]
    Parallel,
    Sequential,
}

impl Parallelism {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// `(0..n).map(f).collect()`, in index order.
pub fn map_range<T, F>(par: Parallelism, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = par;
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, in order.
pub fn map_slice<S, T, F>(par: Parallelism, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = par;
    items.iter().map(f).collect()
}

/// Concatenation of `f(chunk)` over consecutive chunks of `0..n`, in order.
pub fn flat_map_chunks<T, F>(par: Parallelism, n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> Vec<T> + Sync + Send,
{
    let chunk = chunk.max(1);
    let chunks = n.div_ceil(chunk);
    let parts = map_range(par, chunks, |c| f(c * chunk..((c + 1) * chunk).min(n)));
    let mut out = Vec::with_capacity(parts.iter().map(Vec::len).sum());
    for p in parts {
        out.extend(p);
    }
    out
}

pub fn sort_unstable<T: Ord + Send>(par: Parallelism, v: &mut [T]) {
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        v.par_sort_unstable();
        return;
    }
    let _ = par;
    v.sort_unstable();
}

/// Install a global pool with at most `threads` workers. Has no effect
/// without the `parallel` feature or when a pool already exists.
pub fn init_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        for par in [Parallelism::Parallel, Parallelism::Sequential] {
            assert_eq!(map_range(par, 5, |i| i * i), vec![0, 1, 4, 9, 16]);
            assert_eq!(
                flat_map_chunks(par, 7, 3, |r| r.collect()),
                (0..7).collect::<Vec<_>>()
            );
            let mut v = vec![3, 1, 2];
            sort_unstable(par, &mut v);
            assert_eq!(v, vec![1, 2, 3]);
        }
    }
}
