//! Thin switch between rayon and sequential iteration.
//!
//! With the `parallel` feature every helper fans out over the global rayon
//! pool; without it the same closures run in order on the calling thread.
//! Callers only ever combine results in index order, so both builds produce
//! identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`, possibly in parallel.
#[cfg(feature = "parallel")]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, possibly in parallel.
#[cfg(feature = "parallel")]
pub fn map_slice<A, T, F>(items: &[A], f: F) -> Vec<T>
where
    A: Sync,
    T: Send,
    F: Fn(&A) -> T + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<A, T, F>(items: &[A], f: F) -> Vec<T>
where
    F: Fn(&A) -> T,
{
    items.iter().map(f).collect()
}

/// Runs `f(chunk_index, chunk)` over `chunk_len`-sized pieces of `data`.
#[cfg(feature = "parallel")]
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    data.par_chunks_mut(chunk_len.max(1))
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [T]),
{
    data.chunks_mut(chunk_len.max(1))
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

#[cfg(feature = "parallel")]
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    rayon::join(a, b)
}

#[cfg(not(feature = "parallel"))]
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA,
    B: FnOnce() -> RB,
{
    (a(), b())
}

/// Sizes the global pool. `0` leaves rayon's default (one thread per core).
///
/// Only the first successful call has an effect; later calls are ignored.
pub fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            log::debug!("thread pool already initialised: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// Fixed-shape pairwise summation; the tree does not depend on thread count.
pub fn pairwise_sum<T, F>(items: &[T], f: &F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync,
{
    const LEAF: usize = 256;
    const FORK: usize = 1 << 15;
    if items.len() <= LEAF {
        // Kahan inside the leaf
        let mut sum = 0.0f64;
        let mut c = 0.0f64;
        for it in items {
            let y = f(it) - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        return sum;
    }
    let mid = items.len() / 2;
    let (lo, hi) = items.split_at(mid);
    if items.len() >= FORK {
        let (a, b) = join(|| pairwise_sum(lo, f), || pairwise_sum(hi, f));
        a + b
    } else {
        pairwise_sum(lo, f) + pairwise_sum(hi, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_exact_integer_sum() {
        let v: Vec<u32> = (0..100_000).collect();
        let s = pairwise_sum(&v, &|x| *x as f64);
        assert_eq!(s, (99_999.0 * 100_000.0) / 2.0);
    }

    #[test]
    fn pairwise_sum_is_accurate_on_ill_conditioned_input() {
        let mut v = vec![1e-8f64; 1_000_000];
        v[0] = 1e8;
        let s = pairwise_sum(&v, &|x| *x);
        assert!((s - (1e8 + (999_999.0 * 1e-8))).abs() < 1e-7);
    }

    #[test]
    fn map_range_preserves_order() {
        let v = map_range(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, x)| *x == 2 * i));
    }
}
