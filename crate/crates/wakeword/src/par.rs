//! Order-preserving map over a slice, parallel when the `parallel` feature
//! is enabled.
//!
//! All data-parallel inner loops in the crate (batch feature extraction,
//! per-utterance gradient evaluation, sweep decodes, augmentation) funnel
//! through [`map_slice`] so the sequential fallback exercises the exact same
//! code paths. Outputs are collected in input order, so reductions performed
//! afterwards are deterministic regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_slice<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

/// Map `f` over `items`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Sequential reference path, kept unconditionally for benchmarks comparing
/// the two execution modes.
pub fn map_slice_seq<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let f = |x: &u64| x.wrapping_mul(0x9e3779b97f4a7c15);
        assert_eq!(map_slice(&xs, f), map_slice_seq(&xs, f));
    }
}
