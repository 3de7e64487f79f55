//! Order-preserving map over independent work items. With the `parallel`
//! feature (default) it fans out through rayon's global pool; without it,
//! the same call runs sequentially. Results are positionally identical
//! either way, so outputs never depend on the build flavor.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to every item, preserving order.
#[cfg(feature = "parallel")]
pub fn map_items<T: Sync, R: Send, F: Fn(&T) -> R + Sync + Send>(items: &[T], f: F) -> Vec<R> {
    items.par_iter().map(f).collect()
}

/// Applies `f` to every item, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_items<T: Sync, R: Send, F: Fn(&T) -> R + Sync + Send>(items: &[T], f: F) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Whether this build fans work out across threads.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Sequential reference implementation with the same signature as
/// [`map_items`], kept unconditionally for benchmark comparisons.
pub fn map_items_sequential<T: Sync, R: Send, F: Fn(&T) -> R + Sync>(
    items: &[T],
    f: F,
) -> Vec<R> {
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_flavors_preserve_order() {
        let items: Vec<u64> = (0..1000).collect();
        let spread = map_items(&items, |&x| x * x);
        let reference = map_items_sequential(&items, |&x| x * x);
        assert_eq!(spread, reference);
    }
}
