//! Data-parallel map over independent work items.
//!
//! With the `parallel` feature (default) `map_collect` fans out on rayon;
//! without it the call is a plain sequential map. `map_collect_seq` is always
//! sequential so benchmarks can compare the two paths in one binary.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let f = |x: &f64| x.sqrt() + 1.0;
        assert_eq!(map_collect(&xs, f), map_collect_seq(&xs, f));
    }
}
