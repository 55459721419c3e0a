//! Data-parallel mapping helpers.
//!
//! The crate's heavy loops (sweep grids, Jacobian columns) are all of the shape
//! "independent function of the index, collect in order". These helpers run
//! them on rayon when the `parallel` feature (default) is enabled and fall back
//! to a plain sequential loop otherwise. The `*_seq` forms are always
//! sequential; they are the fallback implementation and the baseline used by
//! the criterion benches.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    map_indices_seq(n, f)
}

/// Sequential form of [`map_indices`]; always available.
pub fn map_indices_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let par: Vec<usize> = map_indices(100, |i| i * i);
        let seq: Vec<usize> = map_indices_seq(100, |i| i * i);
        assert_eq!(par, seq);
    }
}
