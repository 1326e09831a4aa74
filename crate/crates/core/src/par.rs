//! Execution switch for the data-parallel scans.
//!
//! With the `parallel` feature the scans run on the rayon pool; without it,
//! or with [`Exec::Sequential`], they run in order on the calling thread.
//! Results are identical either way.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    pub fn map_range<R, F>(self, range: Range<usize>, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return range.into_par_iter().map(f).collect();
        }
        range.map(f).collect()
    }

    /// Smallest index in `range` satisfying `pred`.
    pub fn find_first<F>(self, range: Range<usize>, pred: F) -> Option<usize>
    where
        F: Fn(usize) -> bool + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return range.into_par_iter().find_first(|&i| pred(i));
        }
        range.into_iter().find(|&i| pred(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        for exec in [Exec::Sequential, Exec::Parallel] {
            assert_eq!(exec.map(&[1, 2, 3], |x| x * 2), vec![2, 4, 6]);
            assert_eq!(exec.map_range(0..4, |i| i * i), vec![0, 1, 4, 9]);
            assert_eq!(exec.find_first(0..1000, |i| i * i > 500), Some(23));
            assert_eq!(exec.find_first(0..10, |_| false), None);
        }
    }
}
