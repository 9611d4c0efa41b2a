//! Execution mode for the data-parallel hot loops.
//!
//! Everything that fans out (kernel matrices, EM responsibilities, fixture
//! evaluation, rollouts) goes through [`Execution::map`], which preserves
//! input order so results are bitwise identical in both modes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Ordered map over a slice.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Ordered map over `0..n`.
    pub fn map_range<U, F>(self, n: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.37).collect();
        let a = Execution::Parallel.map(&xs, |x| x.sin());
        let b = Execution::Sequential.map(&xs, |x| x.sin());
        assert_eq!(a, b);
        let c = Execution::Parallel.map_range(17, |i| i * i);
        assert_eq!(c, (0..17).map(|i| i * i).collect::<Vec<_>>());
    }
}
