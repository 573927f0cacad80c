//! Execution-mode plumbing shared by the data-parallel operations.
//!
//! Every parallel operation in this crate partitions its work into
//! order-independent units and merges them with an associative, commutative
//! reduction, so both modes produce identical results. With the `parallel`
//! feature disabled, `Parallel` silently degrades to `Sequential`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether a data-parallel operation runs on rayon or on one thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// The mode that will actually run, given the compiled feature set.
    pub fn effective(self) -> ExecMode {
        #[cfg(feature = "parallel")]
        {
            self
        }
        #[cfg(not(feature = "parallel"))]
        {
            ExecMode::Sequential
        }
    }
}

/// Maps `0..n` through `f`, in parallel when requested. The output order is
/// the index order either way.
pub(crate) fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode.effective() {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Sorts a vector, using the parallel sort when requested.
pub(crate) fn sort<T: Ord + Send>(mode: ExecMode, items: &mut [T]) {
    match mode.effective() {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => items.par_sort_unstable(),
        _ => items.sort_unstable(),
    }
}
