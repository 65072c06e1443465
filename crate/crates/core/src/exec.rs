//! Indexed map executor: rayon data-parallel under the `parallel` feature,
//! sequential otherwise. Work items derive everything from their index, so
//! both paths produce identical output in index order regardless of
//! scheduling.

/// Execution strategy for ensemble-style loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// rayon when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Auto,
    /// Always sequential; the reference path benches compare against.
    Serial,
}

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match mode {
        ExecMode::Auto => (0..n).into_par_iter().map(f).collect(),
        ExecMode::Serial => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(_mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    (0..n).map(f).collect()
}
