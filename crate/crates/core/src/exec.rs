//! Data-parallel map over task indices, rayon-backed when the `parallel`
//! feature is on. Results come back in index order either way, so callers
//! are schedule-independent by construction.

use crate::error::Result;

#[cfg(feature = "parallel")]
pub(crate) fn try_map_indexed<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn try_map_indexed<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..count).map(f).collect()
}
