//! Baseline interpolators and the shared symmetric warp used for midslice
//! reconstruction.

use crate::error::FieldError;
use crate::field::{FlowField, ScalarSlice, VectorSlice};

/// Per-component arithmetic mean `(lower + upper) / 2`.
pub fn linear_midpoint(
    lower: &VectorSlice,
    upper: &VectorSlice,
) -> Result<VectorSlice, FieldError> {
    lower.grid().ensure_matches(&upper.grid())?;
    let mix = |l: &ScalarSlice, u: &ScalarSlice| u.zip_raw(l, |uv, lv| 0.5 * (uv + lv));
    VectorSlice::new(
        mix(lower.vx(), upper.vx()),
        mix(lower.vy(), upper.vy()),
        mix(lower.vz(), upper.vz()),
    )
}

/// Symmetric warp-average: per component,
/// `out(x, y) = 0.5 * (upper(x + alpha, y + beta) + lower(x - alpha, y - beta))`
/// with bilinear sampling and clamped boundaries. `alpha`/`beta` are in
/// pixels.
///
/// The single routine serves both interpolators: the symmetric solvers pass
/// their full displacement field, the Horn-Schunck path passes a pre-scaled
/// half-flow.
pub fn warp_average(
    lower: &VectorSlice,
    upper: &VectorSlice,
    flow: &FlowField,
) -> Result<VectorSlice, FieldError> {
    lower.grid().ensure_matches(&upper.grid())?;
    lower.grid().ensure_matches(&flow.grid())?;
    let grid = lower.grid();
    let warp_one = |l: &ScalarSlice, u: &ScalarSlice| {
        let mut out = Vec::with_capacity(grid.len());
        let mut i = 0;
        for y in 0..grid.ny {
            for x in 0..grid.nx {
                let a = flow.alpha().values()[i];
                let b = flow.beta().values()[i];
                let up = u.bilinear_sample(x as f64 + a, y as f64 + b);
                let lo = l.bilinear_sample(x as f64 - a, y as f64 - b);
                out.push(0.5 * (up + lo));
                i += 1;
            }
        }
        ScalarSlice::from_raw(grid, out)
    };
    VectorSlice::new(
        warp_one(lower.vx(), upper.vx()),
        warp_one(lower.vy(), upper.vy()),
        warp_one(lower.vz(), upper.vz()),
    )
}
