//! Central finite-difference stencils and the Horn-Schunck neighborhood
//! average.
//!
//! All stencils use replicate padding at the boundary: out-of-range neighbor
//! indices are clamped to the nearest edge pixel before the stencil is
//! applied. Interior values are exact on the polynomial orders a central
//! difference captures (first differences on quadratics, second differences
//! on cubics' quadratic part).

use crate::error::FieldError;
use crate::field::ScalarSlice;

/// Supported derivative stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivKind {
    Dx,
    Dy,
    Dxx,
    Dyy,
    Dxy,
}

/// Central difference scaled by the grid's physical spacing.
pub fn derive(s: &ScalarSlice, kind: DerivKind) -> Result<ScalarSlice, FieldError> {
    derive_scaled(s, kind, s.grid().dx, s.grid().dy)
}

/// Central difference with unit (pixel) spacing, used by the brightness
/// constraint of the two-frame Horn-Schunck path.
pub fn derive_pixel(s: &ScalarSlice, kind: DerivKind) -> Result<ScalarSlice, FieldError> {
    derive_scaled(s, kind, 1.0, 1.0)
}

fn derive_scaled(
    s: &ScalarSlice,
    kind: DerivKind,
    hx: f64,
    hy: f64,
) -> Result<ScalarSlice, FieldError> {
    let grid = s.grid();
    grid.ensure_stencil_size()?;
    let mut out = Vec::with_capacity(grid.len());
    for y in 0..grid.ny as isize {
        for x in 0..grid.nx as isize {
            let v = match kind {
                DerivKind::Dx => (s.at_clamped(x + 1, y) - s.at_clamped(x - 1, y)) / (2.0 * hx),
                DerivKind::Dy => (s.at_clamped(x, y + 1) - s.at_clamped(x, y - 1)) / (2.0 * hy),
                DerivKind::Dxx => {
                    (s.at_clamped(x + 1, y) - 2.0 * s.at_clamped(x, y) + s.at_clamped(x - 1, y))
                        / (hx * hx)
                }
                DerivKind::Dyy => {
                    (s.at_clamped(x, y + 1) - 2.0 * s.at_clamped(x, y) + s.at_clamped(x, y - 1))
                        / (hy * hy)
                }
                DerivKind::Dxy => {
                    ((s.at_clamped(x + 1, y + 1) - s.at_clamped(x - 1, y + 1))
                        - (s.at_clamped(x + 1, y - 1) - s.at_clamped(x - 1, y - 1)))
                        / (4.0 * hx * hy)
                }
            };
            out.push(v);
        }
    }
    Ok(ScalarSlice::from_raw(grid, out))
}

/// Weighted 8-neighborhood average with the classic Horn-Schunck kernel:
/// 1/6 for the four edge neighbors, 1/12 for the four diagonals, zero center
/// weight. Weights sum to 1.
pub fn neighborhood_average(s: &ScalarSlice) -> Result<ScalarSlice, FieldError> {
    let grid = s.grid();
    grid.ensure_stencil_size()?;
    let mut out = Vec::with_capacity(grid.len());
    for y in 0..grid.ny as isize {
        for x in 0..grid.nx as isize {
            out.push(neighborhood_average_at(s, x, y));
        }
    }
    Ok(ScalarSlice::from_raw(grid, out))
}

#[inline]
pub(crate) fn neighborhood_average_at(s: &ScalarSlice, x: isize, y: isize) -> f64 {
    let edges = s.at_clamped(x - 1, y)
        + s.at_clamped(x + 1, y)
        + s.at_clamped(x, y - 1)
        + s.at_clamped(x, y + 1);
    let diagonals = s.at_clamped(x - 1, y - 1)
        + s.at_clamped(x + 1, y - 1)
        + s.at_clamped(x - 1, y + 1)
        + s.at_clamped(x + 1, y + 1);
    edges * (1.0 / 6.0) + diagonals * (1.0 / 12.0)
}

/// Central z-derivative estimate `(b - a) / (2 * spacing)` at the midpoint
/// between a slice `a` at `z - spacing` and a slice `b` at `z + spacing`.
pub fn z_central_difference(
    a: &ScalarSlice,
    b: &ScalarSlice,
    spacing: f64,
) -> Result<ScalarSlice, FieldError> {
    a.grid().ensure_matches(&b.grid())?;
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(FieldError::BadSliceSpacing { dz: spacing });
    }
    Ok(a.zip_raw(b, |av, bv| (bv - av) / (2.0 * spacing)))
}
