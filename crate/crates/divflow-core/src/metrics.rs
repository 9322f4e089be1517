//! Evaluation metrics for reconstructed slices: discrete divergence and
//! reconstruction error against ground truth.
//!
//! All metrics can be restricted to a centered evaluation region to exclude
//! boundary effects of the clamped stencils and the clamped warp.

use crate::error::FieldError;
use crate::field::{ScalarSlice, VectorSlice};
use crate::stencils::{self, DerivKind};

/// Summary statistics of a divergence image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergenceReport {
    /// Mean of the absolute divergence over the evaluation region.
    pub mean_abs: f64,
    /// Root-mean-square divergence over the evaluation region.
    pub l2: f64,
}

/// Discrete in-plane-plus-axial divergence of a reconstructed slice:
/// `dVx/dx + dVy/dy + dVz/dz`, with the in-plane terms as physical-spacing
/// central differences on the slice itself and the axial term as the central
/// difference `(Vz_upper - Vz_lower) / (2 * spacing)` between the bracketing
/// slices.
pub fn discrete_divergence(
    slice: &VectorSlice,
    lower: &VectorSlice,
    upper: &VectorSlice,
    spacing: f64,
) -> Result<ScalarSlice, FieldError> {
    slice.grid().ensure_matches(&lower.grid())?;
    slice.grid().ensure_matches(&upper.grid())?;
    let dvx = stencils::derive(slice.vx(), DerivKind::Dx)?;
    let dvy = stencils::derive(slice.vy(), DerivKind::Dy)?;
    let dvz = stencils::z_central_difference(lower.vz(), upper.vz(), spacing)?;
    Ok(dvx.zip_raw(&dvy, |a, b| a + b).zip_raw(&dvz, |a, b| a + b))
}

/// Mean-absolute and RMS statistics of a divergence image over a centered
/// `region x region` window.
pub fn divergence_metric(div: &ScalarSlice, region: usize) -> Result<DivergenceReport, FieldError> {
    let cropped = div.crop_center(region, region)?;
    let n = cropped.grid().len() as f64;
    let mean_abs = cropped.values().iter().map(|v| v.abs()).sum::<f64>() / n;
    let l2 = (cropped.values().iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    Ok(DivergenceReport { mean_abs, l2 })
}

/// Mean squared error between two vector slices over a centered
/// `region x region` window, averaged over pixels and summed over the three
/// components: `mean_i |v_a(i) - v_b(i)|^2`.
pub fn mse(a: &VectorSlice, b: &VectorSlice, region: usize) -> Result<f64, FieldError> {
    a.grid().ensure_matches(&b.grid())?;
    let mut total = 0.0;
    let mut n = 0.0;
    for (ca, cb) in a.components().iter().zip(b.components().iter()) {
        let ca = ca.crop_center(region, region)?;
        let cb = cb.crop_center(region, region)?;
        for (va, vb) in ca.values().iter().zip(cb.values()) {
            let d = va - vb;
            total += d * d;
        }
        n = ca.grid().len() as f64;
    }
    Ok(total / n)
}

/// Mean squared error between the velocity-magnitude images of two vector
/// slices over a centered `region x region` window.
pub fn magnitude_mse(a: &VectorSlice, b: &VectorSlice, region: usize) -> Result<f64, FieldError> {
    a.grid().ensure_matches(&b.grid())?;
    let ma = a.magnitude_image().crop_center(region, region)?;
    let mb = b.magnitude_image().crop_center(region, region)?;
    let n = ma.grid().len() as f64;
    let total: f64 = ma
        .values()
        .iter()
        .zip(mb.values())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    Ok(total / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;

    fn grid(n: usize, spacing: f64) -> GridSpec {
        GridSpec::new(n, n, spacing, spacing).unwrap()
    }

    fn vec_slice(
        g: GridSpec,
        fx: impl Fn(f64, f64) -> f64,
        fy: impl Fn(f64, f64) -> f64,
        fz: impl Fn(f64, f64) -> f64,
    ) -> VectorSlice {
        let make = |f: &dyn Fn(f64, f64) -> f64| {
            ScalarSlice::from_fn(g, |x, y| f(x as f64 * g.dx, y as f64 * g.dy)).unwrap()
        };
        VectorSlice::new(make(&fx), make(&fy), make(&fz)).unwrap()
    }

    #[test]
    fn divergence_of_constant_field_is_zero() {
        let g = grid(8, 0.5);
        let v = vec_slice(g, |_, _| 1.0, |_, _| -2.0, |_, _| 0.5);
        let div = discrete_divergence(&v, &v, &v, 1.0).unwrap();
        assert!(div.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_of_linear_field() {
        // Vx = 2x, Vy = -3y, Vz grows by 1 per unit z: div = 2 - 3 + 1 = 0.
        let g = grid(9, 0.25);
        let mid = vec_slice(g, |x, _| 2.0 * x, |_, y| -3.0 * y, |_, _| 0.0);
        let lower = vec_slice(g, |x, _| 2.0 * x, |_, y| -3.0 * y, |_, _| -1.0);
        let upper = vec_slice(g, |x, _| 2.0 * x, |_, y| -3.0 * y, |_, _| 1.0);
        let div = discrete_divergence(&mid, &lower, &upper, 1.0).unwrap();
        // interior pixels: central differences are exact on linear fields
        let inner = div.crop_center(7, 7).unwrap();
        assert!(inner.values().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn divergence_nonzero_field() {
        // Vx = x^2 -> dVx/dx = 2x exactly under a central difference.
        let g = grid(9, 0.5);
        let mid = vec_slice(g, |x, _| x * x, |_, _| 0.0, |_, _| 0.0);
        let zero = vec_slice(g, |_, _| 0.0, |_, _| 0.0, |_, _| 0.0);
        let div = discrete_divergence(&mid, &zero, &zero, 1.0).unwrap();
        for y in 1..8 {
            for x in 1..8 {
                assert!((div.at(x, y) - 2.0 * x as f64 * g.dx).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn divergence_metric_constant_image() {
        let g = grid(6, 1.0);
        let div = ScalarSlice::constant(g, -0.5).unwrap();
        let r = divergence_metric(&div, 4).unwrap();
        assert!((r.mean_abs - 0.5).abs() < 1e-15);
        assert!((r.l2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn divergence_metric_crop_excludes_boundary() {
        let g = grid(6, 1.0);
        // zeros inside, huge values on the outer ring
        let div = ScalarSlice::from_fn(g, |x, y| {
            if x == 0 || y == 0 || x == 5 || y == 5 {
                100.0
            } else {
                0.0
            }
        })
        .unwrap();
        let r = divergence_metric(&div, 4).unwrap();
        assert_eq!(r.mean_abs, 0.0);
        assert_eq!(r.l2, 0.0);
    }

    #[test]
    fn rms_at_least_mean_abs() {
        let g = grid(8, 1.0);
        let div = ScalarSlice::from_fn(g, |x, y| ((x * 3 + y) as f64).sin()).unwrap();
        let r = divergence_metric(&div, 6).unwrap();
        assert!(r.l2 >= r.mean_abs - 1e-15);
    }

    #[test]
    fn mse_zero_for_identical_fields() {
        let g = grid(7, 0.5);
        let v = vec_slice(g, |x, y| x + y, |x, _| x, |_, y| y * y);
        assert_eq!(mse(&v, &v, 5).unwrap(), 0.0);
        assert_eq!(magnitude_mse(&v, &v, 5).unwrap(), 0.0);
    }

    #[test]
    fn mse_constant_offset() {
        let g = grid(6, 1.0);
        let a = vec_slice(g, |_, _| 0.0, |_, _| 0.0, |_, _| 0.0);
        let b = vec_slice(g, |_, _| 3.0, |_, _| 0.0, |_, _| 4.0);
        // per pixel: 9 + 0 + 16 = 25
        assert!((mse(&a, &b, 4).unwrap() - 25.0).abs() < 1e-12);
        // magnitudes: |a| = 0, |b| = 5 -> squared difference 25
        assert!((magnitude_mse(&a, &b, 4).unwrap() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn mse_is_symmetric() {
        let g = grid(6, 1.0);
        let a = vec_slice(g, |x, y| x * y, |x, _| x, |_, _| 1.0);
        let b = vec_slice(g, |x, y| x - y, |_, y| y, |_, _| 0.0);
        assert_eq!(mse(&a, &b, 4).unwrap(), mse(&b, &a, 4).unwrap());
    }

    #[test]
    fn mse_dominates_magnitude_mse() {
        // by the reverse triangle inequality ||a|-|b|| <= |a-b| per pixel
        let g = grid(6, 1.0);
        let a = vec_slice(g, |x, y| x * y, |x, y| x + y, |_, _| 0.3);
        let b = vec_slice(g, |x, y| x - 0.2 * y, |_, y| 1.1 * y, |x, _| 0.1 * x);
        assert!(magnitude_mse(&a, &b, 4).unwrap() <= mse(&a, &b, 4).unwrap() + 1e-12);
    }

    #[test]
    fn region_too_large_errors() {
        let g = grid(4, 1.0);
        let v = vec_slice(g, |_, _| 0.0, |_, _| 0.0, |_, _| 0.0);
        assert!(matches!(
            mse(&v, &v, 5),
            Err(FieldError::RegionTooLarge { .. })
        ));
        let div = ScalarSlice::zeros(g);
        assert!(matches!(
            divergence_metric(&div, 9),
            Err(FieldError::RegionTooLarge { .. })
        ));
    }
}
