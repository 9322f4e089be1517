//! Horn-Schunck optical flow and the Horn-Schunck-based slice interpolators.
//!
//! Two paths are provided. The two-frame path ([`hs_solve`]) estimates flow
//! between the magnitude images of two slices with pixel-unit brightness
//! gradients; the symmetric path ([`hs_sym_solve`]) runs the same iteration
//! on the symmetric brightness constraint fields shared with the
//! divergence-constrained solver, and is exactly what that solver reduces to
//! at `gamma = 0`.

use crate::error::{FieldError, ParamError, SolverError};
use crate::field::{FlowField, ScalarSlice, VectorSlice, VolumeField};
use crate::reconstruct::warp_average;
use crate::stencils::{self, DerivKind};

/// Horn-Schunck solver parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HsParams {
    /// Smoothness weight; enters the update as `lambda^2`.
    pub lambda: f64,
    pub iterations: usize,
    /// Max per-pixel update magnitude below which the iteration stops early.
    /// Zero (the default) runs exactly `iterations` sweeps.
    pub early_stop_tol: f64,
}

impl HsParams {
    pub fn new(lambda: f64, iterations: usize) -> Result<Self, ParamError> {
        let p = Self {
            lambda,
            iterations,
            early_stop_tol: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_early_stop(mut self, tol: f64) -> Result<Self, ParamError> {
        self.early_stop_tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(ParamError::NonPositiveLambda(self.lambda));
        }
        if self.iterations == 0 {
            return Err(ParamError::ZeroIterations);
        }
        if !(self.early_stop_tol.is_finite() && self.early_stop_tol >= 0.0) {
            return Err(ParamError::NegativeTolerance(self.early_stop_tol));
        }
        Ok(())
    }
}

/// Brightness gradient fields for the two-frame constraint
/// `Ix alpha + Iy beta + It = 0`.
///
/// Spatial gradients are central differences of the frame average
/// `(a + b) / 2` in pixel units; the temporal derivative is the plain frame
/// difference `b - a`.
pub fn hs_gradients(
    a: &ScalarSlice,
    b: &ScalarSlice,
) -> Result<(ScalarSlice, ScalarSlice, ScalarSlice), FieldError> {
    a.grid().ensure_matches(&b.grid())?;
    let avg = a.zip_raw(b, |av, bv| 0.5 * (av + bv));
    let ix = stencils::derive_pixel(&avg, DerivKind::Dx)?;
    let iy = stencils::derive_pixel(&avg, DerivKind::Dy)?;
    let it = a.zip_raw(b, |av, bv| bv - av);
    Ok((ix, iy, it))
}

/// One Jacobi sweep of the Horn-Schunck update. All pixels read only the
/// incoming flow field, so the result is independent of evaluation order.
pub fn hs_step(
    flow: &FlowField,
    ix: &ScalarSlice,
    iy: &ScalarSlice,
    it: &ScalarSlice,
    lambda: f64,
) -> Result<FlowField, FieldError> {
    flow.grid().ensure_matches(&ix.grid())?;
    flow.grid().ensure_matches(&iy.grid())?;
    flow.grid().ensure_matches(&it.grid())?;
    let grid = flow.grid();
    grid.ensure_stencil_size()?;
    let l2 = lambda * lambda;
    let mut alpha = Vec::with_capacity(grid.len());
    let mut beta = Vec::with_capacity(grid.len());
    let mut i = 0;
    for y in 0..grid.ny as isize {
        for x in 0..grid.nx as isize {
            let abar = stencils::neighborhood_average_at(flow.alpha(), x, y);
            let bbar = stencils::neighborhood_average_at(flow.beta(), x, y);
            let gx = ix.values()[i];
            let gy = iy.values()[i];
            let gt = it.values()[i];
            let den = gx * gx + gy * gy + l2;
            debug_assert!(den >= l2);
            let residual = (gx * abar + gy * bbar + gt) / den;
            alpha.push(abar - gx * residual);
            beta.push(bbar - gy * residual);
            i += 1;
        }
    }
    Ok(FlowField::from_raw(grid, alpha, beta))
}

/// Iterates [`hs_step`] from zero flow on precomputed gradient fields.
pub fn hs_solve_fields(
    ix: &ScalarSlice,
    iy: &ScalarSlice,
    it: &ScalarSlice,
    params: &HsParams,
) -> Result<FlowField, SolverError> {
    params.validate()?;
    let mut flow = FlowField::zeros(ix.grid());
    for _ in 0..params.iterations {
        let next = hs_step(&flow, ix, iy, it, params.lambda)?;
        let done = params.early_stop_tol > 0.0 && max_update(&flow, &next) < params.early_stop_tol;
        flow = next;
        if done {
            break;
        }
    }
    Ok(flow)
}

pub(crate) fn max_update(prev: &FlowField, next: &FlowField) -> f64 {
    let da = prev
        .alpha()
        .values()
        .iter()
        .zip(next.alpha().values())
        .fold(0.0f64, |m, (&p, &n)| m.max((n - p).abs()));
    let db = prev
        .beta()
        .values()
        .iter()
        .zip(next.beta().values())
        .fold(0.0f64, |m, (&p, &n)| m.max((n - p).abs()));
    da.max(db)
}

/// Two-frame Horn-Schunck flow from `a` to `b`, in pixel units.
pub fn hs_solve(
    a: &ScalarSlice,
    b: &ScalarSlice,
    params: &HsParams,
) -> Result<FlowField, SolverError> {
    let (ix, iy, it) = hs_gradients(a, b)?;
    hs_solve_fields(&ix, &iy, &it, params)
}

/// Midslice reconstruction with the two-frame Horn-Schunck flow: flow is
/// computed on the magnitude images of the two outer slices, then every
/// velocity component is rebuilt at the midpoint as
/// `0.5 * (comp_a(x + alpha/2, y + beta/2) + comp_b(x - alpha/2, y - beta/2))`.
pub fn hs_interpolate_midslice(
    vol: &VolumeField,
    index_a: usize,
    index_b: usize,
    params: &HsParams,
) -> Result<VectorSlice, SolverError> {
    if index_a >= index_b {
        return Err(FieldError::SliceIndexOutOfRange {
            index: index_a,
            len: vol.len(),
        }
        .into());
    }
    let a = vol.slice(index_a)?;
    let b = vol.slice(index_b)?;
    let flow = hs_solve(&a.magnitude_image(), &b.magnitude_image(), params)?;
    // warp_average samples `upper` at +flow and `lower` at -flow; passing
    // -flow/2 puts slice `a` at +alpha/2 and slice `b` at -alpha/2.
    Ok(warp_average(a, b, &flow.scaled(-0.5))?)
}

/// Symmetric-constraint Horn-Schunck flow between a lower slice at
/// `z - delta` and an upper slice at `z + delta`, using the brightness
/// constraint fields `Hx, Hy, Hz` in physical units. The returned
/// displacements are physical lengths; convert with
/// [`FlowField::to_pixels`] before warping.
pub fn hs_sym_solve(
    lower: &VectorSlice,
    upper: &VectorSlice,
    params: &HsParams,
) -> Result<FlowField, SolverError> {
    let (hx, hy, hz) = sym_brightness_fields(lower, upper)?;
    hs_solve_fields(&hx, &hy, &hz, params)
}

pub(crate) fn sym_brightness_fields(
    lower: &VectorSlice,
    upper: &VectorSlice,
) -> Result<(ScalarSlice, ScalarSlice, ScalarSlice), FieldError> {
    lower.grid().ensure_matches(&upper.grid())?;
    let i_minus = lower.magnitude_image();
    let i_plus = upper.magnitude_image();
    let hx = stencils::derive(&i_plus, DerivKind::Dx)?
        .zip_raw(&stencils::derive(&i_minus, DerivKind::Dx)?, |p, m| p + m);
    let hy = stencils::derive(&i_plus, DerivKind::Dy)?
        .zip_raw(&stencils::derive(&i_minus, DerivKind::Dy)?, |p, m| p + m);
    let hz = i_plus.zip_raw(&i_minus, |p, m| p - m);
    Ok((hx, hy, hz))
}

/// Midslice reconstruction with the symmetric-constraint Horn-Schunck flow:
/// `0.5 * (upper(x + alpha, y + beta) + lower(x - alpha, y - beta))` with
/// the full symmetric displacement.
pub fn hs_sym_interpolate_midslice(
    vol: &VolumeField,
    center: usize,
    step: usize,
    params: &HsParams,
) -> Result<VectorSlice, SolverError> {
    if step == 0 || center < step {
        return Err(FieldError::SliceIndexOutOfRange {
            index: center,
            len: vol.len(),
        }
        .into());
    }
    let lower = vol.slice(center - step)?;
    let upper = vol.slice(center + step)?;
    let flow = hs_sym_solve(lower, upper, params)?;
    Ok(warp_average(lower, upper, &flow.to_pixels())?)
}

/// Energy of the Horn-Schunck functional on a flow iterate: the squared
/// brightness residual plus `lambda^2` times the squared flow gradient
/// norms, summed over all pixels (pixel-unit gradients).
pub fn hs_energy(
    ix: &ScalarSlice,
    iy: &ScalarSlice,
    it: &ScalarSlice,
    flow: &FlowField,
    lambda: f64,
) -> Result<f64, FieldError> {
    let l2 = lambda * lambda;
    let ax = stencils::derive_pixel(flow.alpha(), DerivKind::Dx)?;
    let ay = stencils::derive_pixel(flow.alpha(), DerivKind::Dy)?;
    let bx = stencils::derive_pixel(flow.beta(), DerivKind::Dx)?;
    let by = stencils::derive_pixel(flow.beta(), DerivKind::Dy)?;
    let mut energy = 0.0;
    for i in 0..flow.grid().len() {
        let residual = ix.values()[i] * flow.alpha().values()[i]
            + iy.values()[i] * flow.beta().values()[i]
            + it.values()[i];
        let smooth = ax.values()[i] * ax.values()[i]
            + ay.values()[i] * ay.values()[i]
            + bx.values()[i] * bx.values()[i]
            + by.values()[i] * by.values()[i];
        energy += residual * residual + l2 * smooth;
    }
    Ok(energy)
}
