//! Symmetric optical flow with a divergence-minimization constraint.
//!
//! The energy couples three per-pixel terms: the symmetric brightness
//! residual `Hx a + Hy b + Hz`, the predicted-divergence residual
//! `Dx a + Dy b + Dz` weighted by `gamma^2`, and a `lambda^2` smoothness
//! penalty on the flow gradients. The minimizing Jacobi iteration and its
//! per-pixel coefficients are implemented exactly as printed in
//! [`pixel_coefficients`]; [`direct_pixel_solve`] solves the same per-pixel
//! 2x2 system by determinants and acts as an independent oracle for the
//! iteration kernel.
//!
//! Units: the constraint fields are assembled with physical-spacing
//! derivatives, so the solved displacements are physical lengths. They are
//! converted to pixels (divide by `dx`, `dy`) only at the warp step.

use crate::error::{FieldError, ParamError, SolveError, SolverError};
use crate::field::{FlowField, GridSpec, ScalarSlice, VectorSlice, VolumeField};
use crate::hs::{max_update, sym_brightness_fields};
use crate::reconstruct::warp_average;
use crate::stencils::{self, DerivKind};

/// Per-pixel constraint terms of the energy functional.
#[derive(Clone, Debug)]
pub struct ConstraintFields {
    /// `dI(z+D)/dx + dI(z-D)/dx` of the magnitude images.
    pub hx: ScalarSlice,
    /// `dI(z+D)/dy + dI(z-D)/dy`.
    pub hy: ScalarSlice,
    /// `I(z+D) - I(z-D)`.
    pub hz: ScalarSlice,
    /// `d2Vx(z+D)/dx2 - d2Vx(z-D)/dx2 + d2Vy(z+D)/dxdy - d2Vy(z-D)/dxdy`.
    pub dxf: ScalarSlice,
    /// `d2Vx(z+D)/dydx - d2Vx(z-D)/dydx + d2Vy(z+D)/dy2 - d2Vy(z-D)/dy2`.
    pub dyf: ScalarSlice,
    /// `dVx(z+D)/dx + dVx(z-D)/dx + dVy(z+D)/dy + dVy(z-D)/dy + 2 dVz/dz`,
    /// with `2 dVz/dz` approximated as `(Vz(z+D) - Vz(z-D)) / delta`.
    pub dzf: ScalarSlice,
}

impl ConstraintFields {
    pub fn grid(&self) -> GridSpec {
        self.hx.grid()
    }
}

/// Parameters of the divergence-constrained solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivParams {
    /// Divergence weight; enters the update as `gamma^2`.
    pub gamma: f64,
    /// Smoothness weight; enters the update as `lambda^2`.
    pub lambda: f64,
    pub iterations: usize,
    /// Max per-pixel update magnitude below which the iteration stops early.
    /// Zero (the default) runs exactly `iterations` sweeps.
    pub early_stop_tol: f64,
    /// Physical half-spacing between the target plane and each outer slice.
    pub delta: f64,
}

impl DivParams {
    pub fn new(gamma: f64, lambda: f64, iterations: usize, delta: f64) -> Result<Self, ParamError> {
        let p = Self {
            gamma,
            lambda,
            iterations,
            early_stop_tol: 0.0,
            delta,
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
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(ParamError::NegativeGamma(self.gamma));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(ParamError::NonPositiveLambda(self.lambda));
        }
        if self.iterations == 0 {
            return Err(ParamError::ZeroIterations);
        }
        if !(self.early_stop_tol.is_finite() && self.early_stop_tol >= 0.0) {
            return Err(ParamError::NegativeTolerance(self.early_stop_tol));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(ParamError::BadDelta(self.delta));
        }
        Ok(())
    }
}

/// Assembles the six constraint fields from the outer slices at `z - delta`
/// (`lower`) and `z + delta` (`upper`). All in-plane derivatives are central
/// differences with physical spacing.
pub fn assemble_constraints(
    lower: &VectorSlice,
    upper: &VectorSlice,
    delta: f64,
) -> Result<ConstraintFields, FieldError> {
    lower.grid().ensure_matches(&upper.grid())?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(FieldError::BadSliceSpacing { dz: delta });
    }
    let (hx, hy, hz) = sym_brightness_fields(lower, upper)?;

    let diff = |p: ScalarSlice, m: ScalarSlice| p.zip_raw(&m, |pv, mv| pv - mv);
    let dxf = diff(
        stencils::derive(upper.vx(), DerivKind::Dxx)?,
        stencils::derive(lower.vx(), DerivKind::Dxx)?,
    )
    .zip_raw(
        &diff(
            stencils::derive(upper.vy(), DerivKind::Dxy)?,
            stencils::derive(lower.vy(), DerivKind::Dxy)?,
        ),
        |a, b| a + b,
    );
    let dyf = diff(
        stencils::derive(upper.vx(), DerivKind::Dxy)?,
        stencils::derive(lower.vx(), DerivKind::Dxy)?,
    )
    .zip_raw(
        &diff(
            stencils::derive(upper.vy(), DerivKind::Dyy)?,
            stencils::derive(lower.vy(), DerivKind::Dyy)?,
        ),
        |a, b| a + b,
    );

    // in-plane first derivatives of both slices plus twice the central
    // z-derivative over the 2*delta gap
    let sum = |p: ScalarSlice, m: ScalarSlice| p.zip_raw(&m, |pv, mv| pv + mv);
    let inplane = sum(
        stencils::derive(upper.vx(), DerivKind::Dx)?,
        stencils::derive(lower.vx(), DerivKind::Dx)?,
    )
    .zip_raw(
        &sum(
            stencils::derive(upper.vy(), DerivKind::Dy)?,
            stencils::derive(lower.vy(), DerivKind::Dy)?,
        ),
        |a, b| a + b,
    );
    let dzf = inplane.zip_raw(
        &upper.vz().zip_raw(lower.vz(), |p, m| (p - m) / delta),
        |a, b| a + b,
    );

    Ok(ConstraintFields {
        hx,
        hy,
        hz,
        dxf,
        dyf,
        dzf,
    })
}

/// The twelve per-pixel coefficients of the minimizing iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelCoefficients {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub a2: f64,
    pub b2: f64,
    pub c3: f64,
    pub c4: f64,
    pub d3: f64,
    pub d4: f64,
}

/// Evaluates the coefficient expressions for one pixel. The identities
/// `a2 = b1`, `d3 = d1`, `d4 = d2` hold by construction.
#[allow(clippy::too_many_arguments)]
pub fn pixel_coefficients(
    hx: f64,
    hy: f64,
    hz: f64,
    dx: f64,
    dy: f64,
    dz: f64,
    gamma: f64,
    lambda: f64,
) -> PixelCoefficients {
    let g2 = gamma * gamma;
    let l2 = lambda * lambda;
    let cross = hx * dy - hy * dx;
    let a1 = g2 * cross * cross + l2 * (hx * hx + g2 * dx * dx);
    let b1 = l2 * (hx * hy + g2 * dx * dy);
    let c1 = hx * hz * dy * dy + hy * hy * dx * dz - hy * hz * dx * dy - hx * hy * dy * dz;
    let c2 = hx * hz + g2 * dx * dz;
    let d1 = cross * cross;
    let d2 = hx * hx + hy * hy + l2 + g2 * dx * dx + g2 * dy * dy;
    let b2 = g2 * cross * cross + l2 * (hy * hy + g2 * dy * dy);
    let c3 = hy * hz * dx * dx + hx * hx * dy * dz - hx * hz * dx * dy - hx * hy * dx * dz;
    let c4 = hy * hz + g2 * dy * dz;
    PixelCoefficients {
        a1,
        b1,
        c1,
        c2,
        d1,
        d2,
        a2: b1,
        b2,
        c3,
        c4,
        d3: d1,
        d4: d2,
    }
}

/// Evaluates [`pixel_coefficients`] at every pixel of the constraint fields.
pub fn assemble_coefficients(
    c: &ConstraintFields,
    gamma: f64,
    lambda: f64,
) -> Vec<PixelCoefficients> {
    let n = c.grid().len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(pixel_coefficients(
            c.hx.values()[i],
            c.hy.values()[i],
            c.hz.values()[i],
            c.dxf.values()[i],
            c.dyf.values()[i],
            c.dzf.values()[i],
            gamma,
            lambda,
        ));
    }
    out
}

fn step_with_coefficients(
    flow: &FlowField,
    coeffs: &[PixelCoefficients],
    gamma: f64,
    lambda: f64,
) -> FlowField {
    let grid = flow.grid();
    let g2 = gamma * gamma;
    let l2 = lambda * lambda;
    let mut alpha = Vec::with_capacity(grid.len());
    let mut beta = Vec::with_capacity(grid.len());
    let mut i = 0;
    for y in 0..grid.ny as isize {
        for x in 0..grid.nx as isize {
            let abar = stencils::neighborhood_average_at(flow.alpha(), x, y);
            let bbar = stencils::neighborhood_average_at(flow.beta(), x, y);
            let k = &coeffs[i];
            let den_a = g2 * k.d1 + l2 * k.d2;
            let den_b = g2 * k.d3 + l2 * k.d4;
            // d2 contains lambda^2, so the denominators are >= lambda^4 > 0
            debug_assert!(den_a >= l2 * l2 && den_b >= l2 * l2);
            alpha.push(abar - (k.a1 * abar + k.b1 * bbar + g2 * k.c1 + l2 * k.c2) / den_a);
            beta.push(bbar - (k.a2 * abar + k.b2 * bbar + g2 * k.c3 + l2 * k.c4) / den_b);
            i += 1;
        }
    }
    FlowField::from_raw(grid, alpha, beta)
}

/// One Jacobi sweep of the divergence-constrained update. All pixels read
/// only the incoming flow field; the result is independent of evaluation
/// order.
pub fn divflow_step(
    flow: &FlowField,
    c: &ConstraintFields,
    gamma: f64,
    lambda: f64,
) -> Result<FlowField, FieldError> {
    flow.grid().ensure_matches(&c.grid())?;
    flow.grid().ensure_stencil_size()?;
    let coeffs = assemble_coefficients(c, gamma, lambda);
    Ok(step_with_coefficients(flow, &coeffs, gamma, lambda))
}

/// Solves the per-pixel 2x2 linear system
///
/// ```text
/// (Hx^2 + g^2 Dx^2 + l^2) a + (Hx Hy + g^2 Dx Dy)       b = l^2 abar - (Hx Hz + g^2 Dx Dz)
/// (Hx Hy + g^2 Dx Dy)     a + (Hy^2 + g^2 Dy^2 + l^2)   b = l^2 bbar - (Hy Hz + g^2 Dy Dz)
/// ```
///
/// by determinants. This is an independent route to the same minimizer as
/// the iteration kernel and is used as its verification oracle.
pub fn direct_pixel_solve(
    abar: f64,
    bbar: f64,
    h: (f64, f64, f64),
    d: (f64, f64, f64),
    gamma: f64,
    lambda: f64,
) -> Result<(f64, f64), SolveError> {
    let (hx, hy, hz) = h;
    let (dx, dy, dz) = d;
    let g2 = gamma * gamma;
    let l2 = lambda * lambda;
    let m11 = hx * hx + g2 * dx * dx + l2;
    let m12 = hx * hy + g2 * dx * dy;
    let m22 = hy * hy + g2 * dy * dy + l2;
    let r1 = l2 * abar - (hx * hz + g2 * dx * dz);
    let r2 = l2 * bbar - (hy * hz + g2 * dy * dz);
    let det = m11 * m22 - m12 * m12;
    if det.abs() < 1e-30 {
        // cannot occur for lambda > 0: det >= lambda^4
        return Err(SolveError::SingularSystem { det });
    }
    Ok(((r1 * m22 - m12 * r2) / det, (m11 * r2 - m12 * r1) / det))
}

/// Full solve: assembles the constraints once, then iterates the Jacobi
/// update from zero flow for `params.iterations` sweeps (or until the max
/// per-pixel update drops below `params.early_stop_tol`, when set).
///
/// Returned displacements are physical lengths (see the module docs).
pub fn divflow_solve(
    lower: &VectorSlice,
    upper: &VectorSlice,
    params: &DivParams,
) -> Result<FlowField, SolverError> {
    params.validate()?;
    let constraints = assemble_constraints(lower, upper, params.delta)?;
    solve_assembled(&constraints, params)
}

/// Solver core on pre-assembled constraint fields.
pub fn solve_assembled(
    constraints: &ConstraintFields,
    params: &DivParams,
) -> Result<FlowField, SolverError> {
    params.validate()?;
    constraints.grid().ensure_stencil_size()?;
    let coeffs = assemble_coefficients(constraints, params.gamma, params.lambda);
    let mut flow = FlowField::zeros(constraints.grid());
    for _ in 0..params.iterations {
        let next = step_with_coefficients(&flow, &coeffs, params.gamma, params.lambda);
        let done = params.early_stop_tol > 0.0 && max_update(&flow, &next) < params.early_stop_tol;
        flow = next;
        if done {
            break;
        }
    }
    Ok(flow)
}

/// Reconstructs the slice at `center` from the slices at `center - step` and
/// `center + step`: solves for the symmetric flow, converts it to pixels,
/// and warp-averages the outer slices with the full displacement
/// (`upper` sampled at `+(alpha, beta)`, `lower` at `-(alpha, beta)`).
pub fn divflow_interpolate_midslice(
    vol: &VolumeField,
    center: usize,
    step: usize,
    params: &DivParams,
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
    let flow = divflow_solve(lower, upper, params)?;
    Ok(warp_average(lower, upper, &flow.to_pixels())?)
}

/// Energy of the full functional on a flow iterate: squared brightness
/// residual + `gamma^2` times the squared divergence residual + `lambda^2`
/// times the squared flow gradient norms, summed over all pixels.
pub fn divflow_energy(
    c: &ConstraintFields,
    flow: &FlowField,
    gamma: f64,
    lambda: f64,
) -> Result<f64, FieldError> {
    flow.grid().ensure_matches(&c.grid())?;
    let g2 = gamma * gamma;
    let l2 = lambda * lambda;
    let ax = stencils::derive(flow.alpha(), DerivKind::Dx)?;
    let ay = stencils::derive(flow.alpha(), DerivKind::Dy)?;
    let bx = stencils::derive(flow.beta(), DerivKind::Dx)?;
    let by = stencils::derive(flow.beta(), DerivKind::Dy)?;
    let mut energy = 0.0;
    for i in 0..flow.grid().len() {
        let a = flow.alpha().values()[i];
        let b = flow.beta().values()[i];
        let brightness = c.hx.values()[i] * a + c.hy.values()[i] * b + c.hz.values()[i];
        let divergence = c.dxf.values()[i] * a + c.dyf.values()[i] * b + c.dzf.values()[i];
        let smooth = ax.values()[i] * ax.values()[i]
            + ay.values()[i] * ay.values()[i]
            + bx.values()[i] * bx.values()[i]
            + by.values()[i] * by.values()[i];
        energy += brightness * brightness + g2 * divergence * divergence + l2 * smooth;
    }
    Ok(energy)
}
