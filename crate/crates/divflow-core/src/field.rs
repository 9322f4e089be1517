//! Core grid types shared by the solvers and metrics.
//!
//! Storage is row-major with `(row = y, col = x)` indexing. Coordinates in
//! the public API are always `(x, y)` in pixel units; physical spacing only
//! enters inside derivative stencils.

use crate::error::FieldError;

/// Dimensions and physical pixel spacing of a 2D grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl GridSpec {
    /// A grid must be non-empty with positive finite spacing. Stencil-based
    /// operations additionally require at least 3x3; that is checked at the
    /// call sites that need interior points.
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self, FieldError> {
        if nx == 0 || ny == 0 {
            return Err(FieldError::EmptyGrid { nx, ny });
        }
        if !(dx.is_finite() && dy.is_finite() && dx > 0.0 && dy > 0.0) {
            return Err(FieldError::BadSpacing { dx, dy });
        }
        Ok(Self { nx, ny, dx, dy })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Errors unless `self` and `other` agree in both shape and spacing.
    pub fn ensure_matches(&self, other: &GridSpec) -> Result<(), FieldError> {
        if self != other {
            return Err(FieldError::GridMismatch {
                left_nx: self.nx,
                left_ny: self.ny,
                left_dx: self.dx,
                left_dy: self.dy,
                right_nx: other.nx,
                right_ny: other.ny,
                right_dx: other.dx,
                right_dy: other.dy,
            });
        }
        Ok(())
    }

    pub(crate) fn ensure_stencil_size(&self) -> Result<(), FieldError> {
        if self.nx < 3 || self.ny < 3 {
            return Err(FieldError::GridTooSmall {
                nx: self.nx,
                ny: self.ny,
            });
        }
        Ok(())
    }
}

/// A 2D scalar grid, e.g. a velocity-magnitude image or one velocity component.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSlice {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarSlice {
    /// Validates the buffer length and that every value is finite.
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::LengthMismatch {
                nx: grid.nx,
                ny: grid.ny,
                got: values.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(FieldError::NonFinite {
                    x: i % grid.nx,
                    y: i / grid.nx,
                });
            }
        }
        Ok(Self { grid, values })
    }

    /// Constructor for internal numeric kernels whose outputs are finite by
    /// construction; skips the per-value scan.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Result<Self, FieldError> {
        Self::new(grid, vec![value; grid.len()])
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::from_raw(grid, vec![0.0; grid.len()])
    }

    /// Builds a slice by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(grid: GridSpec, f: impl Fn(usize, usize) -> f64) -> Result<Self, FieldError> {
        let mut values = Vec::with_capacity(grid.len());
        for y in 0..grid.ny {
            for x in 0..grid.nx {
                values.push(f(x, y));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.grid.nx && y < self.grid.ny);
        self.values[y * self.grid.nx + x]
    }

    /// Value at the pixel nearest to the (possibly out-of-range) signed
    /// coordinates; replicate-edge semantics.
    #[inline]
    pub(crate) fn at_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.grid.nx as isize - 1) as usize;
        let yc = y.clamp(0, self.grid.ny as isize - 1) as usize;
        self.values[yc * self.grid.nx + xc]
    }

    /// Bilinear interpolation at real pixel coordinates. Coordinates outside
    /// `[0, nx-1] x [0, ny-1]` are clamped to the boundary (replicate-edge),
    /// so warping never invents values outside the slice's range.
    pub fn bilinear_sample(&self, x: f64, y: f64) -> f64 {
        let nx = self.grid.nx;
        let ny = self.grid.ny;
        let x = x.clamp(0.0, (nx - 1) as f64);
        let y = y.clamp(0.0, (ny - 1) as f64);
        let x0 = (x.floor() as usize).min(nx - 1);
        let y0 = (y.floor() as usize).min(ny - 1);
        let x1 = (x0 + 1).min(nx - 1);
        let y1 = (y0 + 1).min(ny - 1);
        let tx = x - x0 as f64;
        let ty = y - y0 as f64;
        let v00 = self.at(x0, y0);
        let v10 = self.at(x1, y0);
        let v01 = self.at(x0, y1);
        let v11 = self.at(x1, y1);
        let top = (1.0 - tx) * v00 + tx * v10;
        let bottom = (1.0 - tx) * v01 + tx * v11;
        (1.0 - ty) * top + ty * bottom
    }

    /// Centered `w x h` sub-grid. When the discarded margin is odd, the extra
    /// column goes on the right and the extra row on the bottom.
    pub fn crop_center(&self, w: usize, h: usize) -> Result<ScalarSlice, FieldError> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        if w > nx || h > ny || w == 0 || h == 0 {
            return Err(FieldError::RegionTooLarge { w, h, nx, ny });
        }
        let ox = (nx - w) / 2;
        let oy = (ny - h) / 2;
        let grid = GridSpec::new(w, h, self.grid.dx, self.grid.dy)?;
        let mut values = Vec::with_capacity(w * h);
        for y in 0..h {
            let row = (oy + y) * nx + ox;
            values.extend_from_slice(&self.values[row..row + w]);
        }
        Ok(ScalarSlice::from_raw(grid, values))
    }

    /// Centered placement into a `w x h` grid with `fill` outside; inverse of
    /// [`crop_center`](Self::crop_center) on the original region.
    pub fn pad_to(&self, w: usize, h: usize, fill: f64) -> Result<ScalarSlice, FieldError> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        if w < nx || h < ny {
            return Err(FieldError::PadTooSmall { w, h, nx, ny });
        }
        if !fill.is_finite() {
            return Err(FieldError::NonFinite { x: 0, y: 0 });
        }
        let ox = (w - nx) / 2;
        let oy = (h - ny) / 2;
        let grid = GridSpec::new(w, h, self.grid.dx, self.grid.dy)?;
        let mut values = vec![fill; w * h];
        for y in 0..ny {
            let src = y * nx;
            let dst = (oy + y) * w + ox;
            values[dst..dst + nx].copy_from_slice(&self.values[src..src + nx]);
        }
        Ok(ScalarSlice::from_raw(grid, values))
    }

    /// Element-wise map; the result is re-validated for finiteness.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ScalarSlice, FieldError> {
        ScalarSlice::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn map_raw(&self, f: impl Fn(f64) -> f64) -> ScalarSlice {
        ScalarSlice::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn zip_raw(&self, other: &ScalarSlice, f: impl Fn(f64, f64) -> f64) -> ScalarSlice {
        debug_assert_eq!(self.grid, other.grid);
        ScalarSlice::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Per-slice velocity components on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSlice {
    grid: GridSpec,
    vx: ScalarSlice,
    vy: ScalarSlice,
    vz: ScalarSlice,
}

impl VectorSlice {
    pub fn new(vx: ScalarSlice, vy: ScalarSlice, vz: ScalarSlice) -> Result<Self, FieldError> {
        vx.grid().ensure_matches(&vy.grid())?;
        vx.grid().ensure_matches(&vz.grid())?;
        Ok(Self {
            grid: vx.grid(),
            vx,
            vy,
            vz,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn vx(&self) -> &ScalarSlice {
        &self.vx
    }

    pub fn vy(&self) -> &ScalarSlice {
        &self.vy
    }

    pub fn vz(&self) -> &ScalarSlice {
        &self.vz
    }

    pub fn components(&self) -> [&ScalarSlice; 3] {
        [&self.vx, &self.vy, &self.vz]
    }

    /// Velocity-magnitude image `sqrt(vx^2 + vy^2 + vz^2)`, the brightness
    /// signal the flow solvers operate on.
    pub fn magnitude_image(&self) -> ScalarSlice {
        let values = self
            .vx
            .values()
            .iter()
            .zip(self.vy.values())
            .zip(self.vz.values())
            .map(|((&x, &y), &z)| (x * x + y * y + z * z).sqrt())
            .collect();
        ScalarSlice::from_raw(self.grid, values)
    }
}

/// An ordered stack of velocity slices with uniform inter-slice spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeField {
    slices: Vec<VectorSlice>,
    dz: f64,
}

impl VolumeField {
    pub fn new(slices: Vec<VectorSlice>, dz: f64) -> Result<Self, FieldError> {
        if slices.len() < 2 {
            return Err(FieldError::TooFewSlices { got: slices.len() });
        }
        if !(dz.is_finite() && dz > 0.0) {
            return Err(FieldError::BadSliceSpacing { dz });
        }
        let grid = slices[0].grid();
        for s in &slices[1..] {
            grid.ensure_matches(&s.grid())?;
        }
        Ok(Self { slices, dz })
    }

    pub fn grid(&self) -> GridSpec {
        self.slices[0].grid()
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    /// Always false: construction requires at least two slices.
    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn slices(&self) -> &[VectorSlice] {
        &self.slices
    }

    pub fn slice(&self, index: usize) -> Result<&VectorSlice, FieldError> {
        self.slices
            .get(index)
            .ok_or(FieldError::SliceIndexOutOfRange {
                index,
                len: self.slices.len(),
            })
    }
}

/// Per-pixel in-plane displacement field produced by a flow solver.
///
/// The unit of `alpha`/`beta` depends on the solver that produced the field:
/// the plain Horn-Schunck path works in pixels, the symmetric solvers in
/// physical length (convert with [`FlowField::to_pixels`] before warping).
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    grid: GridSpec,
    alpha: ScalarSlice,
    beta: ScalarSlice,
}

impl FlowField {
    pub fn new(alpha: ScalarSlice, beta: ScalarSlice) -> Result<Self, FieldError> {
        alpha.grid().ensure_matches(&beta.grid())?;
        Ok(Self {
            grid: alpha.grid(),
            alpha,
            beta,
        })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            alpha: ScalarSlice::zeros(grid),
            beta: ScalarSlice::zeros(grid),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn alpha(&self) -> &ScalarSlice {
        &self.alpha
    }

    pub fn beta(&self) -> &ScalarSlice {
        &self.beta
    }

    pub(crate) fn from_raw(grid: GridSpec, alpha: Vec<f64>, beta: Vec<f64>) -> Self {
        Self {
            grid,
            alpha: ScalarSlice::from_raw(grid, alpha),
            beta: ScalarSlice::from_raw(grid, beta),
        }
    }

    /// Uniformly scaled copy (e.g. the half-flow used by the Horn-Schunck
    /// midslice reconstruction).
    pub fn scaled(&self, factor: f64) -> FlowField {
        FlowField {
            grid: self.grid,
            alpha: self.alpha.map_raw(|v| v * factor),
            beta: self.beta.map_raw(|v| v * factor),
        }
    }

    /// Converts a physical-length displacement field to pixel units by
    /// dividing by the grid spacing.
    pub fn to_pixels(&self) -> FlowField {
        let (dx, dy) = (self.grid.dx, self.grid.dy);
        FlowField {
            grid: self.grid,
            alpha: self.alpha.map_raw(|v| v / dx),
            beta: self.beta.map_raw(|v| v / dy),
        }
    }
}
