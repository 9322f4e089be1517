//! Analytical dataset generation, Gaussian noise perturbation, and
//! volume-field file I/O (VVF binary volumes and per-slice CSV ingestion).

use std::io::{self, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::error::FieldError;
use crate::field::{GridSpec, ScalarSlice, VectorSlice, VolumeField};

/// Errors raised by analytic dataset specification.
#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error("analytic grid needs at least 2 pixels per axis, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("coordinate range [{lo}, {hi}] is degenerate or non-finite")]
    DegenerateRange { lo: f64, hi: f64 },

    #[error("need at least 2 z positions for a volume, got {got}")]
    TooFewZPositions { got: usize },

    #[error("z positions must be strictly increasing with uniform spacing; step {index} is {got}, expected {expected}")]
    NonUniformZ {
        index: usize,
        got: f64,
        expected: f64,
    },

    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Specification of the analytical test volume.
///
/// The grid's physical spacing is derived from the coordinate ranges:
/// pixel `(0, 0)` sits at `(x_lo, y_lo)` and pixel `(nx-1, ny-1)` at
/// `(x_hi, y_hi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticSpec {
    grid: GridSpec,
    x_range: (f64, f64),
    y_range: (f64, f64),
    z_positions: Vec<f64>,
}

impl AnalyticSpec {
    pub fn new(
        nx: usize,
        ny: usize,
        x_range: (f64, f64),
        y_range: (f64, f64),
        z_positions: Vec<f64>,
    ) -> Result<Self, AnalyticError> {
        if nx < 2 || ny < 2 {
            return Err(AnalyticError::GridTooSmall { nx, ny });
        }
        for (lo, hi) in [x_range, y_range] {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(AnalyticError::DegenerateRange { lo, hi });
            }
        }
        if z_positions.len() < 2 {
            return Err(AnalyticError::TooFewZPositions {
                got: z_positions.len(),
            });
        }
        let dz = z_positions[1] - z_positions[0];
        if !(dz.is_finite() && dz > 0.0) {
            return Err(AnalyticError::NonUniformZ {
                index: 1,
                got: dz,
                expected: f64::NAN,
            });
        }
        for i in 2..z_positions.len() {
            let step = z_positions[i] - z_positions[i - 1];
            if !(step.is_finite() && (step - dz).abs() <= 1e-9 * dz.abs().max(1.0)) {
                return Err(AnalyticError::NonUniformZ {
                    index: i,
                    got: step,
                    expected: dz,
                });
            }
        }
        let dx = (x_range.1 - x_range.0) / (nx - 1) as f64;
        let dy = (y_range.1 - y_range.0) / (ny - 1) as f64;
        let grid = GridSpec::new(nx, ny, dx, dy)?;
        Ok(Self {
            grid,
            x_range,
            y_range,
            z_positions,
        })
    }

    /// Default volume: x, y in [-1, 1], z slices at {0, 0.5, 1, 1.5, 2}.
    /// The out-of-plane spacing is deliberately much larger than the
    /// in-plane resolution.
    pub fn default_volume(nx: usize, ny: usize) -> Result<Self, AnalyticError> {
        Self::new(
            nx,
            ny,
            (-1.0, 1.0),
            (-1.0, 1.0),
            vec![0.0, 0.5, 1.0, 1.5, 2.0],
        )
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn z_positions(&self) -> &[f64] {
        &self.z_positions
    }

    pub fn dz(&self) -> f64 {
        self.z_positions[1] - self.z_positions[0]
    }

    fn x_at(&self, i: usize) -> f64 {
        self.x_range.0 + i as f64 * self.grid.dx
    }

    fn y_at(&self, j: usize) -> f64 {
        self.y_range.0 + j as f64 * self.grid.dy
    }
}

/// The analytic velocity field at a physical point:
/// `Vx = 0.3 y^2 + 0.15 x^2`,
/// `Vy = 0.3 (1 - x^2)(y - 1) - 0.3 x y`,
/// `Vz = -0.3 (1 - x^2) z`.
///
/// Symbolically divergence-free:
/// `0.3 x + [0.3 (1 - x^2) - 0.3 x] + [-0.3 (1 - x^2)] = 0`.
pub fn analytic_velocity(x: f64, y: f64, z: f64) -> (f64, f64, f64) {
    let vx = 0.3 * y * y + 0.15 * x * x;
    let vy = 0.3 * (1.0 - x * x) * (y - 1.0) - 0.3 * x * y;
    let vz = -0.3 * (1.0 - x * x) * z;
    (vx, vy, vz)
}

/// Evaluates the analytic field over one z plane of the spec.
pub fn analytic_slice(spec: &AnalyticSpec, z: f64) -> VectorSlice {
    let g = spec.grid;
    let mut vx = Vec::with_capacity(g.len());
    let mut vy = Vec::with_capacity(g.len());
    let mut vz = Vec::with_capacity(g.len());
    for j in 0..g.ny {
        let y = spec.y_at(j);
        for i in 0..g.nx {
            let x = spec.x_at(i);
            let (a, b, c) = analytic_velocity(x, y, z);
            vx.push(a);
            vy.push(b);
            vz.push(c);
        }
    }
    VectorSlice::new(
        ScalarSlice::new(g, vx).expect("analytic field is finite"),
        ScalarSlice::new(g, vy).expect("analytic field is finite"),
        ScalarSlice::new(g, vz).expect("analytic field is finite"),
    )
    .expect("components share the grid")
}

/// Generates the analytic volume over all z positions of the spec.
pub fn gen_analytic(spec: &AnalyticSpec) -> VolumeField {
    let slices = spec
        .z_positions
        .iter()
        .map(|&z| analytic_slice(spec, z))
        .collect();
    VolumeField::new(slices, spec.dz()).expect("spec guarantees a valid volume")
}

/// Zero-mean Gaussian perturbation, scaled per component field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Noise standard deviation as a fraction of `max |v|` over each
    /// component field of each slice.
    pub fraction: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(fraction: f64, seed: u64) -> Result<Self, NoiseError> {
        if !(fraction.is_finite() && fraction >= 0.0) {
            return Err(NoiseError::BadFraction(fraction));
        }
        Ok(Self { fraction, seed })
    }
}

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("noise fraction must be non-negative and finite, got {0}")]
    BadFraction(f64),
}

/// Adds i.i.d. zero-mean Gaussian noise to every component field of every
/// slice, with per-field standard deviation `fraction * max |value|`.
/// Deterministic: the same spec always yields bit-identical output. The
/// noise stream is consumed slice-major, component-major (vx, vy, vz),
/// row-major, so doubling `fraction` exactly doubles every added sample.
pub fn add_noise(vol: &VolumeField, spec: NoiseSpec) -> VolumeField {
    if spec.fraction == 0.0 {
        return vol.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let standard = Normal::new(0.0, 1.0).expect("unit normal is valid");
    let grid = vol.grid();
    let slices = vol
        .slices()
        .iter()
        .map(|slice| {
            let mut noised = Vec::with_capacity(3);
            for comp in slice.components() {
                let sigma = spec.fraction * comp.max_abs();
                let values = comp
                    .values()
                    .iter()
                    .map(|&v| v + sigma * standard.sample(&mut rng))
                    .collect();
                noised.push(ScalarSlice::new(grid, values).expect("noise is finite"));
            }
            let mut it = noised.into_iter();
            VectorSlice::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap())
                .expect("components share the grid")
        })
        .collect();
    VolumeField::new(slices, vol.dz()).expect("shape preserved")
}

/// Errors raised by VVF serialization.
#[derive(Debug, Error)]
pub enum VvfError {
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("bad magic: expected \"VVF1\", got {got:?}")]
    BadMagic { got: String },

    #[error("malformed header: {reason}")]
    BadHeader { reason: String },

    #[error("header declares {expected} values but the payload holds {got}")]
    PayloadLength { expected: usize, got: usize },

    #[error(transparent)]
    Field(#[from] FieldError),
}

const VVF_MAGIC: &str = "VVF1";
const VVF_NCOMP: usize = 3;

/// Writes slices in VVF version 1: an ASCII header line
/// `VVF1 nx ny nz ncomp dx dy dz\n` followed by little-endian 64-bit
/// floats ordered slice-major, component-major (vx plane, vy plane, vz
/// plane), row-major within a plane.
pub fn write_vvf_slices<W: Write>(
    slices: &[VectorSlice],
    dz: f64,
    mut w: W,
) -> Result<(), VvfError> {
    assert!(!slices.is_empty(), "cannot write an empty slice list");
    let grid = slices[0].grid();
    writeln!(
        w,
        "{VVF_MAGIC} {} {} {} {VVF_NCOMP} {} {} {}",
        grid.nx,
        grid.ny,
        slices.len(),
        grid.dx,
        grid.dy,
        dz
    )?;
    let mut buf = Vec::with_capacity(grid.len() * VVF_NCOMP * 8);
    for slice in slices {
        buf.clear();
        for comp in slice.components() {
            for v in comp.values() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

/// Writes a whole volume in VVF version 1.
pub fn write_vvf<W: Write>(vol: &VolumeField, w: W) -> Result<(), VvfError> {
    write_vvf_slices(vol.slices(), vol.dz(), w)
}

/// Reads a VVF stream back into slices; accepts `nz >= 1`.
pub fn read_vvf_slices<R: Read>(mut r: R) -> Result<(Vec<VectorSlice>, f64), VvfError> {
    let header = read_header_line(&mut r)?;
    let tokens: Vec<&str> = header.split(' ').collect();
    if tokens.is_empty() || tokens[0] != VVF_MAGIC {
        return Err(VvfError::BadMagic {
            got: tokens.first().unwrap_or(&"").to_string(),
        });
    }
    if tokens.len() != 8 {
        return Err(VvfError::BadHeader {
            reason: format!("expected 8 header fields, got {}", tokens.len()),
        });
    }
    let dim = |s: &str, name: &str| -> Result<usize, VvfError> {
        s.parse::<usize>().map_err(|_| VvfError::BadHeader {
            reason: format!("{name} is not a valid dimension: {s:?}"),
        })
    };
    let spacing = |s: &str, name: &str| -> Result<f64, VvfError> {
        let v: f64 = s.parse().map_err(|_| VvfError::BadHeader {
            reason: format!("{name} is not a number: {s:?}"),
        })?;
        if !(v.is_finite() && v > 0.0) {
            return Err(VvfError::BadHeader {
                reason: format!("{name} must be finite and positive, got {v}"),
            });
        }
        Ok(v)
    };
    let nx = dim(tokens[1], "nx")?;
    let ny = dim(tokens[2], "ny")?;
    let nz = dim(tokens[3], "nz")?;
    let ncomp = dim(tokens[4], "ncomp")?;
    if ncomp != VVF_NCOMP {
        return Err(VvfError::BadHeader {
            reason: format!("ncomp must be {VVF_NCOMP}, got {ncomp}"),
        });
    }
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(VvfError::BadHeader {
            reason: format!("dimensions must be positive, got {nx}x{ny}x{nz}"),
        });
    }
    let dx = spacing(tokens[5], "dx")?;
    let dy = spacing(tokens[6], "dy")?;
    let dz = spacing(tokens[7], "dz")?;
    let grid = GridSpec::new(nx, ny, dx, dy)?;

    let expected = nx * ny * nz * VVF_NCOMP;
    let mut payload = vec![0u8; expected * 8];
    let got_bytes = read_fully(&mut r, &mut payload)?;
    if got_bytes < payload.len() {
        return Err(VvfError::PayloadLength {
            expected,
            got: got_bytes / 8,
        });
    }
    // trailing bytes beyond the declared payload are also a length error
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(VvfError::PayloadLength {
            expected,
            got: expected + 1,
        });
    }

    let plane = grid.len();
    let mut offset = 0;
    let mut slices = Vec::with_capacity(nz);
    for _ in 0..nz {
        let mut comps = Vec::with_capacity(VVF_NCOMP);
        for _ in 0..VVF_NCOMP {
            let mut values = Vec::with_capacity(plane);
            for _ in 0..plane {
                let bytes: [u8; 8] = payload[offset..offset + 8].try_into().unwrap();
                values.push(f64::from_le_bytes(bytes));
                offset += 8;
            }
            comps.push(ScalarSlice::new(grid, values)?);
        }
        let mut it = comps.into_iter();
        slices.push(VectorSlice::new(
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
        )?);
    }
    Ok((slices, dz))
}

/// Reads a VVF stream as a [`VolumeField`] (requires `nz >= 2`).
pub fn read_vvf<R: Read>(r: R) -> Result<VolumeField, VvfError> {
    let (slices, dz) = read_vvf_slices(r)?;
    Ok(VolumeField::new(slices, dz)?)
}

fn read_header_line<R: Read>(r: &mut R) -> Result<String, VvfError> {
    let mut bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return Err(VvfError::BadHeader {
                reason: "stream ended before the header line terminator".into(),
            });
        }
        if byte[0] == b'\n' {
            break;
        }
        if bytes.len() > 256 {
            return Err(VvfError::BadHeader {
                reason: "header line longer than 256 bytes".into(),
            });
        }
        bytes.push(byte[0]);
    }
    String::from_utf8(bytes).map_err(|_| VvfError::BadHeader {
        reason: "header is not valid ASCII/UTF-8".into(),
    })
}

fn read_fully<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize, io::Error> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            break;
        }
        filled += n;
    }
    Ok(filled)
}

/// Errors raised by per-slice CSV ingestion.
#[derive(Debug, Error)]
pub enum CsvSliceError {
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("CSV parse error: {0}")]
    Csv(#[from] csv::Error),

    #[error("header must contain columns x,y,vx,vy,vz; missing {name:?}")]
    MissingColumn { name: String },

    #[error("line {line}: cannot parse {name} from {value:?}")]
    BadValue {
        line: u64,
        name: String,
        value: String,
    },

    #[error("line {line}: pixel ({x}, {y}) outside the {nx}x{ny} grid")]
    OutOfRange {
        line: u64,
        x: usize,
        y: usize,
        nx: usize,
        ny: usize,
    },

    #[error("line {line}: duplicate row for pixel ({x}, {y})")]
    DuplicatePixel { line: u64, x: usize, y: usize },

    #[error("missing pixel ({x}, {y})")]
    MissingPixel { x: usize, y: usize },

    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Parses one slice from CSV with header `x,y,vx,vy,vz`, where `x`/`y` are
/// pixel indices. Every pixel of the grid must appear exactly once.
pub fn read_csv_slice<R: Read>(reader: R, grid: GridSpec) -> Result<VectorSlice, CsvSliceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize, CsvSliceError> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| CsvSliceError::MissingColumn { name: name.into() })
    };
    let (cx, cy) = (col("x")?, col("y")?);
    let comps = [col("vx")?, col("vy")?, col("vz")?];

    let mut vx = vec![0.0; grid.len()];
    let mut vy = vec![0.0; grid.len()];
    let mut vz = vec![0.0; grid.len()];
    let mut seen = vec![false; grid.len()];
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let index = |c: usize, name: &str| -> Result<usize, CsvSliceError> {
            let raw = record.get(c).unwrap_or("");
            raw.parse().map_err(|_| CsvSliceError::BadValue {
                line,
                name: name.into(),
                value: raw.into(),
            })
        };
        let x = index(cx, "x")?;
        let y = index(cy, "y")?;
        if x >= grid.nx || y >= grid.ny {
            return Err(CsvSliceError::OutOfRange {
                line,
                x,
                y,
                nx: grid.nx,
                ny: grid.ny,
            });
        }
        let i = y * grid.nx + x;
        if seen[i] {
            return Err(CsvSliceError::DuplicatePixel { line, x, y });
        }
        seen[i] = true;
        for (c, out) in comps.iter().zip([&mut vx, &mut vy, &mut vz]) {
            let name = headers.get(*c).unwrap_or("value");
            let raw = record.get(*c).unwrap_or("");
            out[i] = raw.parse().map_err(|_| CsvSliceError::BadValue {
                line,
                name: name.into(),
                value: raw.into(),
            })?;
        }
    }
    if let Some(i) = seen.iter().position(|&s| !s) {
        return Err(CsvSliceError::MissingPixel {
            x: i % grid.nx,
            y: i / grid.nx,
        });
    }
    Ok(VectorSlice::new(
        ScalarSlice::new(grid, vx)?,
        ScalarSlice::new(grid, vy)?,
        ScalarSlice::new(grid, vz)?,
    )?)
}

/// Reads one CSV file per slice (ordered bottom to top) and assembles a
/// volume with uniform inter-slice spacing `dz`.
pub fn read_csv_slices<P: AsRef<Path>>(
    sources: &[P],
    grid: GridSpec,
    dz: f64,
) -> Result<VolumeField, CsvSliceError> {
    let mut slices = Vec::with_capacity(sources.len());
    for path in sources {
        let file = std::fs::File::open(path)?;
        slices.push(read_csv_slice(io::BufReader::new(file), grid)?);
    }
    Ok(VolumeField::new(slices, dz)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::discrete_divergence;
    use std::io::Cursor;

    fn default_spec(n: usize) -> AnalyticSpec {
        AnalyticSpec::default_volume(n, n).unwrap()
    }

    #[test]
    fn analytic_point_values() {
        let (vx, vy, vz) = analytic_velocity(1.0, 1.0, 1.0);
        assert!((vx - 0.45).abs() < 1e-15);
        assert!((vy + 0.3).abs() < 1e-15);
        assert_eq!(vz, 0.0);
        let (vx, vy, vz) = analytic_velocity(0.0, 0.0, 0.0);
        assert_eq!(vx, 0.0);
        assert!((vy + 0.3).abs() < 1e-15);
        assert_eq!(vz, 0.0);
    }

    #[test]
    fn analytic_symbolic_divergence_is_zero() {
        // d(Vx)/dx + d(Vy)/dy + d(Vz)/dz
        // = 0.3x + [0.3(1 - x^2) - 0.3x] + [-0.3(1 - x^2)] = 0
        for &(x, y, z) in &[(0.3f64, -0.7, 1.2), (1.0, 1.0, 0.0), (-0.5, 0.25, 2.0)] {
            let dvx_dx = 0.3 * x;
            let dvy_dy = 0.3 * (1.0 - x * x) - 0.3 * x;
            let dvz_dz = -0.3 * (1.0 - x * x);
            let _ = (y, z);
            assert!((dvx_dx + dvy_dy + dvz_dz).abs() < 1e-15);
        }
    }

    #[test]
    fn analytic_volume_is_discretely_divergence_free() {
        // Every term is at most quadratic in the differenced coordinate, and
        // Vz is linear in z, so the central stencils are exact: the discrete
        // divergence vanishes at interior pixels for any spacing.
        let spec = default_spec(17);
        let vol = gen_analytic(&spec);
        let div = discrete_divergence(
            vol.slice(2).unwrap(),
            vol.slice(1).unwrap(),
            vol.slice(3).unwrap(),
            spec.dz(),
        )
        .unwrap();
        let interior = div.crop_center(15, 15).unwrap();
        assert!(interior.max_abs() < 1e-10, "max {}", interior.max_abs());
    }

    #[test]
    fn spec_grid_spacing_matches_ranges() {
        let spec = default_spec(5);
        // [-1, 1] over 5 pixels -> spacing 0.5
        assert!((spec.grid().dx - 0.5).abs() < 1e-15);
        assert_eq!(spec.dz(), 0.5);
    }

    #[test]
    fn spec_rejects_bad_inputs() {
        assert!(matches!(
            AnalyticSpec::new(1, 5, (-1.0, 1.0), (-1.0, 1.0), vec![0.0, 1.0]),
            Err(AnalyticError::GridTooSmall { .. })
        ));
        assert!(matches!(
            AnalyticSpec::new(5, 5, (1.0, 1.0), (-1.0, 1.0), vec![0.0, 1.0]),
            Err(AnalyticError::DegenerateRange { .. })
        ));
        assert!(matches!(
            AnalyticSpec::new(5, 5, (-1.0, 1.0), (-1.0, 1.0), vec![0.0]),
            Err(AnalyticError::TooFewZPositions { got: 1 })
        ));
        assert!(matches!(
            AnalyticSpec::new(5, 5, (-1.0, 1.0), (-1.0, 1.0), vec![0.0, 1.0, 1.5]),
            Err(AnalyticError::NonUniformZ { index: 2, .. })
        ));
    }

    #[test]
    fn zero_fraction_noise_is_identity() {
        let vol = gen_analytic(&default_spec(8));
        let noised = add_noise(&vol, NoiseSpec::new(0.0, 123).unwrap());
        assert_eq!(noised, vol);
    }

    #[test]
    fn noise_is_deterministic() {
        let vol = gen_analytic(&default_spec(8));
        let spec = NoiseSpec::new(0.1, 42).unwrap();
        assert_eq!(add_noise(&vol, spec), add_noise(&vol, spec));
        let other = NoiseSpec::new(0.1, 43).unwrap();
        assert_ne!(add_noise(&vol, spec), add_noise(&vol, other));
    }

    #[test]
    fn noise_std_matches_fraction_of_max() {
        // max |Vx| = 2 with fraction 0.10 -> sigma = 0.2; on 128x128 = 16384
        // samples the sample std lands within 5%.
        let g = GridSpec::new(128, 128, 1.0, 1.0).unwrap();
        let vx = ScalarSlice::from_fn(g, |x, _| if x == 0 { 2.0 } else { 0.5 }).unwrap();
        let v = VectorSlice::new(vx, ScalarSlice::zeros(g), ScalarSlice::zeros(g)).unwrap();
        let vol = VolumeField::new(vec![v.clone(), v.clone()], 1.0).unwrap();
        let noised = add_noise(&vol, NoiseSpec::new(0.10, 7).unwrap());
        let deltas: Vec<f64> = noised
            .slice(0)
            .unwrap()
            .vx()
            .values()
            .iter()
            .zip(v.vx().values())
            .map(|(&n, &o)| n - o)
            .collect();
        let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
        let var =
            deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (deltas.len() - 1) as f64;
        let std = var.sqrt();
        assert!((std - 0.2).abs() < 0.01, "sample std {std}");
        assert!(mean.abs() < 0.01, "sample mean {mean}");
    }

    #[test]
    fn doubling_fraction_doubles_every_sample() {
        let vol = gen_analytic(&default_spec(16));
        let n1 = add_noise(&vol, NoiseSpec::new(0.05, 99).unwrap());
        let n2 = add_noise(&vol, NoiseSpec::new(0.10, 99).unwrap());
        for (s0, (s1, s2)) in vol.slices().iter().zip(n1.slices().iter().zip(n2.slices())) {
            for ((c0, c1), c2) in s0
                .components()
                .iter()
                .zip(s1.components())
                .zip(s2.components())
            {
                for i in 0..c0.grid().len() {
                    let d1 = c1.values()[i] - c0.values()[i];
                    let d2 = c2.values()[i] - c0.values()[i];
                    // d1/d2 are computed as (v + sigma z) - v, so their
                    // rounding error is relative to v, not to the delta
                    assert!((d2 - 2.0 * d1).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn vvf_roundtrip_is_bit_exact() {
        let vol = add_noise(
            &gen_analytic(&default_spec(9)),
            NoiseSpec::new(0.1, 5).unwrap(),
        );
        let mut buf = Vec::new();
        write_vvf(&vol, &mut buf).unwrap();
        let back = read_vvf(Cursor::new(&buf)).unwrap();
        assert_eq!(back, vol);
    }

    #[test]
    fn vvf_single_slice_roundtrip() {
        let spec = default_spec(6);
        let slice = analytic_slice(&spec, 1.0);
        let mut buf = Vec::new();
        write_vvf_slices(std::slice::from_ref(&slice), spec.dz(), &mut buf).unwrap();
        let (slices, dz) = read_vvf_slices(Cursor::new(&buf)).unwrap();
        assert_eq!(slices.len(), 1);
        assert_eq!(slices[0], slice);
        assert_eq!(dz, spec.dz());
    }

    #[test]
    fn vvf_rejects_bad_magic() {
        let mut buf = Vec::new();
        write_vvf(&gen_analytic(&default_spec(4)), &mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(
            read_vvf(Cursor::new(&buf)),
            Err(VvfError::BadMagic { .. })
        ));
    }

    #[test]
    fn vvf_rejects_truncated_payload() {
        let mut buf = Vec::new();
        write_vvf(&gen_analytic(&default_spec(4)), &mut buf).unwrap();
        buf.truncate(buf.len() - 16);
        assert!(matches!(
            read_vvf(Cursor::new(&buf)),
            Err(VvfError::PayloadLength { .. })
        ));
    }

    #[test]
    fn vvf_rejects_trailing_garbage() {
        let mut buf = Vec::new();
        write_vvf(&gen_analytic(&default_spec(4)), &mut buf).unwrap();
        buf.extend_from_slice(&[0u8; 8]);
        assert!(matches!(
            read_vvf(Cursor::new(&buf)),
            Err(VvfError::PayloadLength { .. })
        ));
    }

    #[test]
    fn vvf_rejects_bad_spacing_and_ncomp() {
        let bad_spacing = b"VVF1 3 3 2 3 0 1 1\n".to_vec();
        assert!(matches!(
            read_vvf(Cursor::new(&bad_spacing)),
            Err(VvfError::BadHeader { .. })
        ));
        let bad_ncomp = b"VVF1 3 3 2 2 1 1 1\n".to_vec();
        assert!(matches!(
            read_vvf(Cursor::new(&bad_ncomp)),
            Err(VvfError::BadHeader { .. })
        ));
    }

    fn full_csv_3x3() -> String {
        let mut s = String::from("x,y,vx,vy,vz\n");
        for y in 0..3 {
            for x in 0..3 {
                s.push_str(&format!("{x},{y},{},{},{}\n", x as f64, y as f64, 0.5));
            }
        }
        s
    }

    #[test]
    fn csv_full_grid_parses() {
        let g = GridSpec::new(3, 3, 1.0, 1.0).unwrap();
        let slice = read_csv_slice(Cursor::new(full_csv_3x3()), g).unwrap();
        assert_eq!(slice.vx().at(2, 1), 2.0);
        assert_eq!(slice.vy().at(1, 2), 2.0);
        assert_eq!(slice.vz().at(0, 0), 0.5);
    }

    #[test]
    fn csv_missing_pixel_names_coordinate() {
        let g = GridSpec::new(3, 3, 1.0, 1.0).unwrap();
        let mut text = full_csv_3x3();
        // drop the row for pixel (1, 2)
        text = text.replace("1,2,1,2,0.5\n", "");
        match read_csv_slice(Cursor::new(text), g) {
            Err(CsvSliceError::MissingPixel { x: 1, y: 2 }) => {}
            other => panic!("unexpected result: {other:?}"),
        }
    }

    #[test]
    fn csv_duplicate_pixel_errors() {
        let g = GridSpec::new(3, 3, 1.0, 1.0).unwrap();
        let text = format!("{}0,0,9,9,9\n", full_csv_3x3());
        assert!(matches!(
            read_csv_slice(Cursor::new(text), g),
            Err(CsvSliceError::DuplicatePixel { x: 0, y: 0, .. })
        ));
    }

    #[test]
    fn csv_parse_error_reports_line() {
        let g = GridSpec::new(3, 3, 1.0, 1.0).unwrap();
        let text = full_csv_3x3().replace("2,2,2,2,0.5", "2,2,oops,2,0.5");
        match read_csv_slice(Cursor::new(text), g) {
            Err(CsvSliceError::BadValue { line, name, .. }) => {
                assert_eq!(name, "vx");
                assert_eq!(line, 10); // header + 8 rows before pixel (2,2)
            }
            other => panic!("unexpected result: {other:?}"),
        }
    }

    #[test]
    fn csv_out_of_range_errors() {
        let g = GridSpec::new(2, 2, 1.0, 1.0).unwrap();
        let text = "x,y,vx,vy,vz\n5,0,1,1,1\n";
        assert!(matches!(
            read_csv_slice(Cursor::new(text), g),
            Err(CsvSliceError::OutOfRange { x: 5, .. })
        ));
    }

    #[test]
    fn csv_volume_assembly() {
        let g = GridSpec::new(3, 3, 1.0, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut paths = Vec::new();
        for k in 0..2 {
            let p = dir.path().join(format!("slice{k}.csv"));
            std::fs::write(&p, full_csv_3x3()).unwrap();
            paths.push(p);
        }
        let vol = read_csv_slices(&paths, g, 0.5).unwrap();
        assert_eq!(vol.len(), 2);
        assert_eq!(vol.dz(), 0.5);
    }
}
