//! Command-line tool for generating velocimetry test volumes, interpolating
//! intermediate slices, and reporting divergence/MSE metrics as CSV and SVG.

mod svg;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use divflow_core::datasets::{
    add_noise, gen_analytic, read_vvf, write_vvf_slices, AnalyticSpec, NoiseSpec, VvfError,
};
use divflow_core::divflow::{divflow_interpolate_midslice, DivParams};
use divflow_core::hs::{hs_interpolate_midslice, hs_sym_interpolate_midslice, HsParams};
use divflow_core::metrics::{discrete_divergence, divergence_metric, magnitude_mse, mse};
use divflow_core::reconstruct::linear_midpoint;
use divflow_core::{VectorSlice, VolumeField};

const REPORT_VERSION_LINE: &str = "# divflow-report v1";

#[derive(Parser)]
#[command(
    name = "divflow",
    about = "Interpolate intermediate slices of 3D flow-velocity volumes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the analytical test volume (optionally noised) as a VVF file
    Gen(GenArgs),
    /// Reconstruct one slice from its two bracketing slices
    Interp(InterpArgs),
    /// Run the divergence-constrained method over a gamma/lambda sweep
    Sweep(SweepArgs),
    /// Compare interpolation methods over several centers and steps
    Compare(CompareArgs),
}

#[derive(clap::Args)]
struct GenArgs {
    /// Grid width in pixels
    #[arg(long, default_value_t = 128)]
    nx: usize,
    /// Grid height in pixels
    #[arg(long, default_value_t = 128)]
    ny: usize,
    /// Physical x range as "lo,hi"
    #[arg(long, default_value = "-1,1", allow_hyphen_values = true)]
    x_range: String,
    /// Physical y range as "lo,hi"
    #[arg(long, default_value = "-1,1", allow_hyphen_values = true)]
    y_range: String,
    /// Comma-separated, uniformly spaced z positions of the slices
    #[arg(long, default_value = "0,0.5,1,1.5,2", allow_hyphen_values = true)]
    z: String,
    /// Gaussian noise std as a fraction of each component field's max |value|
    #[arg(long, default_value_t = 0.0)]
    noise_frac: f64,
    /// RNG seed for the noise
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output VVF path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Per-pixel average of the two bracketing slices
    Linear,
    /// Symmetric-constraint Horn-Schunck flow + warp-average
    Hs,
    /// Classical two-frame Horn-Schunck flow + half-flow warp-average
    HsPlain,
    /// Symmetric flow with the divergence-minimization term
    Divof,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::Hs => "hs",
            Method::HsPlain => "hs-plain",
            Method::Divof => "divof",
        }
    }
}

#[derive(clap::Args)]
struct InterpArgs {
    /// Input VVF volume
    #[arg(long)]
    input: PathBuf,
    /// Interpolation method
    #[arg(long, value_enum)]
    method: Method,
    /// Index of the slice to reconstruct
    #[arg(long)]
    center: usize,
    /// Slice offset to the bracketing slices (center - step, center + step)
    #[arg(long)]
    step: usize,
    /// Divergence weight (divof only)
    #[arg(long, default_value_t = 150.0)]
    gamma: f64,
    /// Smoothness weight
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Solver iterations; 0 reduces every flow method to the linear baseline
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    /// Side length of the centered square evaluation region
    #[arg(long, default_value_t = 110)]
    region: usize,
    /// Output VVF path for the reconstructed slice
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV report path (appends one row; creates the file with a
    /// header when missing)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// Input VVF volume
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated gamma values
    #[arg(long, allow_hyphen_values = true)]
    gamma: String,
    /// Comma-separated lambda values: either one (broadcast) or one per gamma
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    lambda: String,
    /// Solver iterations
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    /// Index of the slice to reconstruct
    #[arg(long)]
    center: usize,
    /// Slice offset to the bracketing slices
    #[arg(long)]
    step: usize,
    /// Side length of the centered square evaluation region
    #[arg(long, default_value_t = 110)]
    region: usize,
    /// Output CSV path
    #[arg(long)]
    out_csv: PathBuf,
    /// Output SVG path
    #[arg(long)]
    out_svg: PathBuf,
}

#[derive(clap::Args)]
struct CompareArgs {
    /// Input VVF volume
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated method list
    #[arg(long, default_value = "linear,hs,divof")]
    methods: String,
    /// Comma-separated center slice indices
    #[arg(long, default_value = "2,3,4")]
    centers: String,
    /// Comma-separated step values
    #[arg(long, default_value = "1,2")]
    steps: String,
    /// Divergence weight (divof only)
    #[arg(long, default_value_t = 150.0)]
    gamma: f64,
    /// Smoothness weight
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Solver iterations
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    /// Side length of the centered square evaluation region
    #[arg(long, default_value_t = 110)]
    region: usize,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

/// CLI-level error with its exit-code class: usage/validation errors exit
/// with 2, I/O and file-format errors with 3.
enum CliError {
    Usage(String),
    Io(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Interp(args) => cmd_interp(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn parse_f64_list(text: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse()).collect();
    let values = values.map_err(|_| CliError::Usage(format!("--{flag}: cannot parse {text:?}")))?;
    if values.is_empty() {
        return Err(CliError::Usage(format!("--{flag}: empty list")));
    }
    Ok(values)
}

fn parse_usize_list(text: &str, flag: &str) -> Result<Vec<usize>, CliError> {
    let values: Result<Vec<usize>, _> = text.split(',').map(|t| t.trim().parse()).collect();
    values.map_err(|_| CliError::Usage(format!("--{flag}: cannot parse {text:?}")))
}

fn parse_range(text: &str, flag: &str) -> Result<(f64, f64), CliError> {
    let v = parse_f64_list(text, flag)?;
    if v.len() != 2 {
        return Err(CliError::Usage(format!(
            "--{flag}: expected \"lo,hi\", got {text:?}"
        )));
    }
    Ok((v[0], v[1]))
}

fn load_volume(path: &Path) -> Result<VolumeField, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
    read_vvf(std::io::BufReader::new(file)).map_err(|e| match e {
        VvfError::Io(e) => CliError::Io(format!("reading {}: {e}", path.display())),
        other => CliError::Io(format!("{}: {other}", path.display())),
    })
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    if args.nx < 3 || args.ny < 3 {
        return Err(CliError::Usage(format!(
            "grid must be at least 3x3 for the derivative stencils, got {}x{}",
            args.nx, args.ny
        )));
    }
    let x_range = parse_range(&args.x_range, "x-range")?;
    let y_range = parse_range(&args.y_range, "y-range")?;
    let z = parse_f64_list(&args.z, "z")?;
    let spec = AnalyticSpec::new(args.nx, args.ny, x_range, y_range, z).map_err(CliError::usage)?;
    let noise = NoiseSpec::new(args.noise_frac, args.seed).map_err(CliError::usage)?;
    let vol = add_noise(&gen_analytic(&spec), noise);
    write_volume(&vol, &args.out)
}

fn write_volume(vol: &VolumeField, path: &Path) -> Result<(), CliError> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    divflow_core::datasets::write_vvf(vol, std::io::BufWriter::new(file))
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

/// Runs one reconstruction and returns the slice with its solve wall time.
fn reconstruct(
    vol: &VolumeField,
    method: Method,
    center: usize,
    step: usize,
    gamma: f64,
    lambda: f64,
    iters: usize,
) -> Result<(VectorSlice, f64), CliError> {
    if step == 0 {
        return Err(CliError::Usage("--step must be at least 1".into()));
    }
    if center < step || center + step >= vol.len() {
        return Err(CliError::Usage(format!(
            "center {center} with step {step} does not fit a volume of {} slices",
            vol.len()
        )));
    }
    let start = Instant::now();
    let slice = if iters == 0 || method == Method::Linear {
        // zero iterations leave the flow at its zero initialization, which
        // reduces every flow-based method to the linear midpoint
        let lower = vol.slice(center - step).map_err(CliError::usage)?;
        let upper = vol.slice(center + step).map_err(CliError::usage)?;
        linear_midpoint(lower, upper).map_err(CliError::usage)?
    } else {
        match method {
            Method::Linear => unreachable!("handled above"),
            Method::Hs => {
                let params = HsParams::new(lambda, iters).map_err(CliError::usage)?;
                hs_sym_interpolate_midslice(vol, center, step, &params).map_err(CliError::usage)?
            }
            Method::HsPlain => {
                let params = HsParams::new(lambda, iters).map_err(CliError::usage)?;
                hs_interpolate_midslice(vol, center - step, center + step, &params)
                    .map_err(CliError::usage)?
            }
            Method::Divof => {
                let delta = step as f64 * vol.dz();
                let params =
                    DivParams::new(gamma, lambda, iters, delta).map_err(CliError::usage)?;
                divflow_interpolate_midslice(vol, center, step, &params).map_err(CliError::usage)?
            }
        }
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((slice, wall_ms))
}

struct Evaluation {
    div_mean_abs: f64,
    div_l2: f64,
    mse: f64,
    mse_mag: f64,
}

fn evaluate(
    vol: &VolumeField,
    slice: &VectorSlice,
    center: usize,
    step: usize,
    region: usize,
) -> Result<Evaluation, CliError> {
    let lower = vol.slice(center - step).map_err(CliError::usage)?;
    let upper = vol.slice(center + step).map_err(CliError::usage)?;
    let truth = vol.slice(center).map_err(CliError::usage)?;
    let spacing = step as f64 * vol.dz();
    let div = discrete_divergence(slice, lower, upper, spacing).map_err(CliError::usage)?;
    let div_report = divergence_metric(&div, region).map_err(CliError::usage)?;
    Ok(Evaluation {
        div_mean_abs: div_report.mean_abs,
        div_l2: div_report.l2,
        mse: mse(slice, truth, region).map_err(CliError::usage)?,
        mse_mag: magnitude_mse(slice, truth, region).map_err(CliError::usage)?,
    })
}

fn report_row(
    method: Method,
    center: usize,
    step: usize,
    gamma: f64,
    lambda: f64,
    iters: usize,
    eval: &Evaluation,
) -> String {
    format!(
        "{},{center},{step},{gamma},{lambda},{iters},{},{},{},{}",
        method.name(),
        eval.div_mean_abs,
        eval.div_l2,
        eval.mse,
        eval.mse_mag
    )
}

const INTERP_HEADER: &str =
    "method,center,step,gamma,lambda,iterations,div_mean_abs,div_l2,mse,mse_mag";

fn cmd_interp(args: InterpArgs) -> Result<(), CliError> {
    let vol = load_volume(&args.input)?;
    let (slice, _wall) = reconstruct(
        &vol,
        args.method,
        args.center,
        args.step,
        args.gamma,
        args.lambda,
        args.iters,
    )?;
    let file = fs::File::create(&args.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", args.out.display())))?;
    write_vvf_slices(
        std::slice::from_ref(&slice),
        args.step as f64 * vol.dz(),
        std::io::BufWriter::new(file),
    )
    .map_err(|e| CliError::Io(format!("writing {}: {e}", args.out.display())))?;

    let eval = evaluate(&vol, &slice, args.center, args.step, args.region)?;
    let row = report_row(
        args.method,
        args.center,
        args.step,
        args.gamma,
        args.lambda,
        args.iters,
        &eval,
    );
    match &args.report {
        Some(path) => append_report_row(path, INTERP_HEADER, &row),
        None => {
            println!("{row}");
            Ok(())
        }
    }
}

fn append_report_row(path: &Path, header: &str, row: &str) -> Result<(), CliError> {
    let exists = path.exists();
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
    let io_err = |e: std::io::Error| CliError::Io(format!("writing {}: {e}", path.display()));
    if !exists {
        writeln!(file, "{REPORT_VERSION_LINE}").map_err(io_err)?;
        writeln!(file, "{header}").map_err(io_err)?;
    }
    writeln!(file, "{row}").map_err(io_err)
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let vol = load_volume(&args.input)?;
    let gammas = parse_f64_list(&args.gamma, "gamma")?;
    let lambdas = parse_f64_list(&args.lambda, "lambda")?;
    let lambdas: Vec<f64> = if lambdas.len() == 1 {
        vec![lambdas[0]; gammas.len()]
    } else if lambdas.len() == gammas.len() {
        lambdas
    } else {
        return Err(CliError::Usage(format!(
            "--lambda must hold one value or match --gamma ({} values), got {}",
            gammas.len(),
            lambdas.len()
        )));
    };

    let mut body = format!("{REPORT_VERSION_LINE}\n");
    body.push_str("gamma,lambda,iterations,div_mean_abs,div_l2,mse,mse_mag,wall_ms\n");
    let mut div_points = Vec::with_capacity(gammas.len());
    let mut mse_points = Vec::with_capacity(gammas.len());
    for (&gamma, &lambda) in gammas.iter().zip(&lambdas) {
        let (slice, wall_ms) = reconstruct(
            &vol,
            Method::Divof,
            args.center,
            args.step,
            gamma,
            lambda,
            args.iters,
        )?;
        let eval = evaluate(&vol, &slice, args.center, args.step, args.region)?;
        body.push_str(&format!(
            "{gamma},{lambda},{},{},{},{},{},{wall_ms:.3}\n",
            args.iters, eval.div_mean_abs, eval.div_l2, eval.mse, eval.mse_mag
        ));
        div_points.push((gamma, eval.div_mean_abs));
        mse_points.push((gamma, eval.mse));
    }
    fs::write(&args.out_csv, body)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", args.out_csv.display())))?;
    fs::write(&args.out_svg, svg::sweep_chart(&div_points, &mse_points))
        .map_err(|e| CliError::Io(format!("writing {}: {e}", args.out_svg.display())))
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let vol = load_volume(&args.input)?;
    let methods: Result<Vec<Method>, CliError> = args
        .methods
        .split(',')
        .map(|name| {
            Method::from_str(name.trim(), true)
                .map_err(|_| CliError::Usage(format!("unknown method {name:?}")))
        })
        .collect();
    let methods = methods?;
    let centers = parse_usize_list(&args.centers, "centers")?;
    let steps = parse_usize_list(&args.steps, "steps")?;
    if methods.is_empty() || centers.is_empty() || steps.is_empty() {
        return Err(CliError::Usage(
            "--methods, --centers, and --steps must be non-empty".into(),
        ));
    }

    let mut body = format!("{REPORT_VERSION_LINE}\n{INTERP_HEADER}\n");
    for &method in &methods {
        for &center in &centers {
            for &step in &steps {
                let (slice, _wall) = reconstruct(
                    &vol,
                    method,
                    center,
                    step,
                    args.gamma,
                    args.lambda,
                    args.iters,
                )?;
                let eval = evaluate(&vol, &slice, center, step, args.region)?;
                body.push_str(&report_row(
                    method,
                    center,
                    step,
                    args.gamma,
                    args.lambda,
                    args.iters,
                    &eval,
                ));
                body.push('\n');
            }
        }
    }
    fs::write(&args.out, body)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", args.out.display())))
}
