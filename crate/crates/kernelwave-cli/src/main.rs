mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use kernelwave::expansion::{Point, Transition};
use kernelwave::kernels::{Backend, KernelId};
use kernelwave::quadrature::QuadOptions;

/// Integrable kernels by contour quadrature, their asymptotic expansions,
/// and checks of the transition rates.
#[derive(Parser)]
#[command(name = "kernelwave", version)]
struct Cli {
    /// File of `key = value` lines mirroring long flags; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate kernels from flags or a JSON-lines / CSV batch file.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Partial sums of the large-a expansion.
    #[command(args_override_self = true)]
    Expand(ExpandArgs),
    /// Dump expansion coefficients as JSON.
    #[command(args_override_self = true)]
    Coeffs(CoeffsArgs),
    /// Level curves and steepest-descent paths through a saddle.
    #[command(args_override_self = true)]
    Trace(TraceArgs),
    /// Residual rate studies with log-log slope fits.
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// Evaluate a kernel over a grid or a seeded random sample.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
}

#[derive(Args, Clone, Debug)]
struct QuadArgs {
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    /// Gauss-Legendre nodes per panel.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    max_depth: Option<u32>,
    /// Envelope drop at which infinite rays are cut.
    #[arg(long)]
    ray_budget: Option<f64>,
    #[arg(long)]
    duffy_radius: Option<f64>,
    #[arg(long)]
    direct_offset: Option<f64>,
}

impl QuadArgs {
    fn options(&self) -> QuadOptions {
        let d = QuadOptions::default();
        QuadOptions {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            nodes_per_panel: self.nodes.unwrap_or(d.nodes_per_panel),
            max_refine_depth: self.max_depth.unwrap_or(d.max_refine_depth),
            ray_truncation_budget: self.ray_budget.unwrap_or(d.ray_truncation_budget),
            duffy_radius: self.duffy_radius.unwrap_or(d.duffy_radius),
            direct_offset: self.direct_offset.unwrap_or(d.direct_offset),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    kernel: Option<KernelId>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    tau1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    tau2: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    u: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    v: f64,
    /// Transition parameter, required for the transition kernel.
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Backend for every query; batch rows otherwise keep their own.
    #[arg(long)]
    backend: Option<Backend>,
    /// Batch file, JSON lines or CSV with a `kernel,...` header.
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    quad: QuadArgs,
}

#[derive(Args, Debug)]
struct ExpandArgs {
    #[arg(long)]
    transition: Transition,
    /// `u,v,tau1,tau2`
    #[arg(long, default_value = "0,0,0,0", allow_hyphen_values = true)]
    point: Point,
    /// Comma-separated values of a.
    #[arg(long, value_delimiter = ',', required = true)]
    a: Vec<f64>,
    /// Largest number of correction terms.
    #[arg(long, default_value_t = 3)]
    terms: usize,
    /// Also evaluate the rescaled kernel and report the residual.
    #[arg(long)]
    compare: bool,
    #[arg(long, default_value = "saddle")]
    backend: Backend,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    quad: QuadArgs,
}

#[derive(Args, Debug)]
struct CoeffsArgs {
    #[arg(long)]
    transition: Transition,
    #[arg(long, default_value = "0,0,0,0", allow_hyphen_values = true)]
    point: Point,
    #[arg(long, default_value_t = kernelwave::expansion::DEFAULT_ORDER)]
    order: usize,
    /// Include the Gaussian moment tables up to the same order.
    #[arg(long)]
    moments: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PhaseArg {
    Airy,
    Pearcey,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum TraceFormat {
    Text,
    Json,
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[arg(long, value_enum)]
    phase: PhaseArg,
    /// Saddle whose level is drawn: upper, lower, real or an index.
    #[arg(long, default_value = "upper")]
    level: String,
    /// Half-width of the square window for level curves.
    #[arg(long, default_value_t = 3.0)]
    window: f64,
    #[arg(long, default_value_t = 0.02)]
    resolution: f64,
    /// Emit the four steepest paths from the saddle instead of the level set.
    #[arg(long)]
    paths: bool,
    #[arg(long, default_value_t = 12.0)]
    max_arclength: f64,
    #[arg(long, value_enum, default_value_t = TraceFormat::Text)]
    format: TraceFormat,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Plain,
    Envelope,
    Auto,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Transition to study; both when omitted.
    #[arg(long)]
    transition: Option<Transition>,
    /// Sample point `u,v,tau1,tau2`; repeatable. Defaults to the built-in set.
    #[arg(long, allow_hyphen_values = true)]
    point: Vec<Point>,
    /// Comma-separated values of a.
    #[arg(long, value_delimiter = ',')]
    a: Vec<f64>,
    /// Highest truncation studied; defaults to the highest with a window.
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long, default_value = "saddle")]
    backend: Backend,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,
    /// Exit nonzero when a slope leaves its window or a cross-check is flagged.
    #[arg(long)]
    check: bool,
    /// Also run the standard cross-checks at each point.
    #[arg(long)]
    cross: bool,
    /// Write the JSON summary here.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    quad: QuadArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    kernel: KernelId,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    /// A value or `lo:hi:n`.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    tau1: commands::Range,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    tau2: commands::Range,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    u: commands::Range,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    v: commands::Range,
    /// Draw this many uniform points from the ranges instead of the grid.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "direct")]
    backend: Backend,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    quad: QuadArgs,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("KERNELWAVE_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("KERNELWAVE_THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err("KERNELWAVE_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn parse_cli(args: Vec<OsString>) -> Result<Cli, clap::Error> {
    let cmd = Cli::command();
    let args = match config::config_path(&args) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| {
                Cli::command().error(clap::error::ErrorKind::Io, format!("reading {}: {e}", path.to_string_lossy()))
            })?;
            let entries = config::parse(&text).map_err(|e| Cli::command().error(clap::error::ErrorKind::ValueValidation, e))?;
            config::merge(&cmd, args, &entries).map_err(|e| Cli::command().error(clap::error::ErrorKind::ValueValidation, e))?
        }
        None => args,
    };
    let matches = cmd.try_get_matches_from(args)?;
    Cli::from_arg_matches(&matches)
}

fn main() -> ExitCode {
    let cli = match parse_cli(std::env::args_os().collect()) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let res = match &cli.command {
        Cmd::Eval(a) => commands::eval(a),
        Cmd::Expand(a) => commands::expand(a),
        Cmd::Coeffs(a) => commands::coeffs(a),
        Cmd::Trace(a) => commands::trace(a),
        Cmd::Verify(a) => commands::verify(a),
        Cmd::Sweep(a) => commands::sweep(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
