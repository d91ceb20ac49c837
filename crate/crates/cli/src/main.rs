//! Command-line entry point: entropy evaluation, contour grids, bone
//! tracing, postcritically-finite scans and the acceptance battery.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical nonconvergence,
//! 4 acceptance failure.
//!
//! Numeric defaults can also come from a plain-text `key = value` config
//! file (`--config`); explicit flags always win.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rqmap::acceptance::{run_all, AcceptanceConfig};
use rqmap::atlas::{
    band_connectivity, entropy_grid, write_connectivity_json, write_grid_csv, write_grid_svg,
    GridSpec,
};
use rqmap::bones::{bones_for_period, scan_pcf, TraceOptions, VWindow};
use rqmap::entropy::{entropy_lap, real_entropy, LapOptions};
use rqmap::family::{CriticalValuePair, NormalFormParams, QuadraticMap};
use rqmap::report::{write_bones_json, write_entropy_json, write_pcf_json};

#[derive(Parser)]
#[command(
    name = "rqmap",
    version,
    about = "Entropy and postcritical curves of real quadratic rational maps"
)]
struct Cli {
    /// Plain-text key=value file supplying defaults; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropy of one map, given (mu, t), (a, b) or (v1, v2); JSON on stdout.
    Entropy(EntropyArgs),
    /// Entropy contour grid over the normal-form strip: CSV plus optional SVG and connectivity JSON.
    Grid(GridArgs),
    /// Trace the order-n postcritical curves in a critical-value window; JSON output.
    Bones(BonesArgs),
    /// Scan for postcritically finite parameters with transversality data; JSON output.
    Pcf(PcfArgs),
    /// Run the acceptance battery; nonzero exit on any failure.
    Check(CheckArgs),
}

#[derive(Args)]
struct EntropyArgs {
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v2: Option<f64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    lap_cap: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, allow_hyphen_values = true)]
    mu_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t_max: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    lap_cap: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional SVG rendering path.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Isoline levels drawn into the SVG, comma separated.
    #[arg(long)]
    svg_levels: Option<String>,
    /// Optional connectivity report path.
    #[arg(long)]
    connectivity: Option<PathBuf>,
}

#[derive(Args)]
struct BonesArgs {
    /// Relation order of the bones to trace.
    #[arg(long)]
    n: usize,
    #[arg(long, allow_hyphen_values = true)]
    v1_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v1_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v2_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v2_max: Option<f64>,
    #[arg(long)]
    m_max: Option<usize>,
    #[arg(long)]
    grid_nx: Option<usize>,
    #[arg(long)]
    grid_ny: Option<usize>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PcfArgs {
    #[arg(long, allow_hyphen_values = true)]
    v1_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v1_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v2_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v2_max: Option<f64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    m_max: Option<usize>,
    #[arg(long)]
    grid_nx: Option<usize>,
    #[arg(long)]
    grid_ny: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    grid_nx: Option<usize>,
    #[arg(long)]
    grid_ny: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
}

/// Marker for argument-shape problems detected after clap parsing; these
/// exit 2 like any other usage error.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

macro_rules! usage_bail {
    ($($arg:tt)*) => {
        return Err(UsageError(format!($($arg)*)).into())
    };
}

/// Defaults loaded from a `key = value` file.
struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    fn load(path: Option<&PathBuf>) -> Result<Self> {
        let mut values = HashMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    bail!("config line {} is not key=value: {line}", lineno + 1);
                };
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Self { values })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| anyhow::anyhow!("config key {key} has unparsable value {raw}")),
        }
    }
}

/// Flag wins, then config file, then the built-in default.
fn resolve<T: FromStr + Copy>(
    flag: Option<T>,
    cfg: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T> {
    Ok(flag.or(cfg.get(key)?).unwrap_or(default))
}

fn lap_options(
    cfg: &ConfigFile,
    n_max: Option<usize>,
    lap_cap: Option<u64>,
    tol: Option<f64>,
) -> Result<LapOptions> {
    let defaults = LapOptions::default();
    Ok(LapOptions {
        n_max: resolve(n_max, cfg, "n_max", defaults.n_max)?,
        lap_cap: resolve(lap_cap, cfg, "lap_cap", defaults.lap_cap)?,
        tol: resolve(tol, cfg, "tol", defaults.tol)?,
        window: defaults.window,
    })
}

fn window_from(
    cfg: &ConfigFile,
    v1_min: Option<f64>,
    v1_max: Option<f64>,
    v2_min: Option<f64>,
    v2_max: Option<f64>,
) -> Result<VWindow> {
    let d = VWindow::default_unimodal();
    let w = (
        resolve(v1_min, cfg, "v1_min", d.v1_min)?,
        resolve(v1_max, cfg, "v1_max", d.v1_max)?,
        resolve(v2_min, cfg, "v2_min", d.v2_min)?,
        resolve(v2_max, cfg, "v2_max", d.v2_max)?,
    );
    if w.0 >= w.1 || w.2 >= w.3 {
        usage_bail!(
            "window must be well ordered: v1 [{}, {}], v2 [{}, {}]",
            w.0,
            w.1,
            w.2,
            w.3
        );
    }
    Ok(VWindow::new(w.0, w.1, w.2, w.3))
}

fn write_or_print(path: Option<&PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}

fn run_entropy(args: EntropyArgs, cfg: &ConfigFile) -> Result<u8> {
    let opts = lap_options(cfg, args.n_max, args.lap_cap, args.tol)?;
    let est = match (args.mu, args.t, args.a, args.b, args.v1, args.v2) {
        (Some(mu), Some(t), None, None, None, None) => {
            let sys = NormalFormParams::new(mu, t)?.to_system();
            entropy_lap(&sys.interval_model(), &opts)?
        }
        (None, None, Some(a), Some(b), None, None) => {
            real_entropy(&QuadraticMap::new(a, b)?, &opts)?
        }
        (None, None, None, None, Some(v1), Some(v2)) => {
            let f = QuadraticMap::from_critical_values(CriticalValuePair::new(v1, v2))?;
            real_entropy(&f, &opts)?
        }
        _ => usage_bail!("specify exactly one of (--mu, --t), (--a, --b) or (--v1, --v2)"),
    };
    print!("{}", write_entropy_json(&est));
    Ok(if est.converged { 0 } else { 3 })
}

fn run_grid(args: GridArgs, cfg: &ConfigFile) -> Result<u8> {
    let base = GridSpec::default_window(
        resolve(args.nx, cfg, "nx", 400)?,
        resolve(args.ny, cfg, "ny", 400)?,
    );
    let spec = GridSpec {
        mu_min: resolve(args.mu_min, cfg, "mu_min", base.mu_min)?,
        mu_max: resolve(args.mu_max, cfg, "mu_max", base.mu_max)?,
        t_min: resolve(args.t_min, cfg, "t_min", base.t_min)?,
        t_max: resolve(args.t_max, cfg, "t_max", base.t_max)?,
        nx: base.nx,
        ny: base.ny,
        entropy: LapOptions {
            n_max: resolve(args.n_max, cfg, "n_max", base.entropy.n_max)?,
            lap_cap: resolve(args.lap_cap, cfg, "lap_cap", base.entropy.lap_cap)?,
            ..base.entropy
        },
    };
    if spec.mu_min >= spec.mu_max || spec.t_min >= spec.t_max {
        usage_bail!("grid window must be well ordered");
    }
    let workers = args.workers.or(cfg.get("workers")?);
    let grid = entropy_grid(&spec, workers);
    fs::write(&args.out, write_grid_csv(&grid))
        .with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(svg) = &args.svg {
        let levels: Vec<f64> = match &args.svg_levels {
            Some(s) => s
                .split(',')
                .map(|x| x.trim().parse().context("parsing --svg-levels"))
                .collect::<Result<_>>()?,
            None => vec![],
        };
        fs::write(svg, write_grid_svg(&grid, &levels))
            .with_context(|| format!("writing {}", svg.display()))?;
    }
    if let Some(path) = &args.connectivity {
        let report = band_connectivity(&grid);
        fs::write(path, write_connectivity_json(&report))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(0)
}

fn run_bones(args: BonesArgs, cfg: &ConfigFile) -> Result<u8> {
    let window = window_from(cfg, args.v1_min, args.v1_max, args.v2_min, args.v2_max)?;
    let resolution = (
        resolve(args.grid_nx, cfg, "grid_nx", 240)?,
        resolve(args.grid_ny, cfg, "grid_ny", 160)?,
    );
    let m_max = resolve(args.m_max, cfg, "m_max", 6)?;
    let bones = bones_for_period(&window, args.n, m_max, resolution, &TraceOptions::default());
    write_or_print(args.out.as_ref(), &write_bones_json(&bones))?;
    Ok(0)
}

fn run_pcf(args: PcfArgs, cfg: &ConfigFile) -> Result<u8> {
    let window = window_from(cfg, args.v1_min, args.v1_max, args.v2_min, args.v2_max)?;
    let resolution = (
        resolve(args.grid_nx, cfg, "grid_nx", 240)?,
        resolve(args.grid_ny, cfg, "grid_ny", 160)?,
    );
    let n_max = resolve(args.n_max, cfg, "n_max", 4)?;
    let m_max = resolve(args.m_max, cfg, "m_max", 6)?;
    let points = scan_pcf(&window, n_max, m_max, resolution);
    write_or_print(args.out.as_ref(), &write_pcf_json(&points))?;
    Ok(0)
}

fn run_check(args: CheckArgs, cfg: &ConfigFile) -> Result<u8> {
    let defaults = AcceptanceConfig::default();
    let acceptance = AcceptanceConfig {
        grid_resolution: (
            resolve(args.grid_nx, cfg, "grid_nx", defaults.grid_resolution.0)?,
            resolve(args.grid_ny, cfg, "grid_ny", defaults.grid_resolution.1)?,
        ),
        workers: resolve(args.workers, cfg, "workers", defaults.workers)?,
        ..defaults
    };
    let reports = run_all(&acceptance);
    let mut all = true;
    for r in &reports {
        println!("{}", r.line());
        all &= r.passed;
    }
    Ok(if all { 0 } else { 4 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match ConfigFile::load(cli.config.as_ref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let outcome = match cli.command {
        Command::Entropy(args) => run_entropy(args, &cfg),
        Command::Grid(args) => run_grid(args, &cfg),
        Command::Bones(args) => run_bones(args, &cfg),
        Command::Pcf(args) => run_pcf(args, &cfg),
        Command::Check(args) => run_check(args, &cfg),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.downcast_ref::<UsageError>().is_some() {
                2
            } else if e.downcast_ref::<rqmap::family::FamilyError>().is_some()
                || e.downcast_ref::<rqmap::entropy::EntropyError>().is_some()
                || e.downcast_ref::<rqmap::bones::BonesError>().is_some()
                || e.downcast_ref::<rqmap::atlas::AtlasError>().is_some()
            {
                3
            } else {
                1
            };
            ExitCode::from(code)
        }
    }
}
