//! Command-line front end: ties field ingestion, the two lift builders,
//! integration, and the analysis layer together behind six subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use carleman::analysis::{self, BoundParams, ErrorMetric, SweepConfig};
use carleman::carleman_classical::{build_classical, build_classical_kuramoto, ClassicalSystem};
use carleman::carleman_fourier::{
    assemble, build_blocks_multi, extend_state, initial_lifted, lift_1d, LiftedSystem,
    MultiIndexTable,
};
use carleman::fourier_field::{parse_field_json, Field};
use carleman::integrate::{
    integrate_classical, integrate_linear, integrate_reference_1d, integrate_reference_multi,
    LinearMethod, TimeGrid, Trajectory,
};
use carleman::kuramoto;

#[derive(Parser)]
#[command(
    name = "carleman",
    about = "Carleman and Carleman-Fourier linearization toolkit",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one trajectory (reference, classical, or Carleman-Fourier)
    Simulate(SimulateArgs),
    /// Compute an error surface over (theta0, t)
    Sweep(SweepArgs),
    /// Report T0, N0, and measured error vs the theorem bound per N
    Bound(BoundArgs),
    /// Report the section threshold N0 for a horizon T*
    N0(N0Args),
    /// Dump an assembled operator or the multi-index layout as CSV
    DumpMatrix(DumpMatrixArgs),
    /// Normalize a Kuramoto model file
    Normalize(NormalizeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    Reference,
    Classical,
    CarlemanFourier,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum LinMethod {
    RkAdaptive,
    Expm,
}

impl From<LinMethod> for LinearMethod {
    fn from(m: LinMethod) -> Self {
        match m {
            LinMethod::RkAdaptive => LinearMethod::RkAdaptive,
            LinMethod::Expm => LinearMethod::Expm,
        }
    }
}

/// Optional settings loaded from a TOML config file. Flags override
/// these; these override built-in defaults.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    omega1: Option<f64>,
    ktilde: Option<f64>,
    theta0: Option<f64>,
    field_file: Option<PathBuf>,
    x0: Option<Vec<f64>>,
    method: Option<String>,
    n: Option<usize>,
    t_end: Option<f64>,
    samples: Option<usize>,
    tol: Option<f64>,
    linear_method: Option<String>,
    theta0_min: Option<f64>,
    theta0_max: Option<f64>,
    theta0_count: Option<usize>,
    t_count: Option<usize>,
    workers: Option<usize>,
    envelope_d: Option<f64>,
    envelope_r: Option<f64>,
    tstar: Option<f64>,
    n_max: Option<usize>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the reduced two-oscillator Kuramoto field
    #[arg(long)]
    kuramoto2: bool,
    #[arg(long)]
    omega1: Option<f64>,
    #[arg(long)]
    ktilde: Option<f64>,
    /// Initial phase for --kuramoto2
    #[arg(long)]
    theta0: Option<f64>,
    /// Field ingestion file (JSON) as the model source
    #[arg(long)]
    field_file: Option<PathBuf>,
    /// Initial state for --field-file (comma-separated)
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(short = 'N', long = "order")]
    n: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    linear_method: Option<LinMethod>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    omega1: Option<f64>,
    #[arg(long)]
    ktilde: Option<f64>,
    /// classical or carleman-fourier
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(short = 'N', long = "order")]
    n: Option<usize>,
    #[arg(long)]
    theta0_min: Option<f64>,
    #[arg(long)]
    theta0_max: Option<f64>,
    #[arg(long)]
    theta0_count: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    t_count: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads for the sweep pool (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    omega1: Option<f64>,
    #[arg(long)]
    ktilde: Option<f64>,
    #[arg(long)]
    theta0: Option<f64>,
    /// Envelope constant override (default: fitted from the field)
    #[arg(long)]
    envelope_d: Option<f64>,
    #[arg(long)]
    envelope_r: Option<f64>,
    /// Horizon T* the report is evaluated on
    #[arg(long)]
    tstar: Option<f64>,
    /// Largest section order in the report
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct N0Args {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    envelope_d: Option<f64>,
    #[arg(long)]
    envelope_r: Option<f64>,
    #[arg(long)]
    tstar: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Builder {
    Classical,
    CarlemanFourier,
    Layout,
}

#[derive(Args)]
struct DumpMatrixArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    builder: Builder,
    #[arg(long)]
    kuramoto2: bool,
    #[arg(long)]
    omega1: Option<f64>,
    #[arg(long)]
    ktilde: Option<f64>,
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long)]
    field_file: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    #[arg(short = 'N', long = "order")]
    n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NormalizeArgs {
    /// Kuramoto model file (JSON)
    #[arg(long)]
    model_file: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Usage errors exit 2, runtime errors exit 1 (matching clap's own
/// parse-failure code for the former).
enum CliError {
    Usage(String),
    Runtime(String),
}

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn load_config(path: &Option<PathBuf>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| usage(format!("bad config: {e}")))
        }
    }
}

fn parse_method(s: &str) -> Result<Method, CliError> {
    match s {
        "reference" => Ok(Method::Reference),
        "classical" => Ok(Method::Classical),
        "carleman-fourier" => Ok(Method::CarlemanFourier),
        other => Err(usage(format!("unknown method {other:?}"))),
    }
}

fn parse_linear(s: &str) -> Result<LinMethod, CliError> {
    match s {
        "rk-adaptive" => Ok(LinMethod::RkAdaptive),
        "expm" => Ok(LinMethod::Expm),
        other => Err(usage(format!("unknown linear method {other:?}"))),
    }
}

/// Writes `content` to `path` and a `<path>.meta.json` sidecar holding
/// the resolved config, its hash, and any extra report fields.
fn write_with_sidecar<C: Serialize>(
    path: &Path,
    content: &str,
    command: &str,
    config: &C,
    extra: serde_json::Value,
) -> Result<(), CliError> {
    fs::write(path, content).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let config_json = serde_json::to_string(config)?;
    let hash = format!("{:x}", Sha256::digest(config_json.as_bytes()));
    let sidecar = serde_json::json!({
        "command": command,
        "config": serde_json::from_str::<serde_json::Value>(&config_json)?,
        "config_sha256": hash,
        "output": path.display().to_string(),
        "report": extra,
    });
    let meta_path = PathBuf::from(format!("{}.meta.json", path.display()));
    fs::write(&meta_path, serde_json::to_string_pretty(&sidecar)? + "\n")
        .map_err(|e| CliError::Runtime(format!("{}: {e}", meta_path.display())))?;
    Ok(())
}

/// The model source a simulate/dump run resolved to.
enum Source {
    Kuramoto2 { omega1: f64, ktilde: f64, theta0: f64 },
    FieldFile { field: Field, x0: Vec<f64> },
}

fn resolve_source(
    kuramoto2: bool,
    omega1: Option<f64>,
    ktilde: Option<f64>,
    theta0: Option<f64>,
    field_file: &Option<PathBuf>,
    x0: &Option<Vec<f64>>,
) -> Result<Source, CliError> {
    match (kuramoto2, field_file) {
        (true, Some(_)) => Err(usage("--kuramoto2 and --field-file are mutually exclusive")),
        (false, None) => Err(usage("model source required: --kuramoto2 or --field-file")),
        (true, None) => Ok(Source::Kuramoto2 {
            omega1: omega1.unwrap_or(1.0),
            ktilde: ktilde.unwrap_or(1.0),
            theta0: theta0.unwrap_or(0.3),
        }),
        (false, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            let field = parse_field_json(&text)?;
            let dim = match &field {
                Field::OneD(_) => 1,
                Field::Multi(f) => f.dim(),
            };
            let x0 = x0.clone().unwrap_or_else(|| vec![0.3; dim]);
            if x0.len() != dim {
                return Err(usage(format!("--x0 needs {dim} components, got {}", x0.len())));
            }
            Ok(Source::FieldFile { field, x0 })
        }
    }
}

/// Resolved simulate settings recorded in the sidecar.
#[derive(Serialize)]
struct SimulateResolved {
    source: String,
    omega1: Option<f64>,
    ktilde: Option<f64>,
    x0: Vec<f64>,
    method: Method,
    n: usize,
    t_end: f64,
    samples: usize,
    tol: f64,
    linear_method: LinMethod,
}

fn build_cf_system(field: &Field, x0: &[f64], n: usize) -> Result<LiftedSystem, CliError> {
    Ok(match field {
        Field::OneD(f) => lift_1d(f, x0[0], n)?,
        Field::Multi(f) => {
            let ext = f.extend();
            let table = MultiIndexTable::new(ext.ambient_dim(), n)?;
            let blocks = build_blocks_multi(&ext, &table, n)?;
            let z0 = initial_lifted(&extend_state(x0, f.taus()), &table, n)?;
            assemble(blocks, table, z0)?
        }
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let method = match args.method {
        Some(m) => m,
        None => match &cfg.method {
            Some(s) => parse_method(s)?,
            None => Method::Reference,
        },
    };
    let linear_method = match args.linear_method {
        Some(m) => m,
        None => match &cfg.linear_method {
            Some(s) => parse_linear(s)?,
            None => LinMethod::RkAdaptive,
        },
    };
    let n = args.n.or(cfg.n).unwrap_or(10);
    let t_end = args.t_end.or(cfg.t_end).unwrap_or(0.5);
    let samples = args.samples.or(cfg.samples).unwrap_or(65);
    let tol = args.tol.or(cfg.tol).unwrap_or(1e-10);
    let out = args
        .out
        .or(cfg.out)
        .unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    if n < 1 {
        return Err(usage("-N must be at least 1"));
    }
    if !(t_end > 0.0) || samples < 2 {
        return Err(usage("need --t-end > 0 and --samples >= 2"));
    }
    let source = resolve_source(
        args.kuramoto2 || (!cfg.field_file.is_some() && args.field_file.is_none() && cfg.omega1.is_some()),
        args.omega1.or(cfg.omega1),
        args.ktilde.or(cfg.ktilde),
        args.theta0.or(cfg.theta0),
        &args.field_file.or(cfg.field_file),
        &args.x0.or(cfg.x0),
    )?;
    let grid = TimeGrid::uniform(t_end, samples)?;

    let (field, x0, source_name, om, kt) = match source {
        Source::Kuramoto2 {
            omega1,
            ktilde,
            theta0,
        } => (
            Field::OneD(kuramoto::reduced_field(omega1, ktilde)?),
            vec![theta0],
            "kuramoto2".to_string(),
            Some(omega1),
            Some(ktilde),
        ),
        Source::FieldFile { field, x0 } => (field, x0, "field-file".to_string(), None, None),
    };

    let (csv, meta) = match method {
        Method::Reference => {
            let traj: Trajectory<f64> = match &field {
                Field::OneD(f) => integrate_reference_1d(f, x0[0], &grid, tol)?,
                Field::Multi(f) => integrate_reference_multi(f, &x0, &grid, tol)?,
            };
            (traj.dump_csv(), traj.meta)
        }
        Method::Classical => {
            let sys: ClassicalSystem = match (&field, om, kt) {
                (_, Some(omega1), Some(ktilde)) => {
                    build_classical_kuramoto(omega1, ktilde, n, x0[0])?
                }
                (Field::OneD(f), _, _) => build_classical(&f.maclaurin(n)?, x0[0], n)?,
                (Field::Multi(_), _, _) => {
                    return Err(usage("classical method needs a 1-D field"))
                }
            };
            let traj = integrate_classical(&sys, &grid, tol)?;
            (traj.dump_csv(), traj.meta)
        }
        Method::CarlemanFourier => {
            let sys = build_cf_system(&field, &x0, n)?;
            let traj = integrate_linear(&sys, &grid, tol, linear_method.into())?;
            (traj.dump_csv(), traj.meta)
        }
    };

    let resolved = SimulateResolved {
        source: source_name,
        omega1: om,
        ktilde: kt,
        x0,
        method,
        n,
        t_end,
        samples,
        tol,
        linear_method,
    };
    write_with_sidecar(
        &out,
        &csv,
        "simulate",
        &resolved,
        serde_json::json!({
            "integrator": meta.method,
            "steps_accepted": meta.steps_accepted,
            "steps_rejected": meta.steps_rejected,
            "diverged": meta.diverged,
        }),
    )
}

#[derive(Serialize)]
struct SweepResolved {
    omega1: f64,
    ktilde: f64,
    metric: String,
    n: usize,
    theta0_min: f64,
    theta0_max: f64,
    theta0_count: usize,
    t_end: f64,
    t_count: usize,
    tol: f64,
    workers: usize,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let method = match args.method {
        Some(m) => m,
        None => match &cfg.method {
            Some(s) => parse_method(s)?,
            None => Method::CarlemanFourier,
        },
    };
    let metric = match method {
        Method::Classical => ErrorMetric::Classical,
        Method::CarlemanFourier => ErrorMetric::CarlemanFourier,
        Method::Reference => return Err(usage("sweep method must be classical or carleman-fourier")),
    };
    let omega1 = args.omega1.or(cfg.omega1).unwrap_or(1.0);
    let ktilde = args.ktilde.or(cfg.ktilde).unwrap_or(1.0);
    let n = args.n.or(cfg.n).unwrap_or(10);
    let theta0_min = args
        .theta0_min
        .or(cfg.theta0_min)
        .unwrap_or(-std::f64::consts::FRAC_PI_2);
    let theta0_max = args
        .theta0_max
        .or(cfg.theta0_max)
        .unwrap_or(std::f64::consts::FRAC_PI_2);
    let theta0_count = args.theta0_count.or(cfg.theta0_count).unwrap_or(33);
    let t_end = args.t_end.or(cfg.t_end).unwrap_or(0.5);
    let t_count = args.t_count.or(cfg.t_count).unwrap_or(65);
    let tol = args.tol.or(cfg.tol).unwrap_or(1e-10);
    let workers = args.workers.or(cfg.workers).unwrap_or(0);
    let out = args
        .out
        .or(cfg.out)
        .unwrap_or_else(|| PathBuf::from("surface.csv"));
    if theta0_count < 1 || t_count < 1 || !(t_end > 0.0) || theta0_max < theta0_min {
        return Err(usage("bad sweep axes"));
    }

    // a single-cell time axis is computed on [0, t_end] and reported at
    // t_end only
    let single_t = t_count == 1;
    let sweep = SweepConfig {
        omega1,
        ktilde,
        metric,
        n,
        theta0_axis: linspace(theta0_min, theta0_max, theta0_count),
        t_axis: if single_t {
            vec![0.0, t_end]
        } else {
            linspace(0.0, t_end, t_count)
        },
        tol,
        floor: analysis::METRIC_FLOOR,
        cap: analysis::METRIC_CAP,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut surface = pool.install(|| analysis::sweep_error_surface(&sweep))?;
    if single_t {
        surface.t_axis = vec![t_end];
        for row in &mut surface.values {
            *row = vec![*row.last().unwrap()];
        }
    }

    let resolved = SweepResolved {
        omega1,
        ktilde,
        metric: metric.as_str().to_string(),
        n,
        theta0_min,
        theta0_max,
        theta0_count,
        t_end,
        t_count,
        tol,
        workers,
    };
    write_with_sidecar(
        &out,
        &surface.dump_csv(),
        "sweep",
        &resolved,
        serde_json::json!({ "failed_rows": surface.failed_rows }),
    )
}

#[derive(Serialize)]
struct BoundResolved {
    omega1: f64,
    ktilde: f64,
    theta0: f64,
    envelope_d: f64,
    envelope_r: f64,
    tstar: f64,
    n_max: usize,
    samples: usize,
    tol: f64,
}

fn cmd_bound(args: BoundArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let omega1 = args.omega1.or(cfg.omega1).unwrap_or(1.0);
    let ktilde = args.ktilde.or(cfg.ktilde).unwrap_or(1.0);
    let theta0 = args.theta0.or(cfg.theta0).unwrap_or(1.0);
    let r = args.envelope_r.or(cfg.envelope_r).unwrap_or(0.5);
    let field = kuramoto::reduced_field(omega1, ktilde)?.refit_envelope(r)?;
    let d = match args.envelope_d.or(cfg.envelope_d) {
        Some(d) => d,
        None => field.fit_envelope(r)?.0,
    };
    let tstar = args.tstar.or(cfg.tstar).unwrap_or(0.03);
    let n_max = args.n_max.or(cfg.n_max).unwrap_or(10);
    let samples = args.samples.or(cfg.samples).unwrap_or(50);
    let tol = args.tol.or(cfg.tol).unwrap_or(1e-12);
    if !(tstar > 0.0) || n_max < 1 {
        return Err(usage("need --tstar > 0 and --n-max >= 1"));
    }

    let p = BoundParams::one_d(d, r);
    let t0 = analysis::t0_bound(&p);
    let satisfiable = tstar < t0;
    let mut rows = Vec::new();
    let n0 = if satisfiable {
        let n0 = analysis::n0_search(&p, tstar)?;
        let grid = TimeGrid::uniform(tstar, samples)?;
        let reference = integrate_reference_1d(&field, theta0, &grid, tol)?;
        for n in 1..=n_max {
            let sys = lift_1d(&field, theta0, n)?;
            let traj = integrate_linear(&sys, &grid, tol, LinearMethod::RkAdaptive)?;
            let err = analysis::error_primary(&traj, &reference, &sys.table, &[1.0])?;
            let max_error = err.iter().cloned().fold(0.0, f64::max);
            let mut pass = true;
            for (&t, &e) in grid.samples().iter().zip(&err) {
                if e > analysis::theorem_bound(&p, t, n) + 1e-9 {
                    pass = false;
                }
            }
            rows.push(serde_json::json!({
                "n": n,
                "max_error": max_error,
                "bound_at_tstar": analysis::theorem_bound(&p, tstar, n),
                "pass": pass,
            }));
        }
        Some(n0)
    } else {
        None
    };

    let resolved = BoundResolved {
        omega1,
        ktilde,
        theta0,
        envelope_d: d,
        envelope_r: r,
        tstar,
        n_max,
        samples,
        tol,
    };
    let report = serde_json::json!({
        "t0": t0,
        "tstar": tstar,
        "satisfiable": satisfiable,
        "n0": n0,
        "per_n": rows,
    });
    match args.out {
        Some(path) => write_with_sidecar(
            &path,
            &(serde_json::to_string_pretty(&report)? + "\n"),
            "bound",
            &resolved,
            serde_json::Value::Null,
        ),
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

fn cmd_n0(args: N0Args) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let d = args
        .envelope_d
        .or(cfg.envelope_d)
        .ok_or_else(|| usage("--envelope-d required"))?;
    let r = args.envelope_r.or(cfg.envelope_r).unwrap_or(0.5);
    let tstar = args
        .tstar
        .or(cfg.tstar)
        .ok_or_else(|| usage("--tstar required"))?;
    let p = BoundParams::one_d(d, r);
    let t0 = analysis::t0_bound(&p);
    let satisfiable = tstar < t0;
    let n0 = satisfiable
        .then(|| analysis::n0_search(&p, tstar))
        .transpose()?;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "t0": t0,
            "tstar": tstar,
            "satisfiable": satisfiable,
            "n0": n0,
        }))?
    );
    Ok(())
}

#[derive(Serialize)]
struct DumpResolved {
    builder: Builder,
    source: String,
    n: usize,
}

fn cmd_dump_matrix(args: DumpMatrixArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.config)?;
    let n = args.n.or(cfg.n).unwrap_or(10);
    if n < 1 {
        return Err(usage("-N must be at least 1"));
    }
    let source = resolve_source(
        args.kuramoto2,
        args.omega1.or(cfg.omega1),
        args.ktilde.or(cfg.ktilde),
        args.theta0.or(cfg.theta0),
        &args.field_file.or(cfg.field_file),
        &args.x0.or(cfg.x0),
    )?;
    let (field, x0, source_name, om, kt) = match source {
        Source::Kuramoto2 {
            omega1,
            ktilde,
            theta0,
        } => (
            Field::OneD(kuramoto::reduced_field(omega1, ktilde)?),
            vec![theta0],
            "kuramoto2".to_string(),
            Some(omega1),
            Some(ktilde),
        ),
        Source::FieldFile { field, x0 } => (field, x0, "field-file".to_string(), None, None),
    };
    let csv = match args.builder {
        Builder::Classical => match (&field, om, kt) {
            (_, Some(omega1), Some(ktilde)) => {
                build_classical_kuramoto(omega1, ktilde, n, x0[0])?.dump_csv()
            }
            (Field::OneD(f), _, _) => build_classical(&f.maclaurin(n)?, x0[0], n)?.dump_csv(),
            (Field::Multi(_), _, _) => return Err(usage("classical builder needs a 1-D field")),
        },
        Builder::CarlemanFourier => build_cf_system(&field, &x0, n)?.dump_csv(),
        Builder::Layout => {
            let m = match &field {
                Field::OneD(_) => 2,
                Field::Multi(f) => 2 * f.dim() * f.num_freqs(),
            };
            MultiIndexTable::new(m, n)?.dump_csv(n)
        }
    };
    let resolved = DumpResolved {
        builder: args.builder,
        source: source_name,
        n,
    };
    match args.out {
        Some(path) => write_with_sidecar(&path, &csv, "dump-matrix", &resolved, serde_json::Value::Null),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn cmd_normalize(args: NormalizeArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.model_file)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.model_file.display())))?;
    let model = kuramoto::parse_model_json(&text)?;
    let normalized = kuramoto::normalize(&model)?;
    let json = serde_json::to_string_pretty(&normalized)? + "\n";
    match args.out {
        Some(path) => {
            fs::write(&path, &json).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Bound(args) => cmd_bound(args),
        Cmd::N0(args) => cmd_n0(args),
        Cmd::DumpMatrix(args) => cmd_dump_matrix(args),
        Cmd::Normalize(args) => cmd_normalize(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
