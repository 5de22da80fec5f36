//! Command-line front end: sweeps, operating-point optimization, the
//! active-WCP reference curve, oracle verification, and distribution
//! dumps, all emitted as plot-ready CSV with a resolved-config header.

mod config;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use fpqkd_core::{keyrate, ChannelParams, ProtocolParams, SourceParams, Tolerance};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

/// Environment variable naming a default config file.
const CONFIG_ENV: &str = "FPQKD_CONFIG";

const USAGE_EXIT: u8 = 2;
const COMPUTE_EXIT: u8 = 1;

#[derive(Parser)]
#[command(name = "fpqkd", version, about = "Fully passive PDC QKD simulator")]
struct Cli {
    /// Config file with key = value lines; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Pair parameter lambda; repeat for several curves.
    #[arg(long = "lambda", global = true)]
    lambda: Vec<f64>,
    #[arg(long, global = true)]
    lambda_min: Option<f64>,
    #[arg(long, global = true)]
    lambda_max: Option<f64>,
    #[arg(long, global = true)]
    lambda_steps: Option<usize>,
    #[arg(long, global = true)]
    distance_min: Option<f64>,
    #[arg(long, global = true)]
    distance_max: Option<f64>,
    #[arg(long, global = true)]
    distance_step: Option<f64>,
    /// Pair-number truncation order (default: automatic).
    #[arg(long, global = true)]
    n_cut: Option<usize>,
    /// Error-correction inefficiency.
    #[arg(long, global = true)]
    f: Option<f64>,
    #[arg(long, global = true)]
    pulse_rate: Option<f64>,
    #[arg(long, global = true)]
    eta_h: Option<f64>,
    #[arg(long, global = true)]
    eta_d: Option<f64>,
    /// Dark count probability for both the herald and receiver detectors.
    #[arg(long, global = true)]
    dark: Option<f64>,
    #[arg(long, global = true)]
    e_d: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Key rate and throughput over a (lambda, distance) grid.
    Sweep,
    /// Throughput-optimal lambda per distance.
    Optimize,
    /// Optimal actively modulated weak-coherent-pulse reference curve.
    Baseline,
    /// Compare the production source model against the exact expansion.
    Verify,
    /// Dump the per-class signal distributions in both bases.
    Dists,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let cfg = match resolve_config(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(USAGE_EXIT);
        }
    };

    match execute(&cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(USAGE_EXIT)
        }
        Err(CliError::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(COMPUTE_EXIT)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(COMPUTE_EXIT)
        }
    }
}

enum CliError {
    Usage(String),
    Compute(String),
    Io(io::Error),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::default();

    let path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    if let Some(path) = path {
        let body = std::fs::read_to_string(&path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        cfg.apply_file(&body, &path.display().to_string())?;
    }

    let o = &cli.overrides;
    if !o.lambda.is_empty() {
        cfg.lambdas = o.lambda.clone();
        cfg.lambda_scan = None;
    }
    if o.lambda_min.is_some() || o.lambda_max.is_some() || o.lambda_steps.is_some() {
        let (lo, hi, steps) = cfg.lambda_scan.unwrap_or((1e-3, 0.3, 40));
        cfg.lambda_scan = Some((
            o.lambda_min.unwrap_or(lo),
            o.lambda_max.unwrap_or(hi),
            o.lambda_steps.unwrap_or(steps),
        ));
    }
    if let Some(v) = o.distance_min {
        cfg.distance_min = v;
    }
    if let Some(v) = o.distance_max {
        cfg.distance_max = v;
    }
    if let Some(v) = o.distance_step {
        cfg.distance_step = v;
    }
    if let Some(v) = o.n_cut {
        cfg.n_cut = Some(v);
    }
    if let Some(v) = o.f {
        cfg.f = v;
    }
    if let Some(v) = o.pulse_rate {
        cfg.pulse_rate = v;
    }
    if let Some(v) = o.eta_h {
        cfg.eta_h = v;
    }
    if let Some(v) = o.eta_d {
        cfg.eta_d = v;
    }
    if let Some(v) = o.dark {
        cfg.dark_h = v;
        cfg.dark_b = v;
    }
    if let Some(v) = o.e_d {
        cfg.e_d = v;
    }
    if let Some(v) = o.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = &o.out {
        cfg.out = Some(v.clone());
    }
    Ok(cfg)
}

fn execute(command: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    let mut sink: BufWriter<Box<dyn Write>> = BufWriter::new(match &cfg.out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout()),
    });
    match command {
        Command::Sweep => sweep(cfg, &mut sink),
        Command::Optimize => optimize(cfg, &mut sink),
        Command::Baseline => baseline(cfg, &mut sink),
        Command::Verify => verify(cfg, &mut sink),
        Command::Dists => dists(cfg, &mut sink),
    }?;
    sink.flush()?;
    Ok(())
}

fn source_for(cfg: &RunConfig, lambda: f64) -> Result<SourceParams, CliError> {
    let result = match cfg.n_cut {
        // A hand-picked truncation order is taken at face value; only the
        // automatic choice polices the tail against the default budget.
        Some(n) => {
            let relaxed = Tolerance::new(1e-12, 1e-9, 9e-4).expect("legal tolerance");
            SourceParams::with_tolerance(lambda, cfg.eta_h, cfg.dark_h, n, relaxed)
        }
        None => SourceParams::auto_cut(lambda, cfg.eta_h, cfg.dark_h, 10, Tolerance::default()),
    };
    result.map_err(|e| CliError::Compute(format!("lambda = {lambda}: {e}")))
}

fn channel_for(cfg: &RunConfig) -> Result<ChannelParams, CliError> {
    ChannelParams::new(cfg.alpha, 0.0, cfg.eta_d, cfg.dark_b, cfg.e_d)
        .map_err(|e| CliError::Compute(e.to_string()))
}

fn protocol_for(cfg: &RunConfig) -> ProtocolParams {
    ProtocolParams {
        q: cfg.q,
        f: cfg.f,
        pulse_rate: cfg.pulse_rate,
        keygen_classes: cfg.keygen.clone(),
    }
}

fn sweep(cfg: &RunConfig, w: &mut impl Write) -> Result<(), CliError> {
    let lambdas = cfg.lambda_values().map_err(CliError::Usage)?;
    let grid = cfg.distance_grid().map_err(CliError::Usage)?;
    let channel = channel_for(cfg)?;
    let protocol = protocol_for(cfg);

    write!(w, "{}", cfg.comment_block("sweep"))?;
    let mut header = "distance_km,lambda,per_pulse_rate,per_herald_rate,throughput_bps".to_string();
    for class in &cfg.keygen {
        let c = class.column_key();
        header.push_str(&format!(",w_{c},q_{c},e_{c},p1y1_{c},e1_{c},r_{c}"));
    }
    writeln!(w, "{header}")?;

    for &lambda in &lambdas {
        let src = source_for(cfg, lambda)?;
        for &distance in &grid {
            let point = keyrate::total_rate(&src, &channel.with_distance(distance), &protocol)
                .map_err(|e| {
                    CliError::Compute(format!("lambda = {lambda}, L = {distance} km: {e}"))
                })?;
            let mut row = format!(
                "{distance},{lambda},{:e},{:e},{:e}",
                point.per_pulse_rate, point.per_herald_rate, point.throughput
            );
            for report in &point.classes {
                row.push_str(&format!(
                    ",{:e},{:e},{:e},{:e},{:e},{:e}",
                    report.weight,
                    report.gain,
                    report.qber,
                    report.p1y1_lower,
                    report.e1_upper,
                    report.rate
                ));
            }
            writeln!(w, "{row}")?;
        }
    }
    Ok(())
}

fn optimize(cfg: &RunConfig, w: &mut impl Write) -> Result<(), CliError> {
    let grid = cfg.distance_grid().map_err(CliError::Usage)?;
    let (lo, hi, _) = cfg.lambda_scan.unwrap_or((1e-3, 0.3, 40));
    let channel = channel_for(cfg)?;
    let protocol = protocol_for(cfg);
    let template = source_for(cfg, lo)?;

    write!(w, "{}", cfg.comment_block("optimize"))?;
    writeln!(
        w,
        "distance_km,lambda_opt,mean_pairs_opt,per_pulse_rate,per_herald_rate,throughput_bps,all_zero"
    )?;
    for &distance in &grid {
        let opt = keyrate::optimize_lambda(&template, &channel.with_distance(distance), &protocol, (lo, hi))
            .map_err(|e| CliError::Compute(format!("L = {distance} km: {e}")))?;
        writeln!(
            w,
            "{distance},{:e},{:e},{:e},{:e},{:e},{}",
            opt.lambda,
            2.0 * opt.lambda,
            opt.point.per_pulse_rate,
            opt.point.per_herald_rate,
            opt.point.throughput,
            opt.all_zero
        )?;
    }
    Ok(())
}

fn baseline(cfg: &RunConfig, w: &mut impl Write) -> Result<(), CliError> {
    let grid = cfg.distance_grid().map_err(CliError::Usage)?;
    let channel = channel_for(cfg)?;
    let protocol = protocol_for(cfg);

    write!(w, "{}", cfg.comment_block("baseline"))?;
    writeln!(w, "distance_km,mu_opt,per_pulse_rate")?;
    for &distance in &grid {
        let (mu, rate) =
            keyrate::optimal_wcp_baseline(&channel.with_distance(distance), &protocol, (1e-3, 2.0));
        writeln!(w, "{distance},{:e},{:e}", mu, rate)?;
    }
    Ok(())
}

/// Oracle equivalence threshold for `verify`.
const VERIFY_TOL: f64 = 1e-9;

fn verify(cfg: &RunConfig, w: &mut impl Write) -> Result<(), CliError> {
    let lambda = *cfg
        .lambdas
        .first()
        .ok_or_else(|| CliError::Usage("lambda list is empty".into()))?;
    let n_cut = cfg.n_cut.unwrap_or(4);
    let tolerance = Tolerance::new(1e-12, 1e-9, 9e-4).expect("legal verify tolerance");
    let src = SourceParams::with_tolerance(lambda, cfg.eta_h, cfg.dark_h, n_cut, tolerance)
        .map_err(|e| CliError::Compute(format!("lambda = {lambda}: {e}")))?;
    let report = fpqkd_core::oracle::equivalence_report(&src)
        .map_err(|e| CliError::Compute(e.to_string()))?;

    write!(w, "{}", cfg.comment_block("verify"))?;
    writeln!(w, "class,max_discrepancy_z,max_discrepancy_x")?;
    let mut worst = 0.0f64;
    for d in &report {
        writeln!(w, "{},{:e},{:e}", d.class.column_key(), d.max_z, d.max_x)?;
        worst = worst.max(d.max_z).max(d.max_x);
    }
    writeln!(w, "# worst = {worst:e}")?;
    if worst > VERIFY_TOL {
        return Err(CliError::Compute(format!(
            "oracle discrepancy {worst:e} exceeds {VERIFY_TOL:e}"
        )));
    }
    Ok(())
}

fn dists(cfg: &RunConfig, w: &mut impl Write) -> Result<(), CliError> {
    let lambda = *cfg
        .lambdas
        .first()
        .ok_or_else(|| CliError::Usage("lambda list is empty".into()))?;
    let src = source_for(cfg, lambda)?;
    let z = fpqkd_core::signal_distributions(&src);
    let x = fpqkd_core::signal_distributions_x(&src);

    write!(w, "{}", cfg.comment_block("dists"))?;
    writeln!(w, "# tail = {:e}", src.tail_mass())?;
    writeln!(w, "class,basis,m,k,prob")?;
    for (basis, set) in [("z", &z), ("x", &x)] {
        for dist in set {
            for (m, k) in dist.grid().iter() {
                writeln!(
                    w,
                    "{},{basis},{m},{k},{:e}",
                    dist.class().column_key(),
                    dist.prob(m, k)
                )?;
            }
        }
    }
    Ok(())
}
