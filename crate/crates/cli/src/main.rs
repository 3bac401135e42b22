mod error;
mod fmt;
mod manifest;
mod report;
mod stages;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use geopattern::longterm::RadiusEstimate;
use geopattern::PipelineConfig;

use error::{CliError, EXIT_CONFIG};
use manifest::{write_atomic, Driver, Outcome, Stage};
use report::{emit_report, ReportFormat, ReportKind};
use stages::LongtermSummary;

#[derive(Debug, Parser)]
#[command(name = "geopattern", version, about = "Propagation and long-term impact patterns in traffic and weather events")]
struct Cli {
    /// Flat `key = value` config file; relative paths in it resolve against its directory.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Sets rng_seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    jobs: usize,
    /// Directory for artifacts, reports and the run manifest.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Sets traffic_path.
    #[arg(long, global = true, value_name = "PATH")]
    traffic: Option<PathBuf>,
    /// Sets weather_path.
    #[arg(long, global = true, value_name = "PATH")]
    weather: Option<PathBuf>,
    /// Sets stations_path.
    #[arg(long, global = true, value_name = "PATH")]
    stations: Option<PathBuf>,
    /// Sets observations_path.
    #[arg(long, global = true, value_name = "PATH")]
    observations: Option<PathBuf>,
    /// Sets any config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Prints the effective config and exits.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, validate and deduplicate inputs; build the station index.
    Ingest,
    /// Cluster raw observations into weather thresholds.
    DeriveThresholds,
    /// Child-parent relations between entities.
    ExtractRelations,
    /// Relation trees grouped into city forests.
    BuildForest,
    /// Frequent propagation patterns per city.
    MineShort,
    /// Group states by their pattern sets.
    ClusterRegions,
    /// Long-entity threshold and extraction (runs the long-term stage).
    ExtractLong,
    /// Vicinity radius from DBSCAN parameters (runs the long-term stage).
    EstimateRadius,
    /// Merging, vicinity counts and tests T1-T6 per bucket.
    MineLong,
    /// Write reports; with --kind, also print one report.
    Report {
        #[arg(long, value_enum)]
        kind: Option<ReportKind>,
        #[arg(long, value_enum, default_value = "csv")]
        format: ReportFormat,
    },
    /// Every stage in order.
    RunAll,
}

fn resolve_relative(p: &mut Option<PathBuf>, base: &Path) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply_kv_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.traffic_path, &mut cfg.weather_path, &mut cfg.stations_path, &mut cfg.observations_path] {
            resolve_relative(p, base);
        }
    }
    for kv in &cli.sets {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k, v)?;
    }
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    let paths = [
        (&cli.traffic, &mut cfg.traffic_path),
        (&cli.weather, &mut cfg.weather_path),
        (&cli.stations, &mut cfg.stations_path),
        (&cli.observations, &mut cfg.observations_path),
    ];
    for (flag, field) in paths {
        if let Some(p) = flag {
            *field = Some(p.clone());
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_stage(d: &mut Driver, cfg: &PipelineConfig, stage: Stage) -> Result<(), CliError> {
    let inputs = stages::inputs(stage, cfg)?;
    let outcome = d.run_stage(stage, &inputs, |d| stages::execute(stage, d, cfg))?;
    let status = match outcome {
        Outcome::Ran => "done",
        Outcome::Cached => "cached",
    };
    eprintln!("{:<10} {status}", stage.as_str());
    Ok(())
}

fn longterm_summary(d: &Driver) -> Result<LongtermSummary, CliError> {
    Ok(serde_json::from_slice(&std::fs::read(d.path(stages::LONGTERM))?)?)
}

fn print_estimate(s: &LongtermSummary) {
    match &s.estimate {
        Some(RadiusEstimate { eps_m, min_pts, radius_m, clusters, s1, s2 }) => println!(
            "eps_m={} min_pts={min_pts} radius_m={} clusters={clusters} s1={s1} s2={s2}",
            fmt::sig6(*eps_m),
            fmt::sig6(*radius_m)
        ),
        None => println!("radius_m={} (from config)", fmt::sig6(s.radius_m)),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    if cli.print_config {
        print!("{}", cfg.to_kv_string());
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(CliError::config("no subcommand given; see --help"));
    };
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    let mut d = Driver::open(&cli.out, cfg.to_kv_string())?;
    match command {
        Command::Ingest => run_stage(&mut d, &cfg, Stage::Ingest)?,
        Command::DeriveThresholds => {
            let path = cfg
                .observations_path
                .as_deref()
                .ok_or_else(|| CliError::config("observations_path is not set"))?;
            let parsed = stages::read_observations(path)?;
            let th = stages::thresholds_from(&parsed.records, cfg.rng_seed)?;
            let mut bytes = serde_json::to_vec_pretty(&th)?;
            bytes.push(b'\n');
            write_atomic(&d.path(stages::THRESHOLDS), &bytes)?;
            std::io::stdout().write_all(&bytes)?;
        }
        Command::ExtractRelations => run_stage(&mut d, &cfg, Stage::Relations)?,
        Command::BuildForest => run_stage(&mut d, &cfg, Stage::Forest)?,
        Command::MineShort => run_stage(&mut d, &cfg, Stage::Mine)?,
        Command::ClusterRegions => run_stage(&mut d, &cfg, Stage::Regions)?,
        Command::ExtractLong => {
            run_stage(&mut d, &cfg, Stage::Longterm)?;
            let s = longterm_summary(&d)?;
            println!(
                "threshold_min={} long_entities={} merged={}",
                fmt::sig6(s.threshold_s / 60.0),
                s.long_entities,
                s.merged_entities
            );
        }
        Command::EstimateRadius => {
            run_stage(&mut d, &cfg, Stage::Longterm)?;
            print_estimate(&longterm_summary(&d)?);
        }
        Command::MineLong => {
            run_stage(&mut d, &cfg, Stage::Longterm)?;
            std::io::stdout().write_all(&std::fs::read(d.path(stages::IMPACT))?)?;
        }
        Command::Report { kind, format } => {
            run_stage(&mut d, &cfg, Stage::Report)?;
            if let Some(kind) = kind {
                std::io::stdout().write_all(&emit_report(&d, *kind, *format)?)?;
            }
        }
        Command::RunAll => {
            for stage in Stage::ALL {
                run_stage(&mut d, &cfg, stage)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
