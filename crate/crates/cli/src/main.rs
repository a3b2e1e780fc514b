//! `araps`: run the disinformation-war case study stage by stage.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use araps::baid::{examples, validate_proper};
use araps::pipeline::{
    report, run_sweep, summarize, PipelineConfig, PipelineError, Profile, Runner, Stage, Status, SweepSpec,
    CONFIG_ENV,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "araps", version, about = "Adversarial risk analysis by augmented probability simulation")]
struct Cli {
    /// Directory holding the run's outputs, config and manifest.
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,
    /// Config file. Without it the run directory's own config.toml is used
    /// when present, else the profile defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set case.omega_d2=1.3`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// desk or paper.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Worker threads for grid parallelism (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the configuration and the case-study diagram, then list stage status.
    Validate,
    /// Run one stage, or `all` of them in solver order.
    Run {
        stage: String,
        /// Re-run even when the outputs are current.
        #[arg(long)]
        force: bool,
    },
    /// Re-run the stages a parameter change affects, once per value tuple.
    Sweep {
        /// Case parameters, comma separated (e.g. `t_d,t_a`).
        params: String,
        /// Comma-separated values; tuples joined by `:` (e.g. `1:1.2,1:1`).
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Last stage to run for each value.
        #[arg(long, default_value = "daps2")]
        until: String,
        #[arg(long)]
        force: bool,
    },
    /// Write summary.json for a completed run and print it.
    Summarize,
    /// Print a markdown report of a completed run.
    Report {
        /// Write the report here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let profile = cli.profile.as_deref().map(str::parse::<Profile>).transpose()?;
    let saved = cli.run_dir.join("config.toml");
    let path = match &cli.config {
        Some(p) => Some(p.clone()),
        None if profile.is_none() && saved.exists() => Some(saved),
        None => None,
    };
    if let Some(p) = &path {
        log::info!("config from {}", p.display());
    }
    PipelineConfig::load(path.as_deref(), profile, &cli.overrides)
}

fn validate(cli: &Cli) -> Result<(), PipelineError> {
    let config = load_config(cli)?;
    let diagram = validate_proper(&examples::disinformation());
    if !diagram.is_proper() {
        return Err(PipelineError::Validation(format!("case-study diagram: {diagram:?}")));
    }
    println!("configuration valid ({:?} profile, seed {})", config.profile, config.seed);
    if cli.run_dir.join(araps::pipeline::MANIFEST_FILE).exists() {
        let runner = Runner::new(&cli.run_dir, config)?;
        for stage in Stage::ALL {
            let status = match runner.status(stage) {
                Status::Current => "current".to_string(),
                Status::Missing => "missing".to_string(),
                Status::Stale(why) => format!("stale: {why}"),
            };
            println!("{:<9} {status}", stage.name());
        }
    }
    Ok(())
}

fn run(cli: &Cli, stage: &str, force: bool) -> Result<(), PipelineError> {
    let config = load_config(cli)?;
    let mut runner = Runner::new(&cli.run_dir, config)?;
    if stage.eq_ignore_ascii_case("all") {
        let solution = runner.run_all(force)?;
        let order: Vec<String> = solution.order().into_iter().map(|(_, d)| d.to_string()).collect();
        println!("solved {}", order.join(", "));
        let summary = summarize(&cli.run_dir)?;
        if let Some(first) = summary.d1_star {
            println!("d1* = {:.3}", first.d1_star);
        }
        return Ok(());
    }
    let stage: Stage = stage.parse()?;
    if runner.ensure(stage, force)? {
        println!("{stage}: done");
    } else {
        println!("{stage}: up to date");
    }
    Ok(())
}

fn sweep(cli: &Cli, params: &str, values: &str, until: &str, force: bool) -> Result<(), PipelineError> {
    let config = load_config(cli)?;
    let spec = SweepSpec::parse(params, values)?;
    let until: Stage = until.parse()?;
    let rows = run_sweep(&cli.run_dir, &config, &spec, until, force)?;
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
    println!("{},deploy_area,no_attack_area,d1_star", spec.params.join(","));
    for row in rows {
        let values: Vec<String> = row.values.iter().map(|v| v.to_string()).collect();
        println!(
            "{},{},{},{}",
            values.join(","),
            fmt(row.deploy_area),
            fmt(row.no_attack_area),
            fmt(row.d1_star)
        );
    }
    Ok(())
}

fn write_report(dir: &Path, output: Option<&Path>) -> Result<(), PipelineError> {
    let text = report(&summarize(dir)?);
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| PipelineError::Artifact(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Validate => validate(cli),
        Command::Run { stage, force } => run(cli, stage, *force),
        Command::Sweep {
            params,
            values,
            until,
            force,
        } => sweep(cli, params, values, until, *force),
        Command::Summarize => {
            let s = summarize(&cli.run_dir)?;
            println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
            Ok(())
        }
        Command::Report { output } => write_report(&cli.run_dir, output.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("worker pool: {e}");
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
