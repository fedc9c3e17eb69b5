//! Command-line front end for the formation simulator: run scenarios,
//! price consensus traffic under different medium-access protocols, render
//! trajectory plots, sweep seeds, and validate configs.

mod output;
mod overrides;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use otaform_core::dynamics::SimulationError;
use otaform_core::metrics::compare_protocols;
use otaform_core::simulate;

/// Exit codes are part of the interface; scripts branch on them.
pub const EXIT_REACHED: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_SAFETY: u8 = 2;
pub const EXIT_LOCAL_MINIMUM: u8 = 3;
pub const EXIT_IO: u8 = 4;

/// Failure category, mapped onto the process exit code. Runs that finish
/// without reaching the formation are not errors; `run` folds those into its
/// exit code directly.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable config syntax, failed validation, bad override syntax, or
    /// malformed trajectory data.
    Invalid(String),
    /// The simulation aborted because two agents closed to the hard radius.
    Safety(String),
    /// Filesystem trouble reading inputs or writing artifacts.
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Safety(_) => EXIT_SAFETY,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m) | CliError::Safety(m) | CliError::Io(m) => m,
        }
    }
}

/// Simulation failures other than safety aborts all trace back to the input.
fn sim_error(e: SimulationError) -> CliError {
    match e {
        SimulationError::Dynamics(d) => CliError::Safety(d.to_string()),
        other => CliError::Invalid(other.to_string()),
    }
}

#[derive(Parser)]
#[command(
    name = "otaform",
    version,
    about = "Formation control over a superimposing wireless channel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Scenario source plus overrides, shared by every subcommand.
#[derive(Args)]
struct ConfigArgs {
    /// TOML scenario file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Bundled scenario: hexagon6, square4-symmetric, or square4-random.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Override one config entry by dotted path, e.g. --set agents.gain_a=2.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seed override; applied after every --set.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write trajectory artifacts.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Directory for trajectory.csv, metrics.txt, and manifest.txt.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Also render plot.svg into the output directory.
        #[arg(long, requires = "out")]
        plot: bool,
    },
    /// Price the consensus traffic under three medium-access protocols.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        /// Directory for compare.txt.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Reference-variance level that counts as agreement.
        #[arg(long, default_value_t = 0.01)]
        threshold: f64,
        /// Unicast transmissions charged per arc per step.
        #[arg(long, default_value_t = 1)]
        messages_per_arc: usize,
    },
    /// Render a trajectory CSV as an SVG picture.
    Plot {
        /// A trajectory.csv produced by `run`.
        #[arg(long, value_name = "PATH")]
        trajectory: PathBuf,
        /// Output SVG file.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Scenario source; when given, formation targets are drawn too.
        #[command(flatten)]
        config: ConfigArgs,
        /// Draw danger spans with the same stroke as the rest of the path.
        #[arg(long)]
        no_danger_marks: bool,
    },
    /// Run one scenario under consecutive seeds and tabulate outcomes.
    Batch {
        #[command(flatten)]
        config: ConfigArgs,
        /// How many consecutive seeds to run, starting at the config seed.
        #[arg(long, default_value_t = 10)]
        runs: u64,
        /// Directory for batch.txt.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Check a scenario config and report the first problem found.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here but are not failures.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_REACHED,
                _ => EXIT_INVALID,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run { config, out, plot } => cmd_run(config, out.as_deref(), *plot),
        Command::Compare {
            config,
            out,
            threshold,
            messages_per_arc,
        } => cmd_compare(config, out.as_deref(), *threshold, *messages_per_arc),
        Command::Plot {
            trajectory,
            out,
            config,
            no_danger_marks,
        } => cmd_plot(trajectory, out, config, *no_danger_marks),
        Command::Batch { config, runs, out } => cmd_batch(config, *runs, out.as_deref()),
        Command::Validate { config } => cmd_validate(config),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn write_artifact(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn cmd_run(args: &ConfigArgs, out: Option<&Path>, plot: bool) -> Result<u8, CliError> {
    let config = overrides::resolve(args)?;
    let record = simulate(&config).map_err(sim_error)?;
    let summary = output::summarize(&config, &record);
    let metrics = output::run_metrics_text(&config, &record, &summary);
    print!("{metrics}");
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_artifact(
            &dir.join("trajectory.csv"),
            &output::trajectory_csv(&record),
        )?;
        write_artifact(&dir.join("metrics.txt"), &metrics)?;
        let mut artifacts = vec!["trajectory.csv", "metrics.txt"];
        if plot {
            let formation = config.formation();
            let targets = formation.targets(record.consensus_centroid(&formation));
            let svg = plot::render_svg(
                &plot::Trajectory::from_record(&record),
                Some(&targets),
                true,
            );
            write_artifact(&dir.join("plot.svg"), &svg)?;
            artifacts.push("plot.svg");
        }
        write_artifact(
            &dir.join("manifest.txt"),
            &output::manifest_text(&config, &artifacts),
        )?;
    }
    Ok(summary.outcome.exit_code())
}

fn cmd_compare(
    args: &ConfigArgs,
    out: Option<&Path>,
    threshold: f64,
    messages_per_arc: usize,
) -> Result<u8, CliError> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(CliError::Invalid(
            "--threshold must be finite and positive".to_string(),
        ));
    }
    if messages_per_arc == 0 {
        return Err(CliError::Invalid(
            "--messages-per-arc must be at least 1".to_string(),
        ));
    }
    let config = overrides::resolve(args)?;
    let report = compare_protocols(&config, threshold, messages_per_arc).map_err(sim_error)?;
    let text = output::compare_text(&report, threshold, messages_per_arc);
    print!("{text}");
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_artifact(&dir.join("compare.txt"), &text)?;
    }
    Ok(EXIT_REACHED)
}

fn cmd_plot(
    trajectory_path: &Path,
    out: &Path,
    args: &ConfigArgs,
    no_danger_marks: bool,
) -> Result<u8, CliError> {
    let text = fs::read_to_string(trajectory_path)
        .map_err(|e| CliError::Io(format!("{}: {e}", trajectory_path.display())))?;
    let trajectory = plot::Trajectory::parse_csv(&text)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", trajectory_path.display())))?;
    let targets = if args.config.is_some() || args.preset.is_some() {
        let config = overrides::resolve(args)?;
        if config.agents.n != trajectory.n() {
            return Err(CliError::Invalid(format!(
                "config describes {} agents but the trajectory has {}",
                config.agents.n,
                trajectory.n()
            )));
        }
        let formation = config.formation();
        // Recover the agreed centroid from the final recorded references.
        let final_refs = trajectory
            .references
            .last()
            .expect("parse_csv rejects empty data");
        let mut sum = otaform_core::Vec2::ZERO;
        for (i, &r) in final_refs.iter().enumerate() {
            sum += r - formation.displacement(i);
        }
        Some(formation.targets(sum / final_refs.len() as f64))
    } else {
        None
    };
    let svg = plot::render_svg(&trajectory, targets.as_deref(), !no_danger_marks);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    write_artifact(out, &svg)?;
    Ok(EXIT_REACHED)
}

fn cmd_batch(args: &ConfigArgs, runs: u64, out: Option<&Path>) -> Result<u8, CliError> {
    if runs == 0 {
        return Err(CliError::Invalid("--runs must be at least 1".to_string()));
    }
    let base = overrides::resolve(args)?;
    let mut lines = Vec::new();
    let mut tally = [0usize; 5];
    for k in 0..runs {
        let mut config = base.clone();
        config.seed = base.seed.wrapping_add(k);
        match simulate(&config) {
            Ok(record) => {
                let summary = output::summarize(&config, &record);
                tally[summary.outcome as usize] += 1;
                lines.push(format!(
                    "seed={} outcome={} formation_error={} agreement_step={}",
                    config.seed,
                    summary.outcome.label(),
                    summary.formation_error,
                    output::fmt_opt_step(summary.agreement),
                ));
            }
            // Per-seed failures are data, not reasons to stop the sweep.
            Err(SimulationError::Dynamics(e)) => {
                tally[3] += 1;
                lines.push(format!(
                    "seed={} outcome=safety-violation detail={e}",
                    config.seed
                ));
            }
            Err(SimulationError::SamplingExhausted { .. }) => {
                tally[4] += 1;
                lines.push(format!("seed={} outcome=sampling-exhausted", config.seed));
            }
            Err(other) => return Err(sim_error(other)),
        }
    }
    lines.push(format!(
        "summary runs={runs} formation-reached={} local-minimum={} not-settled={} \
         safety-violation={} sampling-exhausted={}",
        tally[0], tally[1], tally[2], tally[3], tally[4],
    ));
    let text = lines.join("\n") + "\n";
    print!("{text}");
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_artifact(&dir.join("batch.txt"), &text)?;
    }
    Ok(EXIT_REACHED)
}

fn cmd_validate(args: &ConfigArgs) -> Result<u8, CliError> {
    let config = overrides::resolve(args)?;
    println!(
        "config ok: {} agents, {} updates over {}s, seed {}",
        config.agents.n,
        config.update_count(),
        config.integrator.duration,
        config.seed
    );
    Ok(EXIT_REACHED)
}
