//! `rta`: run docking scenarios, benchmark the safety filters and dump the
//! derived artifacts (NMT library, LQR gains, plot data).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use rta_core::filters::FilterKind;
use rta_core::sim::{
    emit_plot_data, read_records, run_benchmark_filters, run_with, write_csv, write_ndjson, ScenarioConfig, StepRecord,
    Summary,
};
use rta_core::RtaError;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;
const EXIT_BLOWUP: u8 = 4;

#[derive(Parser)]
#[command(
    name = "rta",
    version,
    about = "Run time assurance filters for CW spacecraft docking"
)]
struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its step records.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// explicit-switching, implicit-switching, explicit-optimization, implicit-optimization or none.
        #[arg(long)]
        filter: Option<FilterKind>,
        /// Output directory for records.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of control steps.
        #[arg(long)]
        duration: Option<u64>,
        /// Also write records.ndjson.
        #[arg(long)]
        ndjson: bool,
        /// Run even if the initial state violates a constraint.
        #[arg(long)]
        allow_unsafe_start: bool,
    },
    /// Time the four filters over repeated runs.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        /// Backup rollout length T (s) for the implicit filters.
        #[arg(long)]
        horizon: Option<f64>,
        /// Steps per run.
        #[arg(long)]
        duration: Option<u64>,
    },
    /// Evaluate the thrust-bound lemmas for a configuration.
    CheckParams {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write the admissible NMT library as JSON.
    EmitNmtLibrary {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write plot-ready CSV panels from a records file.
    EmitPlots {
        /// records.csv or records.ndjson from `run`.
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the synthesised primary and backup LQR gains as JSON.
    EmitGains {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the default configuration as JSON.
    EmitConfig {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<RtaError>() {
        Some(RtaError::NumericBlowup { .. }) => EXIT_BLOWUP,
        Some(
            RtaError::InvalidConfig(_)
            | RtaError::EmptyLibrary
            | RtaError::DegenerateGeometry
            | RtaError::RiccatiDivergence { .. },
        ) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    Ok(match path {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run {
            config,
            filter,
            out,
            duration,
            ndjson,
            allow_unsafe_start,
        } => {
            let mut c = load_config(config.as_deref())?;
            if let Some(f) = filter {
                c.filter = f;
            }
            if let Some(d) = duration {
                c.duration = d;
            }
            c.allow_unsafe_start |= allow_unsafe_start;
            run(&c, out.as_deref(), ndjson)
        }
        Command::Bench {
            config,
            runs,
            out,
            horizon,
            duration,
        } => {
            let mut c = load_config(config.as_deref())?;
            if let Some(h) = horizon {
                c.horizon = h;
            }
            if let Some(d) = duration {
                c.duration = d;
            }
            let report = run_benchmark_filters(&c, runs, &FilterKind::RTA)?;
            for e in &report.entries {
                println!(
                    "{:<22} mean {:>10.3e} s  std {:>10.3e} s  {:>6.2}x",
                    e.filter, e.mean_latency_s, e.std_latency_s, e.multiple
                );
            }
            write_json(&out, &report)?;
            println!("report written to {}", out.display());
            Ok(0)
        }
        Command::CheckParams { config } => {
            let c = load_config(config.as_deref())?;
            c.params.validate()?;
            c.safety.validate()?;
            let r = c.parameter_report();
            let l1 = &r.lemma1;
            println!(
                "lemma 1: (3n^2 + 2n nu1 + nu1^2) R_max + (2n + nu1) nu0 = {:.4}; u_max = {} -> {}",
                l1.rhs,
                l1.u_max,
                if l1.satisfied { "satisfied" } else { "NOT satisfied" }
            );
            let l2 = &r.lemma2;
            for (i, (w, ok)) in l2.worst.iter().zip(l2.satisfied).enumerate() {
                println!(
                    "lemma 2 term {}: worst |drift| = {:.4e} vs u_max/m = {:.4e} -> {}",
                    i + 1,
                    w,
                    l2.accel_bound,
                    if ok { "satisfied" } else { "NOT satisfied" }
                );
            }
            println!("initial state allowable: {}", r.initial_allowable);
            if let Some(w) = r.unit_warning() {
                println!("{w}");
            }
            Ok(0)
        }
        Command::EmitNmtLibrary { config, out } => {
            let c = load_config(config.as_deref())?;
            let setup = c.setup()?;
            write_json(&out, &setup.context.library)?;
            println!("{} NMTs written to {}", setup.context.library.len(), out.display());
            Ok(0)
        }
        Command::EmitPlots { records, config, out } => {
            let c = load_config(config.as_deref())?;
            let recs = read_records(&records)?;
            let files = emit_plot_data(&recs, &c.safety, &out)?;
            println!(
                "plot data written to {}",
                files.boundary.parent().unwrap_or(&out).display()
            );
            Ok(0)
        }
        Command::EmitGains { config, out } => {
            let c = load_config(config.as_deref())?;
            let setup = c.setup()?;
            #[derive(Serialize)]
            struct Gains<'a> {
                primary: &'a rta_core::controllers::LqrGains,
                backup: &'a rta_core::controllers::LqrGains,
            }
            write_json(
                &out,
                &Gains {
                    primary: &setup.primary,
                    backup: &setup.context.backup_gains,
                },
            )?;
            println!("gains written to {}", out.display());
            Ok(0)
        }
        Command::EmitConfig { out } => {
            ScenarioConfig::default().save(&out)?;
            Ok(0)
        }
    }
}

/// Runs the scenario, writes its outputs and picks the exit code.
fn run(c: &ScenarioConfig, out: Option<&Path>, ndjson: bool) -> Result<u8> {
    let setup = c.setup()?;
    if let Some(w) = c.parameter_report().unit_warning() {
        log::warn!("{w}");
    }
    let mut filter = setup.filter(c.filter, c.latch);
    let mut records: Vec<StepRecord> = Vec::with_capacity(c.duration as usize);
    let result = run_with(c, &setup, filter.as_mut(), |r| records.push(r));

    let (csv_path, ndjson_path, summary_path) = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            (
                Some(dir.join("records.csv")),
                ndjson.then(|| dir.join("records.ndjson")),
                Some(dir.join("summary.json")),
            )
        }
        None => (c.output.records_csv.clone(), c.output.records_ndjson.clone(), None),
    };
    // records are written even for a blown-up run, up to the last finite state
    if let Some(p) = &csv_path {
        write_csv(p, &records)?;
    }
    if let Some(p) = &ndjson_path {
        write_ndjson(p, &records)?;
    }
    let summary = result?;
    if let Some(p) = &summary_path {
        write_json(p, &summary)?;
    }
    report(&summary);
    if let Some(p) = &csv_path {
        println!("records written to {}", p.display());
    }

    if summary.violates() && summary.filter != FilterKind::None {
        eprintln!("safety violation beyond tolerance with filter {}", summary.filter);
        return Ok(EXIT_VIOLATION);
    }
    Ok(0)
}

fn report(s: &Summary) {
    println!("filter: {}", s.filter);
    println!("steps: {} ({:?})", s.steps, s.termination);
    println!(
        "final state: r = {:.3} m, v = {:.4} m/s",
        s.final_state.r_norm(),
        s.final_state.v_norm()
    );
    println!(
        "min phi: speed {:.4e}, vx {:.4e}, vy {:.4e}, vz {:.4e}",
        s.min_phi[0], s.min_phi[1], s.min_phi[2], s.min_phi[3]
    );
    let m = &s.mechanisms;
    println!(
        "mechanisms: passthrough {}, backup {}, qp-modified {}, qp-fallback {}; transitions {}",
        m.passthrough, m.switched_to_backup, m.qp_modified, m.qp_infeasible_fallback, s.transitions
    );
    println!("mean filter latency: {:.3e} s", s.mean_latency_s);
    match &s.first_violation {
        Some(v) => println!(
            "violation: {} = {:.4e} at step {}",
            v.constraint.name(),
            v.value,
            v.step
        ),
        None => println!("violation: none"),
    }
}
