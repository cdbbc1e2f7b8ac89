use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use risq::channel::{channels_from_scenario, coherence_report};
use risq::harness::{
    aggregate, export, export_bytes, generate_scenario, run_ablation, run_experiment, run_sweep,
    ExperimentSpec, ExportFormat, Method, ResultRow,
};

#[derive(Parser)]
#[command(
    name = "risq",
    about = "Max-min rate optimization of a double-sided RIS \
with a variational quantum graph circuit",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML experiment config; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario seed base.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Measurement shots per circuit evaluation.
    #[arg(long)]
    shots: Option<u64>,
    /// Stochastic gate/readout noise.
    #[arg(long, value_parser = ["on", "off"])]
    noise: Option<String>,
    /// Infinite-shot mode: decode from exact probabilities.
    #[arg(long)]
    exact: bool,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"], default_value = "csv")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method on seeded scenarios.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated subset of qgcn,gnn,gd,random,fixed,oracle.
        #[arg(long)]
        methods: Option<String>,
    },
    /// Paired three-way ablation (full / no virtual spacing / no double-sided).
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Element-count sweep.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated element counts.
        #[arg(long, default_value = "3,4,5,6")]
        n_values: String,
    },
    /// Brute-force grid optimum on each seeded scenario.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Coherence-block overhead feasibility and delayed-adaptation figure.
    Report {
        /// Pilot/estimation time, ms.
        #[arg(long, default_value_t = 0.1)]
        t_pilot_ms: f64,
        /// Optimization time, ms.
        #[arg(long, default_value_t = 0.5)]
        t_opt_ms: f64,
        /// PIN-diode switching time, ms.
        #[arg(long, default_value_t = 0.01)]
        t_switch_ms: f64,
        /// Coherence block length, ms.
        #[arg(long, default_value_t = 1.0)]
        t_coherence_ms: f64,
        /// Doppler spread, Hz.
        #[arg(long, default_value_t = 100.0)]
        doppler_hz: f64,
    },
}

fn load_spec(common: &CommonArgs) -> risq::Result<ExperimentSpec> {
    let mut spec = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| risq::Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            ExperimentSpec::from_toml(&text)?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = common.seed {
        spec.scenario_seed_base = seed;
    }
    if let Some(runs) = common.runs {
        spec.n_runs = runs;
    }
    if let Some(shots) = common.shots {
        spec.shots = shots;
    }
    if let Some(noise) = &common.noise {
        spec.noise = noise == "on";
    }
    if common.exact {
        spec.exact = true;
    }
    spec.validate()?;
    Ok(spec)
}

fn emit(rows: &[ResultRow], common: &CommonArgs) -> risq::Result<()> {
    let format = ExportFormat::parse(&common.format)?;
    match &common.out {
        Some(path) => export(rows, path, format),
        None => {
            let bytes = export_bytes(rows, format)?;
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn print_method_summaries(rows: &[ResultRow]) {
    let mut methods: Vec<String> = rows.iter().map(|r| r.method.clone()).collect();
    methods.sort();
    methods.dedup();
    for method in methods {
        let cell: Vec<&ResultRow> = rows.iter().filter(|r| r.method == method).collect();
        let rates: Vec<f64> = cell.iter().map(|r| r.min_rate_bpshz).collect();
        let convs: Vec<usize> = cell.iter().map(|r| r.convergence_epoch).collect();
        let agg = aggregate(&method, &rates, &convs);
        eprintln!(
            "{}: mean min-rate {:.4} bps/Hz (std {:.4}, 95% CI +-{:.4}, n = {})",
            agg.label, agg.mean_min_rate, agg.std_min_rate, agg.ci95_half_width, agg.n
        );
    }
}

fn real_main() -> risq::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { common, methods } => {
            let mut spec = load_spec(&common)?;
            if let Some(list) = methods {
                spec.methods = list
                    .split(',')
                    .map(Method::parse)
                    .collect::<risq::Result<Vec<_>>>()?;
            }
            let rows = run_experiment(&spec)?;
            print_method_summaries(&rows);
            emit(&rows, &common)
        }
        Command::Ablate { common } => {
            let spec = load_spec(&common)?;
            let (rows, aggregates) = run_ablation(&spec)?;
            for agg in &aggregates {
                eprintln!(
                    "{}: mean min-rate {:.4} bps/Hz (std {:.4}, 95% CI +-{:.4}, \
                     mean convergence epoch {:.1}, n = {})",
                    agg.label,
                    agg.mean_min_rate,
                    agg.std_min_rate,
                    agg.ci95_half_width,
                    agg.mean_convergence_epoch,
                    agg.n
                );
            }
            emit(&rows, &common)
        }
        Command::Sweep { common, n_values } => {
            let spec = load_spec(&common)?;
            let values = n_values
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|e| risq::Error::Config(format!("bad element count '{s}': {e}")))
                })
                .collect::<risq::Result<Vec<_>>>()?;
            let rows = run_sweep(&spec, &values)?;
            emit(&rows, &common)
        }
        Command::Oracle { common } => {
            let mut spec = load_spec(&common)?;
            spec.methods = vec![Method::Oracle];
            let rows = run_experiment(&spec)?;
            print_method_summaries(&rows);
            emit(&rows, &common)
        }
        Command::Report {
            t_pilot_ms,
            t_opt_ms,
            t_switch_ms,
            t_coherence_ms,
            doppler_hz,
        } => {
            let (feasible, rho) = coherence_report(
                t_pilot_ms * 1e-3,
                t_opt_ms * 1e-3,
                t_switch_ms * 1e-3,
                t_coherence_ms * 1e-3,
                doppler_hz,
            );
            let overhead_ms = t_pilot_ms + t_opt_ms + t_switch_ms;
            println!(
                "overhead {overhead_ms:.4} ms of {t_coherence_ms:.4} ms coherence block: {}",
                if feasible { "fits" } else { "does not fit" }
            );
            println!("delayed-adaptation correlation rho = {rho:.6}");
            // sanity: the default scenario must still build under this binary
            let spec = ExperimentSpec::default();
            let config = spec.system_config();
            let scenario = generate_scenario(spec.scenario_seed_base, &config, spec.double_sided);
            channels_from_scenario(&scenario, &config).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
