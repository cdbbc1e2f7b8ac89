//! Experiment orchestration: seeded scenario generation, Monte Carlo runs,
//! the three-way ablation, element-count sweeps, and deterministic CSV/JSON
//! export.

use std::fmt;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    brute_force, classical_gnn, continuous_phase_state, fixed_spacing_state, random_phase_state,
};
use crate::channel::{
    channels_from_scenario, sample_nlos, sinr_and_rates, ChannelSet, RisState, Scenario, Side,
    SystemConfig,
};
use crate::circuit::{CircuitConfig, CircuitForm};
use crate::error::{Error, Result};
use crate::graph::build_graph;
use crate::qsim::NoiseModel;
use crate::trainer::{optimize, TrainOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Qgcn,
    Gnn,
    Gd,
    Random,
    Fixed,
    Oracle,
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        match s {
            "qgcn" => Ok(Method::Qgcn),
            "gnn" => Ok(Method::Gnn),
            "gd" => Ok(Method::Gd),
            "random" => Ok(Method::Random),
            "fixed" => Ok(Method::Fixed),
            "oracle" => Ok(Method::Oracle),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Qgcn => "qgcn",
            Method::Gnn => "gnn",
            Method::Gd => "gd",
            Method::Random => "random",
            Method::Fixed => "fixed",
            Method::Oracle => "oracle",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    Full,
    NoVirtualSpacing,
    NoDoubleSided,
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AblationMode::Full => "full",
            AblationMode::NoVirtualSpacing => "no_virtual_spacing",
            AblationMode::NoDoubleSided => "no_double_sided",
        };
        f.write_str(s)
    }
}

fn default_n_runs() -> usize {
    20
}
fn default_n_elements() -> usize {
    4
}
fn default_n_aps() -> usize {
    2
}
fn default_n_ues() -> usize {
    3
}
fn default_layers() -> usize {
    2
}
fn default_shots() -> u64 {
    2048
}
fn default_epochs() -> usize {
    30
}
fn default_learning_rate() -> f64 {
    0.01
}
fn default_snr_db() -> Option<f64> {
    Some(10.0)
}
fn default_methods() -> Vec<Method> {
    vec![
        Method::Qgcn,
        Method::Gnn,
        Method::Gd,
        Method::Random,
        Method::Fixed,
    ]
}
fn default_true() -> bool {
    true
}
fn default_block_cap() -> usize {
    6
}
fn default_k_neighbors() -> usize {
    2
}
fn default_phase_bits() -> u32 {
    2
}

/// Flat, overridable run description; every default matches the desk-scale
/// reference setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub scenario_seed_base: u64,
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
    #[serde(default = "default_n_elements")]
    pub n_elements: usize,
    #[serde(default = "default_n_aps")]
    pub n_aps: usize,
    #[serde(default = "default_n_ues")]
    pub n_ues: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_shots")]
    pub shots: u64,
    /// Infinite-shot decode from exact probabilities.
    #[serde(default)]
    pub exact: bool,
    /// Stochastic Pauli trajectories on/off.
    #[serde(default = "default_true")]
    pub noise: bool,
    /// When set, rescales the noise power per scenario so the all-active
    /// zero-phase reference sees this mean SNR.
    #[serde(default = "default_snr_db")]
    pub snr_db: Option<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_true")]
    pub double_sided: bool,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_block_cap")]
    pub block_cap: usize,
    #[serde(default = "default_k_neighbors")]
    pub k_neighbors: usize,
    /// Grid resolution for the oracle and the discrete projection.
    #[serde(default = "default_phase_bits")]
    pub phase_bits: u32,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        toml::from_str("").expect("empty spec must deserialize from defaults")
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_runs < 1 {
            return Err(Error::Config("n_runs must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("method list must be non-empty".into()));
        }
        if 2 * self.block_cap > crate::trainer::MAX_QUBITS {
            return Err(Error::TooLarge(format!(
                "block cap {} needs {} qubits (max {})",
                self.block_cap,
                2 * self.block_cap,
                crate::trainer::MAX_QUBITS
            )));
        }
        Ok(())
    }

    pub fn system_config(&self) -> SystemConfig {
        SystemConfig::desk(self.n_elements, self.n_aps, self.n_ues)
    }

    fn circuit_config(&self) -> CircuitConfig {
        let config = self.system_config();
        CircuitConfig {
            layers: self.layers,
            shots: self.shots,
            exact: self.exact,
            form: CircuitForm::Equations,
            noise: if self.noise {
                Some(NoiseModel::ablation())
            } else {
                None
            },
            d_min_m: config.d_min_m,
        }
    }

    fn train_options(&self) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            block_cap: self.block_cap,
            k_neighbors: self.k_neighbors,
            ..TrainOptions::default()
        }
    }
}

/// One method on one seed: the long-format export record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config: String,
    pub method: String,
    pub seed: u64,
    pub n_elements: usize,
    pub min_rate_bpshz: f64,
    pub sum_rate_bpshz: f64,
    pub n_active: usize,
    pub feasible: bool,
    pub convergence_epoch: usize,
    pub circuit_evals: u64,
    /// Measured timing; kept out of exports so identical specs produce
    /// byte-identical files.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Angles uniform in [-pi/3, pi/3], distances uniform in [5, 50] m, side
/// labels uniform when double-sided mode is on, NLoS stored with the
/// geometry; beta_k from the mean path lengths with the configured
/// exponents (reference distance 1 m).
pub fn generate_scenario(seed: u64, config: &SystemConfig, double_sided: bool) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let third_pi = std::f64::consts::PI / 3.0;
    let (m, n, k) = (config.n_aps, config.n_elements, config.n_ues);
    let ap_angles_rad: Vec<f64> = (0..m).map(|_| rng.gen_range(-third_pi..third_pi)).collect();
    let ue_angles_rad: Vec<f64> = (0..k).map(|_| rng.gen_range(-third_pi..third_pi)).collect();
    let ap_ris_distances_m: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(5.0..50.0)).collect())
        .collect();
    let ris_ue_distances_m: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| rng.gen_range(5.0..50.0)).collect())
        .collect();
    // uniform side labels, redrawn until both faces are populated (a face
    // with no elements or no AP would leave its users unreachable)
    let mut sides = |count: usize| -> Vec<Side> {
        if !double_sided {
            return vec![Side::Front; count];
        }
        loop {
            let draw: Vec<Side> = (0..count)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        Side::Back
                    } else {
                        Side::Front
                    }
                })
                .collect();
            if count < 2 || draw.contains(&Side::Front) && draw.contains(&Side::Back) {
                return draw;
            }
        }
    };
    let element_sides = sides(n);
    let ap_sides = sides(m);
    let ue_sides: Vec<Side> = (0..k)
        .map(|_| {
            if double_sided && rng.gen_bool(0.5) {
                Side::Back
            } else {
                Side::Front
            }
        })
        .collect();

    let (e_ap, e_ue) = config.path_loss_exponents;
    let mean_ap: f64 = ap_ris_distances_m.iter().flatten().sum::<f64>() / (m * n) as f64;
    let beta: Vec<f64> = (0..k)
        .map(|ue| {
            let mean_ue: f64 = (0..n).map(|el| ris_ue_distances_m[el][ue]).sum::<f64>() / n as f64;
            mean_ap.powf(-e_ap) * mean_ue.powf(-e_ue)
        })
        .collect();

    let (nlos_ap, nlos_ue) = sample_nlos(config, &mut rng);
    Scenario {
        ap_angles_rad,
        ue_angles_rad,
        ap_ris_distances_m,
        ris_ue_distances_m,
        beta,
        element_sides,
        ap_sides,
        ue_sides,
        nlos_ap,
        nlos_ue,
    }
}

/// Scale the noise power so the all-active zero-phase reference sees the
/// requested mean per-UE SNR on this realization.
pub fn apply_snr(config: &mut SystemConfig, channels: &ChannelSet, snr_db: f64) -> Result<()> {
    let reference = RisState::all_active(config.n_elements);
    let gains = crate::channel::cascaded_gain(&reference, channels, config)?;
    let mean_power: f64 = (0..config.n_ues)
        .map(|k| {
            let sum: num_complex::Complex64 = (0..config.n_aps).map(|m| gains[m][k]).sum();
            config.tx_powers_w[k] * sum.norm_sqr()
        })
        .sum::<f64>()
        / config.n_ues as f64;
    if mean_power <= 0.0 {
        return Err(Error::domain("zero reference power; cannot set SNR"));
    }
    config.noise_power_w = mean_power / 10f64.powf(snr_db / 10.0);
    Ok(())
}

struct MethodOutcome {
    state: RisState,
    convergence_epoch: usize,
    circuit_evals: u64,
    wall_time_s: f64,
}

fn run_method(
    method: Method,
    seed: u64,
    spec: &ExperimentSpec,
    config: &SystemConfig,
    channels: &ChannelSet,
    opts_override: Option<&TrainOptions>,
) -> Result<MethodOutcome> {
    let start = std::time::Instant::now();
    // decorrelate the method's own randomness from the scenario draw
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6D65_7468_6F64);
    let (state, convergence_epoch, circuit_evals) = match method {
        Method::Qgcn => {
            let opts = opts_override
                .cloned()
                .unwrap_or_else(|| spec.train_options());
            let (state, report) =
                optimize(channels, config, &spec.circuit_config(), &opts, &mut rng)?;
            (state, report.convergence_epoch, report.circuit_evals)
        }
        Method::Gnn => {
            let graph = build_graph(
                &config.positions(),
                config.w_decay_per_m,
                spec.k_neighbors
                    .min(config.n_elements.saturating_sub(1))
                    .max(1),
            )?;
            let (state, report) = classical_gnn(
                channels,
                config,
                &graph,
                spec.epochs,
                spec.learning_rate,
                &mut rng,
            )?;
            (state, report.convergence_epoch, 0)
        }
        Method::Gd => (continuous_phase_state(channels, config)?, 0, 0),
        Method::Random => (random_phase_state(config, &mut rng), 0, 0),
        Method::Fixed => (fixed_spacing_state(channels, config)?, 0, 0),
        Method::Oracle => {
            let oracle = brute_force(channels, config, spec.phase_bits)?;
            (oracle.best_state, 0, oracle.configurations_searched)
        }
    };
    Ok(MethodOutcome {
        state,
        convergence_epoch,
        circuit_evals,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn row_from_state(
    config_label: &str,
    method: &str,
    seed: u64,
    outcome: &MethodOutcome,
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<ResultRow> {
    let (_, rates) = sinr_and_rates(&outcome.state, channels, config)?;
    let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    Ok(ResultRow {
        config: config_label.to_string(),
        method: method.to_string(),
        seed,
        n_elements: config.n_elements,
        min_rate_bpshz: min_rate,
        sum_rate_bpshz: rates.iter().map(|r| r.max(0.0)).sum(),
        n_active: outcome.state.n_active(),
        feasible: outcome.state.is_feasible(config),
        convergence_epoch: outcome.convergence_epoch,
        circuit_evals: outcome.circuit_evals,
        wall_time_s: outcome.wall_time_s,
    })
}

/// Run every configured method on `n_runs` seeded scenarios.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for run in 0..spec.n_runs {
        let seed = spec.scenario_seed_base + run as u64;
        let mut config = spec.system_config();
        let scenario = generate_scenario(seed, &config, spec.double_sided);
        let channels = channels_from_scenario(&scenario, &config)?;
        if let Some(snr) = spec.snr_db {
            apply_snr(&mut config, &channels, snr)?;
        }
        for &method in &spec.methods {
            let outcome = run_method(method, seed, spec, &config, &channels, None)?;
            rows.push(row_from_state(
                "single",
                &method.to_string(),
                seed,
                &outcome,
                &channels,
                &config,
            )?);
        }
    }
    Ok(rows)
}

/// Per-configuration aggregate of an ablation or sweep cell.
#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub label: String,
    pub n: usize,
    pub mean_min_rate: f64,
    pub std_min_rate: f64,
    /// Normal-approximation 95% half-width, 1.96 * std / sqrt(n).
    pub ci95_half_width: f64,
    pub mean_convergence_epoch: f64,
}

pub fn aggregate(label: &str, min_rates: &[f64], conv_epochs: &[usize]) -> Aggregate {
    let n = min_rates.len().max(1);
    let mean = min_rates.iter().sum::<f64>() / n as f64;
    let var = if min_rates.len() > 1 {
        min_rates
            .iter()
            .map(|r| (r - mean) * (r - mean))
            .sum::<f64>()
            / (min_rates.len() - 1) as f64
    } else {
        0.0
    };
    let std = var.sqrt();
    Aggregate {
        label: label.to_string(),
        n: min_rates.len(),
        mean_min_rate: mean,
        std_min_rate: std,
        ci95_half_width: 1.96 * std / (n as f64).sqrt(),
        mean_convergence_epoch: conv_epochs.iter().sum::<usize>() as f64 / n as f64,
    }
}

/// The three paired configurations: full, activation forced on (no virtual
/// spacing), and one side masked off (no double-sided operation). All three
/// share the channel realization per seed.
pub fn run_ablation(spec: &ExperimentSpec) -> Result<(Vec<ResultRow>, Vec<Aggregate>)> {
    spec.validate()?;
    let modes = [
        AblationMode::Full,
        AblationMode::NoVirtualSpacing,
        AblationMode::NoDoubleSided,
    ];
    let mut rows = Vec::new();
    for run in 0..spec.n_runs {
        let seed = spec.scenario_seed_base + run as u64;
        let mut config = spec.system_config();
        let scenario = generate_scenario(seed, &config, spec.double_sided);
        let channels = channels_from_scenario(&scenario, &config)?;
        if let Some(snr) = spec.snr_db {
            apply_snr(&mut config, &channels, snr)?;
        }
        for mode in modes {
            let mut opts = spec.train_options();
            match mode {
                AblationMode::Full => {}
                AblationMode::NoVirtualSpacing => opts.force_all_active = true,
                AblationMode::NoDoubleSided => {
                    opts.allowed_mask = Some(
                        scenario
                            .element_sides
                            .iter()
                            .map(|s| *s == Side::Front)
                            .collect(),
                    );
                }
            }
            let outcome = run_method(Method::Qgcn, seed, spec, &config, &channels, Some(&opts))?;
            rows.push(row_from_state(
                &mode.to_string(),
                "qgcn",
                seed,
                &outcome,
                &channels,
                &config,
            )?);
        }
    }
    let aggregates = modes
        .iter()
        .map(|mode| {
            let label = mode.to_string();
            let cell: Vec<&ResultRow> = rows.iter().filter(|r| r.config == label).collect();
            let rates: Vec<f64> = cell.iter().map(|r| r.min_rate_bpshz).collect();
            let convs: Vec<usize> = cell.iter().map(|r| r.convergence_epoch).collect();
            aggregate(&label, &rates, &convs)
        })
        .collect();
    Ok((rows, aggregates))
}

/// Per-N Monte Carlo: each value of N gets its own scenarios (the geometry
/// depends on N), all methods run on the shared realization.
pub fn run_sweep(spec: &ExperimentSpec, n_values: &[usize]) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    if n_values.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one element count".into(),
        ));
    }
    let mut rows = Vec::new();
    for &n in n_values {
        let mut point = spec.clone();
        point.n_elements = n;
        for row in run_experiment(&point)? {
            rows.push(ResultRow {
                config: format!("n{n}"),
                ..row
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl ExportFormat {
    pub fn parse(s: &str) -> Result<ExportFormat> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::Config(format!("unknown format '{other}'"))),
        }
    }
}

/// Serialize rows to bytes; CSV is RFC-4180 (header + records), JSON is an
/// array of objects. Byte-deterministic for identical inputs.
pub fn export_bytes(rows: &[ResultRow], format: ExportFormat) -> Result<Vec<u8>> {
    match format {
        ExportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            if rows.is_empty() {
                writer
                    .write_record([
                        "config",
                        "method",
                        "seed",
                        "n_elements",
                        "min_rate_bpshz",
                        "sum_rate_bpshz",
                        "n_active",
                        "feasible",
                        "convergence_epoch",
                        "circuit_evals",
                    ])
                    .map_err(|e| Error::Config(format!("csv: {e}")))?;
            }
            for row in rows {
                writer
                    .serialize(row)
                    .map_err(|e| Error::Config(format!("csv: {e}")))?;
            }
            writer
                .into_inner()
                .map_err(|e| Error::Config(format!("csv: {e}")))
        }
        ExportFormat::Json => {
            let mut bytes =
                serde_json::to_vec_pretty(rows).map_err(|e| Error::Config(format!("json: {e}")))?;
            bytes.push(b'\n');
            Ok(bytes)
        }
    }
}

pub fn export(rows: &[ResultRow], path: &Path, format: ExportFormat) -> Result<()> {
    let bytes = export_bytes(rows, format)?;
    let mut file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    file.write_all(&bytes).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn parse_csv(bytes: &[u8]) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(bytes);
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::Config(format!("csv parse: {e}"))))
        .collect()
}
