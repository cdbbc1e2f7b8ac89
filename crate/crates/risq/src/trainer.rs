//! Shot-based loss evaluation, parameter-shift gradients, plain gradient
//! descent, convergence detection, and the per-block training loop.

use rand::Rng;
use std::time::Instant;

use crate::channel::{loss_from_rates, sinr_and_rates, ChannelSet, RisState, SystemConfig};
use crate::circuit::{run_circuit, CircuitConfig, CircuitParams, DecodedState};
use crate::error::{Error, Result};
use crate::graph::{build_graph, partition, stitch, SubgraphBlock};

/// Dense statevector budget: 2 * cap qubits per block.
pub const MAX_QUBITS: usize = 26;

#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// Epochs T.
    pub epochs: usize,
    /// Learning rate eta.
    pub learning_rate: f64,
    /// Recompute w_k ~ exp(-R_k / tau) each epoch instead of the config's
    /// fixed weights.
    pub softmin_weights: bool,
    pub softmin_tau: f64,
    pub convergence_delta: f64,
    pub convergence_window: usize,
    /// Ablation B: activation qubits excluded from decode, a forced to 1.
    pub force_all_active: bool,
    /// Global per-element allow mask (side standby, ablation C); masked
    /// elements are forced inactive after decode.
    pub allowed_mask: Option<Vec<bool>>,
    /// Partition cap in elements per block.
    pub block_cap: usize,
    /// Neighbors per vertex in the element graph.
    pub k_neighbors: usize,
    /// Edge CPhase angles trainable (appended to the parameter vector).
    pub train_edge_thetas: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 30,
            learning_rate: 0.01,
            softmin_weights: false,
            softmin_tau: 0.5,
            convergence_delta: 1e-3,
            convergence_window: 5,
            force_all_active: false,
            allowed_mask: None,
            block_cap: 6,
            k_neighbors: 2,
            train_edge_thetas: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub loss_trace: Vec<f64>,
    pub min_rate_trace: Vec<f64>,
    pub best_state: RisState,
    pub best_min_rate: f64,
    pub best_feasible: bool,
    /// 1-based epoch at which the loss trace settled.
    pub convergence_epoch: usize,
    pub circuit_evals: u64,
    pub wall_time_s: f64,
}

/// Everything a single loss evaluation needs besides the parameters.
pub struct EvalContext<'a> {
    pub block: &'a SubgraphBlock,
    pub channels: &'a ChannelSet,
    pub config: &'a SystemConfig,
    pub circuit: &'a CircuitConfig,
    /// Current global state; the block's entries are overwritten by the
    /// decode, the rest are held fixed.
    pub base_state: &'a RisState,
    pub force_all_active: bool,
    pub allowed_mask: Option<&'a [bool]>,
}

/// Stitch a block decode into the global state, applying forced-activation
/// and allow-mask adjustments.
pub fn apply_decode(ctx: &EvalContext, decoded: &DecodedState) -> RisState {
    let mut state = ctx.base_state.clone();
    for (i, &v) in ctx.block.vertex_ids.iter().enumerate() {
        state.activation[v] = if ctx.force_all_active {
            true
        } else {
            decoded.activation[i]
        };
        state.phases[v] = decoded.phases[i];
    }
    if let Some(mask) = ctx.allowed_mask {
        for (a, &ok) in state.activation.iter_mut().zip(mask) {
            *a = *a && ok;
        }
    }
    state
}

/// Run the circuit, stitch the decode into the global state, and evaluate
/// the channel-model loss. Deterministic per seed.
pub fn evaluate(
    params: &CircuitParams,
    ctx: &EvalContext,
    seed: u64,
) -> Result<(f64, DecodedState, RisState)> {
    let run = run_circuit(ctx.block, params, ctx.circuit, seed)?;
    let state = apply_decode(ctx, &run.decoded);
    let (_, rates) = sinr_and_rates(&state, ctx.channels, ctx.config)?;
    let loss = loss_from_rates(&state, &rates, ctx.config);
    Ok((loss, run.decoded, state))
}

/// Parameter-shift gradient: one entry per trainable coordinate, each from
/// two evaluations at +/- pi/2 sharing the forward pass's seed.
pub fn gradient(params: &CircuitParams, ctx: &EvalContext, seed: u64) -> Result<Vec<f64>> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut grad = Vec::with_capacity(params.dim());
    for i in 0..params.dim() {
        let plus = evaluate(&params.shifted(i, half_pi)?, ctx, seed)?.0;
        let minus = evaluate(&params.shifted(i, -half_pi)?, ctx, seed)?.0;
        grad.push((plus - minus) / 2.0);
    }
    Ok(grad)
}

/// First 1-based epoch e such that a full window starting at e stays within
/// `delta` of the minimum loss seen up to the window's end; falls back to
/// the last epoch.
pub fn detect_convergence(loss_trace: &[f64], delta: f64, window: usize) -> usize {
    let t = loss_trace.len();
    if t == 0 {
        return 0;
    }
    for e in 0..t {
        if e + window > t {
            break;
        }
        let floor = loss_trace[..e + window]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if loss_trace[e..e + window].iter().all(|l| l - floor <= delta) {
            return e + 1;
        }
    }
    t
}

fn epoch_seed(base: u64, epoch: usize) -> u64 {
    // splitmix-style mix so epochs get decorrelated streams
    let mut z = base.wrapping_add((epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Train one block by vanilla gradient descent on the penalized loss for
/// `opts.epochs` epochs, tracking the best feasible state by min-rate.
pub fn train_block<R: Rng>(
    block: &SubgraphBlock,
    channels: &ChannelSet,
    config: &SystemConfig,
    circuit_config: &CircuitConfig,
    base_state: &RisState,
    opts: &TrainOptions,
    rng: &mut R,
) -> Result<(CircuitParams, TrainReport)> {
    if opts.epochs < 1 {
        return Err(Error::contract("need at least one epoch"));
    }
    if opts.learning_rate < 0.0 {
        return Err(Error::contract("learning rate must be non-negative"));
    }
    let start = Instant::now();
    let mut params = CircuitParams::init(
        circuit_config.layers.max(1),
        block.vertex_ids.len(),
        block.graph.n_edges(),
        opts.train_edge_thetas,
        rng,
    );
    let base_seed: u64 = rng.gen();

    let mut epoch_config = config.clone();
    let mut loss_trace = Vec::with_capacity(opts.epochs);
    let mut min_rate_trace = Vec::with_capacity(opts.epochs);
    let mut best_state = base_state.clone();
    let mut best_min_rate = f64::NEG_INFINITY;
    let mut best_feasible = false;
    let mut circuit_evals = 0u64;

    for epoch in 0..opts.epochs {
        let seed = epoch_seed(base_seed, epoch);
        let ctx = EvalContext {
            block,
            channels,
            config: &epoch_config,
            circuit: circuit_config,
            base_state,
            force_all_active: opts.force_all_active,
            allowed_mask: opts.allowed_mask.as_deref(),
        };
        let (loss, _, state) = evaluate(&params, &ctx, seed)?;
        circuit_evals += 1;
        let (_, rates) = sinr_and_rates(&state, channels, config)?;
        let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
        loss_trace.push(loss);
        min_rate_trace.push(min_rate);

        let feasible = state.is_feasible(config);
        let improves = if best_feasible {
            feasible && min_rate > best_min_rate
        } else {
            feasible || min_rate > best_min_rate
        };
        if improves {
            best_state = state;
            best_min_rate = min_rate;
            best_feasible = feasible;
        }

        if opts.softmin_weights {
            let mut w: Vec<f64> = rates
                .iter()
                .map(|r| (-r / opts.softmin_tau).exp())
                .collect();
            let sum: f64 = w.iter().sum();
            for x in w.iter_mut() {
                *x /= sum;
            }
            epoch_config.loss_weights.ue_weights = w;
        }

        if opts.learning_rate > 0.0 {
            let ctx = EvalContext {
                block,
                channels,
                config: &epoch_config,
                circuit: circuit_config,
                base_state,
                force_all_active: opts.force_all_active,
                allowed_mask: opts.allowed_mask.as_deref(),
            };
            let grad = gradient(&params, &ctx, seed)?;
            circuit_evals += 2 * params.dim() as u64;
            let mut flat = params.flatten();
            for (p, g) in flat.iter_mut().zip(&grad) {
                *p -= opts.learning_rate * g;
            }
            params.set_flat(&flat)?;
        } else {
            // evaluation count contract holds in full-gradient mode only;
            // eta = 0 skips the 2|theta| shifted runs
        }
    }

    let convergence_epoch =
        detect_convergence(&loss_trace, opts.convergence_delta, opts.convergence_window);
    Ok((
        params,
        TrainReport {
            loss_trace,
            min_rate_trace,
            best_state,
            best_min_rate: best_min_rate.max(0.0),
            best_feasible,
            convergence_epoch,
            circuit_evals,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Full pipeline: build the element graph, partition it, train each block
/// in sequence against the evolving global state, and stitch the per-block
/// bests into the returned configuration.
pub fn optimize<R: Rng>(
    channels: &ChannelSet,
    config: &SystemConfig,
    circuit_config: &CircuitConfig,
    opts: &TrainOptions,
    rng: &mut R,
) -> Result<(RisState, TrainReport)> {
    if 2 * opts.block_cap > MAX_QUBITS {
        return Err(Error::TooLarge(format!(
            "block cap {} needs {} qubits (max {MAX_QUBITS})",
            opts.block_cap,
            2 * opts.block_cap
        )));
    }
    let positions = config.positions();
    let k = opts
        .k_neighbors
        .min(positions.len().saturating_sub(1))
        .max(1);
    let graph = if positions.len() == 1 {
        crate::graph::RisGraph {
            vertex_ids: vec![0],
            positions_m: positions.clone(),
            edges: vec![],
            weights: vec![],
            w_decay_per_m: config.w_decay_per_m,
        }
    } else {
        build_graph(&positions, config.w_decay_per_m, k)?
    };
    let blocks = partition(&graph, opts.block_cap)?;

    let start = Instant::now();
    let mut global = RisState::all_active(config.n_elements);
    if let Some(mask) = &opts.allowed_mask {
        for (a, &ok) in global.activation.iter_mut().zip(mask) {
            *a = *a && ok;
        }
    }

    let mut loss_trace = Vec::new();
    let mut min_rate_trace = Vec::new();
    let mut circuit_evals = 0u64;
    let mut block_results = Vec::new();
    for block in &blocks {
        let (_, report) = train_block(block, channels, config, circuit_config, &global, opts, rng)?;
        // lock in this block's best before moving to the next
        for &v in &block.vertex_ids {
            global.activation[v] = report.best_state.activation[v];
            global.phases[v] = report.best_state.phases[v];
        }
        let act: Vec<bool> = block
            .vertex_ids
            .iter()
            .map(|&v| global.activation[v])
            .collect();
        let phi: Vec<f64> = block.vertex_ids.iter().map(|&v| global.phases[v]).collect();
        block_results.push((block.vertex_ids.clone(), act, phi));
        loss_trace.extend(report.loss_trace);
        min_rate_trace.extend(report.min_rate_trace);
        circuit_evals += report.circuit_evals;
    }
    let stitched = stitch(&block_results, config.n_elements)?;
    let (_, rates) = sinr_and_rates(&stitched, channels, config)?;
    let best_min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let convergence_epoch =
        detect_convergence(&loss_trace, opts.convergence_delta, opts.convergence_window);
    let report = TrainReport {
        loss_trace,
        min_rate_trace,
        best_feasible: stitched.is_feasible(config),
        best_state: stitched.clone(),
        best_min_rate,
        convergence_epoch,
        circuit_evals,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((stitched, report))
}
