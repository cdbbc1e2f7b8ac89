//! Per-block variational graph circuit.
//!
//! Element `n` of a block owns qubit `2n` (activation) and `2n+1` (phase).
//! The circuit prepares activation qubits in |1> and phase qubits in |+>,
//! entangles them, then stacks L layers of distance-weighted controlled
//! phases, neighbor-averaged activation rotations, and parameterized phase
//! rotations, refreshing edge weights from the estimated positions between
//! layers. Decoding reads activation bits from shot majorities and phases
//! from exact Z expectations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::wrap_phase;
use crate::error::{Error, Result};
use crate::graph::{refresh_weights, SubgraphBlock};
use crate::qsim::{Gate, GateCounts, NoiseModel, Simulator};

/// Which layer structure to run. `Equations` follows the displayed layer
/// unitaries (separate activation and phase rotations); `Algorithm1`
/// follows the pseudocode's single combined rotation Rz(gamma) Ry(alpha +
/// beta * mu) on the phase qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircuitForm {
    Equations,
    Algorithm1,
}

#[derive(Debug, Clone)]
pub struct CircuitConfig {
    pub layers: usize,
    pub shots: u64,
    /// Infinite-shot mode: decode from exact probabilities.
    pub exact: bool,
    pub form: CircuitForm,
    pub noise: Option<NoiseModel>,
    /// Grid pitch, used by the inter-layer weight refresh.
    pub d_min_m: f64,
}

impl CircuitConfig {
    pub fn new(layers: usize, d_min_m: f64) -> Self {
        CircuitConfig {
            layers,
            shots: 2048,
            exact: false,
            form: CircuitForm::Equations,
            noise: None,
            d_min_m,
        }
    }
}

/// Trainable angles: alpha/beta/gamma are [layer][vertex]; edge_thetas are
/// [layer][edge] and multiply the decayed edge weight inside each CPhase.
/// When `trainable_edges` is false the edge angles are frozen (so the
/// trainable dimension is exactly 3 * L * |V_b|).
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitParams {
    pub n_vertices: usize,
    pub n_edges: usize,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub edge_thetas: Vec<Vec<f64>>,
    pub trainable_edges: bool,
}

impl CircuitParams {
    /// Small-angle start: alpha, gamma ~ U(-0.1, 0.1), beta ~ U(0, 0.1),
    /// edge angles at 1.0 rad so each CPhase angle starts at w_ij.
    pub fn init<R: Rng>(
        layers: usize,
        n_vertices: usize,
        n_edges: usize,
        trainable_edges: bool,
        rng: &mut R,
    ) -> Self {
        let draw = |rng: &mut R, lo: f64, hi: f64| {
            (0..layers)
                .map(|_| (0..n_vertices).map(|_| rng.gen_range(lo..hi)).collect())
                .collect::<Vec<Vec<f64>>>()
        };
        let alpha = draw(rng, -0.1, 0.1);
        let beta = draw(rng, 0.0, 0.1);
        let gamma = draw(rng, -0.1, 0.1);
        let edge_thetas = vec![vec![1.0; n_edges]; layers];
        CircuitParams {
            n_vertices,
            n_edges,
            alpha,
            beta,
            gamma,
            edge_thetas,
            trainable_edges,
        }
    }

    pub fn zeros(layers: usize, n_vertices: usize, n_edges: usize) -> Self {
        CircuitParams {
            n_vertices,
            n_edges,
            alpha: vec![vec![0.0; n_vertices]; layers],
            beta: vec![vec![0.0; n_vertices]; layers],
            gamma: vec![vec![0.0; n_vertices]; layers],
            edge_thetas: vec![vec![0.0; n_edges]; layers],
            trainable_edges: false,
        }
    }

    pub fn layers(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Number of trainable coordinates.
    pub fn dim(&self) -> usize {
        let base = 3 * self.layers() * self.n_vertices();
        if self.trainable_edges {
            base + self.layers() * self.n_edges()
        } else {
            base
        }
    }

    /// Flatten trainable coordinates: alpha, beta, gamma, then edge angles.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for table in [&self.alpha, &self.beta, &self.gamma] {
            for row in table {
                out.extend_from_slice(row);
            }
        }
        if self.trainable_edges {
            for row in &self.edge_thetas {
                out.extend_from_slice(row);
            }
        }
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.dim() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                self.dim(),
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        for table in [&mut self.alpha, &mut self.beta, &mut self.gamma] {
            for row in table.iter_mut() {
                for v in row.iter_mut() {
                    *v = it.next().unwrap();
                }
            }
        }
        if self.trainable_edges {
            for row in self.edge_thetas.iter_mut() {
                for v in row.iter_mut() {
                    *v = it.next().unwrap();
                }
            }
        }
        Ok(())
    }

    /// Clone with one trainable coordinate shifted by `delta`.
    pub fn shifted(&self, index: usize, delta: f64) -> Result<Self> {
        let mut flat = self.flatten();
        if index >= flat.len() {
            return Err(Error::contract(format!(
                "parameter index {index} out of range"
            )));
        }
        flat[index] += delta;
        let mut out = self.clone();
        out.set_flat(&flat)?;
        Ok(out)
    }
}

/// Decoded per-element output of one circuit run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedState {
    pub activation: Vec<bool>,
    /// phi_n = wrap(2*pi*<Z_n^phi>) in [0, 2*pi).
    pub phases: Vec<f64>,
    pub raw_z_phase: Vec<f64>,
    /// Shot frequency of 1 (exact probability in exact mode).
    pub mean_activation: Vec<f64>,
}

/// One circuit execution with its gate accounting.
#[derive(Debug, Clone)]
pub struct CircuitRun {
    pub decoded: DecodedState,
    pub gate_counts: GateCounts,
    /// Gates applied by each of the L layers (state prep excluded).
    pub layer_gates: Vec<u64>,
}

fn act_qubit(n: usize) -> usize {
    2 * n
}

fn phase_qubit(n: usize) -> usize {
    2 * n + 1
}

/// Initialization: X on every activation qubit, H on every phase qubit,
/// then the per-element CNOT(q_a -> q_phi), then per-edge CNOTs between
/// phase qubits (edge entanglers outermost).
pub fn prepare_initial<R: Rng>(sim: &mut Simulator<R>, block: &SubgraphBlock) -> Result<()> {
    let nv = block.vertex_ids.len();
    for n in 0..nv {
        sim.apply(&Gate::X {
            target: act_qubit(n),
        })?;
        sim.apply(&Gate::H {
            target: phase_qubit(n),
        })?;
    }
    for n in 0..nv {
        sim.apply(&Gate::Cnot {
            control: act_qubit(n),
            target: phase_qubit(n),
        })?;
    }
    for &(i, j) in &block.graph.edges {
        sim.apply(&Gate::Cnot {
            control: phase_qubit(i),
            target: phase_qubit(j),
        })?;
    }
    Ok(())
}

/// One layer: U_GC (weighted controlled phases on phase-qubit pairs), U_S
/// (activation rotations driven by neighbors' exact phase expectations),
/// U_A (Rz(gamma) Ry(alpha) on phase qubits).
pub fn apply_layer<R: Rng>(
    sim: &mut Simulator<R>,
    block: &SubgraphBlock,
    weights: &[f64],
    params: &CircuitParams,
    layer: usize,
    form: CircuitForm,
) -> Result<()> {
    if layer >= params.layers() {
        return Err(Error::contract(format!("layer {layer} out of range")));
    }
    let nv = block.vertex_ids.len();

    for (e, &(i, j)) in block.graph.edges.iter().enumerate() {
        let theta = weights[e] * params.edge_thetas[layer][e];
        sim.apply(&Gate::CPhase {
            a: phase_qubit(i),
            b: phase_qubit(j),
            theta,
        })?;
    }

    // mu_i from the post-U_GC state, before any rotation of this layer
    let mu: Vec<f64> = (0..nv)
        .map(|i| {
            block
                .graph
                .neighbors(i)
                .iter()
                .map(|&j| sim.state.expectation_z(phase_qubit(j)).unwrap())
                .sum()
        })
        .collect();

    match form {
        CircuitForm::Equations => {
            for (i, &mu_i) in mu.iter().enumerate() {
                sim.apply(&Gate::Ry {
                    target: act_qubit(i),
                    theta: params.beta[layer][i] * mu_i,
                })?;
            }
            for i in 0..nv {
                sim.apply(&Gate::Ry {
                    target: phase_qubit(i),
                    theta: params.alpha[layer][i],
                })?;
                sim.apply(&Gate::Rz {
                    target: phase_qubit(i),
                    theta: params.gamma[layer][i],
                })?;
            }
        }
        CircuitForm::Algorithm1 => {
            for (i, &mu_i) in mu.iter().enumerate() {
                let angle = params.alpha[layer][i] + params.beta[layer][i] * mu_i;
                sim.apply(&Gate::Ry {
                    target: phase_qubit(i),
                    theta: angle,
                })?;
                sim.apply(&Gate::Rz {
                    target: phase_qubit(i),
                    theta: params.gamma[layer][i],
                })?;
            }
        }
    }
    Ok(())
}

/// Full run: prep, L layers with weight refresh in between, then decode.
/// Deterministic for a fixed seed.
pub fn run_circuit(
    block: &SubgraphBlock,
    params: &CircuitParams,
    config: &CircuitConfig,
    seed: u64,
) -> Result<CircuitRun> {
    let nv = block.vertex_ids.len();
    if nv == 0 {
        return Err(Error::contract("empty block"));
    }
    if params.n_vertices() != nv || params.n_edges() != block.graph.n_edges() {
        return Err(Error::contract("params not dimensioned for this block"));
    }
    if params.layers() < config.layers {
        return Err(Error::contract("params cover fewer layers than requested"));
    }
    let rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sim = Simulator::new(2 * nv, config.noise, rng);
    prepare_initial(&mut sim, block)?;

    let mut weights = block.graph.weights.clone();
    let mut layer_gates = Vec::with_capacity(config.layers);
    for l in 0..config.layers {
        let before = sim.gate_counts.total();
        apply_layer(&mut sim, block, &weights, params, l, config.form)?;
        layer_gates.push(sim.gate_counts.total() - before);
        // <a_k> = (1 - <Z_k^a>)/2, exact; drives the position estimate
        let mean_act: Vec<f64> = (0..nv)
            .map(|n| ((1.0 - sim.state.expectation_z(act_qubit(n)).unwrap()) / 2.0).clamp(0.0, 1.0))
            .collect();
        weights = refresh_weights(
            &block.graph,
            &mean_act,
            config.d_min_m,
            block.graph.w_decay_per_m,
        )?;
    }

    let raw_z_phase: Vec<f64> = (0..nv)
        .map(|n| sim.state.expectation_z(phase_qubit(n)).unwrap())
        .collect();
    let phases: Vec<f64> = raw_z_phase
        .iter()
        .map(|z| wrap_phase(2.0 * std::f64::consts::PI * z))
        .collect();

    let (activation, mean_activation) = if config.exact {
        let probs: Vec<f64> = (0..nv)
            .map(|n| sim.state.prob_one(act_qubit(n)).unwrap())
            .collect();
        (probs.iter().map(|p| *p >= 0.5).collect(), probs)
    } else {
        let qubits: Vec<usize> = (0..nv).map(act_qubit).collect();
        let table = sim.sample(&qubits, config.shots)?;
        let freqs: Vec<f64> = (0..nv).map(|n| table.one_frequency(n)).collect();
        (freqs.iter().map(|f| *f >= 0.5).collect(), freqs)
    };

    Ok(CircuitRun {
        decoded: DecodedState {
            activation,
            phases,
            raw_z_phase,
            mean_activation,
        },
        gate_counts: sim.gate_counts,
        layer_gates,
    })
}
