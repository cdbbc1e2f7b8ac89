//! Comparison methods and ground truth: exhaustive brute-force oracle over
//! the discrete phase grid, a classical message-passing baseline with
//! continuous activation relaxation, coordinate-ascent phase optimization,
//! and the fixed/random reference configurations.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{
    mutual_coupling, sinr_and_rates, wrap_phase, ChannelSet, RisState, SystemConfig,
};
use crate::error::{Error, Result};
use crate::graph::RisGraph;
use crate::trainer::{detect_convergence, TrainReport};

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best_state: RisState,
    pub best_min_rate: f64,
    pub configurations_searched: u64,
}

/// Snap every phase to the nearest point of the B-bit grid {2 pi t / 2^B}.
pub fn project_phases(state: &RisState, phase_bits: u32) -> RisState {
    let levels = 1u64 << phase_bits;
    let step = 2.0 * std::f64::consts::PI / levels as f64;
    let phases = state
        .phases
        .iter()
        .map(|p| {
            let t = (p / step).round() as u64 % levels;
            t as f64 * step
        })
        .collect();
    RisState::new(state.activation.clone(), phases)
}

fn min_rate(state: &RisState, channels: &ChannelSet, config: &SystemConfig) -> Result<f64> {
    let (_, rates) = sinr_and_rates(state, channels, config)?;
    Ok(rates.iter().copied().fold(f64::INFINITY, f64::min).max(0.0))
}

/// Exhaustive search over feasible activation patterns and B-bit phase
/// grids; exact ground truth for the max-min rate on that grid.
pub fn brute_force(
    channels: &ChannelSet,
    config: &SystemConfig,
    phase_bits: u32,
) -> Result<OracleResult> {
    let n = config.n_elements;
    if n > 6 || phase_bits > 3 {
        return Err(Error::TooLarge(format!(
            "brute force refused: N = {n} (max 6), B = {phase_bits} (max 3) would search \
             up to {} configurations",
            (1u64 << n) * (1u64 << (phase_bits as u64 * n as u64))
        )));
    }
    let levels = 1usize << phase_bits;
    let step = 2.0 * std::f64::consts::PI / levels as f64;

    let mut best: Option<(RisState, f64)> = None;
    let mut searched = 0u64;
    for pattern in 0..(1u32 << n) {
        let activation: Vec<bool> = (0..n).map(|i| pattern & (1 << i) != 0).collect();
        let probe = RisState::new(activation.clone(), vec![0.0; n]);
        if !probe.is_feasible(config) {
            continue;
        }
        let active: Vec<usize> = probe.active_indices();
        let combos = (levels as u64).pow(active.len() as u32);
        for combo in 0..combos {
            let mut phases = vec![0.0f64; n];
            let mut rest = combo;
            for &i in &active {
                phases[i] = (rest % levels as u64) as f64 * step;
                rest /= levels as u64;
            }
            let state = RisState::new(activation.clone(), phases);
            let rate = min_rate(&state, channels, config)?;
            searched += 1;
            if best.as_ref().is_none_or(|(_, b)| rate > *b) {
                best = Some((state, rate));
            }
        }
    }
    let (best_state, best_min_rate) =
        best.ok_or_else(|| Error::domain("no feasible activation pattern"))?;
    Ok(OracleResult {
        best_state,
        best_min_rate,
        configurations_searched: searched,
    })
}

/// Rates under the continuous activation relaxation: the reflection matrix
/// carries amplitudes a_n in [0,1] and coupling is taken over the full grid.
pub fn soft_rates(
    soft_activation: &[f64],
    phases: &[f64],
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<Vec<f64>> {
    let n = config.n_elements;
    if soft_activation.len() != n || phases.len() != n {
        return Err(Error::contract(
            "relaxed state length does not match n_elements",
        ));
    }
    let coupling = mutual_coupling(&config.positions(), config)?;
    let mut received = vec![0.0f64; config.n_ues];
    for k in 0..config.n_ues {
        let mut total = Complex64::new(0.0, 0.0);
        for m in 0..config.n_aps {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let mut col = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    col += channels.ap[m][i].conj() * coupling.entries[i][j];
                }
                acc += col
                    * soft_activation[j]
                    * Complex64::from_polar(1.0, phases[j])
                    * channels.ue[j][k];
            }
            total += channels.beta[k].sqrt() * acc;
        }
        received[k] = config.tx_powers_w[k] * total.norm_sqr();
    }
    let mut rates = Vec::with_capacity(config.n_ues);
    for k in 0..config.n_ues {
        let interference: f64 = (0..config.n_ues)
            .filter(|i| *i != k)
            .map(|i| received[i])
            .sum();
        rates.push((1.0 + received[k] / (interference + config.noise_power_w)).log2());
    }
    Ok(rates)
}

/// Relaxed training loss used by the classical baseline: soft rates plus
/// the activation-deficit hinge on sum(sigmoid) and the aperture indicator
/// on the hard-thresholded pattern.
fn relaxed_loss(
    soft_activation: &[f64],
    phases: &[f64],
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<f64> {
    let rates = soft_rates(soft_activation, phases, channels, config)?;
    let lw = &config.loss_weights;
    let weighted: f64 = rates.iter().zip(&lw.ue_weights).map(|(r, w)| r * w).sum();
    let phase_norm: f64 = soft_activation
        .iter()
        .zip(phases)
        .map(|(a, p)| a * p * p)
        .sum();
    let hard = RisState::new(
        soft_activation.iter().map(|a| *a >= 0.5).collect(),
        phases.to_vec(),
    );
    let aperture = if hard.satisfies_aperture(config.d_min_m, config.d_total_m) {
        0.0
    } else {
        lw.lambda_aperture
    };
    let total_act: f64 = soft_activation.iter().sum();
    let deficit = (config.n_min as f64 - total_act).max(0.0);
    Ok(-weighted
        + lw.lambda_phase * phase_norm
        + aperture
        + lw.lambda_activation * deficit * deficit)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Classical graph baseline over the same topology and edge weights: node
/// features (activation logit, phase feature) pass through two rounds of
/// mean-aggregated, weight-scaled message passing with a shared affine +
/// tanh update, then decode to a relaxed activation and a phase.
#[derive(Debug, Clone)]
pub struct GnnModel {
    /// Per-node input features: [logit_n, phase_feature_n].
    pub node_features: Vec<[f64; 2]>,
    /// Self transform, row-major 2x2.
    pub w_self: [f64; 4],
    /// Message transform, row-major 2x2.
    pub w_msg: [f64; 4],
    pub bias: [f64; 2],
    pub rounds: usize,
}

impl GnnModel {
    pub fn init<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut draw = || rng.gen_range(-0.1..0.1);
        GnnModel {
            node_features: (0..n).map(|_| [1.0 + draw(), draw()]).collect(),
            w_self: [1.0, 0.0, 0.0, 1.0],
            w_msg: [0.0; 4],
            bias: [0.0; 2],
            rounds: 2,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.node_features.len() + 10
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for f in &self.node_features {
            out.extend_from_slice(f);
        }
        out.extend_from_slice(&self.w_self);
        out.extend_from_slice(&self.w_msg);
        out.extend_from_slice(&self.bias);
        out
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.dim());
        let n = self.node_features.len();
        for i in 0..n {
            self.node_features[i] = [v[2 * i], v[2 * i + 1]];
        }
        self.w_self.copy_from_slice(&v[2 * n..2 * n + 4]);
        self.w_msg.copy_from_slice(&v[2 * n + 4..2 * n + 8]);
        self.bias.copy_from_slice(&v[2 * n + 8..2 * n + 10]);
    }

    /// Forward pass: relaxed activations (sigmoid) and phases in [0, 2 pi).
    pub fn forward(&self, graph: &RisGraph) -> (Vec<f64>, Vec<f64>) {
        let n = graph.n_vertices();
        let mut h: Vec<[f64; 2]> = self.node_features.clone();
        for _ in 0..self.rounds {
            let mut next = vec![[0.0f64; 2]; n];
            for i in 0..n {
                let mut msg = [0.0f64; 2];
                let mut count = 0.0;
                for (e, &(a, b)) in graph.edges.iter().enumerate() {
                    let j = if a == i {
                        b
                    } else if b == i {
                        a
                    } else {
                        continue;
                    };
                    msg[0] += graph.weights[e] * h[j][0];
                    msg[1] += graph.weights[e] * h[j][1];
                    count += 1.0;
                }
                if count > 0.0 {
                    msg[0] /= count;
                    msg[1] /= count;
                }
                for r in 0..2 {
                    let z = self.w_self[2 * r] * h[i][0]
                        + self.w_self[2 * r + 1] * h[i][1]
                        + self.w_msg[2 * r] * msg[0]
                        + self.w_msg[2 * r + 1] * msg[1]
                        + self.bias[r];
                    next[i][r] = z.tanh();
                }
            }
            h = next;
        }
        let act = h.iter().map(|f| sigmoid(4.0 * f[0])).collect();
        let phases = h
            .iter()
            .map(|f| wrap_phase(std::f64::consts::PI * (f[1] + 1.0)))
            .collect();
        (act, phases)
    }
}

/// Train the classical baseline by central-finite-difference gradient
/// descent on the relaxed loss; the returned state is hard-thresholded.
pub fn classical_gnn<R: Rng>(
    channels: &ChannelSet,
    config: &SystemConfig,
    graph: &RisGraph,
    epochs: usize,
    learning_rate: f64,
    rng: &mut R,
) -> Result<(RisState, TrainReport)> {
    let start = std::time::Instant::now();
    let mut model = GnnModel::init(config.n_elements, rng);
    let h = 1e-4;

    let eval = |model: &GnnModel| -> Result<(f64, RisState, f64)> {
        let (soft, phases) = model.forward(graph);
        let l = relaxed_loss(&soft, &phases, channels, config)?;
        let hard: Vec<bool> = soft.iter().map(|a| *a >= 0.5).collect();
        let state = RisState::new(hard, phases);
        let rate = min_rate(&state, channels, config)?;
        Ok((l, state, rate))
    };

    let mut loss_trace = Vec::with_capacity(epochs);
    let mut min_rate_trace = Vec::with_capacity(epochs);
    let mut best_state = RisState::all_active(config.n_elements);
    let mut best_min_rate = f64::NEG_INFINITY;
    let mut best_feasible = false;
    for _ in 0..epochs {
        let (l, state, rate) = eval(&model)?;
        loss_trace.push(l);
        min_rate_trace.push(rate);
        let feasible = state.is_feasible(config);
        let improves = if best_feasible {
            feasible && rate > best_min_rate
        } else {
            feasible || rate > best_min_rate
        };
        if improves {
            best_state = state;
            best_min_rate = rate;
            best_feasible = feasible;
        }

        let mut flat = model.flatten();
        let mut grad = vec![0.0f64; flat.len()];
        for i in 0..flat.len() {
            let orig = flat[i];
            flat[i] = orig + h;
            model.set_flat(&flat);
            let lp = eval(&model)?.0;
            flat[i] = orig - h;
            model.set_flat(&flat);
            let lm = eval(&model)?.0;
            flat[i] = orig;
            grad[i] = (lp - lm) / (2.0 * h);
        }
        for (p, g) in flat.iter_mut().zip(&grad) {
            *p -= learning_rate * g;
        }
        model.set_flat(&flat);
    }
    let convergence_epoch = detect_convergence(&loss_trace, 1e-3, 5);
    let report = TrainReport {
        loss_trace,
        min_rate_trace,
        best_state: best_state.clone(),
        best_min_rate: best_min_rate.max(0.0),
        best_feasible,
        convergence_epoch,
        circuit_evals: 0,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((best_state, report))
}

/// All-active state with phases drawn uniformly from [0, 2 pi).
pub fn random_phase_state<R: Rng>(config: &SystemConfig, rng: &mut R) -> RisState {
    let phases = (0..config.n_elements)
        .map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI))
        .collect();
    RisState::new(vec![true; config.n_elements], phases)
}

/// All-active state with per-element phase alignment of the dominant
/// cascaded term, targeting the UE that is weakest under zero phases.
pub fn fixed_spacing_state(channels: &ChannelSet, config: &SystemConfig) -> Result<RisState> {
    let zero = RisState::all_active(config.n_elements);
    let (_, rates) = sinr_and_rates(&zero, channels, config)?;
    let target = rates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(k, _)| k)
        .unwrap_or(0);
    let phases = (0..config.n_elements)
        .map(|n| {
            let term: Complex64 = (0..config.n_aps)
                .map(|m| channels.ap[m][n].conj() * channels.ue[n][target])
                .sum();
            if term.norm() == 0.0 {
                0.0
            } else {
                wrap_phase(-term.arg())
            }
        })
        .collect();
    Ok(RisState::new(vec![true; config.n_elements], phases))
}

/// Golden-section line search on [0, 2 pi) with a fixed evaluation budget;
/// keeps the incumbent value when the search does not improve on it.
fn golden_section_phase<F: FnMut(f64) -> f64>(mut f: F, incumbent: f64, evals: usize) -> f64 {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 2.0 * std::f64::consts::PI);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = (incumbent, f(incumbent));
    for _ in 0..evals.saturating_sub(3) {
        if fc > fd {
            if fc > best.1 {
                best = (c, fc);
            }
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            if fd > best.1 {
                best = (d, fd);
            }
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    if fc > best.1 {
        best = (c, fc);
    }
    if fd > best.1 {
        best = (d, fd);
    }
    best.0
}

/// Continuous-phase all-active reference: cyclic coordinate ascent on the
/// min-rate, 16 evaluations per coordinate, 3 sweeps.
pub fn continuous_phase_state(channels: &ChannelSet, config: &SystemConfig) -> Result<RisState> {
    let mut state = RisState::all_active(config.n_elements);
    for _ in 0..3 {
        for n in 0..config.n_elements {
            let incumbent = state.phases[n];
            let mut probe = state.clone();
            let best = golden_section_phase(
                |phi| {
                    probe.phases[n] = phi;
                    min_rate(&probe, channels, config).unwrap_or(0.0)
                },
                incumbent,
                16,
            );
            state.phases[n] = best;
        }
    }
    Ok(state)
}

/// The labeled reference configurations: random-phase, fixed-spacing,
/// continuous-phase coordinate ascent, and its B-bit discrete projection.
pub fn reference_configs<R: Rng>(
    channels: &ChannelSet,
    config: &SystemConfig,
    phase_bits: u32,
    rng: &mut R,
) -> Result<Vec<(String, RisState)>> {
    let random = random_phase_state(config, rng);
    let fixed = fixed_spacing_state(channels, config)?;
    let continuous = continuous_phase_state(channels, config)?;
    let discrete = project_phases(&continuous, phase_bits);
    Ok(vec![
        ("random".into(), random),
        ("fixed".into(), fixed),
        ("gd".into(), continuous),
        ("discrete".into(), discrete),
    ])
}
