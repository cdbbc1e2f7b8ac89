//! Spacing-dependent double-sided RIS channel physics.
//!
//! Rician LoS/NLoS channels over a dense half-wavelength grid, mutual
//! coupling over the active subset, cascaded AP->RIS->UE gains, SINR and
//! achievable rates, constraint evaluation, and the penalized training loss.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Wrap an angle into [0, 2*pi).
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = x % two_pi;
    if y < 0.0 {
        y += two_pi;
    }
    // `%` can return exactly two_pi after the correction for tiny negatives
    if y >= two_pi {
        y -= two_pi;
    }
    y
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Front,
    Back,
}

/// Per-UE loss weights and penalty coefficients of the training loss.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossWeights {
    /// w_k, one per UE; non-negative, summing to 1.
    pub ue_weights: Vec<f64>,
    /// lambda_1, phase-norm regularizer.
    pub lambda_phase: f64,
    /// lambda_2, aperture-violation indicator penalty.
    pub lambda_aperture: f64,
    /// lambda_act, quadratic hinge on the activation deficit.
    pub lambda_activation: f64,
}

/// All physical constants and problem dimensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemConfig {
    pub carrier_freq_hz: f64,
    pub bandwidth_hz: f64,
    /// Rician factor, linear scale.
    pub rician_kappa: f64,
    /// sigma_k^2, per UE (shared scalar).
    pub noise_power_w: f64,
    /// P_k, one per UE.
    pub tx_powers_w: Vec<f64>,
    pub n_elements: usize,
    /// Grid pitch; lambda/2 when built from defaults.
    pub d_min_m: f64,
    /// Aperture cap D_total.
    pub d_total_m: f64,
    pub n_min: usize,
    pub n_aps: usize,
    pub n_ues: usize,
    /// (AP->RIS, RIS->UE) path-loss exponents.
    pub path_loss_exponents: (f64, f64),
    pub loss_weights: LossWeights,
    /// Edge-weight decay coefficient of w_ij = exp(-w_decay * |p_i - p_j|).
    pub w_decay_per_m: f64,
    /// A side is powered iff its aggregate LoS power exceeds this fraction
    /// of the total.
    pub side_power_fraction: f64,
}

impl SystemConfig {
    /// Desk-scale defaults: 28 GHz, 100 MHz, kappa = 10 dB, -94 dBm noise,
    /// 1 W per UE, lambda/2 grid, full-grid aperture cap, uniform UE weights.
    pub fn desk(n_elements: usize, n_aps: usize, n_ues: usize) -> Self {
        let carrier_freq_hz = 28e9;
        let wavelength = SPEED_OF_LIGHT / carrier_freq_hz;
        let d_min = wavelength / 2.0;
        SystemConfig {
            carrier_freq_hz,
            bandwidth_hz: 100e6,
            rician_kappa: 10.0, // 10 dB
            noise_power_w: 10f64.powf((-94.0 - 30.0) / 10.0),
            tx_powers_w: vec![1.0; n_ues],
            n_elements,
            d_min_m: d_min,
            d_total_m: d_min * (n_elements.saturating_sub(1)) as f64,
            n_min: 2.min(n_elements),
            n_aps,
            n_ues,
            path_loss_exponents: (2.2, 3.8),
            loss_weights: LossWeights {
                ue_weights: vec![1.0 / n_ues as f64; n_ues],
                lambda_phase: 1e-4,
                lambda_aperture: 10.0,
                lambda_activation: 1.0,
            },
            w_decay_per_m: 1.0 / d_min,
            side_power_fraction: 0.1,
        }
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// Grid positions p_n = (n-1) * d_min.
    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_elements)
            .map(|n| n as f64 * self.d_min_m)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.carrier_freq_hz <= 0.0 || self.bandwidth_hz <= 0.0 {
            return Err(Error::Config("carrier/bandwidth must be positive".into()));
        }
        if self.rician_kappa <= 0.0 || self.noise_power_w <= 0.0 {
            return Err(Error::Config(
                "kappa and noise power must be positive".into(),
            ));
        }
        if self.tx_powers_w.len() != self.n_ues || self.tx_powers_w.iter().any(|p| *p <= 0.0) {
            return Err(Error::Config("need one positive tx power per UE".into()));
        }
        if self.n_min < 1 || self.n_min > self.n_elements {
            return Err(Error::Config("n_min out of range".into()));
        }
        if self.d_total_m < self.d_min_m * (self.n_min - 1) as f64 {
            return Err(Error::Config("aperture cap below n_min footprint".into()));
        }
        let w = &self.loss_weights.ue_weights;
        if w.len() != self.n_ues || w.iter().any(|x| *x < 0.0) {
            return Err(Error::Config(
                "UE weights must be non-negative, one per UE".into(),
            ));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "UE weights must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Geometry, side labels, and one sampled NLoS realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    /// theta_m, departure angle per AP.
    pub ap_angles_rad: Vec<f64>,
    /// theta_k, arrival angle per UE.
    pub ue_angles_rad: Vec<f64>,
    /// r_{m,n}, M x N.
    pub ap_ris_distances_m: Vec<Vec<f64>>,
    /// r_{n,k}, N x K.
    pub ris_ue_distances_m: Vec<Vec<f64>>,
    /// beta_k composite large-scale path loss, per UE.
    pub beta: Vec<f64>,
    pub element_sides: Vec<Side>,
    pub ap_sides: Vec<Side>,
    pub ue_sides: Vec<Side>,
    /// Stored NLoS draws, M x N and N x K.
    pub nlos_ap: Vec<Vec<Complex64>>,
    pub nlos_ue: Vec<Vec<Complex64>>,
}

impl Scenario {
    pub fn validate(&self, config: &SystemConfig) -> Result<()> {
        let (m, n, k) = (config.n_aps, config.n_elements, config.n_ues);
        if self.ap_angles_rad.len() != m || self.ue_angles_rad.len() != k {
            return Err(Error::contract(
                "angle vector dimensions do not match config",
            ));
        }
        if self.ap_ris_distances_m.len() != m
            || self.ap_ris_distances_m.iter().any(|row| row.len() != n)
            || self.ris_ue_distances_m.len() != n
            || self.ris_ue_distances_m.iter().any(|row| row.len() != k)
        {
            return Err(Error::contract(
                "distance matrix dimensions do not match config",
            ));
        }
        let all_pos = self
            .ap_ris_distances_m
            .iter()
            .chain(self.ris_ue_distances_m.iter())
            .all(|row| row.iter().all(|d| *d > 0.0));
        if !all_pos {
            return Err(Error::domain("all distances must be strictly positive"));
        }
        if self.element_sides.len() != n || self.ap_sides.len() != m || self.ue_sides.len() != k {
            return Err(Error::contract("side label dimensions do not match config"));
        }
        Ok(())
    }
}

/// Activation pattern and phase profile: the decision variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisState {
    pub activation: Vec<bool>,
    /// phi_n in [0, 2*pi).
    pub phases: Vec<f64>,
}

impl RisState {
    pub fn new(activation: Vec<bool>, phases: Vec<f64>) -> Self {
        let phases = phases.into_iter().map(wrap_phase).collect();
        RisState { activation, phases }
    }

    pub fn all_active(n: usize) -> Self {
        RisState {
            activation: vec![true; n],
            phases: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.activation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activation.is_empty()
    }

    pub fn n_active(&self) -> usize {
        self.activation.iter().filter(|a| **a).count()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.activation.len())
            .filter(|i| self.activation[*i])
            .collect()
    }

    /// Occupied aperture: (last active - first active) * d_min.
    pub fn aperture_m(&self, d_min: f64) -> f64 {
        let idx = self.active_indices();
        match (idx.first(), idx.last()) {
            (Some(first), Some(last)) => (last - first) as f64 * d_min,
            _ => 0.0,
        }
    }

    pub fn satisfies_min_active(&self, n_min: usize) -> bool {
        self.n_active() >= n_min
    }

    pub fn satisfies_aperture(&self, d_min: f64, d_total: f64) -> bool {
        self.aperture_m(d_min) <= d_total + 1e-12
    }

    pub fn is_feasible(&self, config: &SystemConfig) -> bool {
        self.satisfies_min_active(config.n_min)
            && self.satisfies_aperture(config.d_min_m, config.d_total_m)
    }
}

/// Coupling matrix over the active element subset, C = I + C_mutual.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    pub entries: Vec<Vec<Complex64>>,
}

impl CouplingMatrix {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }
}

/// Sampled Rician channels after double-sided masking.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// h_m entries, M x N.
    pub ap: Vec<Vec<Complex64>>,
    /// h_k entries, N x K.
    pub ue: Vec<Vec<Complex64>>,
    /// beta_k, copied from the scenario.
    pub beta: Vec<f64>,
}

/// LoS components (unmasked): h^LoS_{m,n} and h^LoS_{n,k}.
///
/// Magnitudes are exactly lambda / (4*pi*r); steering phases use the grid
/// positions p_n = (n-1) * d_min, with opposite sign conventions on the AP
/// and UE sides.
/// Complex gain matrix indexed `[link][element]`.
pub type LinkMatrix = Vec<Vec<Complex64>>;

pub fn los_components(
    scenario: &Scenario,
    config: &SystemConfig,
) -> Result<(LinkMatrix, LinkMatrix)> {
    scenario.validate(config)?;
    let lambda = config.wavelength_m();
    let k_wave = 2.0 * PI / lambda;
    let positions = config.positions();

    let ap = (0..config.n_aps)
        .map(|m| {
            (0..config.n_elements)
                .map(|n| {
                    let r = scenario.ap_ris_distances_m[m][n];
                    let mag = lambda / (4.0 * PI * r);
                    let phase =
                        -k_wave * r + k_wave * positions[n] * scenario.ap_angles_rad[m].sin();
                    Complex64::from_polar(mag, phase)
                })
                .collect()
        })
        .collect();

    let ue = (0..config.n_elements)
        .map(|n| {
            (0..config.n_ues)
                .map(|k| {
                    let r = scenario.ris_ue_distances_m[n][k];
                    let mag = lambda / (4.0 * PI * r);
                    let phase =
                        -k_wave * r - k_wave * positions[n] * scenario.ue_angles_rad[k].sin();
                    Complex64::from_polar(mag, phase)
                })
                .collect()
        })
        .collect();

    Ok((ap, ue))
}

fn draw_nlos<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Vec<Vec<Complex64>> {
    // CN(0,1): independent real/imag parts with variance 1/2 each
    let normal = Normal::new(0.0, (0.5f64).sqrt()).expect("valid stddev");
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| Complex64::new(normal.sample(rng), normal.sample(rng)))
                .collect()
        })
        .collect()
}

/// Draw a fresh NLoS realization with the given RNG. M x N and N x K.
pub fn sample_nlos<R: Rng>(
    config: &SystemConfig,
    rng: &mut R,
) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
    let ap = draw_nlos(config.n_aps, config.n_elements, rng);
    let ue = draw_nlos(config.n_elements, config.n_ues, rng);
    (ap, ue)
}

fn mix_channels(
    scenario: &Scenario,
    config: &SystemConfig,
    nlos_ap: &[Vec<Complex64>],
    nlos_ue: &[Vec<Complex64>],
) -> Result<ChannelSet> {
    let (los_ap, los_ue) = los_components(scenario, config)?;
    let kappa = config.rician_kappa;
    let w_los = (kappa / (kappa + 1.0)).sqrt();
    let w_nlos = (1.0 / (kappa + 1.0)).sqrt();

    let mut ap: Vec<Vec<Complex64>> = (0..config.n_aps)
        .map(|m| {
            (0..config.n_elements)
                .map(|n| w_los * los_ap[m][n] + w_nlos * nlos_ap[m][n])
                .collect()
        })
        .collect();
    let mut ue: Vec<Vec<Complex64>> = (0..config.n_elements)
        .map(|n| {
            (0..config.n_ues)
                .map(|k| w_los * los_ue[n][k] + w_nlos * nlos_ue[n][k])
                .collect()
        })
        .collect();

    // Double-sided masking: an element only couples to terminals on its side.
    for m in 0..config.n_aps {
        for n in 0..config.n_elements {
            if scenario.ap_sides[m] != scenario.element_sides[n] {
                ap[m][n] = Complex64::new(0.0, 0.0);
            }
        }
    }
    for n in 0..config.n_elements {
        for k in 0..config.n_ues {
            if scenario.ue_sides[k] != scenario.element_sides[n] {
                ue[n][k] = Complex64::new(0.0, 0.0);
            }
        }
    }

    Ok(ChannelSet {
        ap,
        ue,
        beta: scenario.beta.clone(),
    })
}

/// Sample a fresh Rician channel realization: h = sqrt(k/(k+1)) h_LoS +
/// sqrt(1/(k+1)) h_NLoS, masked by side. Deterministic given the RNG seed.
pub fn sample_channels<R: Rng>(
    scenario: &Scenario,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<ChannelSet> {
    let (nlos_ap, nlos_ue) = sample_nlos(config, rng);
    mix_channels(scenario, config, &nlos_ap, &nlos_ue)
}

/// Build the channel set from the NLoS realization stored in the scenario.
pub fn channels_from_scenario(scenario: &Scenario, config: &SystemConfig) -> Result<ChannelSet> {
    mix_channels(scenario, config, &scenario.nlos_ap, &scenario.nlos_ue)
}

/// Mutual-coupling matrix over the active positions: C = I + C_mutual with
/// off-diagonal entries sinc(k0 d) * exp(-j k0 d), d = |p_i - p_j|.
pub fn mutual_coupling(active_positions: &[f64], config: &SystemConfig) -> Result<CouplingMatrix> {
    if active_positions.is_empty() {
        return Err(Error::domain("need at least one active element"));
    }
    if active_positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(
            "active positions must be strictly increasing",
        ));
    }
    let k0 = 2.0 * PI / config.wavelength_m();
    let n = active_positions.len();
    let mut entries = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        entries[i][i] = Complex64::new(1.0, 0.0);
        for j in (i + 1)..n {
            let d = (active_positions[i] - active_positions[j]).abs();
            let x = k0 * d;
            let c = (x.sin() / x) * Complex64::from_polar(1.0, -x);
            entries[i][j] = c;
            entries[j][i] = c;
        }
    }
    Ok(CouplingMatrix { entries })
}

/// Effective spacings between consecutive active elements.
pub fn effective_spacings(activation: &[bool], d_min: f64) -> Vec<f64> {
    let idx: Vec<usize> = (0..activation.len()).filter(|i| activation[*i]).collect();
    idx.windows(2)
        .map(|w| (w[1] - w[0]) as f64 * d_min)
        .collect()
}

/// Cascaded gains h_{m,k} = sqrt(beta_k) h_m^H C(d(a)) R(Phi,a) h_k, M x K.
///
/// The coupling matrix is built over active elements only; deactivated
/// elements are transparent and contribute nothing.
pub fn cascaded_gain(
    state: &RisState,
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<Vec<Vec<Complex64>>> {
    if state.len() != config.n_elements {
        return Err(Error::contract(
            "RIS state length does not match n_elements",
        ));
    }
    if channels.ap.len() != config.n_aps || channels.ue.len() != config.n_elements {
        return Err(Error::contract(
            "channel set dimensions do not match config",
        ));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut gains = vec![vec![zero; config.n_ues]; config.n_aps];

    let active = state.active_indices();
    if active.is_empty() {
        return Ok(gains);
    }
    let positions = config.positions();
    let active_positions: Vec<f64> = active.iter().map(|i| positions[*i]).collect();
    let coupling = mutual_coupling(&active_positions, config)?;

    // reflected[j][k] = e^{j phi_j} * h_ue[j][k] over active j
    let na = active.len();
    for m in 0..config.n_aps {
        // row = h_m^H C restricted to active indices
        let mut row = vec![zero; na];
        for (jj, _) in active.iter().enumerate() {
            let mut acc = zero;
            for (ii, &gi) in active.iter().enumerate() {
                acc += channels.ap[m][gi].conj() * coupling.entries[ii][jj];
            }
            row[jj] = acc;
        }
        for k in 0..config.n_ues {
            let mut acc = zero;
            for (jj, &gj) in active.iter().enumerate() {
                let refl = Complex64::from_polar(1.0, state.phases[gj]);
                acc += row[jj] * refl * channels.ue[gj][k];
            }
            gains[m][k] = channels.beta[k].sqrt() * acc;
        }
    }
    Ok(gains)
}

/// Per-UE SINR gamma_k and achievable rate R_k = log2(1 + gamma_k).
pub fn sinr_and_rates(
    state: &RisState,
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let gains = cascaded_gain(state, channels, config)?;
    let received: Vec<f64> = (0..config.n_ues)
        .map(|k| {
            let sum: Complex64 = (0..config.n_aps).map(|m| gains[m][k]).sum();
            config.tx_powers_w[k] * sum.norm_sqr()
        })
        .collect();
    let mut sinr = Vec::with_capacity(config.n_ues);
    let mut rates = Vec::with_capacity(config.n_ues);
    for k in 0..config.n_ues {
        let interference: f64 = (0..config.n_ues)
            .filter(|i| *i != k)
            .map(|i| received[i])
            .sum();
        let g = received[k] / (interference + config.noise_power_w);
        sinr.push(g);
        rates.push((1.0 + g).log2());
    }
    Ok((sinr, rates))
}

/// min_k R_k: the quantity maximized by the joint optimization.
pub fn objective_min_rate(
    state: &RisState,
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<f64> {
    let (_, rates) = sinr_and_rates(state, channels, config)?;
    Ok(rates.iter().copied().fold(f64::INFINITY, f64::min).max(0.0))
}

/// Penalized training loss:
/// L = -sum_k w_k R_k + l1 * ||Phi||^2 (active elements only)
///   + l2 * 1[aperture exceeded] + l_act * max(0, N_min - sum a)^2.
pub fn loss(state: &RisState, channels: &ChannelSet, config: &SystemConfig) -> Result<f64> {
    let (_, rates) = sinr_and_rates(state, channels, config)?;
    Ok(loss_from_rates(state, &rates, config))
}

/// Loss given precomputed rates; shared with the relaxed classical baseline.
pub fn loss_from_rates(state: &RisState, rates: &[f64], config: &SystemConfig) -> f64 {
    let lw = &config.loss_weights;
    let weighted: f64 = rates.iter().zip(&lw.ue_weights).map(|(r, w)| r * w).sum();
    let phase_norm: f64 = state
        .activation
        .iter()
        .zip(&state.phases)
        .filter(|(a, _)| **a)
        .map(|(_, p)| p * p)
        .sum();
    let d_eff_sum: f64 = effective_spacings(&state.activation, config.d_min_m)
        .iter()
        .sum();
    let aperture_pen = if d_eff_sum > config.d_total_m + 1e-12 {
        lw.lambda_aperture
    } else {
        0.0
    };
    let deficit = (config.n_min as f64 - state.n_active() as f64).max(0.0);
    -weighted
        + lw.lambda_phase * phase_norm
        + aperture_pen
        + lw.lambda_activation * deficit * deficit
}

/// Coherence-block timing feasibility and the delayed-adaptation
/// correlation rho = J0(2*pi*f_D*T_c).
pub fn coherence_report(
    t_pilot_s: f64,
    t_opt_s: f64,
    t_switch_s: f64,
    t_coherence_s: f64,
    doppler_hz: f64,
) -> (bool, f64) {
    let feasible = t_pilot_s + t_opt_s + t_switch_s < t_coherence_s;
    let rho = bessel_j0(2.0 * PI * doppler_hz * t_coherence_s);
    (feasible, rho)
}

/// Bessel J0: ascending series for |x| < 8, asymptotic expansion beyond.
/// Absolute accuracy better than 1e-6 on [0, 20].
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 8.0 {
        // sum (-1)^m (x^2/4)^m / (m!)^2 with term recurrence
        let q = ax * ax / 4.0;
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut m = 1.0;
        while term.abs() > 1e-18 {
            term *= -q / (m * m);
            sum += term;
            m += 1.0;
            if m > 200.0 {
                break;
            }
        }
        sum
    } else {
        // Hankel asymptotic expansion, rational fits in z = 8/x
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - std::f64::consts::FRAC_PI_4;
        let p0 = 1.0
            + y * (-0.1098628627e-2
                + y * (0.2734510407e-4 + y * (-0.2073370639e-5 + y * 0.2093887211e-6)));
        let q0 = -0.1562499995e-1
            + y * (0.1430488765e-3
                + y * (-0.6911147651e-5 + y * (0.7621095161e-6 + y * (-0.934935152e-7))));
        (std::f64::consts::FRAC_2_PI / ax).sqrt() * (xx.cos() * p0 - z * xx.sin() * q0)
    }
}

/// Aggregate LoS power reaching each side: AP-side plus UE-side terms over
/// elements labeled with that side.
pub fn side_powers(scenario: &Scenario, config: &SystemConfig) -> Result<[f64; 2]> {
    let (los_ap, los_ue) = los_components(scenario, config)?;
    let mut power = [0.0f64; 2];
    for n in 0..config.n_elements {
        let s = scenario.element_sides[n];
        let idx = if s == Side::Front { 0 } else { 1 };
        for m in 0..config.n_aps {
            if scenario.ap_sides[m] == s {
                power[idx] += los_ap[m][n].norm_sqr();
            }
        }
        for k in 0..config.n_ues {
            if scenario.ue_sides[k] == s {
                power[idx] += los_ue[n][k].norm_sqr();
            }
        }
    }
    Ok(power)
}

/// Side activation mask: elements on a side whose aggregate LoS power falls
/// below `side_power_fraction` of the total are forced inactive (standby).
pub fn side_activation_mask(scenario: &Scenario, config: &SystemConfig) -> Result<Vec<bool>> {
    let power = side_powers(scenario, config)?;
    let total = power[0] + power[1];
    let powered = |idx: usize| total <= 0.0 || power[idx] >= config.side_power_fraction * total;
    Ok(scenario
        .element_sides
        .iter()
        .map(|s| {
            if *s == Side::Front {
                powered(0)
            } else {
                powered(1)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_sided_scenario(config: &SystemConfig, ap_dist: f64, ue_dist: f64) -> Scenario {
        let (m, n, k) = (config.n_aps, config.n_elements, config.n_ues);
        Scenario {
            ap_angles_rad: vec![0.0; m],
            ue_angles_rad: vec![0.0; k],
            ap_ris_distances_m: vec![vec![ap_dist; n]; m],
            ris_ue_distances_m: vec![vec![ue_dist; k]; n],
            beta: vec![1.0; k],
            element_sides: vec![Side::Front; n],
            ap_sides: vec![Side::Front; m],
            ue_sides: vec![Side::Front; k],
            nlos_ap: vec![vec![Complex64::new(0.0, 0.0); n]; m],
            nlos_ue: vec![vec![Complex64::new(0.0, 0.0); k]; n],
        }
    }

    #[test]
    fn los_magnitude_at_10m_28ghz() {
        let config = SystemConfig::desk(4, 1, 1);
        let scenario = single_sided_scenario(&config, 10.0, 10.0);
        let (ap, ue) = los_components(&scenario, &config).unwrap();
        let expected = config.wavelength_m() / (4.0 * PI * 10.0);
        assert!((expected - 8.520e-5).abs() < 2e-8);
        for n in 0..4 {
            assert!((ap[0][n].norm() - expected).abs() < 1e-15);
            assert!((ue[n][0].norm() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn steering_factor_trivial_cases() {
        let config = SystemConfig::desk(3, 1, 1);
        // theta = 0: all elements share the same LoS phase when distances match
        let scenario = single_sided_scenario(&config, 7.0, 9.0);
        let (ap, _) = los_components(&scenario, &config).unwrap();
        for n in 1..3 {
            assert!((ap[0][n] - ap[0][0]).norm() < 1e-15);
        }
        // p_0 = 0: element 0 phase is -k*r for any angle
        let mut angled = scenario.clone();
        angled.ap_angles_rad[0] = 0.7;
        let (ap2, _) = los_components(&angled, &config).unwrap();
        assert!((ap2[0][0] - ap[0][0]).norm() < 1e-15);
    }

    #[test]
    fn los_rejects_nonpositive_distance() {
        let config = SystemConfig::desk(2, 1, 1);
        let mut scenario = single_sided_scenario(&config, 5.0, 5.0);
        scenario.ap_ris_distances_m[0][1] = 0.0;
        assert!(los_components(&scenario, &config).is_err());
    }

    #[test]
    fn rician_limit_and_weight() {
        let mut config = SystemConfig::desk(3, 2, 2);
        config.rician_kappa = 1e12;
        // distance chosen so |h_LoS| = 1, making the relative bound meaningful
        let r_unit = config.wavelength_m() / (4.0 * PI);
        let scenario = single_sided_scenario(&config, r_unit, r_unit);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ch = sample_channels(&scenario, &config, &mut rng).unwrap();
        let (los_ap, _) = los_components(&scenario, &config).unwrap();
        for m in 0..2 {
            for n in 0..3 {
                let rel = (ch.ap[m][n] - los_ap[m][n]).norm() / los_ap[m][n].norm();
                assert!(rel < 1e-5, "rel err {rel}");
            }
        }
        // kappa = 10 dB -> LoS weight sqrt(10/11)
        let w = (10.0f64 / 11.0).sqrt();
        assert!((w - 0.9535).abs() < 1e-4);
    }

    #[test]
    fn sample_channels_deterministic_per_seed() {
        let config = SystemConfig::desk(4, 2, 2);
        let scenario = single_sided_scenario(&config, 15.0, 25.0);
        let a = sample_channels(&scenario, &config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_channels(&scenario, &config, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a.ap, b.ap);
        assert_eq!(a.ue, b.ue);
    }

    #[test]
    fn coupling_zero_on_half_wavelength_grid() {
        let config = SystemConfig::desk(4, 1, 1);
        let c = mutual_coupling(&config.positions(), &config).unwrap();
        for i in 0..4 {
            assert_eq!(c.entries[i][i], Complex64::new(1.0, 0.0));
            for j in 0..4 {
                if i != j {
                    assert!(c.entries[i][j].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn coupling_quarter_wavelength_value() {
        let config = SystemConfig::desk(2, 1, 1);
        let lam = config.wavelength_m();
        let c = mutual_coupling(&[0.0, lam / 4.0], &config).unwrap();
        let expected = Complex64::new(0.0, -2.0 / PI);
        assert!((c.entries[0][1] - expected).norm() < 1e-12);
        // Pinned five-digit reference value, not a rounding of 2/pi.
        #[allow(clippy::approx_constant)]
        let pinned = 0.63662;
        assert!((c.entries[0][1].im + pinned).abs() < 1e-5);
        // complex-symmetric, not Hermitian
        assert_eq!(c.entries[0][1], c.entries[1][0]);
    }

    #[test]
    fn coupling_single_element_and_duplicates() {
        let config = SystemConfig::desk(1, 1, 1);
        let c = mutual_coupling(&[0.0], &config).unwrap();
        assert_eq!(c.dim(), 1);
        assert_eq!(c.entries[0][0], Complex64::new(1.0, 0.0));
        assert!(mutual_coupling(&[0.0, 0.0], &config).is_err());
        assert!(mutual_coupling(&[], &config).is_err());
    }

    #[test]
    fn effective_spacing_examples() {
        assert_eq!(
            effective_spacings(&[true, false, true, true], 1.0),
            vec![2.0, 1.0]
        );
        assert_eq!(effective_spacings(&[true; 5], 1.0), vec![1.0; 4]);
        assert_eq!(
            effective_spacings(&[false, true, false, false, true], 1.0),
            vec![3.0]
        );
        assert!(effective_spacings(&[false, true], 1.0).is_empty());
    }

    #[test]
    fn cascaded_all_inactive_is_zero() {
        let config = SystemConfig::desk(3, 2, 2);
        let scenario = single_sided_scenario(&config, 10.0, 10.0);
        let ch = channels_from_scenario(&scenario, &config).unwrap();
        let state = RisState::new(vec![false; 3], vec![0.0; 3]);
        let g = cascaded_gain(&state, &ch, &config).unwrap();
        for row in &g {
            for v in row {
                assert_eq!(*v, Complex64::new(0.0, 0.0));
            }
        }
        assert_eq!(objective_min_rate(&state, &ch, &config).unwrap(), 0.0);
    }

    #[test]
    fn cascaded_single_element_closed_form() {
        let config = SystemConfig::desk(1, 2, 1);
        let scenario = single_sided_scenario(&config, 10.0, 20.0);
        let ch = channels_from_scenario(&scenario, &config).unwrap();
        let phi = 1.234;
        let state = RisState::new(vec![true], vec![phi]);
        let g = cascaded_gain(&state, &ch, &config).unwrap();
        for m in 0..2 {
            let expected = ch.beta[0].sqrt()
                * ch.ap[m][0].conj()
                * Complex64::from_polar(1.0, phi)
                * ch.ue[0][0];
            assert!((g[m][0] - expected).norm() < 1e-18);
        }
    }

    #[test]
    fn common_phase_offset_rotates_gain_on_grid() {
        // On the lambda/2 grid C = I, so adding delta to every phase must
        // multiply each gain by e^{j delta}.
        let config = SystemConfig::desk(4, 2, 2);
        let scenario = single_sided_scenario(&config, 10.0, 15.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let ch = sample_channels(&scenario, &config, &mut rng).unwrap();
        let phases: Vec<f64> = (0..4).map(|i| 0.3 * i as f64).collect();
        let state = RisState::new(vec![true; 4], phases.clone());
        let delta = 0.77;
        let shifted = RisState::new(vec![true; 4], phases.iter().map(|p| p + delta).collect());
        let g0 = cascaded_gain(&state, &ch, &config).unwrap();
        let g1 = cascaded_gain(&shifted, &ch, &config).unwrap();
        let rot = Complex64::from_polar(1.0, delta);
        for m in 0..2 {
            for k in 0..2 {
                assert!((g1[m][k] - g0[m][k] * rot).norm() < 1e-12 * g0[m][k].norm().max(1e-30));
            }
        }
    }

    #[test]
    fn sinr_single_user_and_rate_points() {
        let config = SystemConfig::desk(2, 1, 1);
        let scenario = single_sided_scenario(&config, 10.0, 10.0);
        let ch = channels_from_scenario(&scenario, &config).unwrap();
        let state = RisState::all_active(2);
        let (sinr, rates) = sinr_and_rates(&state, &ch, &config).unwrap();
        let g = cascaded_gain(&state, &ch, &config).unwrap();
        let expected = config.tx_powers_w[0] * g[0][0].norm_sqr() / config.noise_power_w;
        assert!((sinr[0] - expected).abs() <= 1e-9 * expected);
        assert!((rates[0] - (1.0 + sinr[0]).log2()).abs() < 1e-12);
        // rate anchor points
        assert!(((1.0f64 + 1.0).log2() - 1.0).abs() < 1e-15);
        assert!(((1.0f64 + 3.0).log2() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sinr_decreases_with_interferer_power() {
        let mut config = SystemConfig::desk(3, 2, 2);
        let scenario = single_sided_scenario(&config, 10.0, 12.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = sample_channels(&scenario, &config, &mut rng).unwrap();
        let state = RisState::all_active(3);
        let (base, _) = sinr_and_rates(&state, &ch, &config).unwrap();
        config.tx_powers_w[1] *= 4.0;
        let (bumped, _) = sinr_and_rates(&state, &ch, &config).unwrap();
        assert!(bumped[0] < base[0]);
    }

    #[test]
    fn min_rate_is_lower_bound() {
        let config = SystemConfig::desk(4, 2, 3);
        let scenario = single_sided_scenario(&config, 10.0, 18.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ch = sample_channels(&scenario, &config, &mut rng).unwrap();
        let state = RisState::all_active(4);
        let (_, rates) = sinr_and_rates(&state, &ch, &config).unwrap();
        let min = objective_min_rate(&state, &ch, &config).unwrap();
        for r in &rates {
            assert!(min <= *r + 1e-15);
        }
        assert!(rates.iter().any(|r| (*r - min).abs() < 1e-15));
    }

    #[test]
    fn loss_terms() {
        let mut config = SystemConfig::desk(4, 1, 1);
        config.n_min = 2;
        // all rates 0, zero phases, feasible activation -> L = 0
        let state = RisState::new(vec![true, true, false, false], vec![0.0; 4]);
        assert_eq!(loss_from_rates(&state, &[0.0], &config), 0.0);
        // activation deficit of 1 -> lambda_act * 1
        let deficit = RisState::new(vec![true, false, false, false], vec![0.0; 4]);
        let l = loss_from_rates(&deficit, &[0.0], &config);
        assert!((l - config.loss_weights.lambda_activation).abs() < 1e-12);
        // aperture exceeded -> +lambda_2 exactly
        config.d_total_m = config.d_min_m; // span of 2 active at ends exceeds this
        let wide = RisState::new(vec![true, false, false, true], vec![0.0; 4]);
        let l2 = loss_from_rates(&wide, &[0.0], &config);
        assert!((l2 - config.loss_weights.lambda_aperture).abs() < 1e-12);
    }

    #[test]
    fn loss_decreases_with_rate() {
        let config = SystemConfig::desk(4, 1, 2);
        let state = RisState::all_active(4);
        let l0 = loss_from_rates(&state, &[1.0, 1.0], &config);
        let l1 = loss_from_rates(&state, &[1.5, 1.0], &config);
        assert!(l1 < l0);
    }

    #[test]
    fn coherence_examples() {
        let (_, rho) = coherence_report(0.0, 0.0, 0.0, 1.0, 0.0);
        assert_eq!(rho, 1.0);
        assert!(bessel_j0(2.40483).abs() < 1e-4);
        // Table-derived timing: 0.1 ms + 18.3 ms > 1.5 ms
        let (feasible, _) = coherence_report(0.1e-3, 18.3e-3, 0.0, 1.5e-3, 280.0);
        assert!(!feasible);
    }

    #[test]
    fn side_mask_zeroes_opposite_pairs() {
        let config = SystemConfig::desk(2, 1, 2);
        let mut scenario = single_sided_scenario(&config, 10.0, 10.0);
        scenario.element_sides = vec![Side::Front, Side::Back];
        scenario.ue_sides = vec![Side::Front, Side::Back];
        let ch = channels_from_scenario(&scenario, &config).unwrap();
        // AP is front: back element sees nothing from it
        assert_eq!(ch.ap[0][1], Complex64::new(0.0, 0.0));
        assert!(ch.ap[0][0].norm() > 0.0);
        // front element serves only front UE
        assert!(ch.ue[0][0].norm() > 0.0);
        assert_eq!(ch.ue[0][1], Complex64::new(0.0, 0.0));
        assert_eq!(ch.ue[1][0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn side_mask_standby_side_forced_off() {
        let config = SystemConfig::desk(4, 1, 1);
        let mut scenario = single_sided_scenario(&config, 10.0, 10.0);
        scenario.element_sides = vec![Side::Front, Side::Front, Side::Back, Side::Back];
        // everything else front: back side receives zero LoS power
        let mask = side_activation_mask(&scenario, &config).unwrap();
        assert_eq!(mask, vec![true, true, false, false]);
    }

    #[test]
    fn wrap_phase_range() {
        for x in [-10.0, -0.1, 0.0, 0.1, 6.4, 100.0, -2.0 * PI, 2.0 * PI] {
            let y = wrap_phase(x);
            assert!((0.0..2.0 * PI).contains(&y), "wrap({x}) = {y}");
        }
    }
}
