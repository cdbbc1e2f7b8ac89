//! Minimal dense statevector simulator.
//!
//! Little-endian amplitude indexing: qubit `q` owns bit `1 << q` of the
//! amplitude index. Supports the gate set needed by the variational circuit
//! (X, H, CNOT, CPhase, Ry, Rz), exact Z expectations, shot sampling with
//! readout bit-flips, and stochastic-trajectory depolarizing noise.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    X { target: usize },
    H { target: usize },
    Cnot { control: usize, target: usize },
    CPhase { a: usize, b: usize, theta: f64 },
    Ry { target: usize, theta: f64 },
    Rz { target: usize, theta: f64 },
}

impl Gate {
    pub fn targets(&self) -> Vec<usize> {
        match *self {
            Gate::X { target }
            | Gate::H { target }
            | Gate::Ry { target, .. }
            | Gate::Rz { target, .. } => {
                vec![target]
            }
            Gate::Cnot { control, target } => vec![control, target],
            Gate::CPhase { a, b, .. } => vec![a, b],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot { .. } | Gate::CPhase { .. })
    }

    /// The adjoint gate (every supported gate's inverse is in the set).
    pub fn dagger(&self) -> Gate {
        match *self {
            Gate::X { .. } | Gate::H { .. } | Gate::Cnot { .. } => *self,
            Gate::CPhase { a, b, theta } => Gate::CPhase {
                a,
                b,
                theta: -theta,
            },
            Gate::Ry { target, theta } => Gate::Ry {
                target,
                theta: -theta,
            },
            Gate::Rz { target, theta } => Gate::Rz {
                target,
                theta: -theta,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuantumState {
    amps: Vec<Complex64>,
    n_qubits: usize,
}

impl QuantumState {
    /// |0...0> on `n_qubits`.
    pub fn new(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        QuantumState { amps, n_qubits }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_target(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::contract(format!(
                "qubit {q} out of range for {}-qubit state",
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// Apply a 2x2 unitary [[u00,u01],[u10,u11]] to `target`.
    fn apply_1q(&mut self, target: usize, u: [[Complex64; 2]; 2]) {
        let mask = 1usize << target;
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let a = self.amps[i];
                let b = self.amps[j];
                self.amps[i] = u[0][0] * a + u[0][1] * b;
                self.amps[j] = u[1][0] * a + u[1][1] * b;
            }
        }
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        let targets = gate.targets();
        for &t in &targets {
            self.check_target(t)?;
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::contract("two-qubit gate with duplicate targets"));
        }
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        match *gate {
            Gate::X { target } => {
                let mask = 1usize << target;
                for i in 0..self.amps.len() {
                    if i & mask == 0 {
                        self.amps.swap(i, i | mask);
                    }
                }
            }
            Gate::H { target } => {
                let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                self.apply_1q(target, [[s, s], [s, -s]]);
            }
            Gate::Ry { target, theta } => {
                let c = Complex64::new((theta / 2.0).cos(), 0.0);
                let s = Complex64::new((theta / 2.0).sin(), 0.0);
                self.apply_1q(target, [[c, -s], [s, c]]);
            }
            Gate::Rz { target, theta } => {
                let em = Complex64::from_polar(1.0, -theta / 2.0);
                let ep = Complex64::from_polar(1.0, theta / 2.0);
                self.apply_1q(target, [[em, zero], [zero, ep]]);
            }
            Gate::Cnot { control, target } => {
                let cm = 1usize << control;
                let tm = 1usize << target;
                for i in 0..self.amps.len() {
                    if i & cm != 0 && i & tm == 0 {
                        self.amps.swap(i, i | tm);
                    }
                }
            }
            Gate::CPhase { a, b, theta } => {
                let am = 1usize << a;
                let bm = 1usize << b;
                let phase = Complex64::from_polar(1.0, theta);
                for i in 0..self.amps.len() {
                    if i & am != 0 && i & bm != 0 {
                        self.amps[i] *= phase;
                    }
                }
            }
        }
        let _ = one;
        Ok(())
    }

    /// Exact <Z> on `qubit`, computed from the amplitudes.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_target(qubit)?;
        let mask = 1usize << qubit;
        let mut acc = 0.0;
        for (i, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            acc += if i & mask == 0 { p } else { -p };
        }
        Ok(acc)
    }

    /// Exact probability of measuring 1 on `qubit`.
    pub fn prob_one(&self, qubit: usize) -> Result<f64> {
        Ok((1.0 - self.expectation_z(qubit)?) / 2.0)
    }

    /// Apply a Pauli (1 = X, 2 = Y, 3 = Z) to `target`.
    fn apply_pauli(&mut self, target: usize, pauli: u8) {
        let zero = Complex64::new(0.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match pauli {
            1 => {
                let mask = 1usize << target;
                for idx in 0..self.amps.len() {
                    if idx & mask == 0 {
                        self.amps.swap(idx, idx | mask);
                    }
                }
            }
            2 => self.apply_1q(target, [[zero, -i], [i, zero]]),
            3 => {
                let one = Complex64::new(1.0, 0.0);
                self.apply_1q(target, [[one, zero], [zero, -one]]);
            }
            _ => {}
        }
    }
}

/// Depolarizing trajectory step: with probability `p`, apply a uniformly
/// random non-identity Pauli on the target qubit(s); otherwise identity.
pub fn inject_depolarizing<R: Rng>(
    state: &mut QuantumState,
    targets: &[usize],
    p: f64,
    rng: &mut R,
) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::contract("depolarizing probability must be in [0,1)"));
    }
    if p == 0.0 || rng.gen::<f64>() >= p {
        return Ok(());
    }
    match targets {
        [t] => {
            state.check_target(*t)?;
            let pauli = rng.gen_range(1..=3u8);
            state.apply_pauli(*t, pauli);
        }
        [a, b] => {
            state.check_target(*a)?;
            state.check_target(*b)?;
            // uniform over the 15 non-identity two-qubit Paulis
            let idx = rng.gen_range(1..16u8);
            state.apply_pauli(*a, idx % 4);
            state.apply_pauli(*b, idx / 4);
        }
        _ => return Err(Error::contract("depolarizing supports 1 or 2 targets")),
    }
    Ok(())
}

/// Depolarizing + readout noise parameters from the ablation study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Single-qubit depolarizing probability.
    pub p1: f64,
    /// Two-qubit depolarizing probability (CNOT / CPhase).
    pub p2: f64,
    /// Symmetric readout bit-flip probability.
    pub p_read: f64,
}

impl NoiseModel {
    /// 0.1% / 0.7% / 1.5%, the ablation's stated parameters.
    pub fn ablation() -> Self {
        NoiseModel {
            p1: 0.001,
            p2: 0.007,
            p_read: 0.015,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.p1, self.p2, self.p_read] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::contract("noise probabilities must be in [0,1)"));
            }
        }
        Ok(())
    }
}

/// Counts of sampled bitstrings over a listed subset of qubits.
#[derive(Debug, Clone)]
pub struct MeasurementTable {
    pub qubits: Vec<usize>,
    /// counts[outcome] where bit i of `outcome` is the result for `qubits[i]`.
    pub counts: Vec<u64>,
    pub shots: u64,
}

impl MeasurementTable {
    /// Fraction of shots reading 1 on the i-th listed qubit.
    pub fn one_frequency(&self, listed_index: usize) -> f64 {
        let mask = 1usize << listed_index;
        let ones: u64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(o, _)| o & mask != 0)
            .map(|(_, c)| *c)
            .sum();
        ones as f64 / self.shots as f64
    }

    pub fn majority_one(&self, listed_index: usize) -> bool {
        self.one_frequency(listed_index) >= 0.5
    }
}

/// Sample `n_shots` measurements of the listed qubits from the state's
/// marginal distribution, flipping each sampled bit independently with
/// probability `p_read`. Deterministic per RNG seed.
pub fn sample_measurements<R: Rng>(
    state: &QuantumState,
    qubits: &[usize],
    n_shots: u64,
    rng: &mut R,
    p_read: f64,
) -> Result<MeasurementTable> {
    if n_shots == 0 {
        return Err(Error::contract("n_shots must be >= 1"));
    }
    for &q in qubits {
        state.check_target(q)?;
    }
    let n_out = 1usize << qubits.len();
    // marginal over the listed qubits
    let mut probs = vec![0.0f64; n_out];
    for (idx, amp) in state.amplitudes().iter().enumerate() {
        let p = amp.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let mut out = 0usize;
        for (i, &q) in qubits.iter().enumerate() {
            if idx & (1 << q) != 0 {
                out |= 1 << i;
            }
        }
        probs[out] += p;
    }
    let mut cumulative = probs.clone();
    for i in 1..n_out {
        cumulative[i] += cumulative[i - 1];
    }
    let total = *cumulative.last().unwrap();

    let mut counts = vec![0u64; n_out];
    for _ in 0..n_shots {
        let u = rng.gen::<f64>() * total;
        let mut out = cumulative.partition_point(|c| *c < u).min(n_out - 1);
        if p_read > 0.0 {
            for i in 0..qubits.len() {
                if rng.gen::<f64>() < p_read {
                    out ^= 1 << i;
                }
            }
        }
        counts[out] += 1;
    }
    Ok(MeasurementTable {
        qubits: qubits.to_vec(),
        counts,
        shots: n_shots,
    })
}

/// Gate-application counters, used for complexity accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GateCounts {
    pub single_qubit: u64,
    pub two_qubit: u64,
}

impl GateCounts {
    pub fn total(&self) -> u64 {
        self.single_qubit + self.two_qubit
    }
}

/// A statevector with an optional attached noise model: every gate is
/// followed by a depolarizing trajectory step on its targets.
pub struct Simulator<R: Rng> {
    pub state: QuantumState,
    pub noise: Option<NoiseModel>,
    pub rng: R,
    pub gate_counts: GateCounts,
}

impl<R: Rng> Simulator<R> {
    pub fn new(n_qubits: usize, noise: Option<NoiseModel>, rng: R) -> Self {
        Simulator {
            state: QuantumState::new(n_qubits),
            noise,
            rng,
            gate_counts: GateCounts::default(),
        }
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        self.state.apply(gate)?;
        if gate.is_two_qubit() {
            self.gate_counts.two_qubit += 1;
        } else {
            self.gate_counts.single_qubit += 1;
        }
        if let Some(noise) = self.noise {
            let p = if gate.is_two_qubit() {
                noise.p2
            } else {
                noise.p1
            };
            if p > 0.0 {
                inject_depolarizing(&mut self.state, &gate.targets(), p, &mut self.rng)?;
            }
        }
        Ok(())
    }

    pub fn sample(&mut self, qubits: &[usize], n_shots: u64) -> Result<MeasurementTable> {
        let p_read = self.noise.map_or(0.0, |n| n.p_read);
        sample_measurements(&self.state, qubits, n_shots, &mut self.rng, p_read)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ry_pi_maps_zero_to_one() {
        let mut s = QuantumState::new(1);
        s.apply(&Gate::Ry {
            target: 0,
            theta: PI,
        })
        .unwrap();
        assert!(s.amplitudes()[0].norm() < 1e-15);
        assert!((s.amplitudes()[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cphase_inactive_when_not_both_excited() {
        let mut s = QuantumState::new(2);
        s.apply(&Gate::X { target: 1 }).unwrap(); // |10>
        let before = s.amplitudes().to_vec();
        s.apply(&Gate::CPhase {
            a: 0,
            b: 1,
            theta: 0.9,
        })
        .unwrap();
        assert_eq!(s.amplitudes(), &before[..]);
    }

    #[test]
    fn cnot_on_plus_target_is_identity() {
        let mut s = QuantumState::new(2);
        s.apply(&Gate::X { target: 0 }).unwrap();
        s.apply(&Gate::H { target: 1 }).unwrap(); // |1>|+>
        let before = s.amplitudes().to_vec();
        s.apply(&Gate::Cnot {
            control: 0,
            target: 1,
        })
        .unwrap();
        for (a, b) in s.amplitudes().iter().zip(&before) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn expectation_z_basis_and_plus() {
        let s = QuantumState::new(1);
        assert!((s.expectation_z(0).unwrap() - 1.0).abs() < 1e-15);
        let mut s1 = QuantumState::new(1);
        s1.apply(&Gate::X { target: 0 }).unwrap();
        assert!((s1.expectation_z(0).unwrap() + 1.0).abs() < 1e-15);
        let mut sp = QuantumState::new(1);
        sp.apply(&Gate::H { target: 0 }).unwrap();
        assert!(sp.expectation_z(0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn expectation_z_after_ry_is_cos_theta() {
        for theta in [0.3, PI / 3.0, 1.9, 2.8] {
            let mut s = QuantumState::new(1);
            s.apply(&Gate::Ry { target: 0, theta }).unwrap();
            assert!((s.expectation_z(0).unwrap() - theta.cos()).abs() < 1e-12);
        }
        // closed-form anchor at pi/3
        let mut s = QuantumState::new(1);
        s.apply(&Gate::Ry {
            target: 0,
            theta: PI / 3.0,
        })
        .unwrap();
        assert!((s.expectation_z(0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn contract_violations() {
        let mut s = QuantumState::new(2);
        assert!(s.apply(&Gate::X { target: 2 }).is_err());
        assert!(s
            .apply(&Gate::Cnot {
                control: 1,
                target: 1
            })
            .is_err());
        assert!(s.expectation_z(5).is_err());
    }

    #[test]
    fn sampling_deterministic_and_exact_on_basis_state() {
        let mut s = QuantumState::new(2);
        s.apply(&Gate::X { target: 0 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = sample_measurements(&s, &[0], 100, &mut rng, 0.0).unwrap();
        assert_eq!(t.one_frequency(0), 1.0);
        assert!(t.majority_one(0));
    }

    #[test]
    fn sampling_plus_state_binomial_band() {
        let mut s = QuantumState::new(1);
        s.apply(&Gate::H { target: 0 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = sample_measurements(&s, &[0], 2048, &mut rng, 0.0).unwrap();
        let f = t.one_frequency(0);
        assert!((f - 0.5).abs() < 0.05, "frequency {f}");
    }

    #[test]
    fn full_readout_noise_is_uniform() {
        let mut s = QuantumState::new(1);
        s.apply(&Gate::X { target: 0 }).unwrap(); // |1>
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = sample_measurements(&s, &[0], 20000, &mut rng, 0.5).unwrap();
        let f = t.one_frequency(0);
        assert!((f - 0.5).abs() < 0.02, "frequency {f}");
    }

    #[test]
    fn depolarizing_p0_is_identity() {
        let mut s = QuantumState::new(2);
        s.apply(&Gate::H { target: 0 }).unwrap();
        let before = s.amplitudes().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        inject_depolarizing(&mut s, &[0], 0.0, &mut rng).unwrap();
        assert_eq!(s.amplitudes(), &before[..]);
    }

    #[test]
    fn depolarizing_p1_uniform_paulis() {
        // p = 1 on a single qubit: X/Y/Z each ~1/3 over 3000 trials.
        // Identify the Pauli by its action on |0>: X,Y flip to |1>; Z keeps
        // |0> (phase -1 invisible, but Z is the only one keeping |0>).
        let mut counts = [0u32; 2];
        let mut y_count = 0u32;
        for seed in 0..3000u64 {
            let mut s = QuantumState::new(1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            inject_depolarizing(&mut s, &[0], 0.999_999_999, &mut rng).unwrap();
            let flipped = s.amplitudes()[1].norm() > 0.5;
            counts[flipped as usize] += 1;
            if flipped && s.amplitudes()[1].im.abs() > 0.5 {
                y_count += 1;
            }
        }
        let z_frac = counts[0] as f64 / 3000.0;
        let y_frac = y_count as f64 / 3000.0;
        let x_frac = (counts[1] - y_count) as f64 / 3000.0;
        for f in [x_frac, y_frac, z_frac] {
            assert!((f - 1.0 / 3.0).abs() < 0.03, "fraction {f}");
        }
    }

    #[test]
    fn depolarizing_channel_mean_on_zero() {
        // averaging <Z> over trajectories of depolarize(p) on |0> -> 1 - p
        // (Z keeps <Z> = +1, X/Y flip it to -1: mean = (1-p) + p*(1/3 - 2/3))
        // = 1 - (4/3) p ... computed instead against the analytic single-step
        // trajectory mean below.
        let p = 0.3;
        let trials = 6000u64;
        let mut acc = 0.0;
        for seed in 0..trials {
            let mut s = QuantumState::new(1);
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
            inject_depolarizing(&mut s, &[0], p, &mut rng).unwrap();
            acc += s.expectation_z(0).unwrap();
        }
        let mean = acc / trials as f64;
        // X and Y flip <Z>, Z preserves it: E[<Z>] = (1-p) + p*(1/3) - p*(2/3)
        let analytic = 1.0 - p * 4.0 / 3.0;
        assert!((mean - analytic).abs() < 0.02, "mean {mean} vs {analytic}");
    }

    #[test]
    fn cphase_symmetric_in_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let mut s1 = QuantumState::new(3);
            let mut s2 = QuantumState::new(3);
            for q in 0..3 {
                let theta = rng.gen::<f64>() * PI;
                s1.apply(&Gate::Ry { target: q, theta }).unwrap();
                s2.apply(&Gate::Ry { target: q, theta }).unwrap();
            }
            s1.apply(&Gate::CPhase {
                a: 0,
                b: 2,
                theta: 1.1,
            })
            .unwrap();
            s2.apply(&Gate::CPhase {
                a: 2,
                b: 0,
                theta: 1.1,
            })
            .unwrap();
            for (a, b) in s1.amplitudes().iter().zip(s2.amplitudes()) {
                assert!((a - b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn noisy_simulator_counts_gates() {
        let mut sim = Simulator::new(
            2,
            Some(NoiseModel::ablation()),
            ChaCha8Rng::seed_from_u64(0),
        );
        sim.apply(&Gate::H { target: 0 }).unwrap();
        sim.apply(&Gate::Cnot {
            control: 0,
            target: 1,
        })
        .unwrap();
        assert_eq!(sim.gate_counts.single_qubit, 1);
        assert_eq!(sim.gate_counts.two_qubit, 1);
        let norm = sim.state.norm_sqr();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}
