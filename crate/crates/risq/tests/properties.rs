//! Randomized invariants over the channel and simulator building blocks.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use risq::baselines::project_phases;
use risq::channel::{bessel_j0, effective_spacings, wrap_phase, RisState};
use risq::qsim::{Gate, QuantumState};

/// Independent oracle: high-order ascending series for J0, accurate on the
/// tested range [0, 20].
fn j0_series(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..80 {
        term *= -q / ((k * k) as f64);
        sum += term;
    }
    sum
}

proptest! {
    #[test]
    fn wrap_phase_in_range_and_idempotent(x in -1e4f64..1e4) {
        let w = wrap_phase(x);
        prop_assert!((0.0..2.0 * std::f64::consts::PI).contains(&w));
        prop_assert!((wrap_phase(w) - w).abs() < 1e-12);
        // same point on the circle
        prop_assert!(((w - x) / (2.0 * std::f64::consts::PI)).rem_euclid(1.0) < 1e-9
            || ((w - x) / (2.0 * std::f64::consts::PI)).rem_euclid(1.0) > 1.0 - 1e-9);
    }

    #[test]
    fn effective_spacings_sum_is_aperture(bits in proptest::collection::vec(any::<bool>(), 1..12)) {
        let d_min = 0.005;
        let state = RisState::new(bits.clone(), vec![0.0; bits.len()]);
        let sum: f64 = effective_spacings(&bits, d_min).iter().sum();
        prop_assert!((sum - state.aperture_m(d_min)).abs() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent_and_on_grid(
        phases in proptest::collection::vec(0.0f64..std::f64::consts::TAU, 1..8),
        bits in 1u32..4,
    ) {
        let state = RisState::new(vec![true; phases.len()], phases);
        let p = project_phases(&state, bits);
        prop_assert_eq!(&project_phases(&p, bits), &p);
        let step = 2.0 * std::f64::consts::PI / (1u64 << bits) as f64;
        for phi in &p.phases {
            let t = phi / step;
            prop_assert!((t - t.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn bessel_j0_matches_series_oracle(x in 0.0f64..20.0) {
        prop_assert!((bessel_j0(x) - j0_series(x)).abs() < 1e-8);
    }

    #[test]
    fn random_single_gates_preserve_norm(seed in any::<u64>(), n_gates in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = QuantumState::new(4);
        for _ in 0..n_gates {
            use rand::Rng;
            let target = rng.gen_range(0..4);
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let gate = match rng.gen_range(0..4) {
                0 => Gate::X { target },
                1 => Gate::H { target },
                2 => Gate::Ry { target, theta },
                _ => Gate::Rz { target, theta },
            };
            state.apply(&gate).unwrap();
        }
        let norm: f64 = state.amplitudes().iter().map(|a| a.norm_sqr()).sum();
        prop_assert!((norm - 1.0).abs() < 1e-10);
    }
}
