//! Shared fixtures for the criterion benches.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sis_core::{build_jsa, ComplexMatrix, FrequencyGrid, GaussianPairState, PumpSpectrum};

pub fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// The balanced three-pump state at the default gain.
pub fn three_pump_state() -> GaussianPairState {
    let a = Complex64::new(0.0, std::f64::consts::SQRT_2);
    let pump = PumpSpectrum::new([(-1, a), (0, Complex64::new(1.0, 0.0)), (1, a)]);
    let jsa = build_jsa(&pump, &FrequencyGrid::default()).expect("valid pump");
    GaussianPairState::from_jsa(&jsa, 0.1).expect("valid gain")
}
