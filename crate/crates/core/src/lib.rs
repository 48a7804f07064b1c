//! Multi-photon interference in the spectral domain.
//!
//! A shaped pump spectrum fixes a discrete joint spectral amplitude (JSA)
//! through its autoconvolution. Scaling the JSA gives the squeezing matrix of
//! a multimode pair state whose N-pair coincidence amplitudes are permanents
//! of its submatrices. The crate builds those matrices, evaluates the
//! permanents, checks them against a brute-force Fock-basis expansion,
//! models lossy threshold detection, and compares the result with the
//! distinguishable-photon prediction.

pub mod artifacts;
pub mod channel;
pub mod detection;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod jsa;
pub mod outcome;
pub mod permanent;
pub mod scenario;

pub use channel::{Channel, ClickPattern};
pub use detection::{
    apply_detection, classical_fourfold_prediction, interference_contrast,
    normalize_to_least_efficient, ContrastReport, CountReport, DetectionModel, Interference, Ratio,
};
pub use error::{Result, SisError};
pub use fock::{expand, pattern_probability, sample_events, OccupationPattern, TruncatedState};
pub use gaussian::{
    n_pair_amplitude, n_pair_probability, quantum_outcome_table, GaussianPairState, OutcomePattern,
};
pub use jsa::{autoconvolve, build_jsa, three_pump_matrix, FrequencyGrid, JsaMatrix, PumpSpectrum};
pub use outcome::{OutcomeTable, TableKind};
pub use permanent::{abs_squared_matrix, permanent, submatrix, ComplexMatrix};
pub use scenario::{
    load_scenario, load_sweep, parse_overrides, phase_sweep, run_scenario, verify_oracle,
    RunOptions, ScenarioConfig, ScenarioResult, SweepSpec,
};
