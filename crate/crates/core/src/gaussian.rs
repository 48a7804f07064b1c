//! Multimode two-mode-squeezed vacuum built from a JSA.
//!
//! The state is `C exp(sum_jk Lambda_jk a_j^dag b_k^dag)|vac>` with
//! `C = prod_j sqrt(1 - lambda_j^2)` over the Schmidt values of `Lambda`.
//! For a collision-free outcome with idler channels `k` and signal channels
//! `j`, the amplitude is `C perm(Lambda[k][j])`.

use std::collections::HashSet;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Channel, ClickPattern};
use crate::error::{Result, SisError};
use crate::jsa::{FrequencyGrid, JsaMatrix};
use crate::outcome::{OutcomeTable, TableKind};
use crate::permanent::{permanent, ComplexMatrix};

/// Default largest Schmidt value.
pub const DEFAULT_GAIN: f64 = 0.1;

/// Schmidt values below this are taken as exactly zero.
pub const SCHMIDT_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPairState {
    /// Idler-by-signal squeezing matrix.
    lambda: ComplexMatrix,
    /// Singular values of `lambda`, descending.
    schmidt_values: Vec<f64>,
    norm_constant: f64,
    gain: f64,
    grid: FrequencyGrid,
}

impl GaussianPairState {
    /// Scales the JSA so its largest singular value equals `gain`.
    pub fn from_jsa(jsa: &JsaMatrix, gain: f64) -> Result<Self> {
        if !(gain.is_finite() && gain > 0.0 && gain < 1.0) {
            return Err(SisError::UnphysicalGain(gain));
        }
        if jsa.entries().is_zero() {
            return Err(SisError::ZeroJsa);
        }
        let sigma_max = singular_values(jsa.entries())[0];
        if !(sigma_max.is_finite() && sigma_max > 0.0) {
            return Err(SisError::Numerical(format!(
                "largest singular value of the JSA is {sigma_max}"
            )));
        }
        let lambda = jsa.entries().scale(Complex64::new(gain / sigma_max, 0.0));
        GaussianPairState::from_lambda(lambda, jsa.grid().clone())
    }

    /// Builds a state directly from a squeezing matrix with spectral norm < 1.
    pub fn from_lambda(lambda: ComplexMatrix, grid: FrequencyGrid) -> Result<Self> {
        grid.validate()?;
        if lambda.n_rows() != grid.n_idlers() || lambda.n_cols() != grid.n_signals() {
            return Err(SisError::InvalidGrid(format!(
                "squeezing matrix is {}x{} but grid has {} idlers and {} signals",
                lambda.n_rows(),
                lambda.n_cols(),
                grid.n_idlers(),
                grid.n_signals()
            )));
        }
        let mut schmidt_values = singular_values(&lambda);
        for s in &mut schmidt_values {
            if *s < SCHMIDT_CUTOFF {
                *s = 0.0;
            }
        }
        let gain = schmidt_values[0];
        if gain.is_nan() || gain >= 1.0 {
            return Err(SisError::UnphysicalGain(gain));
        }
        let norm_constant = schmidt_values
            .iter()
            .map(|l| (1.0 - l * l).sqrt())
            .product();
        Ok(GaussianPairState {
            lambda,
            schmidt_values,
            norm_constant,
            gain,
            grid,
        })
    }

    pub fn lambda(&self) -> &ComplexMatrix {
        &self.lambda
    }

    pub fn schmidt_values(&self) -> &[f64] {
        &self.schmidt_values
    }

    /// The vacuum amplitude `C`.
    pub fn norm_constant(&self) -> f64 {
        self.norm_constant
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn n_signals(&self) -> usize {
        self.lambda.n_cols()
    }

    pub fn n_idlers(&self) -> usize {
        self.lambda.n_rows()
    }

    /// Submatrix of `Lambda` for a pattern (idler rows, signal columns).
    pub fn lambda_submatrix(&self, pattern: &OutcomePattern) -> Result<ComplexMatrix> {
        let rows = self.grid.idler_positions(&pattern.idlers)?;
        let cols = self.grid.signal_positions(&pattern.signals)?;
        self.lambda.select(&rows, &cols)
    }
}

/// Singular values sorted descending.
pub(crate) fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let svd = m.to_nalgebra().svd(false, false);
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// A collision-free N-pair outcome: N distinct idler and N distinct signal
/// channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomePattern {
    idlers: Vec<Channel>,
    signals: Vec<Channel>,
}

impl OutcomePattern {
    pub fn new(idlers: Vec<Channel>, signals: Vec<Channel>) -> Result<Self> {
        if idlers.is_empty() || idlers.len() != signals.len() {
            return Err(SisError::InvalidPattern(format!(
                "need N >= 1 idlers and N signals, got {} and {}",
                idlers.len(),
                signals.len()
            )));
        }
        if let Some(c) = idlers.iter().find(|c| c.is_signal()) {
            return Err(SisError::InvalidPattern(format!("{c} listed as an idler")));
        }
        if let Some(c) = signals.iter().find(|c| !c.is_signal()) {
            return Err(SisError::InvalidPattern(format!("{c} listed as a signal")));
        }
        let mut seen = HashSet::new();
        if let Some(c) = idlers.iter().chain(&signals).find(|c| !seen.insert(**c)) {
            return Err(SisError::DuplicateChannel(c.to_string()));
        }
        Ok(OutcomePattern { idlers, signals })
    }

    /// Splits a click pattern into its idler and signal channels.
    pub fn from_clicks(clicks: &ClickPattern) -> Result<Self> {
        OutcomePattern::new(clicks.idlers().collect(), clicks.signals().collect())
    }

    pub fn n_pairs(&self) -> usize {
        self.idlers.len()
    }

    pub fn idlers(&self) -> &[Channel] {
        &self.idlers
    }

    pub fn signals(&self) -> &[Channel] {
        &self.signals
    }

    pub fn to_clicks(&self) -> ClickPattern {
        ClickPattern::new(self.idlers.iter().chain(&self.signals).copied())
    }
}

/// `C perm(Lambda[idlers][signals])`.
pub fn n_pair_amplitude(state: &GaussianPairState, pattern: &OutcomePattern) -> Result<Complex64> {
    let sub = state.lambda_submatrix(pattern)?;
    Ok(permanent(&sub)? * state.norm_constant)
}

pub fn n_pair_probability(state: &GaussianPairState, pattern: &OutcomePattern) -> Result<f64> {
    Ok(n_pair_amplitude(state, pattern)?.norm_sqr())
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Every collision-free pattern with `n_pairs` idler and signal channels.
pub fn collision_free_patterns(grid: &FrequencyGrid, n_pairs: usize) -> Vec<OutcomePattern> {
    let idler_sets = combinations(grid.n_idlers(), n_pairs);
    let signal_sets = combinations(grid.n_signals(), n_pairs);
    let mut out = Vec::with_capacity(idler_sets.len() * signal_sets.len());
    for idl in &idler_sets {
        for sig in &signal_sets {
            out.push(OutcomePattern {
                idlers: idl.iter().map(|&p| Channel::Idler(p + 1)).collect(),
                signals: sig.iter().map(|&p| Channel::Signal(p + 1)).collect(),
            });
        }
    }
    out
}

/// Exact probabilities of every collision-free `n_pairs` pattern. Entries
/// are probabilities of those exact outcomes in the full state, so they do
/// not sum to one.
pub fn quantum_outcome_table(state: &GaussianPairState, n_pairs: usize) -> Result<OutcomeTable> {
    let available = state.n_idlers().min(state.n_signals());
    if n_pairs == 0 || n_pairs > available {
        return Err(SisError::InvalidPattern(format!(
            "{n_pairs} pairs requested but only {available} channels per arm"
        )));
    }
    let entries = collision_free_patterns(state.grid(), n_pairs)
        .par_iter()
        .map(|p| Ok((p.to_clicks(), n_pair_probability(state, p)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(OutcomeTable::from_entries(TableKind::Probability, entries))
}
