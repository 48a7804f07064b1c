//! Discrete joint spectral amplitudes from shaped pump spectra.
//!
//! With flat phase matching the pair amplitude depends only on the sum of the
//! signal and idler frequencies, `psi[m][n] = f(signal_n + idler_m)`, where
//! `f` is the autoconvolution of the pump spectrum. All indices are integer
//! channel numbers on a common pitch; the pitch itself is metadata.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::error::{Result, SisError};
use crate::permanent::ComplexMatrix;

/// Channel pitch used by the bundled configurations (200 GHz).
pub const DEFAULT_SPACING_HZ: f64 = 200e9;

/// Integer channel bookkeeping for pumps, signals and idlers.
///
/// The order of `signal_indices` and `idler_indices` fixes the column and row
/// order of every JSA built on this grid, and the `s1..`/`i1..` labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub spacing_hz: f64,
    pub pump_indices: Vec<i64>,
    pub signal_indices: Vec<i64>,
    pub idler_indices: Vec<i64>,
}

impl Default for FrequencyGrid {
    /// Pumps at -1, 0, +1; signals 1..4 at indices 1..4; `i1` at -2 and
    /// `i2` at -3. A single pump at 0 then couples `i1`-`s2` and `i2`-`s3`.
    fn default() -> Self {
        FrequencyGrid {
            spacing_hz: DEFAULT_SPACING_HZ,
            pump_indices: vec![-1, 0, 1],
            signal_indices: vec![1, 2, 3, 4],
            idler_indices: vec![-2, -3],
        }
    }
}

impl FrequencyGrid {
    /// Grid for two adjacent pumps at -1 and 0. The idlers sit one channel
    /// lower than in the default grid, which is the default layout with the
    /// pump pair centred half a channel below index 0.
    pub fn two_pump() -> Self {
        FrequencyGrid {
            pump_indices: vec![-1, 0],
            idler_indices: vec![-3, -4],
            ..FrequencyGrid::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing_hz.is_finite() && self.spacing_hz > 0.0) {
            return Err(SisError::InvalidGrid(format!(
                "spacing_hz must be positive, got {}",
                self.spacing_hz
            )));
        }
        if self.signal_indices.is_empty() || self.idler_indices.is_empty() {
            return Err(SisError::InvalidGrid(
                "need at least one signal and one idler channel".into(),
            ));
        }
        for (name, list) in [
            ("pump", &self.pump_indices),
            ("signal", &self.signal_indices),
            ("idler", &self.idler_indices),
        ] {
            let mut seen = HashSet::new();
            if let Some(dup) = list.iter().find(|i| !seen.insert(**i)) {
                return Err(SisError::InvalidGrid(format!(
                    "{name} index {dup} listed twice"
                )));
            }
        }
        Ok(())
    }

    pub fn n_signals(&self) -> usize {
        self.signal_indices.len()
    }

    pub fn n_idlers(&self) -> usize {
        self.idler_indices.len()
    }

    pub fn signal_channels(&self) -> Vec<Channel> {
        (1..=self.n_signals()).map(Channel::Signal).collect()
    }

    pub fn idler_channels(&self) -> Vec<Channel> {
        (1..=self.n_idlers()).map(Channel::Idler).collect()
    }

    /// Every channel of the grid, idlers first.
    pub fn channels(&self) -> Vec<Channel> {
        let mut all = self.idler_channels();
        all.extend(self.signal_channels());
        all
    }

    pub fn contains(&self, channel: Channel) -> bool {
        match channel {
            Channel::Signal(n) => n >= 1 && n <= self.n_signals(),
            Channel::Idler(n) => n >= 1 && n <= self.n_idlers(),
        }
    }

    pub fn signal_positions(&self, labels: &[Channel]) -> Result<Vec<usize>> {
        self.positions(labels, true)
    }

    pub fn idler_positions(&self, labels: &[Channel]) -> Result<Vec<usize>> {
        self.positions(labels, false)
    }

    fn positions(&self, labels: &[Channel], signal: bool) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        labels
            .iter()
            .map(|&c| {
                if c.is_signal() != signal || !self.contains(c) {
                    return Err(SisError::UnknownChannel(c.to_string()));
                }
                if !seen.insert(c) {
                    return Err(SisError::DuplicateChannel(c.to_string()));
                }
                Ok(c.position())
            })
            .collect()
    }

    /// Same grid with every index moved by `shift`.
    pub fn translated(&self, pump_shift: i64, signal_shift: i64, idler_shift: i64) -> Self {
        FrequencyGrid {
            spacing_hz: self.spacing_hz,
            pump_indices: self.pump_indices.iter().map(|i| i + pump_shift).collect(),
            signal_indices: self
                .signal_indices
                .iter()
                .map(|i| i + signal_shift)
                .collect(),
            idler_indices: self.idler_indices.iter().map(|i| i + idler_shift).collect(),
        }
    }
}

/// Complex pump field amplitudes keyed by pump channel index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PumpSpectrum {
    amplitudes: BTreeMap<i64, Complex64>,
}

impl PumpSpectrum {
    pub fn new(amplitudes: impl IntoIterator<Item = (i64, Complex64)>) -> Self {
        PumpSpectrum {
            amplitudes: amplitudes.into_iter().collect(),
        }
    }

    pub fn single(index: i64, amplitude: Complex64) -> Self {
        PumpSpectrum::new([(index, amplitude)])
    }

    pub fn amplitudes(&self) -> &BTreeMap<i64, Complex64> {
        &self.amplitudes
    }

    pub fn get(&self, index: i64) -> Complex64 {
        self.amplitudes.get(&index).copied().unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.values().all(|z| *z == Complex64::default())
    }

    /// Multiplies every amplitude by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        PumpSpectrum::new(self.amplitudes.iter().map(|(&i, &z)| (i, z * factor)))
    }

    pub fn shifted(&self, shift: i64) -> Self {
        PumpSpectrum::new(self.amplitudes.iter().map(|(&i, &z)| (i + shift, z)))
    }
}

/// `f_j = sum_l e_l e_{j-l}` on its support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpAutoconvolution {
    values: BTreeMap<i64, Complex64>,
}

impl PumpAutoconvolution {
    pub fn values(&self) -> &BTreeMap<i64, Complex64> {
        &self.values
    }

    pub fn get(&self, sum_index: i64) -> Complex64 {
        self.values.get(&sum_index).copied().unwrap_or_default()
    }
}

pub fn autoconvolve(pump: &PumpSpectrum) -> Result<PumpAutoconvolution> {
    let support: Vec<(i64, Complex64)> = pump
        .amplitudes
        .iter()
        .filter(|(_, z)| **z != Complex64::default())
        .map(|(&i, &z)| (i, z))
        .collect();
    if support.is_empty() {
        return Err(SisError::EmptySpectrum);
    }
    let mut values = BTreeMap::new();
    // Ordered pairs: a cross term l != m is visited twice, the degenerate
    // term l == m once.
    for &(l, el) in &support {
        for &(m, em) in &support {
            *values.entry(l + m).or_insert_with(Complex64::default) += el * em;
        }
    }
    Ok(PumpAutoconvolution { values })
}

/// Idler-by-signal matrix of pair amplitudes, with the grid it was built on.
#[derive(Debug, Clone, PartialEq)]
pub struct JsaMatrix {
    entries: ComplexMatrix,
    grid: FrequencyGrid,
}

impl JsaMatrix {
    pub fn new(entries: ComplexMatrix, grid: FrequencyGrid) -> Result<Self> {
        grid.validate()?;
        if entries.n_rows() != grid.n_idlers() || entries.n_cols() != grid.n_signals() {
            return Err(SisError::InvalidGrid(format!(
                "matrix is {}x{} but grid has {} idlers and {} signals",
                entries.n_rows(),
                entries.n_cols(),
                grid.n_idlers(),
                grid.n_signals()
            )));
        }
        Ok(JsaMatrix { entries, grid })
    }

    pub fn entries(&self) -> &ComplexMatrix {
        &self.entries
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn get(&self, idler: Channel, signal: Channel) -> Result<Complex64> {
        let r = self.grid.idler_positions(&[idler])?[0];
        let c = self.grid.signal_positions(&[signal])?[0];
        Ok(self.entries.get(r, c))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&JsaDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: JsaDocument = serde_json::from_str(text)?;
        doc.try_into()
    }

    /// One row per idler channel, cells formatted as `re+imj`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("idler");
        for s in self.grid.signal_channels() {
            write!(out, ",{s}").unwrap();
        }
        out.push('\n');
        for (r, idler) in self.grid.idler_channels().into_iter().enumerate() {
            out.push_str(&idler.to_string());
            for z in self.entries.row(r) {
                write!(out, ",{}", format_complex(*z)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn format_complex(z: Complex64) -> String {
    let im = format_float(z.im);
    let sign = if im.starts_with('-') { "" } else { "+" };
    format!("{}{sign}{im}j", format_float(z.re))
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes. Negative zero prints as `0`.
pub(crate) fn format_float(x: f64) -> String {
    let x = x + 0.0;
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct ReIm {
    re: f64,
    im: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsaDocument {
    grid: FrequencyGrid,
    row_labels: Vec<Channel>,
    col_labels: Vec<Channel>,
    rows: usize,
    cols: usize,
    entries: Vec<ReIm>,
}

impl From<&JsaMatrix> for JsaDocument {
    fn from(jsa: &JsaMatrix) -> Self {
        JsaDocument {
            grid: jsa.grid.clone(),
            row_labels: jsa.grid.idler_channels(),
            col_labels: jsa.grid.signal_channels(),
            rows: jsa.entries.n_rows(),
            cols: jsa.entries.n_cols(),
            entries: jsa
                .entries
                .as_slice()
                .iter()
                .map(|z| ReIm { re: z.re, im: z.im })
                .collect(),
        }
    }
}

impl TryFrom<JsaDocument> for JsaMatrix {
    type Error = SisError;

    fn try_from(doc: JsaDocument) -> Result<Self> {
        let data = doc
            .entries
            .iter()
            .map(|e| Complex64::new(e.re, e.im))
            .collect();
        JsaMatrix::new(ComplexMatrix::new(doc.rows, doc.cols, data)?, doc.grid)
    }
}

pub fn build_jsa(pump: &PumpSpectrum, grid: &FrequencyGrid) -> Result<JsaMatrix> {
    grid.validate()?;
    let f = autoconvolve(pump)?;
    let entries = ComplexMatrix::from_fn(grid.n_idlers(), grid.n_signals(), |m, n| {
        f.get(grid.signal_indices[n] + grid.idler_indices[m])
    });
    JsaMatrix::new(entries, grid.clone())
}

/// Closed-form JSA for three adjacent pumps `a1, a2, a3` on the default grid.
pub fn three_pump_matrix(a1: Complex64, a2: Complex64, a3: Complex64) -> JsaMatrix {
    let two = Complex64::new(2.0, 0.0);
    let centre = a2 * a2 + two * a1 * a3;
    let entries = ComplexMatrix::from_rows(&[
        [two * a1 * a2, centre, two * a2 * a3, a3 * a3],
        [a1 * a1, two * a1 * a2, centre, two * a2 * a3],
    ]);
    JsaMatrix::new(entries, FrequencyGrid::default()).expect("default grid is valid")
}
