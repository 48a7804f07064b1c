//! Brute-force Fock-basis expansion of the pair state.
//!
//! `exp(O)|vac>` with `O = sum_jk Lambda_jk a_j^dag b_k^dag` is expanded
//! sector by sector: the N-pair term is `O` applied to the (N-1)-pair term
//! and divided by N. Each creation operator contributes the bosonic factor
//! `sqrt(n + 1)`, so amplitudes are with respect to normalized number
//! states and collision patterns come out right without special handling.
//!
//! This path shares nothing with the permanent formula beyond `Lambda` and
//! `C`, which is what makes it useful as a check on it.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::channel::{Channel, ClickPattern};
use crate::detection::DetectionModel;
use crate::error::{Result, SisError};
use crate::gaussian::{GaussianPairState, OutcomePattern};
use crate::outcome::{OutcomeTable, TableKind};

pub const MAX_TRUNCATION: usize = 6;

/// Shots are split into this many independently seeded shards, so results
/// do not depend on the worker count.
pub const SAMPLER_SHARDS: u64 = 16;

/// Photon numbers per signal and idler channel.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationPattern {
    pub idler: Vec<u32>,
    pub signal: Vec<u32>,
}

impl OccupationPattern {
    pub fn vacuum(n_signals: usize, n_idlers: usize) -> Self {
        OccupationPattern {
            idler: vec![0; n_idlers],
            signal: vec![0; n_signals],
        }
    }

    /// One photon in each listed channel.
    pub fn from_pattern(n_signals: usize, n_idlers: usize, pattern: &OutcomePattern) -> Self {
        let mut occ = OccupationPattern::vacuum(n_signals, n_idlers);
        for c in pattern.idlers() {
            occ.idler[c.position()] += 1;
        }
        for c in pattern.signals() {
            occ.signal[c.position()] += 1;
        }
        occ
    }

    pub fn pairs(&self) -> u32 {
        self.signal.iter().sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.signal.iter().sum::<u32>() == self.idler.iter().sum::<u32>()
    }

    pub fn has_collision(&self) -> bool {
        self.signal.iter().chain(&self.idler).any(|&n| n >= 2)
    }

    /// Channels with at least one photon.
    pub fn occupied(&self) -> ClickPattern {
        let idlers = self
            .idler
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(p, _)| Channel::Idler(p + 1));
        let signals = self
            .signal
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(p, _)| Channel::Signal(p + 1));
        ClickPattern::new(idlers.chain(signals))
    }

    pub fn get(&self, channel: Channel) -> u32 {
        match channel {
            Channel::Idler(n) => self.idler[n - 1],
            Channel::Signal(n) => self.signal[n - 1],
        }
    }

    pub fn get_mut(&mut self, channel: Channel) -> &mut u32 {
        match channel {
            Channel::Idler(n) => &mut self.idler[n - 1],
            Channel::Signal(n) => &mut self.signal[n - 1],
        }
    }
}

impl fmt::Display for OccupationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        write!(f, "i[{}] s[{}]", join(&self.idler), join(&self.signal))
    }
}

impl Serialize for OccupationPattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// State expanded up to `n_max` pairs.
#[derive(Debug, Clone)]
pub struct TruncatedState {
    n_max: usize,
    n_signals: usize,
    n_idlers: usize,
    amplitudes: BTreeMap<OccupationPattern, Complex64>,
    norm_deficit: f64,
}

impl TruncatedState {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn n_signals(&self) -> usize {
        self.n_signals
    }

    pub fn n_idlers(&self) -> usize {
        self.n_idlers
    }

    pub fn amplitudes(&self) -> &BTreeMap<OccupationPattern, Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, pattern: &OccupationPattern) -> Complex64 {
        self.amplitudes.get(pattern).copied().unwrap_or_default()
    }

    /// Probability mass beyond the truncation, `1 - sum |amp|^2`.
    pub fn norm_deficit(&self) -> f64 {
        self.norm_deficit
    }

    /// Total probability of the N-pair sector.
    pub fn sector_probability(&self, n_pairs: u32) -> f64 {
        self.amplitudes
            .iter()
            .filter(|(p, _)| p.pairs() == n_pairs)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Debug dump: pattern string to `{re, im}`.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct ReIm {
            re: f64,
            im: f64,
        }
        #[derive(Serialize)]
        struct Dump {
            n_max: usize,
            norm_deficit: f64,
            amplitudes: BTreeMap<String, ReIm>,
        }
        let dump = Dump {
            n_max: self.n_max,
            norm_deficit: self.norm_deficit,
            amplitudes: self
                .amplitudes
                .iter()
                .map(|(p, a)| (p.to_string(), ReIm { re: a.re, im: a.im }))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&dump)?)
    }
}

pub fn expand(state: &GaussianPairState, n_max: usize) -> Result<TruncatedState> {
    if !(1..=MAX_TRUNCATION).contains(&n_max) {
        return Err(SisError::TruncationOutOfRange(n_max));
    }
    let lambda = state.lambda();
    let (n_idlers, n_signals) = (lambda.n_rows(), lambda.n_cols());
    let terms: Vec<(usize, usize, Complex64)> = (0..n_idlers)
        .flat_map(|m| (0..n_signals).map(move |n| (m, n)))
        .map(|(m, n)| (m, n, lambda.get(m, n)))
        .filter(|(_, _, z)| *z != Complex64::default())
        .collect();

    let c = state.norm_constant();
    let vacuum = OccupationPattern::vacuum(n_signals, n_idlers);
    let mut sector: BTreeMap<OccupationPattern, Complex64> =
        BTreeMap::from([(vacuum, Complex64::new(1.0, 0.0))]);
    let mut amplitudes: BTreeMap<OccupationPattern, Complex64> =
        sector.iter().map(|(p, a)| (p.clone(), a * c)).collect();

    for order in 1..=n_max {
        let mut next: BTreeMap<OccupationPattern, Complex64> = BTreeMap::new();
        for (occ, amp) in &sector {
            for &(m, n, weight) in &terms {
                let mut raised = occ.clone();
                raised.idler[m] += 1;
                raised.signal[n] += 1;
                let bosonic = (f64::from(raised.idler[m]) * f64::from(raised.signal[n])).sqrt();
                *next.entry(raised).or_default() += amp * weight * bosonic;
            }
        }
        let inv = 1.0 / order as f64;
        for amp in next.values_mut() {
            *amp *= inv;
        }
        amplitudes.extend(next.iter().map(|(p, a)| (p.clone(), a * c)));
        sector = next;
    }

    let captured: f64 = amplitudes.values().map(|a| a.norm_sqr()).sum();
    Ok(TruncatedState {
        n_max,
        n_signals,
        n_idlers,
        amplitudes,
        norm_deficit: (1.0 - captured).max(0.0),
    })
}

pub fn pattern_probability(ts: &TruncatedState, pattern: &OccupationPattern) -> f64 {
    ts.amplitude(pattern).norm_sqr()
}

/// Draws `n_shots` occupation patterns from the truncated distribution
/// (renormalized by `1 - norm_deficit`), passes each through the detection
/// model, and counts the resulting click patterns. Shots whose detection
/// is discarded (multi-photon channel with `record_collisions == false`)
/// are not counted anywhere.
pub fn sample_events(
    ts: &TruncatedState,
    detection: &DetectionModel,
    n_shots: u64,
    seed: u64,
) -> Result<OutcomeTable> {
    if n_shots == 0 {
        return Err(SisError::InvalidConfig("shots must be at least 1".into()));
    }
    let channels = channel_order(ts.n_signals, ts.n_idlers);
    if channels.len() > 64 {
        return Err(SisError::InvalidConfig(format!(
            "sampler supports at most 64 channels, got {}",
            channels.len()
        )));
    }
    detection.validate_channels(&channels)?;

    let patterns: Vec<&OccupationPattern> = ts.amplitudes.keys().collect();
    let mut cdf = Vec::with_capacity(patterns.len());
    let mut acc = 0.0;
    for a in ts.amplitudes.values() {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    for v in &mut cdf {
        *v /= acc;
    }

    let deterministic = detection.is_deterministic(&channels);
    let shard_counts: Vec<BTreeMap<u64, u64>> = (0..SAMPLER_SHARDS)
        .into_par_iter()
        .map(|shard| {
            let shots = n_shots / SAMPLER_SHARDS + u64::from(shard < n_shots % SAMPLER_SHARDS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let mut by_pattern = vec![0u64; patterns.len()];
            let mut clicks: BTreeMap<u64, u64> = BTreeMap::new();
            for _ in 0..shots {
                let u: f64 = rng.random();
                let idx = cdf.partition_point(|&c| c <= u).min(patterns.len() - 1);
                if deterministic {
                    by_pattern[idx] += 1;
                } else if let Some(mask) = detection.detect_shot(patterns[idx], &channels, &mut rng)
                {
                    *clicks.entry(mask).or_default() += 1;
                }
            }
            if deterministic {
                for (idx, count) in by_pattern.into_iter().enumerate() {
                    if count == 0 {
                        continue;
                    }
                    if let Some(mask) =
                        detection.detect_shot(patterns[idx], &channels, &mut NoRandom)
                    {
                        *clicks.entry(mask).or_default() += count;
                    }
                }
            }
            clicks
        })
        .collect();

    let mut merged: BTreeMap<u64, u64> = BTreeMap::new();
    for shard in shard_counts {
        for (mask, count) in shard {
            *merged.entry(mask).or_default() += count;
        }
    }
    let mut table = OutcomeTable::new(TableKind::Count);
    for (mask, count) in merged {
        table.insert(mask_to_pattern(mask, &channels), count as f64);
    }
    Ok(table)
}

/// Bit order used by the sampler: idlers first, then signals.
pub(crate) fn channel_order(n_signals: usize, n_idlers: usize) -> Vec<Channel> {
    (1..=n_idlers)
        .map(Channel::Idler)
        .chain((1..=n_signals).map(Channel::Signal))
        .collect()
}

fn mask_to_pattern(mask: u64, channels: &[Channel]) -> ClickPattern {
    ClickPattern::new(
        channels
            .iter()
            .enumerate()
            .filter(|(bit, _)| mask & (1 << bit) != 0)
            .map(|(_, &c)| c),
    )
}

/// RNG stand-in for detection models with no randomness left in them.
struct NoRandom;

impl rand::RngCore for NoRandom {
    fn next_u32(&mut self) -> u32 {
        unreachable!("deterministic detection drew a random number")
    }

    fn next_u64(&mut self) -> u64 {
        unreachable!("deterministic detection drew a random number")
    }

    fn fill_bytes(&mut self, _dst: &mut [u8]) {
        unreachable!("deterministic detection drew a random number")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{collision_free_patterns, n_pair_probability};
    use crate::jsa::FrequencyGrid;
    use crate::permanent::ComplexMatrix;

    fn single_mode(lambda: f64) -> GaussianPairState {
        GaussianPairState::from_lambda(
            ComplexMatrix::from_real_rows(&[[lambda]]),
            FrequencyGrid {
                pump_indices: vec![0],
                signal_indices: vec![1],
                idler_indices: vec![-1],
                ..FrequencyGrid::default()
            },
        )
        .unwrap()
    }

    fn occ(idler: &[u32], signal: &[u32]) -> OccupationPattern {
        OccupationPattern {
            idler: idler.to_vec(),
            signal: signal.to_vec(),
        }
    }

    #[test]
    fn single_mode_pair_is_geometric() {
        let l = 0.3;
        let s = single_mode(l);
        let ts = expand(&s, 3).unwrap();
        let c = (1.0 - l * l).sqrt();
        for n in 0..=3u32 {
            let a = ts.amplitude(&occ(&[n], &[n]));
            assert!(
                (a - Complex64::new(c * l.powi(n as i32), 0.0)).norm() < 1e-15,
                "n={n}"
            );
        }
        assert_eq!(ts.amplitudes().len(), 4);
        let p22 = pattern_probability(&ts, &occ(&[2], &[2]));
        assert!((p22 - c * c * l.powi(4)).abs() < 1e-16);
    }

    #[test]
    fn vacuum_amplitude_is_norm_constant() {
        let s = GaussianPairState::from_lambda(
            ComplexMatrix::from_rows(&[
                [Complex64::new(0.05, 0.02), Complex64::new(-0.03, 0.0)],
                [Complex64::new(0.0, 0.04), Complex64::new(0.01, -0.06)],
            ]),
            FrequencyGrid {
                pump_indices: vec![0],
                signal_indices: vec![1, 2],
                idler_indices: vec![-1, -2],
                ..FrequencyGrid::default()
            },
        )
        .unwrap();
        let ts = expand(&s, 2).unwrap();
        let vac = OccupationPattern::vacuum(2, 2);
        assert!((ts.amplitude(&vac).re - s.norm_constant()).abs() < 1e-16);
        assert!((pattern_probability(&ts, &vac) - s.norm_constant().powi(2)).abs() < 1e-16);
        for p in collision_free_patterns(s.grid(), 2) {
            let o = OccupationPattern::from_pattern(2, 2, &p);
            let perm_p = n_pair_probability(&s, &p).unwrap();
            assert!((pattern_probability(&ts, &o) - perm_p).abs() <= 1e-12 * perm_p);
        }
    }

    #[test]
    fn truncation_guard() {
        let s = single_mode(0.1);
        assert!(matches!(
            expand(&s, 0),
            Err(SisError::TruncationOutOfRange(0))
        ));
        assert!(matches!(
            expand(&s, 7),
            Err(SisError::TruncationOutOfRange(7))
        ));
    }

    #[test]
    fn every_pattern_is_balanced() {
        let s = single_mode(0.4);
        let ts = expand(&s, 6).unwrap();
        assert!(ts.amplitudes().keys().all(OccupationPattern::is_balanced));
        let expected_deficit = 0.4f64.powi(14);
        assert!((ts.norm_deficit() - expected_deficit).abs() < 1e-12);
    }

    #[test]
    fn absent_pattern_has_zero_probability() {
        let ts = expand(&single_mode(0.2), 2).unwrap();
        assert_eq!(pattern_probability(&ts, &occ(&[3], &[3])), 0.0);
        assert_eq!(pattern_probability(&ts, &occ(&[1], &[2])), 0.0);
    }

    #[test]
    fn dump_lists_patterns() {
        let ts = expand(&single_mode(0.2), 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&ts.to_json().unwrap()).unwrap();
        assert!(v["amplitudes"]["i[1] s[1]"]["re"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn sampler_is_deterministic_per_seed() {
        let ts = expand(&single_mode(0.3), 4).unwrap();
        let model = DetectionModel::ideal();
        let a = sample_events(&ts, &model, 10_000, 5).unwrap();
        let b = sample_events(&ts, &model, 10_000, 5).unwrap();
        let c = sample_events(&ts, &model, 10_000, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(sample_events(&ts, &model, 0, 5).is_err());
    }

    #[test]
    fn single_shot_low_gain_is_vacuum() {
        let ts = expand(&single_mode(1e-6), 2).unwrap();
        let t = sample_events(&ts, &DetectionModel::ideal(), 1, 42).unwrap();
        assert_eq!(t.get(&ClickPattern::empty()), 1.0);
    }
}
