//! Loss, threshold detection, count normalization and the
//! distinguishable-photon baseline.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Channel, ClickPattern};
use crate::error::{Result, SisError};
use crate::fock::{channel_order, OccupationPattern, TruncatedState};
use crate::gaussian::{combinations, GaussianPairState, OutcomePattern};
use crate::outcome::{OutcomeTable, TableKind};
use crate::permanent::{nonzero_permutation_count, permanent, ComplexMatrix};

/// Per-channel efficiencies and threshold-detector semantics. Channels not
/// listed have unit efficiency and no dark clicks.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionModel {
    #[serde(default)]
    pub efficiencies: BTreeMap<Channel, f64>,
    /// Keep events where a channel received two or more photons.
    #[serde(default)]
    pub record_collisions: bool,
    /// Per-channel probability of a click with no photon present.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub dark_click_probability: BTreeMap<Channel, f64>,
}

impl DetectionModel {
    /// Unit efficiency everywhere, collisions discarded.
    pub fn ideal() -> Self {
        DetectionModel::default()
    }

    pub fn uniform(channels: &[Channel], eta: f64) -> Self {
        DetectionModel {
            efficiencies: channels.iter().map(|&c| (c, eta)).collect(),
            ..DetectionModel::default()
        }
    }

    pub fn efficiency(&self, channel: Channel) -> f64 {
        self.efficiencies.get(&channel).copied().unwrap_or(1.0)
    }

    pub fn dark_click(&self, channel: Channel) -> f64 {
        self.dark_click_probability
            .get(&channel)
            .copied()
            .unwrap_or(0.0)
    }

    /// Checks values and that every listed channel exists.
    pub fn validate_channels(&self, channels: &[Channel]) -> Result<()> {
        for (name, map) in [
            ("efficiency", &self.efficiencies),
            ("dark click probability", &self.dark_click_probability),
        ] {
            for (c, &v) in map {
                if !channels.contains(c) {
                    return Err(SisError::UnknownChannel(c.to_string()));
                }
                if !(0.0..=1.0).contains(&v) {
                    return Err(SisError::InvalidDetection(format!(
                        "{name} for {c} is {v}, outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn is_deterministic(&self, channels: &[Channel]) -> bool {
        channels.iter().all(|&c| {
            let eta = self.efficiency(c);
            (eta == 0.0 || eta == 1.0) && self.dark_click(c) == 0.0
        })
    }

    /// Detection of one shot as a click bitmask over `channels`; `None` when
    /// the event is discarded.
    pub(crate) fn detect_shot<R: Rng + ?Sized>(
        &self,
        occ: &OccupationPattern,
        channels: &[Channel],
        rng: &mut R,
    ) -> Option<u64> {
        let mut mask = 0u64;
        for (bit, &c) in channels.iter().enumerate() {
            let n = occ.get(c);
            let eta = self.efficiency(c);
            let survivors = if eta == 1.0 {
                n
            } else if eta == 0.0 {
                0
            } else {
                (0..n).filter(|_| rng.random::<f64>() < eta).count() as u32
            };
            if survivors >= 2 && !self.record_collisions {
                return None;
            }
            let dark = self.dark_click(c);
            let clicked = survivors >= 1 || (dark > 0.0 && rng.random::<f64>() < dark);
            if clicked {
                mask |= 1 << bit;
            }
        }
        Some(mask)
    }
}

/// Probabilities over occupation patterns (a mixed state after loss).
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationDistribution {
    pub n_signals: usize,
    pub n_idlers: usize,
    pub probabilities: BTreeMap<OccupationPattern, f64>,
}

impl OccupationDistribution {
    /// `|amp|^2` for each pattern, optionally divided by the captured norm.
    pub fn from_state(ts: &TruncatedState, renormalize: bool) -> Self {
        let scale = if renormalize {
            1.0 / (1.0 - ts.norm_deficit())
        } else {
            1.0
        };
        OccupationDistribution {
            n_signals: ts.n_signals(),
            n_idlers: ts.n_idlers(),
            probabilities: ts
                .amplitudes()
                .iter()
                .map(|(p, a)| (p.clone(), a.norm_sqr() * scale))
                .collect(),
        }
    }

    pub fn channels(&self) -> Vec<Channel> {
        channel_order(self.n_signals, self.n_idlers)
    }

    pub fn total(&self) -> f64 {
        self.probabilities.values().sum()
    }
}

fn binomial_pmf(n: u32, k: u32, p: f64) -> f64 {
    let mut coeff = 1.0;
    for i in 0..k {
        coeff *= f64::from(n - i) / f64::from(i + 1);
    }
    coeff * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Independent binomial loss on every channel.
pub fn thin(
    dist: &OccupationDistribution,
    model: &DetectionModel,
) -> Result<OccupationDistribution> {
    let channels = dist.channels();
    model.validate_channels(&channels)?;
    let mut out: BTreeMap<OccupationPattern, f64> = BTreeMap::new();
    for (occ, &p) in &dist.probabilities {
        let mut branches = vec![(occ.clone(), p)];
        for &c in &channels {
            let n = occ.get(c);
            let eta = model.efficiency(c);
            if n == 0 || eta == 1.0 {
                continue;
            }
            let mut next = Vec::with_capacity(branches.len() * (n as usize + 1));
            for (branch, bp) in &branches {
                for k in 0..=n {
                    let w = binomial_pmf(n, k, eta);
                    if w == 0.0 {
                        continue;
                    }
                    let mut b = branch.clone();
                    *b.get_mut(c) = k;
                    next.push((b, bp * w));
                }
            }
            branches = next;
        }
        for (b, bp) in branches {
            *out.entry(b).or_insert(0.0) += bp;
        }
    }
    Ok(OccupationDistribution {
        n_signals: dist.n_signals,
        n_idlers: dist.n_idlers,
        probabilities: out,
    })
}

/// Maps photon numbers to click patterns. Patterns with a multi-photon
/// channel are dropped unless `record_collisions` is set.
pub fn threshold(dist: &OccupationDistribution, model: &DetectionModel) -> Result<OutcomeTable> {
    let channels = dist.channels();
    model.validate_channels(&channels)?;
    let dark: Vec<(Channel, f64)> = channels
        .iter()
        .map(|&c| (c, model.dark_click(c)))
        .filter(|(_, d)| *d > 0.0)
        .collect();
    let mut table = OutcomeTable::new(TableKind::Probability);
    for (occ, &p) in &dist.probabilities {
        if !model.record_collisions && occ.has_collision() {
            continue;
        }
        let lit = occ.occupied();
        if dark.is_empty() {
            table.add(lit, p);
            continue;
        }
        let candidates: Vec<(Channel, f64)> = dark
            .iter()
            .copied()
            .filter(|(c, _)| !lit.contains(*c))
            .collect();
        for subset in 0u64..(1 << candidates.len()) {
            let mut w = p;
            let mut clicks: Vec<Channel> = lit.channels().copied().collect();
            for (bit, &(c, d)) in candidates.iter().enumerate() {
                if subset & (1 << bit) != 0 {
                    w *= d;
                    clicks.push(c);
                } else {
                    w *= 1.0 - d;
                }
            }
            if w > 0.0 {
                table.add(ClickPattern::new(clicks), w);
            }
        }
    }
    Ok(table)
}

/// Click-pattern probabilities after loss and threshold detection.
pub fn apply_detection(ts: &TruncatedState, model: &DetectionModel) -> Result<OutcomeTable> {
    let dist = OccupationDistribution::from_state(ts, false);
    threshold(&thin(&dist, model)?, model)
}

/// Provenance attached to a [`CountReport`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub label: String,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
}

/// Twofold (one idler, one signal) and fourfold (two idlers, two signals)
/// counts, raw and optionally normalized to the least efficient channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub twofold: OutcomeTable,
    pub fourfold: OutcomeTable,
    pub twofold_normalized: Option<OutcomeTable>,
    pub fourfold_normalized: Option<OutcomeTable>,
    pub meta: ReportMeta,
}

impl CountReport {
    /// Picks the twofold and fourfold entries out of a click table. Every
    /// combination is present, with zero where nothing was recorded.
    pub fn from_clicks(
        clicks: &OutcomeTable,
        signals: &[Channel],
        idlers: &[Channel],
        meta: ReportMeta,
    ) -> Self {
        let mut twofold = OutcomeTable::new(clicks.kind);
        for &i in idlers {
            for &s in signals {
                let p = ClickPattern::new([i, s]);
                twofold.insert(p.clone(), clicks.get(&p));
            }
        }
        let mut fourfold = OutcomeTable::new(clicks.kind);
        for ip in combinations(idlers.len(), 2) {
            for sp in combinations(signals.len(), 2) {
                let p = ClickPattern::new([
                    idlers[ip[0]],
                    idlers[ip[1]],
                    signals[sp[0]],
                    signals[sp[1]],
                ]);
                fourfold.insert(p.clone(), clicks.get(&p));
            }
        }
        CountReport {
            twofold,
            fourfold,
            twofold_normalized: None,
            fourfold_normalized: None,
            meta,
        }
    }

    /// Normalized tables when present, raw otherwise.
    pub fn best_twofold(&self) -> &OutcomeTable {
        self.twofold_normalized.as_ref().unwrap_or(&self.twofold)
    }

    pub fn best_fourfold(&self) -> &OutcomeTable {
        self.fourfold_normalized.as_ref().unwrap_or(&self.fourfold)
    }
}

/// Rescales every photon's contribution to the efficiency of the worst
/// channel in its arm. Always recomputed from the raw tables, so applying
/// it twice is the same as once.
pub fn normalize_to_least_efficient(
    report: &CountReport,
    model: &DetectionModel,
) -> Result<CountReport> {
    let channels: BTreeSet<Channel> = report
        .twofold
        .patterns()
        .chain(report.fourfold.patterns())
        .flat_map(|p| p.channels().copied().collect::<Vec<_>>())
        .collect();
    if let Some(dead) = channels.iter().find(|&&c| model.efficiency(c) <= 0.0) {
        return Err(SisError::DeadChannel(dead.to_string()));
    }
    let min_over = |signal: bool| {
        channels
            .iter()
            .filter(|c| c.is_signal() == signal)
            .map(|&c| model.efficiency(c))
            .fold(f64::INFINITY, f64::min)
    };
    let (min_signal, min_idler) = (min_over(true), min_over(false));
    let factor = |p: &ClickPattern| -> f64 {
        p.channels()
            .map(|&c| {
                let floor = if c.is_signal() { min_signal } else { min_idler };
                floor / model.efficiency(c)
            })
            .product()
    };
    let mut out = report.clone();
    out.twofold_normalized = Some(
        report
            .twofold
            .map_values(rescaled_kind(report.twofold.kind), |p, v| v * factor(p)),
    );
    out.fourfold_normalized = Some(
        report
            .fourfold
            .map_values(rescaled_kind(report.fourfold.kind), |p, v| v * factor(p)),
    );
    Ok(out)
}

// Rescaled integer counts are no longer integers.
fn rescaled_kind(kind: TableKind) -> TableKind {
    match kind {
        TableKind::Count => TableKind::ExpectedCount,
        k => k,
    }
}

/// Distinguishable-photon prediction for every two-idler, two-signal
/// pattern: `total_shots * perm(R_sub)` with `R = twofold / total_shots`.
pub fn classical_fourfold_prediction(
    twofold: &OutcomeTable,
    total_shots: u64,
) -> Result<OutcomeTable> {
    if total_shots == 0 {
        return Err(SisError::InvalidConfig(
            "total_shots must be at least 1".into(),
        ));
    }
    let mut idlers = BTreeSet::new();
    let mut signals = BTreeSet::new();
    for p in twofold.patterns() {
        if p.idler_count() != 1 || p.signal_count() != 1 {
            return Err(SisError::InvalidPattern(format!(
                "{p} is not a twofold pattern"
            )));
        }
        idlers.extend(p.idlers());
        signals.extend(p.signals());
    }
    let idlers: Vec<Channel> = idlers.into_iter().collect();
    let signals: Vec<Channel> = signals.into_iter().collect();
    if idlers.len() < 2 || signals.len() < 2 {
        return Err(SisError::InvalidPattern(
            "need at least two idler and two signal channels".into(),
        ));
    }
    let shots = total_shots as f64;
    let mut rates = ComplexMatrix::zeros(idlers.len(), signals.len());
    for (r, &i) in idlers.iter().enumerate() {
        for (c, &s) in signals.iter().enumerate() {
            let p = ClickPattern::new([i, s]);
            if !twofold.contains(&p) {
                return Err(SisError::MissingCombination(p.to_string()));
            }
            rates.set(r, c, (twofold.get(&p) / shots).into());
        }
    }
    let mut out = OutcomeTable::new(rescaled_kind(twofold.kind));
    for ip in combinations(idlers.len(), 2) {
        for sp in combinations(signals.len(), 2) {
            let sub = rates.select(&ip, &sp)?;
            let pattern =
                ClickPattern::new([idlers[ip[0]], idlers[ip[1]], signals[sp[0]], signals[sp[1]]]);
            out.insert(pattern, shots * permanent(&sub)?.re);
        }
    }
    Ok(out)
}

/// Fourfold patterns whose `Lambda` submatrix has exactly one nonzero
/// permutation product. On these, quantum and classical predictions agree.
pub fn single_permutation_patterns(
    state: &GaussianPairState,
    patterns: &OutcomeTable,
) -> Result<BTreeSet<ClickPattern>> {
    let mut out = BTreeSet::new();
    for p in patterns.patterns() {
        let sub = state.lambda_submatrix(&OutcomePattern::from_clicks(p)?)?;
        if nonzero_permutation_count(&sub)? == 1 {
            out.insert(p.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Ratio {
    Finite(f64),
    /// Classical prediction zero, quantum nonzero.
    Infinite,
    /// Both zero.
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interference {
    Constructive,
    Destructive,
    None,
    /// Used to fix the relative scale of the two tables.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub quantum: f64,
    pub classical: f64,
    pub ratio: Ratio,
    pub interference: Interference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub rows: BTreeMap<ClickPattern, ContrastRow>,
    /// Mean quantum/classical ratio over constructive patterns.
    pub mean_constructive_ratio: Option<f64>,
    /// Mean quantum/classical ratio over destructive patterns.
    pub mean_destructive_ratio: Option<f64>,
    /// Mean quantum rate on constructive patterns over the mean on
    /// destructive ones.
    pub rate_contrast: Option<f64>,
    /// Factor applied to the classical table before comparison.
    pub classical_scale: f64,
}

impl ContrastReport {
    pub fn ratio(&self, pattern: &ClickPattern) -> Option<Ratio> {
        self.rows.get(pattern).map(|r| r.ratio)
    }

    pub fn patterns_with(&self, kind: Interference) -> Vec<&ClickPattern> {
        self.rows
            .iter()
            .filter(|(_, r)| r.interference == kind)
            .map(|(p, _)| p)
            .collect()
    }
}

const RATIO_TOLERANCE: f64 = 1e-9;

/// Per-pattern quantum/classical ratios. When `reference` is non-empty the
/// classical table is scaled so both tables have equal totals over the
/// reference patterns; otherwise the tables are compared as given.
pub fn interference_contrast(
    quantum: &OutcomeTable,
    classical: &OutcomeTable,
    reference: &BTreeSet<ClickPattern>,
) -> Result<ContrastReport> {
    let qp: BTreeSet<&ClickPattern> = quantum.patterns().collect();
    let cp: BTreeSet<&ClickPattern> = classical.patterns().collect();
    if qp != cp {
        return Err(SisError::InvalidPattern(
            "quantum and classical tables cover different patterns".into(),
        ));
    }
    let q_ref: f64 = reference.iter().map(|p| quantum.get(p)).sum();
    let c_ref: f64 = reference.iter().map(|p| classical.get(p)).sum();
    let classical_scale = if q_ref > 0.0 && c_ref > 0.0 {
        q_ref / c_ref
    } else {
        1.0
    };

    let mut rows = BTreeMap::new();
    for p in qp {
        let q = quantum.get(p);
        let c = classical.get(p) * classical_scale;
        let ratio = if c > 0.0 {
            Ratio::Finite(q / c)
        } else if q > 0.0 {
            Ratio::Infinite
        } else {
            Ratio::Undefined
        };
        let interference = if reference.contains(p) {
            Interference::Reference
        } else {
            match ratio {
                Ratio::Finite(r) if r > 1.0 + RATIO_TOLERANCE => Interference::Constructive,
                Ratio::Finite(r) if r < 1.0 - RATIO_TOLERANCE => Interference::Destructive,
                Ratio::Infinite => Interference::Constructive,
                _ => Interference::None,
            }
        };
        rows.insert(
            p.clone(),
            ContrastRow {
                quantum: q,
                classical: c,
                ratio,
                interference,
            },
        );
    }

    let mean = |kind: Interference, value: &dyn Fn(&ContrastRow) -> Option<f64>| {
        let vals: Vec<f64> = rows
            .values()
            .filter(|r| r.interference == kind)
            .filter_map(value)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let finite = |r: &ContrastRow| match r.ratio {
        Ratio::Finite(x) => Some(x),
        _ => None,
    };
    let mean_constructive_ratio = mean(Interference::Constructive, &finite);
    let mean_destructive_ratio = mean(Interference::Destructive, &finite);
    let rate_c = mean(Interference::Constructive, &|r| Some(r.quantum));
    let rate_d = mean(Interference::Destructive, &|r| Some(r.quantum));
    let rate_contrast = match (rate_c, rate_d) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    Ok(ContrastReport {
        rows,
        mean_constructive_ratio,
        mean_destructive_ratio,
        rate_contrast,
        classical_scale,
    })
}
