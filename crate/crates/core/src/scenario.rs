//! End-to-end scenarios: pump configuration in, exact and sampled
//! coincidence tables out.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use log::{debug, info};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::channel::ClickPattern;
use crate::detection::{
    apply_detection, classical_fourfold_prediction, interference_contrast,
    normalize_to_least_efficient, single_permutation_patterns, ContrastReport, CountReport,
    DetectionModel, ReportMeta,
};
use crate::error::{Result, SisError};
use crate::fock::{expand, pattern_probability, sample_events, OccupationPattern};
use crate::gaussian::{
    collision_free_patterns, n_pair_probability, quantum_outcome_table, GaussianPairState,
    DEFAULT_GAIN,
};
use crate::jsa::{build_jsa, FrequencyGrid, JsaMatrix, PumpSpectrum};
use crate::outcome::{OutcomeTable, TableKind};

pub const DEFAULT_SHOTS: u64 = 1_000_000;
pub const DEFAULT_TRUNCATION: usize = 4;
pub const DEFAULT_SEED: u64 = 2018;

/// Largest relative deviation accepted by [`verify_oracle`].
pub const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpComponent {
    pub index: i64,
    pub magnitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub pump: Vec<PumpComponent>,
    #[serde(default)]
    pub grid: FrequencyGrid,
    #[serde(default = "default_gain")]
    pub gain: f64,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub detection: DetectionModel,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_gain() -> f64 {
    DEFAULT_GAIN
}

fn default_truncation() -> usize {
    DEFAULT_TRUNCATION
}

fn default_shots() -> u64 {
    DEFAULT_SHOTS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate().map_err(|e| e.context("grid"))?;
        if self.pump.is_empty() {
            return Err(SisError::EmptySpectrum.context("pump"));
        }
        for (k, p) in self.pump.iter().enumerate() {
            let ctx = format!("pump.{k}");
            if !(p.magnitude.is_finite() && p.magnitude >= 0.0) {
                return Err(SisError::InvalidConfig(format!(
                    "magnitude {} must be >= 0",
                    p.magnitude
                ))
                .context(ctx));
            }
            if !p.phase.is_finite() {
                return Err(SisError::InvalidConfig("phase must be finite".into()).context(ctx));
            }
            if !self.grid.pump_indices.contains(&p.index) {
                return Err(SisError::InvalidConfig(format!(
                    "index {} is not one of grid.pump_indices {:?}",
                    p.index, self.grid.pump_indices
                ))
                .context(ctx));
            }
            if self.pump[..k].iter().any(|q| q.index == p.index) {
                return Err(
                    SisError::InvalidConfig(format!("index {} listed twice", p.index)).context(ctx),
                );
            }
        }
        if self.pump_spectrum().is_empty() {
            return Err(SisError::EmptySpectrum.context("pump"));
        }
        if !(self.gain.is_finite() && self.gain > 0.0 && self.gain < 1.0) {
            return Err(SisError::UnphysicalGain(self.gain).context("gain"));
        }
        if !(1..=crate::fock::MAX_TRUNCATION).contains(&self.truncation) {
            return Err(SisError::TruncationOutOfRange(self.truncation).context("truncation"));
        }
        self.detection
            .validate_channels(&self.grid.channels())
            .map_err(|e| e.context("detection"))?;
        if self.shots == 0 {
            return Err(SisError::InvalidConfig("must be at least 1".into()).context("shots"));
        }
        Ok(())
    }

    pub fn pump_spectrum(&self) -> PumpSpectrum {
        PumpSpectrum::new(
            self.pump
                .iter()
                .map(|p| (p.index, Complex64::from_polar(p.magnitude, p.phase))),
        )
    }

    /// SHA-256 of the compact JSON encoding, hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Sets `path` (dot-separated; numeric segments index arrays) to `raw`,
/// parsed as JSON when possible and as a string otherwise. Missing object
/// keys are created.
pub fn apply_override(doc: &mut Value, path: &str, raw: &str) -> Result<()> {
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(SisError::InvalidConfig(format!(
            "bad override path `{path}`"
        )));
    }
    let mut cursor = doc;
    for (depth, seg) in segments.iter().enumerate() {
        let last = depth + 1 == segments.len();
        cursor = match cursor {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| {
                    SisError::InvalidConfig(format!(
                        "override `{path}`: `{seg}` is not an array index"
                    ))
                })?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| {
                    SisError::InvalidConfig(format!(
                        "override `{path}`: index {idx} out of range (len {len})"
                    ))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(SisError::InvalidConfig(format!(
                    "override `{path}`: `{seg}` is not inside an object or array"
                )))
            }
        };
    }
    unreachable!("loop returns on the last segment")
}

/// Parses `key=value` override strings.
pub fn parse_overrides<S: AsRef<str>>(items: &[S]) -> Result<Vec<(String, String)>> {
    items
        .iter()
        .map(|s| {
            let s = s.as_ref();
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| SisError::InvalidConfig(format!("override `{s}` is not key=value")))
        })
        .collect()
}

fn read_with_overrides(path: &Path, overrides: &[(String, String)]) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| SisError::from(e).context(format!("reading {}", path.display())))?;
    let mut doc: Value = serde_json::from_str(&text)
        .map_err(|e| SisError::from(e).context(format!("parsing {}", path.display())))?;
    for (k, v) in overrides {
        apply_override(&mut doc, k, v)?;
    }
    Ok(doc)
}

pub fn load_scenario(path: &Path, overrides: &[(String, String)]) -> Result<ScenarioConfig> {
    let doc = read_with_overrides(path, overrides)?;
    let cfg: ScenarioConfig = serde_json::from_value(doc)
        .map_err(|e| SisError::from(e).context(format!("config {}", path.display())))?;
    cfg.validate()
        .map_err(|e| e.context(format!("config {}", path.display())))?;
    Ok(cfg)
}

pub fn load_sweep(path: &Path, overrides: &[(String, String)]) -> Result<SweepSpec> {
    let doc = read_with_overrides(path, overrides)?;
    let spec: SweepSpec = serde_json::from_value(doc)
        .map_err(|e| SisError::from(e).context(format!("sweep {}", path.display())))?;
    spec.validate()
        .map_err(|e| e.context(format!("sweep {}", path.display())))?;
    Ok(spec)
}

/// Exact, detection-free predictions plus the expected detected counts.
#[derive(Debug, Clone, Serialize)]
pub struct ExactTables {
    /// One-pair probabilities `C^2 |Lambda_mn|^2`.
    pub twofold: OutcomeTable,
    /// Two-pair probabilities from the permanent formula.
    pub quantum_fourfold: OutcomeTable,
    /// Distinguishable-photon prediction from `twofold`, on the same scale
    /// as `quantum_fourfold` (includes the `C^-2` vacuum factor).
    pub classical_fourfold: OutcomeTable,
    pub contrast: ContrastReport,
    /// `shots` times the detected click probabilities, raw and normalized.
    pub detected: CountReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampledTables {
    pub report: CountReport,
    /// Classical prediction from the normalized sampled twofold counts.
    pub classical_fourfold: OutcomeTable,
    pub contrast: ContrastReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub config_hash: String,
    #[serde(skip)]
    pub jsa: JsaMatrix,
    #[serde(skip)]
    pub state: GaussianPairState,
    pub schmidt_values: Vec<f64>,
    pub norm_constant: f64,
    pub norm_deficit: f64,
    pub exact: ExactTables,
    pub sampled: Option<SampledTables>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Draw `shots` events through the sampler as well as the exact tables.
    pub sample: bool,
}

pub fn run_scenario(cfg: &ScenarioConfig, options: RunOptions) -> Result<ScenarioResult> {
    cfg.validate()?;
    let jsa = build_jsa(&cfg.pump_spectrum(), &cfg.grid).map_err(|e| e.context("pump"))?;
    let state = GaussianPairState::from_jsa(&jsa, cfg.gain).map_err(|e| e.context("gain"))?;
    let ts = expand(&state, cfg.truncation).map_err(|e| e.context("truncation"))?;
    debug!(
        "schmidt values {:?}, C = {}, norm deficit {:e}",
        state.schmidt_values(),
        state.norm_constant(),
        ts.norm_deficit()
    );
    let signals = cfg.grid.signal_channels();
    let idlers = cfg.grid.idler_channels();
    let shots = cfg.shots;

    let twofold = quantum_outcome_table(&state, 1)?;
    let quantum_fourfold = quantum_outcome_table(&state, 2).map_err(|e| e.context("grid"))?;
    let c2 = state.norm_constant().powi(2);
    let classical_fourfold = classical_fourfold_prediction(&twofold, 1)?.scaled(1.0 / c2);
    let reference = single_permutation_patterns(&state, &quantum_fourfold)?;
    let contrast = interference_contrast(&quantum_fourfold, &classical_fourfold, &reference)?;

    let detected_clicks = apply_detection(&ts, &cfg.detection)
        .map_err(|e| e.context("detection"))?
        .map_values(TableKind::ExpectedCount, |_, p| p * shots as f64);
    let detected = CountReport::from_clicks(
        &detected_clicks,
        &signals,
        &idlers,
        ReportMeta {
            label: "expected".into(),
            shots: Some(shots),
            seed: None,
        },
    );
    let detected = normalize_to_least_efficient(&detected, &cfg.detection)
        .map_err(|e| e.context("detection.efficiencies"))?;

    let sampled = if options.sample {
        info!("sampling {shots} shots with seed {}", cfg.seed);
        let clicks = sample_events(&ts, &cfg.detection, shots, cfg.seed)?;
        let report = CountReport::from_clicks(
            &clicks,
            &signals,
            &idlers,
            ReportMeta {
                label: "sampled".into(),
                shots: Some(shots),
                seed: Some(cfg.seed),
            },
        );
        let report = normalize_to_least_efficient(&report, &cfg.detection)
            .map_err(|e| e.context("detection.efficiencies"))?;
        let classical = classical_fourfold_prediction(report.best_twofold(), shots)?;
        let contrast = interference_contrast(report.best_fourfold(), &classical, &reference)?;
        Some(SampledTables {
            report,
            classical_fourfold: classical,
            contrast,
        })
    } else {
        None
    };

    Ok(ScenarioResult {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        schmidt_values: state.schmidt_values().to_vec(),
        norm_constant: state.norm_constant(),
        norm_deficit: ts.norm_deficit(),
        jsa,
        state,
        exact: ExactTables {
            twofold,
            quantum_fourfold,
            classical_fourfold,
            contrast,
            detected,
        },
        sampled,
    })
}

/// Phase values either listed or generated as `count` evenly spaced points
/// from `start` to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseGrid {
    List(Vec<f64>),
    Linspace { start: f64, stop: f64, count: usize },
}

impl PhaseGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            PhaseGrid::List(v) => v.clone(),
            PhaseGrid::Linspace { start, stop, count } => match count {
                0 => vec![],
                1 => vec![*start],
                n => (0..*n)
                    .map(|k| start + (stop - start) * k as f64 / (*n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub swept_pump_index: i64,
    pub phase_grid: PhaseGrid,
    pub base: ScenarioConfig,
    /// Also sample `base.shots` events at every phase point.
    #[serde(default)]
    pub sampled: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate().map_err(|e| e.context("base"))?;
        let phases = self.phase_grid.values();
        if phases.is_empty() {
            return Err(SisError::InvalidConfig("phase grid is empty".into()).context("phase_grid"));
        }
        if let Some(bad) = phases.iter().find(|t| !(0.0..TAU).contains(*t)) {
            return Err(
                SisError::InvalidConfig(format!("phase {bad} outside [0, 2pi)"))
                    .context("phase_grid"),
            );
        }
        if !self
            .base
            .pump
            .iter()
            .any(|p| p.index == self.swept_pump_index)
        {
            return Err(SisError::InvalidConfig(format!(
                "no pump component at index {}",
                self.swept_pump_index
            ))
            .context("swept_pump_index"));
        }
        Ok(())
    }

    /// Base config with the swept pump's phase set to `theta`.
    pub fn config_at(&self, theta: f64) -> ScenarioConfig {
        let mut cfg = self.base.clone();
        for p in &mut cfg.pump {
            if p.index == self.swept_pump_index {
                p.phase = theta;
            }
        }
        cfg
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub theta: f64,
    /// `|psi_mn|^2` for every idler/signal pair, unnormalized.
    pub abs_squared: OutcomeTable,
    /// Raw sampled twofold counts when sampling was requested.
    pub sampled_twofold: Option<OutcomeTable>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub config_hash: String,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Values of one twofold pattern across the sweep.
    pub fn series(&self, pattern: &ClickPattern) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.abs_squared.get(pattern))
            .collect()
    }
}

/// Deterministic per-point seed (SplitMix64 of the master seed and index).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn phase_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let signals = spec.base.grid.signal_channels();
    let idlers = spec.base.grid.idler_channels();
    let mut points = Vec::new();
    for (k, theta) in spec.phase_grid.values().into_iter().enumerate() {
        let cfg = spec.config_at(theta);
        debug!("sweep point {k}: theta = {theta}");
        let jsa = build_jsa(&cfg.pump_spectrum(), &cfg.grid)?;
        let mut abs_squared = OutcomeTable::new(TableKind::Weight);
        for &i in &idlers {
            for &s in &signals {
                abs_squared.insert(ClickPattern::new([i, s]), jsa.get(i, s)?.norm_sqr());
            }
        }
        let (sampled_twofold, seed) = if spec.sampled {
            let seed = derive_seed(cfg.seed, k as u64);
            let state = GaussianPairState::from_jsa(&jsa, cfg.gain)?;
            let ts = expand(&state, cfg.truncation)?;
            let clicks = sample_events(&ts, &cfg.detection, cfg.shots, seed)?;
            let report = CountReport::from_clicks(
                &clicks,
                &signals,
                &idlers,
                ReportMeta {
                    label: format!("theta={theta}"),
                    shots: Some(cfg.shots),
                    seed: Some(seed),
                },
            );
            (Some(report.twofold), Some(seed))
        } else {
            (None, None)
        };
        points.push(SweepPoint {
            theta,
            abs_squared,
            sampled_twofold,
            seed,
        });
    }
    Ok(SweepResult {
        spec: spec.clone(),
        config_hash: spec.base.hash(),
        points,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub patterns_checked: usize,
    /// Largest relative deviation for each pair number N.
    pub max_deviation_by_order: BTreeMap<usize, f64>,
    pub max_relative_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the permanent formula with the Fock expansion on every
/// collision-free pattern with `N <= min(truncation, 3)` pairs.
pub fn verify_oracle(cfg: &ScenarioConfig) -> Result<OracleReport> {
    cfg.validate()?;
    if cfg.truncation < 2 {
        return Err(
            SisError::InvalidConfig("oracle check needs truncation >= 2".into())
                .context("truncation"),
        );
    }
    let jsa = build_jsa(&cfg.pump_spectrum(), &cfg.grid)?;
    let state = GaussianPairState::from_jsa(&jsa, cfg.gain)?;
    let ts = expand(&state, cfg.truncation)?;
    let max_n = cfg
        .truncation
        .min(3)
        .min(state.n_idlers())
        .min(state.n_signals());
    let mut by_order = BTreeMap::new();
    let mut checked = 0;
    for n in 1..=max_n {
        let mut worst: f64 = 0.0;
        for p in collision_free_patterns(state.grid(), n) {
            let formula = n_pair_probability(&state, &p)?;
            let occ = OccupationPattern::from_pattern(state.n_signals(), state.n_idlers(), &p);
            let oracle = pattern_probability(&ts, &occ);
            worst = worst.max(relative_deviation(formula, oracle));
            checked += 1;
        }
        by_order.insert(n, worst);
    }
    let max = by_order.values().copied().fold(0.0, f64::max);
    Ok(OracleReport {
        patterns_checked: checked,
        max_deviation_by_order: by_order,
        max_relative_deviation: max,
        tolerance: ORACLE_TOLERANCE,
        passed: max < ORACLE_TOLERANCE,
    })
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_deviation(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// The three bundled pump scenarios.
pub mod presets {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn base(name: &str, pump: Vec<PumpComponent>, grid: FrequencyGrid) -> ScenarioConfig {
        ScenarioConfig {
            name: name.into(),
            pump,
            grid,
            gain: DEFAULT_GAIN,
            truncation: DEFAULT_TRUNCATION,
            detection: DetectionModel::ideal(),
            shots: DEFAULT_SHOTS,
            seed: DEFAULT_SEED,
        }
    }

    /// One pump at index 0.
    pub fn single_pump() -> ScenarioConfig {
        base(
            "single-pump",
            vec![PumpComponent {
                index: 0,
                magnitude: 1.0,
                phase: 0.0,
            }],
            FrequencyGrid::default(),
        )
    }

    /// Two equal pumps at -1 and 0 on the shifted-idler grid.
    pub fn two_pump() -> ScenarioConfig {
        base(
            "two-pump",
            vec![
                PumpComponent {
                    index: -1,
                    magnitude: 1.0,
                    phase: 0.0,
                },
                PumpComponent {
                    index: 0,
                    magnitude: 1.0,
                    phase: 0.0,
                },
            ],
            FrequencyGrid::two_pump(),
        )
    }

    /// `A1 = A3 = sqrt(2) i`, `A2 = 1`.
    pub fn three_pump() -> ScenarioConfig {
        base(
            "three-pump",
            vec![
                PumpComponent {
                    index: -1,
                    magnitude: SQRT_2,
                    phase: FRAC_PI_2,
                },
                PumpComponent {
                    index: 0,
                    magnitude: 1.0,
                    phase: 0.0,
                },
                PumpComponent {
                    index: 1,
                    magnitude: SQRT_2,
                    phase: FRAC_PI_2,
                },
            ],
            FrequencyGrid::default(),
        )
    }

    /// Phase of the centre pump swept over `[0, pi]` with the outer pumps
    /// real, `|A1| = |A3| = sqrt(2) |A2|`.
    pub fn centre_phase_sweep(points: usize) -> SweepSpec {
        let mut cfg = three_pump();
        cfg.name = "sweep".into();
        for p in &mut cfg.pump {
            p.phase = 0.0;
        }
        SweepSpec {
            swept_pump_index: 0,
            phase_grid: PhaseGrid::Linspace {
                start: 0.0,
                stop: std::f64::consts::PI,
                count: points,
            },
            base: cfg,
            sampled: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Channel;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn pat(s: &str) -> ClickPattern {
        s.parse().unwrap()
    }

    #[test]
    fn presets_validate_and_round_trip() {
        for cfg in [
            presets::single_pump(),
            presets::two_pump(),
            presets::three_pump(),
        ] {
            cfg.validate().unwrap();
            let text = serde_json::to_string_pretty(&cfg).unwrap();
            let back = ScenarioConfig::from_json_str(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash(), cfg.hash());
        }
        presets::centre_phase_sweep(21).validate().unwrap();
    }

    #[test]
    fn defaults_fill_in() {
        let cfg =
            ScenarioConfig::from_json_str(r#"{"pump": [{"index": 0, "magnitude": 1}]}"#).unwrap();
        assert_eq!(cfg.gain, DEFAULT_GAIN);
        assert_eq!(cfg.truncation, DEFAULT_TRUNCATION);
        assert_eq!(cfg.shots, DEFAULT_SHOTS);
        assert_eq!(cfg.grid, FrequencyGrid::default());
        assert!(!cfg.detection.record_collisions);
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = presets::three_pump();
        cfg.gain = 1.2;
        assert!(cfg.validate().unwrap_err().to_string().starts_with("gain:"));
        let mut cfg = presets::three_pump();
        cfg.pump[0].index = 7;
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .starts_with("pump.0:"));
        let mut cfg = presets::three_pump();
        cfg.detection.efficiencies.insert(Channel::Signal(5), 0.5);
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .starts_with("detection:"));
        let mut cfg = presets::three_pump();
        cfg.truncation = 9;
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .starts_with("truncation:"));
        assert!(ScenarioConfig::from_json_str(r#"{"pump": [], "bogus": 1}"#).is_err());
    }

    #[test]
    fn overrides() {
        let mut doc = serde_json::to_value(presets::three_pump()).unwrap();
        apply_override(&mut doc, "detection.efficiencies.s2", "0.5").unwrap();
        apply_override(&mut doc, "pump.1.phase", "1.3").unwrap();
        apply_override(&mut doc, "name", "tuned").unwrap();
        let cfg: ScenarioConfig = serde_json::from_value(doc.clone()).unwrap();
        assert_eq!(cfg.detection.efficiency(Channel::Signal(2)), 0.5);
        assert_eq!(cfg.pump[1].phase, 1.3);
        assert_eq!(cfg.name, "tuned");
        assert!(apply_override(&mut doc, "pump.9.phase", "1").is_err());
        assert!(apply_override(&mut doc, "gain.x", "1").is_err());
        assert!(apply_override(&mut doc, "a..b", "1").is_err());
        assert_eq!(
            parse_overrides(&["gain=0.05", "seed = 3"]).unwrap(),
            vec![("gain".into(), "0.05".into()), ("seed".into(), "3".into())]
        );
        assert!(parse_overrides(&["gain"]).is_err());
    }

    #[test]
    fn single_pump_fourfold_support() {
        let r = run_scenario(&presets::single_pump(), RunOptions { sample: false }).unwrap();
        let support: Vec<String> = r
            .exact
            .quantum_fourfold
            .iter()
            .filter(|(_, v)| *v > 0.0)
            .map(|(p, _)| p.signal_label())
            .collect();
        assert_eq!(support, vec!["2&3"]);
    }

    #[test]
    fn two_pump_central_peaks() {
        let r = run_scenario(&presets::two_pump(), RunOptions { sample: false }).unwrap();
        let t = &r.exact.twofold;
        let side = t.get(&pat("i1,s1"));
        assert!((t.get(&pat("i1,s2")) / side - 4.0).abs() < 1e-12);
        assert!((t.get(&pat("i2,s3")) / t.get(&pat("i2,s4")) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn three_pump_interference_pattern() {
        let r = run_scenario(&presets::three_pump(), RunOptions { sample: false }).unwrap();
        let mut constructive: Vec<String> = r
            .exact
            .contrast
            .patterns_with(crate::detection::Interference::Constructive)
            .into_iter()
            .map(|p| p.signal_label())
            .collect();
        constructive.sort();
        assert_eq!(constructive, vec!["1&3", "2&4"]);
        assert_eq!(
            r.exact
                .contrast
                .patterns_with(crate::detection::Interference::Destructive)
                .len(),
            4
        );
    }

    #[test]
    fn sampling_is_deterministic() {
        let mut cfg = presets::two_pump();
        cfg.shots = 20_000;
        cfg.gain = 0.3;
        let a = run_scenario(&cfg, RunOptions { sample: true }).unwrap();
        let b = run_scenario(&cfg, RunOptions { sample: true }).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        cfg.seed += 1;
        let c = run_scenario(&cfg, RunOptions { sample: true }).unwrap();
        assert_ne!(
            a.sampled.as_ref().unwrap().report,
            c.sampled.as_ref().unwrap().report
        );
        assert_eq!(
            serde_json::to_string(&a.exact).unwrap(),
            serde_json::to_string(&c.exact).unwrap()
        );
    }

    #[test]
    fn sweep_shape() {
        let spec = SweepSpec {
            phase_grid: PhaseGrid::List(vec![0.0, FRAC_PI_2, PI]),
            ..presets::centre_phase_sweep(3)
        };
        let r = phase_sweep(&spec).unwrap();
        let centre = r.series(&pat("i1,s2"));
        assert!((centre[0] - 25.0).abs() < 1e-12);
        assert!((centre[1] - 9.0).abs() < 1e-12);
        assert!((centre[2] - 25.0).abs() < 1e-12);
        for side in ["i1,s1", "i1,s3"] {
            assert!(r.series(&pat(side)).iter().all(|v| (v - 8.0).abs() < 1e-12));
        }
    }

    #[test]
    fn sweep_validation() {
        let mut spec = presets::centre_phase_sweep(5);
        spec.phase_grid = PhaseGrid::List(vec![]);
        assert!(spec.validate().is_err());
        spec.phase_grid = PhaseGrid::List(vec![7.0]);
        assert!(spec.validate().is_err());
        spec.phase_grid = PhaseGrid::List(vec![1.0]);
        spec.swept_pump_index = 4;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn sampled_sweep_uses_distinct_seeds() {
        let mut spec = presets::centre_phase_sweep(2);
        spec.sampled = true;
        spec.base.shots = 1000;
        let r = phase_sweep(&spec).unwrap();
        assert_ne!(r.points[0].seed, r.points[1].seed);
        assert!(r.points.iter().all(|p| p.sampled_twofold.is_some()));
    }

    #[test]
    fn oracle_report() {
        let r = verify_oracle(&presets::three_pump()).unwrap();
        assert!(r.passed, "{r:?}");
        // 8 one-pair patterns, 6 two-pair, none with three idlers.
        assert_eq!(r.patterns_checked, 14);
        let mut cfg = presets::three_pump();
        cfg.truncation = 1;
        assert!(verify_oracle(&cfg).is_err());
    }

    #[test]
    fn seed_derivation_is_stable() {
        assert_eq!(derive_seed(2018, 0), derive_seed(2018, 0));
        assert_ne!(derive_seed(2018, 0), derive_seed(2018, 1));
        assert_ne!(derive_seed(2018, 0), derive_seed(2019, 0));
    }

    #[test]
    fn linspace() {
        let g = PhaseGrid::Linspace {
            start: 0.0,
            stop: 1.0,
            count: 5,
        };
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let parsed: PhaseGrid = serde_json::from_str("[0.5, 1.5]").unwrap();
        assert_eq!(parsed.values(), vec![0.5, 1.5]);
    }
}
