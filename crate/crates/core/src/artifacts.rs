//! Deterministic output files. Every artifact records the seed and the
//! config hash; nothing depends on wall-clock time.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::channel::ClickPattern;
use crate::detection::{ContrastReport, CountReport, Ratio};
use crate::error::{Result, SisError};
use crate::jsa::{format_float as ff, JsaMatrix};
use crate::outcome::OutcomeTable;
use crate::scenario::{OracleReport, ScenarioConfig, ScenarioResult, SweepResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Formats {
    pub const ALL: Formats = Formats {
        csv: true,
        json: true,
        svg: true,
    };
}

impl Default for Formats {
    fn default() -> Self {
        Formats::ALL
    }
}

impl FromStr for Formats {
    type Err = SisError;

    fn from_str(s: &str) -> Result<Self> {
        let none = Formats {
            csv: false,
            json: false,
            svg: false,
        };
        match s {
            "csv" => Ok(Formats { csv: true, ..none }),
            "json" => Ok(Formats { json: true, ..none }),
            "svg" => Ok(Formats { svg: true, ..none }),
            "all" => Ok(Formats::ALL),
            other => Err(SisError::InvalidConfig(format!(
                "unknown format `{other}` (expected csv, json, svg or all)"
            ))),
        }
    }
}

/// Seed and config hash stamped on every file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub config_sha256: String,
}

impl Provenance {
    pub fn of(cfg: &ScenarioConfig) -> Self {
        Provenance {
            seed: cfg.seed,
            config_sha256: cfg.hash(),
        }
    }

    fn csv_line(&self) -> String {
        format!(
            "# seed={} config_sha256={}\n",
            self.seed, self.config_sha256
        )
    }

    fn svg_comment(&self) -> String {
        format!(
            "<!-- seed={} config_sha256={} -->\n",
            self.seed, self.config_sha256
        )
    }

    fn stamp(&self, body: Value) -> Value {
        let mut doc = json!({
            "seed": self.seed,
            "config_sha256": self.config_sha256,
        });
        match body {
            Value::Object(map) => doc.as_object_mut().unwrap().extend(map),
            other => {
                doc["data"] = other;
            }
        }
        doc
    }
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer {
            dir,
            written: Vec::new(),
        })
    }

    fn file(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| SisError::from(e).context(path.display().to_string()))?;
        self.written.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.file(name, &text)
    }
}

fn write_config(w: &mut Writer, cfg: &ScenarioConfig, prov: &Provenance) -> Result<()> {
    w.json("config.json", &prov.stamp(json!({ "config": cfg })))
}

pub fn write_jsa_artifacts(
    dir: &Path,
    cfg: &ScenarioConfig,
    jsa: &JsaMatrix,
    formats: Formats,
) -> Result<Vec<PathBuf>> {
    let prov = Provenance::of(cfg);
    let mut w = Writer::new(dir)?;
    write_config(&mut w, cfg, &prov)?;
    write_jsa(&mut w, jsa, &prov, formats)?;
    Ok(w.written)
}

fn write_jsa(w: &mut Writer, jsa: &JsaMatrix, prov: &Provenance, formats: Formats) -> Result<()> {
    if formats.json {
        let doc: Value = serde_json::from_str(&jsa.to_json()?)?;
        w.json("jsa.json", &prov.stamp(doc))?;
    }
    if formats.csv {
        w.file("jsa.csv", &format!("{}{}", prov.csv_line(), jsa.to_csv()))?;
    }
    Ok(())
}

fn fmt_ratio(r: Option<Ratio>) -> String {
    match r {
        Some(Ratio::Finite(x)) => ff(x),
        Some(Ratio::Infinite) => "inf".into(),
        Some(Ratio::Undefined) | None => String::new(),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(ff).unwrap_or_default()
}

/// Counts reported next to the predictions: sampled when available,
/// expected detected counts otherwise.
fn measured(result: &ScenarioResult) -> (&CountReport, &'static str) {
    match &result.sampled {
        Some(s) => (&s.report, "sampled"),
        None => (&result.exact.detected, "expected"),
    }
}

#[allow(clippy::too_many_arguments)]
fn count_csv(
    prov: &Provenance,
    source: &str,
    raw: &OutcomeTable,
    normalized: Option<&OutcomeTable>,
    quantum: &OutcomeTable,
    classical: &OutcomeTable,
    contrast: Option<&ContrastReport>,
    shots: f64,
) -> String {
    let mut out = prov.csv_line();
    writeln!(out, "# counts={source} shots={}", ff(shots)).unwrap();
    out.push_str("pattern,raw_count,normalized_count,quantum_pred,classical_pred,ratio\n");
    for (p, v) in raw.iter() {
        let ratio = match contrast {
            Some(c) => fmt_ratio(c.ratio(p)),
            None => "1".into(),
        };
        let scale = contrast.map_or(1.0, |c| c.classical_scale);
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p,
            ff(v),
            fmt_opt(normalized.map(|t| t.get(p))),
            ff(quantum.get(p) * shots),
            ff(classical.get(p) * scale * shots),
            ratio
        )
        .unwrap();
    }
    out
}

fn comparison_csv(result: &ScenarioResult, prov: &Provenance) -> String {
    let mut out = prov.csv_line();
    out.push_str(
        "pattern,signals,interference,quantum_exact,classical_exact,ratio_exact,measured,classical_from_twofold,ratio_measured\n",
    );
    let sampled = result.sampled.as_ref().map(|s| &s.contrast);
    for (p, row) in &result.exact.contrast.rows {
        let interference = serde_json::to_value(row.interference).unwrap();
        let (m, mc, mr) = match sampled.and_then(|c| c.rows.get(p)) {
            Some(r) => (ff(r.quantum), ff(r.classical), fmt_ratio(Some(r.ratio))),
            None => Default::default(),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            p,
            p.signal_label(),
            interference.as_str().unwrap_or_default(),
            ff(row.quantum),
            ff(row.classical),
            fmt_ratio(Some(row.ratio)),
            m,
            mc,
            mr
        )
        .unwrap();
    }
    out
}

pub fn write_scenario_artifacts(
    dir: &Path,
    result: &ScenarioResult,
    formats: Formats,
) -> Result<Vec<PathBuf>> {
    let prov = Provenance::of(&result.config);
    let mut w = Writer::new(dir)?;
    write_config(&mut w, &result.config, &prov)?;
    write_jsa(&mut w, &result.jsa, &prov, formats)?;
    let shots = result.config.shots as f64;
    let (report, source) = measured(result);
    let exact = &result.exact;
    if formats.csv {
        w.file(
            "twofold.csv",
            &count_csv(
                &prov,
                source,
                &report.twofold,
                report.twofold_normalized.as_ref(),
                &exact.twofold,
                &exact.twofold,
                None,
                shots,
            ),
        )?;
        w.file(
            "fourfold.csv",
            &count_csv(
                &prov,
                source,
                &report.fourfold,
                report.fourfold_normalized.as_ref(),
                &exact.quantum_fourfold,
                &exact.classical_fourfold,
                Some(&exact.contrast),
                shots,
            ),
        )?;
        w.file("comparison.csv", &comparison_csv(result, &prov))?;
    }
    if formats.json {
        w.json("report.json", &prov.stamp(serde_json::to_value(result)?))?;
    }
    if formats.svg {
        let labels = |t: &OutcomeTable| t.patterns().map(|p| p.to_string()).collect::<Vec<_>>();
        let values = |t: &OutcomeTable, f: f64| t.iter().map(|(_, v)| v * f).collect::<Vec<_>>();
        let two = report.best_twofold();
        w.file(
            "twofold.svg",
            &bar_chart(
                &prov,
                "Twofold coincidences",
                &labels(two),
                &[
                    ("predicted", values(&exact.twofold, shots)),
                    (source, values(two, 1.0)),
                ],
            ),
        )?;
        let four = report.best_fourfold();
        let scale = exact.contrast.classical_scale;
        w.file(
            "fourfold.svg",
            &bar_chart(
                &prov,
                "Fourfold coincidences",
                &four
                    .patterns()
                    .map(|p| p.signal_label())
                    .collect::<Vec<_>>(),
                &[
                    ("quantum", values(&exact.quantum_fourfold, shots)),
                    (
                        "classical",
                        values(&exact.classical_fourfold, scale * shots),
                    ),
                    (source, values(four, 1.0)),
                ],
            ),
        )?;
    }
    Ok(w.written)
}

pub fn write_sweep_artifacts(
    dir: &Path,
    sweep: &SweepResult,
    formats: Formats,
) -> Result<Vec<PathBuf>> {
    let prov = Provenance::of(&sweep.spec.base);
    let mut w = Writer::new(dir)?;
    w.json("config.json", &prov.stamp(json!({ "sweep": sweep.spec })))?;
    let patterns: Vec<ClickPattern> = sweep
        .points
        .first()
        .map(|p| p.abs_squared.patterns().cloned().collect())
        .unwrap_or_default();
    if formats.csv {
        let mut out = prov.csv_line();
        out.push_str("theta");
        for p in &patterns {
            write!(out, ",abs2[{p}]").unwrap();
        }
        if sweep.spec.sampled {
            for p in &patterns {
                write!(out, ",count[{p}]").unwrap();
            }
            out.push_str(",seed");
        }
        out.push('\n');
        for pt in &sweep.points {
            out.push_str(&ff(pt.theta));
            for p in &patterns {
                write!(out, ",{}", ff(pt.abs_squared.get(p))).unwrap();
            }
            if let Some(counts) = &pt.sampled_twofold {
                for p in &patterns {
                    write!(out, ",{}", ff(counts.get(p))).unwrap();
                }
                write!(
                    out,
                    ",{}",
                    pt.seed.map(|s| s.to_string()).unwrap_or_default()
                )
                .unwrap();
            }
            out.push('\n');
        }
        w.file("sweep.csv", &out)?;
    }
    if formats.json {
        w.json("sweep.json", &prov.stamp(serde_json::to_value(sweep)?))?;
    }
    if formats.svg {
        let xs: Vec<f64> = sweep.points.iter().map(|p| p.theta).collect();
        let series: Vec<(String, Vec<f64>)> = patterns
            .iter()
            .map(|p| (p.to_string(), sweep.series(p)))
            .collect();
        w.file(
            "sweep.svg",
            &line_chart(&prov, "|psi|^2 against pump phase", &xs, &series),
        )?;
    }
    Ok(w.written)
}

pub fn write_oracle_report(
    dir: &Path,
    cfg: &ScenarioConfig,
    report: &OracleReport,
) -> Result<Vec<PathBuf>> {
    let prov = Provenance::of(cfg);
    let mut w = Writer::new(dir)?;
    write_config(&mut w, cfg, &prov)?;
    w.json("verify.json", &prov.stamp(serde_json::to_value(report)?))?;
    Ok(w.written)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 130.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 70.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn svg_open(prov: &Provenance, title: &str) -> String {
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    out.push_str(&prov.svg_comment());
    writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="22" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
    out
}

fn y_axis(out: &mut String, max: f64) {
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let bottom = HEIGHT - MARGIN_B;
    writeln!(
        out,
        r#"<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{bottom}" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"<line x1="{MARGIN_L}" y1="{bottom}" x2="{}" y2="{bottom}" stroke="black"/>"#,
        WIDTH - MARGIN_R
    )
    .unwrap();
    for k in 0..=4 {
        let v = max * k as f64 / 4.0;
        let y = bottom - plot_h * k as f64 / 4.0;
        writeln!(
            out,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            y + 4.0,
            tick_label(v)
        )
        .unwrap();
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn legend<S: AsRef<str>>(out: &mut String, names: &[S]) {
    for (k, name) in names.iter().enumerate() {
        let x = WIDTH - MARGIN_R + 15.0;
        let y = MARGIN_T + 16.0 * k as f64;
        writeln!(
            out,
            r#"<rect x="{x}" y="{y}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            PALETTE[k % PALETTE.len()],
            x + 14.0,
            y + 9.0,
            escape(name.as_ref())
        )
        .unwrap();
    }
}

fn bar_chart(
    prov: &Provenance,
    title: &str,
    categories: &[String],
    series: &[(&str, Vec<f64>)],
) -> String {
    let mut out = svg_open(prov, title);
    let max = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0, f64::max);
    let max = if max > 0.0 { max } else { 1.0 };
    y_axis(&mut out, max);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let bottom = HEIGHT - MARGIN_B;
    let group_w = plot_w / categories.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    for (c, label) in categories.iter().enumerate() {
        let x0 = MARGIN_L + group_w * c as f64 + group_w * 0.1;
        for (s, (_, values)) in series.iter().enumerate() {
            let v = values.get(c).copied().unwrap_or(0.0);
            let h = plot_h * v / max;
            writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x0 + bar_w * s as f64,
                bottom - h,
                bar_w,
                h,
                PALETTE[s % PALETTE.len()]
            )
            .unwrap();
        }
        writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            x0 + group_w * 0.4,
            bottom + 16.0,
            escape(label)
        )
        .unwrap();
    }
    legend(
        &mut out,
        &series.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
    );
    out.push_str("</svg>\n");
    out
}

fn line_chart(prov: &Provenance, title: &str, xs: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let mut out = svg_open(prov, title);
    let max = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0, f64::max);
    let max = if max > 0.0 { max } else { 1.0 };
    y_axis(&mut out, max);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let bottom = HEIGHT - MARGIN_B;
    let (x_min, x_max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let px = |x: f64| MARGIN_L + plot_w * (x - x_min) / span;
    for (k, (_, values)) in series.iter().enumerate() {
        let points: Vec<String> = xs
            .iter()
            .zip(values)
            .map(|(&x, &v)| format!("{:.2},{:.2}", px(x), bottom - plot_h * v / max))
            .collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[k % PALETTE.len()],
            points.join(" ")
        )
        .unwrap();
    }
    if x_min.is_finite() {
        for x in [x_min, x_max] {
            writeln!(
                out,
                r#"<text x="{:.2}" y="{}" text-anchor="middle">{:.4}</text>"#,
                px(x),
                bottom + 16.0,
                x
            )
            .unwrap();
        }
    }
    writeln!(
        out,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">phase (rad)</text>"#,
        MARGIN_L + plot_w / 2.0,
        bottom + 36.0
    )
    .unwrap();
    legend(
        &mut out,
        &series.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{phase_sweep, presets, run_scenario, RunOptions};

    fn read_all(dir: &Path) -> Vec<(String, String)> {
        let mut files: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files
            .into_iter()
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read_to_string(&p).unwrap(),
                )
            })
            .collect()
    }

    #[test]
    fn formats_parse() {
        assert_eq!("all".parse::<Formats>().unwrap(), Formats::ALL);
        let csv: Formats = "csv".parse().unwrap();
        assert!(csv.csv && !csv.json && !csv.svg);
        assert!("xml".parse::<Formats>().is_err());
    }

    #[test]
    fn scenario_files_are_stamped_and_reproducible() {
        let mut cfg = presets::three_pump();
        cfg.shots = 5000;
        cfg.gain = 0.3;
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for dir in [a.path(), b.path()] {
            let r = run_scenario(&cfg, RunOptions { sample: true }).unwrap();
            write_scenario_artifacts(dir, &r, Formats::ALL).unwrap();
        }
        let fa = read_all(a.path());
        assert_eq!(fa, read_all(b.path()));
        let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            [
                "comparison.csv",
                "config.json",
                "fourfold.csv",
                "fourfold.svg",
                "jsa.csv",
                "jsa.json",
                "report.json",
                "twofold.csv",
                "twofold.svg"
            ]
        );
        let stamp = format!("seed={} config_sha256={}", cfg.seed, cfg.hash());
        for (name, body) in &fa {
            if name.ends_with(".json") {
                let v: Value = serde_json::from_str(body).unwrap();
                assert_eq!(v["seed"], json!(cfg.seed), "{name}");
                assert_eq!(v["config_sha256"], json!(cfg.hash()), "{name}");
            } else {
                assert!(body.contains(&stamp), "{name}");
            }
        }
    }

    #[test]
    fn jsa_json_reloads() {
        let cfg = presets::three_pump();
        let r = run_scenario(&cfg, RunOptions { sample: false }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_jsa_artifacts(dir.path(), &cfg, &r.jsa, Formats::ALL).unwrap();
        let text = fs::read_to_string(dir.path().join("jsa.json")).unwrap();
        assert_eq!(JsaMatrix::from_json(&text).unwrap(), r.jsa);
    }

    #[test]
    fn fourfold_csv_rows() {
        let cfg = presets::three_pump();
        let r = run_scenario(&cfg, RunOptions { sample: false }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_scenario_artifacts(dir.path(), &r, "csv".parse().unwrap()).unwrap();
        let text = fs::read_to_string(dir.path().join("fourfold.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# seed="));
        assert_eq!(
            lines[2],
            "pattern,raw_count,normalized_count,quantum_pred,classical_pred,ratio"
        );
        assert_eq!(lines.len(), 3 + 6);
        let row = lines
            .iter()
            .find(|l| l.starts_with("i1,i2,s1,s3,"))
            .unwrap();
        let ratio: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!((ratio - 200.0 / 104.0).abs() < 1e-9);
        assert!(!dir.path().join("report.json").exists());
    }

    #[test]
    fn sweep_files() {
        let spec = presets::centre_phase_sweep(5);
        let r = phase_sweep(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = write_sweep_artifacts(dir.path(), &r, Formats::ALL).unwrap();
        assert_eq!(written.len(), 4);
        let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2 + 5);
        let svg = fs::read_to_string(dir.path().join("sweep.svg")).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 8);
    }

    #[test]
    fn svg_escapes_labels() {
        let prov = Provenance {
            seed: 1,
            config_sha256: "x".into(),
        };
        let svg = bar_chart(&prov, "t", &["1&3".into()], &[("a", vec![1.0])]);
        assert!(svg.contains("1&amp;3"));
        assert!(!svg.contains("1&3"));
    }
}
