//! Tables mapping click patterns to probabilities or counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::ClickPattern;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    /// Exact probabilities of each pattern.
    Probability,
    /// Unnormalized weights, meaningful only relative to each other.
    Weight,
    /// Expected (real-valued) counts.
    ExpectedCount,
    /// Sampled integer counts.
    Count,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTable {
    pub kind: TableKind,
    entries: BTreeMap<ClickPattern, f64>,
}

impl OutcomeTable {
    pub fn new(kind: TableKind) -> Self {
        OutcomeTable {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(
        kind: TableKind,
        entries: impl IntoIterator<Item = (ClickPattern, f64)>,
    ) -> Self {
        OutcomeTable {
            kind,
            entries: entries.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, pattern: ClickPattern, value: f64) {
        self.entries.insert(pattern, value);
    }

    pub fn add(&mut self, pattern: ClickPattern, value: f64) {
        *self.entries.entry(pattern).or_insert(0.0) += value;
    }

    /// Value for `pattern`, zero when absent.
    pub fn get(&self, pattern: &ClickPattern) -> f64 {
        self.entries.get(pattern).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, pattern: &ClickPattern) -> bool {
        self.entries.contains_key(pattern)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ClickPattern, f64)> {
        self.entries.iter().map(|(p, &v)| (p, v))
    }

    pub fn patterns(&self) -> impl Iterator<Item = &ClickPattern> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn map_values(
        &self,
        kind: TableKind,
        mut f: impl FnMut(&ClickPattern, f64) -> f64,
    ) -> Self {
        OutcomeTable {
            kind,
            entries: self
                .entries
                .iter()
                .map(|(p, &v)| (p.clone(), f(p, v)))
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map_values(self.kind, |_, v| v * factor)
    }

    pub fn filter(&self, mut keep: impl FnMut(&ClickPattern) -> bool) -> Self {
        OutcomeTable {
            kind: self.kind,
            entries: self
                .entries
                .iter()
                .filter(|(p, _)| keep(p))
                .map(|(p, &v)| (p.clone(), v))
                .collect(),
        }
    }

    /// Divides by the total so the entries sum to one.
    pub fn normalized(&self) -> Self {
        let total = self.total();
        if total > 0.0 {
            self.scaled(1.0 / total)
        } else {
            self.clone()
        }
    }

    /// Largest entrywise relative deviation after scaling both tables to
    /// unit total. Patterns missing from one side count as zero.
    pub fn max_relative_shape_deviation(&self, other: &OutcomeTable) -> f64 {
        let a = self.normalized();
        let b = other.normalized();
        a.patterns()
            .chain(b.patterns())
            .map(|p| {
                let (x, y) = (a.get(p), b.get(p));
                let scale = x.abs().max(y.abs());
                if scale == 0.0 {
                    0.0
                } else {
                    (x - y).abs() / scale
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per pattern: `pattern,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pattern,value\n");
        for (p, v) in &self.entries {
            writeln!(out, "{p},{v}").unwrap();
        }
        out
    }
}
