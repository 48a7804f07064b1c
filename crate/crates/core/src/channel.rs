//! Channel labels and click patterns.
//!
//! Signal channels are labelled `s1..sN` and idler channels `i1..iM`, in the
//! order they appear in the [`FrequencyGrid`](crate::jsa::FrequencyGrid)
//! index lists. Label numbers are 1-based.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::SisError;

/// A detector channel. Idlers order before signals so that canonical
/// pattern strings list idlers first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Idler(usize),
    Signal(usize),
}

impl Channel {
    /// Zero-based position of the channel within its arm.
    pub fn position(&self) -> usize {
        match *self {
            Channel::Idler(n) | Channel::Signal(n) => n - 1,
        }
    }

    pub fn is_signal(&self) -> bool {
        matches!(self, Channel::Signal(_))
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Idler(n) => write!(f, "i{n}"),
            Channel::Signal(n) => write!(f, "s{n}"),
        }
    }
}

impl FromStr for Channel {
    type Err = SisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || SisError::UnknownChannel(s.to_string());
        let (kind, num) = s.split_at_checked(1).ok_or_else(bad)?;
        let n: usize = num.parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        match kind {
            "i" | "I" => Ok(Channel::Idler(n)),
            "s" | "S" => Ok(Channel::Signal(n)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Channel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Set of channels that clicked in one event. The empty set is the
/// no-click (vacuum) outcome and prints as `vac`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClickPattern(BTreeSet<Channel>);

impl ClickPattern {
    pub fn new(channels: impl IntoIterator<Item = Channel>) -> Self {
        ClickPattern(channels.into_iter().collect())
    }

    pub fn empty() -> Self {
        ClickPattern(BTreeSet::new())
    }

    pub fn channels(&self) -> impl Iterator<Item = &Channel> {
        self.0.iter()
    }

    pub fn contains(&self, channel: Channel) -> bool {
        self.0.contains(&channel)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signals(&self) -> impl Iterator<Item = Channel> + '_ {
        self.0.iter().copied().filter(Channel::is_signal)
    }

    pub fn idlers(&self) -> impl Iterator<Item = Channel> + '_ {
        self.0.iter().copied().filter(|c| !c.is_signal())
    }

    pub fn signal_count(&self) -> usize {
        self.signals().count()
    }

    pub fn idler_count(&self) -> usize {
        self.idlers().count()
    }

    /// Signal part as a `1&3` style label.
    pub fn signal_label(&self) -> String {
        self.signals()
            .map(|c| (c.position() + 1).to_string())
            .collect::<Vec<_>>()
            .join("&")
    }
}

impl fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("vac");
        }
        let mut first = true;
        for c in &self.0 {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for ClickPattern {
    type Err = SisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "vac" || s.is_empty() {
            return Ok(ClickPattern::empty());
        }
        let mut set = BTreeSet::new();
        for part in s.split(',') {
            let c: Channel = part.parse()?;
            if !set.insert(c) {
                return Err(SisError::DuplicateChannel(c.to_string()));
            }
        }
        Ok(ClickPattern(set))
    }
}

impl Serialize for ClickPattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClickPattern {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
