//! PMU column naming scheme, e.g. `R1-PM5:I` or `R2-PA:ZH`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::DatasetError;

/// Phasor component carried by a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalKind {
    PhaseMagnitude,
    PhaseAngle,
}

impl SignalKind {
    pub fn token(self) -> &'static str {
        match self {
            SignalKind::PhaseMagnitude => "PM",
            SignalKind::PhaseAngle => "PA",
        }
    }
}

/// Measured quantity, the token after the colon.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Quantity {
    Voltage,
    Current,
    VoltageAngle,
    CurrentAngle,
    ImpedanceAngle,
    Impedance,
    Frequency,
    FrequencyDelta,
    Status,
    Other(String),
}

impl Quantity {
    fn from_token(token: &str) -> Quantity {
        match token {
            "V" => Quantity::Voltage,
            "I" => Quantity::Current,
            "VH" => Quantity::VoltageAngle,
            "IH" => Quantity::CurrentAngle,
            "ZH" => Quantity::ImpedanceAngle,
            "Z" => Quantity::Impedance,
            "F" => Quantity::Frequency,
            "DF" => Quantity::FrequencyDelta,
            "S" => Quantity::Status,
            other => Quantity::Other(other.to_string()),
        }
    }

    pub fn token(&self) -> &str {
        match self {
            Quantity::Voltage => "V",
            Quantity::Current => "I",
            Quantity::VoltageAngle => "VH",
            Quantity::CurrentAngle => "IH",
            Quantity::ImpedanceAngle => "ZH",
            Quantity::Impedance => "Z",
            Quantity::Frequency => "F",
            Quantity::FrequencyDelta => "DF",
            Quantity::Status => "S",
            Quantity::Other(s) => s,
        }
    }

    /// Human-readable description used for axis labels.
    pub fn describe(&self) -> &str {
        match self {
            Quantity::Voltage => "voltage magnitude",
            Quantity::Current => "current magnitude",
            Quantity::VoltageAngle => "voltage phase angle",
            Quantity::CurrentAngle => "current phase angle",
            Quantity::ImpedanceAngle => "apparent impedance angle",
            Quantity::Impedance => "apparent impedance",
            Quantity::Frequency => "frequency",
            Quantity::FrequencyDelta => "frequency delta",
            Quantity::Status => "status flag",
            Quantity::Other(_) => "measurement",
        }
    }
}

/// Structured fields of a conforming PMU column name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PmuSignal {
    pub relay_id: u8,
    /// `None` for relay-scalar columns such as `R1:F`.
    pub kind: Option<SignalKind>,
    /// `None` for relay-level signals such as `R1-PA:ZH`.
    pub channel: Option<u8>,
    pub quantity: Quantity,
}

impl PmuSignal {
    /// Rebuilds the canonical column name from the structured fields.
    pub fn format(&self) -> String {
        let mut out = format!("R{}", self.relay_id);
        if let Some(kind) = self.kind {
            out.push('-');
            out.push_str(kind.token());
            if let Some(ch) = self.channel {
                out.push_str(&ch.to_string());
            }
        }
        out.push(':');
        out.push_str(self.quantity.token());
        out
    }
}

/// A feature column name. Conforming names carry a parsed [`PmuSignal`];
/// other columns present in the source data (log flags and the like) are kept
/// verbatim with no signal. Equality and ordering follow the raw text.
#[derive(Debug, Clone)]
pub struct FeatureName {
    raw: String,
    signal: Option<PmuSignal>,
}

impl PartialEq for FeatureName {
    fn eq(&self, other: &Self) -> bool {
        self.raw == other.raw
    }
}

impl Eq for FeatureName {}

impl std::hash::Hash for FeatureName {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.raw.hash(state);
    }
}

impl PartialOrd for FeatureName {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FeatureName {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.raw.cmp(&other.raw)
    }
}

impl AsRef<str> for FeatureName {
    fn as_ref(&self) -> &str {
        &self.raw
    }
}

impl FeatureName {
    /// Accepts any column name, parsing it when it follows the PMU grammar.
    pub fn column(raw: &str) -> FeatureName {
        match parse_feature_name(raw) {
            Ok(name) => name,
            Err(_) => FeatureName {
                raw: raw.to_string(),
                signal: None,
            },
        }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn signal(&self) -> Option<&PmuSignal> {
        self.signal.as_ref()
    }

    /// Longer label, e.g. `R1-PM5:I (relay 1 current magnitude, ch 5)`.
    pub fn describe(&self) -> String {
        match self.signal() {
            Some(sig) => match sig.channel {
                Some(ch) => format!(
                    "{} (relay {} {}, ch {})",
                    self.raw,
                    sig.relay_id,
                    sig.quantity.describe(),
                    ch
                ),
                None => format!(
                    "{} (relay {} {})",
                    self.raw,
                    sig.relay_id,
                    sig.quantity.describe()
                ),
            },
            None => self.raw.clone(),
        }
    }
}

impl fmt::Display for FeatureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl FromStr for FeatureName {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_feature_name(s)
    }
}

impl Serialize for FeatureName {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for FeatureName {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Ok(FeatureName::column(&raw))
    }
}

fn malformed(raw: &str, reason: &'static str) -> DatasetError {
    DatasetError::MalformedName {
        name: raw.to_string(),
        reason,
    }
}

/// Parses `R<relay>[-<PM|PA>[<channel>]]:<quantity>`.
///
/// Relay ids are 1..=4 and channels 1..=12. Unrecognised quantity tokens are
/// kept as [`Quantity::Other`].
pub fn parse_feature_name(raw: &str) -> Result<FeatureName, DatasetError> {
    if raw.is_empty() || !raw.is_ascii() {
        return Err(malformed(raw, "name must be non-empty ASCII"));
    }
    let rest = raw
        .strip_prefix('R')
        .ok_or_else(|| malformed(raw, "missing 'R' relay prefix"))?;
    let (head, quantity) = rest
        .split_once(':')
        .ok_or_else(|| malformed(raw, "missing ':' before quantity"))?;
    if quantity.is_empty() || quantity.contains(':') {
        return Err(malformed(raw, "bad quantity token"));
    }
    let (relay, signal) = match head.split_once('-') {
        Some((relay, signal)) => (relay, Some(signal)),
        None => (head, None),
    };
    let relay_id = parse_small_int(relay).ok_or_else(|| malformed(raw, "non-numeric relay id"))?;
    if !(1..=4).contains(&relay_id) {
        return Err(malformed(raw, "relay id out of range 1..=4"));
    }

    let (kind, channel) = match signal {
        None => (None, None),
        Some(sig) => {
            let (kind, digits) = if let Some(d) = sig.strip_prefix("PM") {
                (SignalKind::PhaseMagnitude, d)
            } else if let Some(d) = sig.strip_prefix("PA") {
                (SignalKind::PhaseAngle, d)
            } else {
                return Err(malformed(raw, "signal kind must be PM or PA"));
            };
            let channel = if digits.is_empty() {
                None
            } else {
                let ch = parse_small_int(digits)
                    .ok_or_else(|| malformed(raw, "non-numeric channel"))?;
                if !(1..=12).contains(&ch) {
                    return Err(malformed(raw, "channel out of range 1..=12"));
                }
                Some(ch)
            };
            (Some(kind), channel)
        }
    };

    let parsed = PmuSignal {
        relay_id,
        kind,
        channel,
        quantity: Quantity::from_token(quantity),
    };
    // leading zeros ("R01") parse but would not format back to the same text
    if parsed.format() != raw {
        return Err(malformed(raw, "non-canonical numeric field"));
    }
    Ok(FeatureName {
        raw: raw.to_string(),
        signal: Some(parsed),
    })
}

fn parse_small_int(s: &str) -> Option<u8> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}
