use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// One named inequality check with its numeric margin.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CheckEntry {
    pub name: String,
    #[serde(serialize_with = "ser_f64")]
    pub value: f64,
    #[serde(serialize_with = "ser_f64")]
    pub bound: f64,
    #[serde(serialize_with = "ser_f64")]
    pub margin: f64,
    pub pass: bool,
    /// Failing advisory checks are reported but do not change the exit code.
    pub required: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckEntry {
    /// Check `value <= bound` (pass iff margin `bound - value` is >= 0).
    pub fn upper(name: &str, value: f64, bound: f64) -> Self {
        let margin = bound - value;
        CheckEntry {
            name: name.to_string(),
            value,
            bound,
            margin,
            pass: margin >= 0.0 || value == f64::NEG_INFINITY,
            required: true,
            note: None,
        }
    }

    /// Check `value < bound` strictly.
    pub fn strict_upper(name: &str, value: f64, bound: f64) -> Self {
        let mut e = Self::upper(name, value, bound);
        e.pass = value < bound;
        e
    }

    /// Check `value >= bound`.
    pub fn lower(name: &str, value: f64, bound: f64) -> Self {
        let margin = value - bound;
        CheckEntry {
            name: name.to_string(),
            value,
            bound,
            margin,
            pass: margin >= 0.0,
            required: true,
            note: None,
        }
    }

    pub fn advisory(mut self) -> Self {
        self.required = false;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct HypothesisReport {
    pub entries: Vec<CheckEntry>,
}

impl HypothesisReport {
    pub fn push(&mut self, e: CheckEntry) {
        self.entries.push(e);
    }

    pub fn get(&self, name: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn all_required_pass(&self) -> bool {
        self.entries.iter().filter(|e| e.required).all(|e| e.pass)
    }

    pub fn extend(&mut self, other: HypothesisReport) {
        self.entries.extend(other.entries);
    }
}

/// Serde helper writing non-finite floats as the strings `inf`, `-inf`, `nan`.
pub fn ser_f64<S: serde::Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Replace non-finite floats so that JSON output stays valid.
pub fn json_f64(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else if x.is_nan() {
        serde_json::json!("nan")
    } else if x > 0.0 {
        serde_json::json!("inf")
    } else {
        serde_json::json!("-inf")
    }
}
