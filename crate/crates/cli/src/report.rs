//! JSON report envelope shared by every subcommand.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

/// Bumped whenever a field is renamed or removed.
pub const SCHEMA_VERSION: u32 = 1;

/// A floating value together with the check it was subjected to.
#[derive(Clone, Debug, Serialize)]
pub struct Checked {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

impl Checked {
    /// `|value - expected| <= tolerance`.
    pub fn near(value: f64, expected: f64, tolerance: f64) -> Self {
        Checked { value, expected: Some(expected), tolerance, pass: (value - expected).abs() <= tolerance }
    }

    /// `value <= tolerance`.
    pub fn at_most(value: f64, tolerance: f64) -> Self {
        Checked { value, expected: None, tolerance, pass: value <= tolerance }
    }

    /// `value >= 1 - tolerance`, for fidelities and overlaps.
    pub fn near_one(value: f64, tolerance: f64) -> Self {
        Checked { value, expected: Some(1.0), tolerance, pass: value >= 1.0 - tolerance }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: Value,
    pub results: BTreeMap<String, Value>,
    /// Names of the checks that failed; empty on success.
    pub failures: Vec<String>,
    pub versions: BTreeMap<String, String>,
    /// Wall-clock milliseconds per phase; the only nondeterministic field.
    pub timings_ms: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(command: &str, config: impl Serialize) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("aklt-cli".into(), env!("CARGO_PKG_VERSION").into());
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            config: serde_json::to_value(config).expect("config serializes"),
            results: BTreeMap::new(),
            failures: Vec::new(),
            versions,
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn put(&mut self, key: &str, v: impl Serialize) {
        self.results.insert(key.into(), serde_json::to_value(v).expect("result serializes"));
    }

    /// Record a check, noting it as a failure when it does not pass.
    pub fn check(&mut self, key: &str, c: Checked) {
        if !c.pass {
            self.failures.push(key.into());
        }
        self.put(key, c);
    }

    pub fn fail(&mut self, key: &str) {
        self.failures.push(key.into());
    }

    /// Run `f` and store its wall-clock time under `phase`.
    pub fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings_ms.insert(phase.into(), t.elapsed().as_secs_f64() * 1e3);
        out
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}
