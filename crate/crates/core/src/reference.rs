//! Expected published values with tolerances, loaded from
//! `data/reference_constants.json`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

const MANIFEST: &str = include_str!("../data/reference_constants.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub value: f64,
    pub tolerance: f64,
    pub source: String,
    pub note: String,
}

impl ReferenceValue {
    pub fn matches(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConstants {
    pub version: u32,
    pub constants: BTreeMap<String, ReferenceValue>,
}

impl ReferenceConstants {
    pub fn embedded() -> &'static ReferenceConstants {
        static CELL: OnceLock<ReferenceConstants> = OnceLock::new();
        CELL.get_or_init(|| serde_json::from_str(MANIFEST).expect("reference manifest is valid JSON"))
    }

    /// Panics on an unknown key; keys are fixed by the manifest.
    pub fn get(&self, key: &str) -> &ReferenceValue {
        self.constants.get(key).unwrap_or_else(|| panic!("no reference constant {key}"))
    }
}

pub fn reference(key: &str) -> &'static ReferenceValue {
    ReferenceConstants::embedded().get(key)
}
