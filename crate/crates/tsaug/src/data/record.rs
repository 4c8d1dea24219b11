//! A labeled window plus where it came from.

use serde::{Deserialize, Serialize};

use crate::window::{ConditionLabel, Window};

/// Origin of a window: the run or class it was cut from, the start index of
/// the window within that source, and whether it was synthesized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub start: u64,
    #[serde(default)]
    pub synthetic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub window: Window,
    pub label: ConditionLabel,
    pub source: Provenance,
}
