//! Bundled reference data.

use crate::ranking::PrecisionTable;

/// Per-channel k-NN class precision for a 14-channel headset (channels
/// 4..=17) on three mental tasks, as fractions.
pub const TABLE1_JSON: &str = include_str!("../fixtures/table1.json");

pub fn table1() -> PrecisionTable {
    serde_json::from_str(TABLE1_JSON).expect("bundled fixture parses")
}
