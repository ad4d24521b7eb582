//! The scenario registry: thirty named generative distributions (D1-D30)
//! loaded from the JSON file shipped with the crate.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::simulate::study::Scenario;

const REGISTRY_JSON: &str = include_str!("../../assets/scenarios.json");

fn registry() -> &'static Vec<Scenario> {
    static CELL: OnceLock<Vec<Scenario>> = OnceLock::new();
    CELL.get_or_init(|| {
        serde_json::from_str(REGISTRY_JSON).expect("bundled scenario registry parses")
    })
}

/// All registered scenario ids in order.
pub fn scenario_ids() -> Vec<String> {
    registry().iter().map(|s| s.id.clone()).collect()
}

/// Look up a scenario by id. Accepts `D7`, `d7` and `D.7`.
pub fn scenario_by_id(id: &str) -> Result<Scenario> {
    let norm = id.trim().to_uppercase().replace('.', "");
    registry()
        .iter()
        .find(|s| s.id == norm)
        .cloned()
        .ok_or_else(|| Error::UnknownScenario(id.to_string()))
}
