//! Shared fixtures for the benchmarks in `benches/`.

use std::path::Path;

use ddcp_core::ev::{scenario_loads, EvConfig, LoadMode, LoadSet};
use ddcp_core::grid::load_network_bundle;
use ddcp_core::NetworkCase;

/// A bundled network loaded with EVs at `penetration` and `charger_kw`.
pub fn case(name: &str, penetration: f64, charger_kw: f64) -> (NetworkCase, LoadSet) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(name);
    let net = load_network_bundle(&path).expect("bundled network").network;
    let loads = scenario_loads(&net, &EvConfig::new(penetration, charger_kw, 42), LoadMode::Horizon)
        .expect("scenario loads");
    (net, loads)
}
