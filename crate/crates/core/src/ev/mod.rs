//! Seeded EV charger allocation and nodal load synthesis.
//!
//! Every customer owns one charger slot. Slots are laid out bus by bus in
//! network order, shuffled with a Fisher–Yates pass driven by MT19937
//! (`init_genrand` seeding), and the first `ceil(p * N)` slots receive a
//! charger. A fixed seed therefore gives nested allocations across
//! penetration levels, and the expected count at each bus is proportional
//! to its customer count.
//!
//! The shuffle draws one 32-bit word per candidate and rejects words at or
//! above the largest multiple of the range, so the permutation is
//! reproducible bit for bit by any MT19937 implementation.

use rand_mt::Mt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::NetworkCase;

#[derive(Debug, Error)]
pub enum EvError {
    #[error("horizon mismatch: expected {expected}, found {found}")]
    HorizonMismatch { expected: usize, found: usize },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LoadMode {
    /// Peak-demand hour only.
    Snapshot,
    /// Every hour of the horizon.
    #[default]
    Horizon,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvConfig {
    pub penetration: f64,
    pub charger_kw: f64,
    #[serde(default = "default_seed")]
    pub seed: u32,
    #[serde(default = "default_pf")]
    pub power_factor: f64,
}

fn default_seed() -> u32 {
    42
}
fn default_pf() -> f64 {
    1.0
}

impl EvConfig {
    pub fn new(penetration: f64, charger_kw: f64, seed: u32) -> Self {
        Self {
            penetration,
            charger_kw,
            seed,
            power_factor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), EvError> {
        if !(0.0..=1.0).contains(&self.penetration) {
            return Err(EvError::Invalid(format!(
                "penetration must lie in [0, 1], got {}",
                self.penetration
            )));
        }
        if !(self.charger_kw > 0.0) {
            return Err(EvError::Invalid(format!(
                "charger_kw must be positive, got {}",
                self.charger_kw
            )));
        }
        if !(self.power_factor > 0.0 && self.power_factor <= 1.0) {
            return Err(EvError::Invalid(format!(
                "power_factor must lie in (0, 1], got {}",
                self.power_factor
            )));
        }
        Ok(())
    }

    /// Reactive-to-active ratio of the charger load.
    pub fn q_ratio(&self) -> f64 {
        if self.power_factor >= 1.0 {
            0.0
        } else {
            self.power_factor.acos().tan()
        }
    }
}

/// Scenario file: `key = value` lines with `penetration`, `charger_kw`,
/// `seed`, `power_factor` and `mode`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(flatten)]
    pub ev: EvConfig,
    #[serde(default)]
    pub mode: LoadMode,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, EvError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| EvError::Invalid(e.to_string()))?;
        cfg.ev.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvAssignment {
    /// Chargers per bus, aligned with `NetworkCase::buses`.
    pub counts: Vec<u32>,
    /// Bus index of every customer slot after the seeded shuffle.
    pub ordering: Vec<usize>,
}

impl EvAssignment {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// True when every bus count is at most the corresponding count in `other`.
    pub fn is_subset_of(&self, other: &EvAssignment) -> bool {
        self.counts.len() == other.counts.len()
            && self.counts.iter().zip(&other.counts).all(|(a, b)| a <= b)
    }
}

/// Number of chargers for `penetration` of `customers`.
pub fn charger_total(penetration: f64, customers: u64) -> u64 {
    // The small offset keeps products such as 0.7 * 10 = 7.000000000000001 at 7.
    let raw = penetration * customers as f64 - 1e-9;
    raw.ceil().clamp(0.0, customers as f64) as u64
}

/// Unbiased draw from `0..bound` using 32-bit words.
fn below(rng: &mut Mt, bound: u32) -> u32 {
    debug_assert!(bound > 0);
    let limit = (1u64 << 32) / u64::from(bound) * u64::from(bound);
    loop {
        let x = rng.next_u32();
        if u64::from(x) < limit {
            return x % bound;
        }
    }
}

/// Seed-fixed permutation of customer slots (bus index per slot).
pub fn customer_permutation(net: &NetworkCase, seed: u32) -> Vec<usize> {
    let mut slots: Vec<usize> = net
        .buses()
        .iter()
        .enumerate()
        .flat_map(|(i, b)| std::iter::repeat(i).take(b.customers as usize))
        .collect();
    let mut rng = Mt::new(seed);
    for i in (1..slots.len()).rev() {
        let j = below(&mut rng, (i + 1) as u32) as usize;
        slots.swap(i, j);
    }
    slots
}

pub fn allocate_chargers(net: &NetworkCase, cfg: &EvConfig) -> EvAssignment {
    let ordering = customer_permutation(net, cfg.seed);
    let k = charger_total(cfg.penetration, ordering.len() as u64) as usize;
    let mut counts = vec![0u32; net.buses().len()];
    for &bus in &ordering[..k] {
        counts[bus] += 1;
    }
    EvAssignment { counts, ordering }
}

/// Nodal demand in kW / kvar, indexed `[bus][step]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadSet {
    pub p_kw: Vec<Vec<f64>>,
    pub q_kvar: Vec<Vec<f64>>,
    /// Source hour of each modeled step.
    pub hours: Vec<usize>,
}

impl LoadSet {
    /// Base demand only, every hour.
    pub fn base(net: &NetworkCase) -> Self {
        Self {
            p_kw: net.buses().iter().map(|b| b.load_p_kw.clone()).collect(),
            q_kvar: net.buses().iter().map(|b| b.load_q_kvar.clone()).collect(),
            hours: (0..net.horizon()).collect(),
        }
    }

    pub fn steps(&self) -> usize {
        self.hours.len()
    }

    pub fn check(&self, net: &NetworkCase) -> Result<(), EvError> {
        if self.p_kw.len() != net.buses().len() || self.q_kvar.len() != net.buses().len() {
            return Err(EvError::HorizonMismatch {
                expected: net.buses().len(),
                found: self.p_kw.len(),
            });
        }
        let t = self.steps();
        for row in self.p_kw.iter().chain(&self.q_kvar) {
            if row.len() != t {
                return Err(EvError::HorizonMismatch {
                    expected: t,
                    found: row.len(),
                });
            }
        }
        Ok(())
    }

    /// Restricts to a single source hour.
    pub fn at_step(&self, step: usize) -> LoadSet {
        LoadSet {
            p_kw: self.p_kw.iter().map(|r| vec![r[step]]).collect(),
            q_kvar: self.q_kvar.iter().map(|r| vec![r[step]]).collect(),
            hours: vec![self.hours[step]],
        }
    }

    pub fn total_p_kw(&self, step: usize) -> f64 {
        self.p_kw.iter().map(|r| r[step]).sum()
    }
}

/// Base load plus simultaneous charging at rated power.
pub fn build_loads(
    net: &NetworkCase,
    assignment: &EvAssignment,
    cfg: &EvConfig,
    mode: LoadMode,
) -> Result<LoadSet, EvError> {
    if assignment.counts.len() != net.buses().len() {
        return Err(EvError::HorizonMismatch {
            expected: net.buses().len(),
            found: assignment.counts.len(),
        });
    }
    let q_ratio = cfg.q_ratio();
    let mut loads = LoadSet::base(net);
    for (i, &count) in assignment.counts.iter().enumerate() {
        let ev_p = f64::from(count) * cfg.charger_kw;
        let ev_q = ev_p * q_ratio;
        for t in 0..loads.steps() {
            loads.p_kw[i][t] += ev_p;
            loads.q_kvar[i][t] += ev_q;
        }
    }
    Ok(match mode {
        LoadMode::Horizon => loads,
        LoadMode::Snapshot => loads.at_step(net.peak_hour()),
    })
}

/// Allocation and loads in one step.
pub fn scenario_loads(
    net: &NetworkCase,
    cfg: &EvConfig,
    mode: LoadMode,
) -> Result<LoadSet, EvError> {
    cfg.validate()?;
    build_loads(net, &allocate_chargers(net, cfg), cfg, mode)
}
