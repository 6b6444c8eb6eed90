//! Radial feeder data model.
//!
//! A [`NetworkCase`] is validated on construction: exactly one substation,
//! a spanning tree rooted at it, and branches oriented root-outward. Every
//! mutating operation returns a new case.

mod catalog;
mod io;
mod topology;

pub use catalog::{CableCatalog, CableType};
pub use io::{
    load_catalog, load_network, load_network_bundle, parse_json, parse_sectioned_csv,
    write_network_csv, write_network_json, NetworkBundle, NetworkFormat,
};
pub use topology::Topology;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type BusId = u32;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("unit error: {0}")]
    Unit(String),
    #[error("unknown branch ({0}, {1})")]
    UnknownBranch(BusId, BusId),
    #[error("cable `{cable}` cannot be applied to branch ({from}, {to}): {reason}")]
    CableMismatch {
        from: BusId,
        to: BusId,
        cable: String,
        reason: &'static str,
    },
    #[error("horizon mismatch: expected {expected} steps, found {found}")]
    HorizonMismatch { expected: usize, found: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Substation,
    Load,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusSpec {
    pub id: BusId,
    pub kind: BusKind,
    pub customers: u32,
    /// Active demand per time step, kW.
    pub load_p_kw: Vec<f64>,
    /// Reactive demand per time step, kvar.
    pub load_q_kvar: Vec<f64>,
    pub bess_candidate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub from: BusId,
    pub to: BusId,
    pub r_ohm: f64,
    pub x_ohm: f64,
    pub ampacity_a: f64,
    pub length_m: f64,
    pub is_breaker: bool,
    pub cable_type: String,
}

impl BranchSpec {
    pub fn key(&self) -> (BusId, BusId) {
        (self.from, self.to)
    }

    pub fn impedance_ohm(&self) -> f64 {
        self.r_ohm.hypot(self.x_ohm)
    }
}

/// Per-unit bases and voltage limits of a case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseParams {
    pub base_kv: f64,
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
    #[serde(default = "default_v_min")]
    pub v_min: f64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    /// Substation voltage magnitude in p.u.: one value for a constant
    /// setpoint or one value per time step.
    #[serde(default = "default_substation_v")]
    pub substation_v: Vec<f64>,
}

fn default_base_mva() -> f64 {
    10.0
}
fn default_v_min() -> f64 {
    0.95
}
fn default_v_max() -> f64 {
    1.05
}
fn default_substation_v() -> Vec<f64> {
    vec![1.0]
}

impl CaseParams {
    pub fn new(base_kv: f64) -> Self {
        Self {
            base_kv,
            base_mva: default_base_mva(),
            v_min: default_v_min(),
            v_max: default_v_max(),
            substation_v: default_substation_v(),
        }
    }
}

/// Ohm to per-unit on a three-phase system with line-to-line `base_kv`.
pub fn ohm_to_pu(z_ohm: f64, base_kv: f64, base_mva: f64) -> f64 {
    z_ohm * base_mva / (base_kv * base_kv)
}

pub fn pu_to_ohm(z_pu: f64, base_kv: f64, base_mva: f64) -> f64 {
    z_pu * base_kv * base_kv / base_mva
}

/// Validated radial network.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkCase {
    buses: Vec<BusSpec>,
    branches: Vec<BranchSpec>,
    params: CaseParams,
    #[serde(skip)]
    topology: Topology,
}

impl NetworkCase {
    /// Validates the data and normalizes branch orientation root-outward.
    pub fn new(
        buses: Vec<BusSpec>,
        mut branches: Vec<BranchSpec>,
        params: CaseParams,
    ) -> Result<Self, GridError> {
        validate_params(&params)?;
        let horizon = validate_buses(&buses)?;
        if params.substation_v.len() != 1 && params.substation_v.len() != horizon {
            return Err(GridError::HorizonMismatch {
                expected: horizon,
                found: params.substation_v.len(),
            });
        }
        for br in &branches {
            validate_branch(br)?;
        }
        let topology = Topology::build(&buses, &mut branches)?;
        Ok(Self {
            buses,
            branches,
            params,
            topology,
        })
    }

    pub fn buses(&self) -> &[BusSpec] {
        &self.buses
    }

    pub fn branches(&self) -> &[BranchSpec] {
        &self.branches
    }

    pub fn params(&self) -> &CaseParams {
        &self.params
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn horizon(&self) -> usize {
        self.buses[0].load_p_kw.len()
    }

    pub fn substation(&self) -> usize {
        self.topology.root()
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn branch_index(&self, from: BusId, to: BusId) -> Option<usize> {
        self.branches
            .iter()
            .position(|b| (b.from, b.to) == (from, to) || (b.from, b.to) == (to, from))
    }

    pub fn total_customers(&self) -> u64 {
        self.buses.iter().map(|b| u64::from(b.customers)).sum()
    }

    pub fn z_base_ohm(&self) -> f64 {
        self.params.base_kv * self.params.base_kv / self.params.base_mva
    }

    /// Base current in A for the three-phase base power and line-to-line voltage.
    pub fn i_base_a(&self) -> f64 {
        self.params.base_mva * 1e3 / (3f64.sqrt() * self.params.base_kv)
    }

    pub fn s_base_kw(&self) -> f64 {
        self.params.base_mva * 1e3
    }

    pub fn r_pu(&self, branch: usize) -> f64 {
        ohm_to_pu(
            self.branches[branch].r_ohm,
            self.params.base_kv,
            self.params.base_mva,
        )
    }

    pub fn x_pu(&self, branch: usize) -> f64 {
        ohm_to_pu(
            self.branches[branch].x_ohm,
            self.params.base_kv,
            self.params.base_mva,
        )
    }

    pub fn ampacity_pu(&self, branch: usize) -> f64 {
        self.branches[branch].ampacity_a / self.i_base_a()
    }

    /// Substation voltage magnitude (p.u.) at time step `t`.
    pub fn substation_v(&self, t: usize) -> f64 {
        let v = &self.params.substation_v;
        if v.len() == 1 {
            v[0]
        } else {
            v[t]
        }
    }

    /// Replaces the cable on one branch.
    ///
    /// Conductors take the catalog ampacity and per-km impedance scaled by
    /// the branch length. Breakers only take the new rating.
    pub fn apply_upgrade(
        &self,
        from: BusId,
        to: BusId,
        cable: &CableType,
    ) -> Result<NetworkCase, GridError> {
        let k = self
            .branch_index(from, to)
            .ok_or(GridError::UnknownBranch(from, to))?;
        let mut next = self.clone();
        let br = &mut next.branches[k];
        match (br.is_breaker, cable.is_breaker) {
            (true, false) => {
                return Err(GridError::CableMismatch {
                    from,
                    to,
                    cable: cable.name.clone(),
                    reason: "conductor cable on a breaker branch",
                })
            }
            (false, true) => {
                return Err(GridError::CableMismatch {
                    from,
                    to,
                    cable: cable.name.clone(),
                    reason: "breaker rating on a conductor branch",
                })
            }
            (true, true) => {
                br.ampacity_a = cable.ampacity_a;
            }
            (false, false) => {
                let km = br.length_m / 1000.0;
                br.ampacity_a = cable.ampacity_a;
                br.r_ohm = cable.r_ohm_per_km * km;
                br.x_ohm = cable.x_ohm_per_km * km;
            }
        }
        br.cable_type = cable.name.clone();
        Ok(next)
    }

    /// Moves the feeder to another nominal voltage. Ohmic data, ampacities
    /// and loads are unchanged, so per-unit impedances scale by
    /// `(old_kv / new_kv)^2`.
    pub fn rebase_voltage(&self, new_kv: f64) -> Result<NetworkCase, GridError> {
        if !(new_kv > 0.0) || !new_kv.is_finite() {
            return Err(GridError::Unit(format!(
                "base voltage must be positive, got {new_kv}"
            )));
        }
        let mut next = self.clone();
        next.params.base_kv = new_kv;
        Ok(next)
    }

    pub fn with_params(&self, params: CaseParams) -> Result<NetworkCase, GridError> {
        NetworkCase::new(self.buses.clone(), self.branches.clone(), params)
    }

    pub fn with_branches(&self, branches: Vec<BranchSpec>) -> Result<NetworkCase, GridError> {
        NetworkCase::new(self.buses.clone(), branches, self.params.clone())
    }

    pub fn with_buses(&self, buses: Vec<BusSpec>) -> Result<NetworkCase, GridError> {
        NetworkCase::new(buses, self.branches.clone(), self.params.clone())
    }

    /// Hour with the largest total active base demand (first on ties).
    pub fn peak_hour(&self) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for t in 0..self.horizon() {
            let total: f64 = self.buses.iter().map(|b| b.load_p_kw[t]).sum();
            if total > best.1 {
                best = (t, total);
            }
        }
        best.0
    }
}

fn validate_params(p: &CaseParams) -> Result<(), GridError> {
    if !(p.base_kv > 0.0) || !(p.base_mva > 0.0) {
        return Err(GridError::Unit(format!(
            "bases must be positive (base_kv={}, base_mva={})",
            p.base_kv, p.base_mva
        )));
    }
    if !(p.v_min >= 0.0 && p.v_min < p.v_max) {
        return Err(GridError::Unit(format!(
            "voltage limits must satisfy 0 <= v_min < v_max (got {}, {})",
            p.v_min, p.v_max
        )));
    }
    if p.substation_v.is_empty() || p.substation_v.iter().any(|v| !(*v > 0.0)) {
        return Err(GridError::Unit(
            "substation voltage must be positive".into(),
        ));
    }
    Ok(())
}

fn validate_buses(buses: &[BusSpec]) -> Result<usize, GridError> {
    if buses.is_empty() {
        return Err(GridError::Topology("network has no buses".into()));
    }
    let subs = buses
        .iter()
        .filter(|b| b.kind == BusKind::Substation)
        .count();
    if subs != 1 {
        return Err(GridError::Topology(format!(
            "expected exactly one substation bus, found {subs}"
        )));
    }
    let horizon = buses[0].load_p_kw.len();
    if horizon == 0 {
        return Err(GridError::Parse(
            "load series must have at least one time step".into(),
        ));
    }
    for b in buses {
        if b.load_p_kw.len() != horizon || b.load_q_kvar.len() != horizon {
            return Err(GridError::HorizonMismatch {
                expected: horizon,
                found: b.load_p_kw.len().min(b.load_q_kvar.len()),
            });
        }
        if b.load_p_kw
            .iter()
            .chain(&b.load_q_kvar)
            .any(|x| !x.is_finite())
        {
            return Err(GridError::Parse(format!(
                "bus {}: non-finite load value",
                b.id
            )));
        }
    }
    Ok(horizon)
}

fn validate_branch(br: &BranchSpec) -> Result<(), GridError> {
    if !(br.ampacity_a > 0.0) || !br.ampacity_a.is_finite() {
        return Err(GridError::Unit(format!(
            "branch ({}, {}): ampacity must be positive, got {}",
            br.from, br.to, br.ampacity_a
        )));
    }
    if !(br.length_m >= 0.0) {
        return Err(GridError::Unit(format!(
            "branch ({}, {}): negative length {}",
            br.from, br.to, br.length_m
        )));
    }
    if !(br.r_ohm >= 0.0) || !br.x_ohm.is_finite() {
        return Err(GridError::Unit(format!(
            "branch ({}, {}): invalid impedance r={} x={}",
            br.from, br.to, br.r_ohm, br.x_ohm
        )));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn bus(id: BusId, kind: BusKind, customers: u32, p: f64, q: f64) -> BusSpec {
        BusSpec {
            id,
            kind,
            customers,
            load_p_kw: vec![p],
            load_q_kvar: vec![q],
            bess_candidate: false,
        }
    }

    pub(crate) fn line(from: BusId, to: BusId, r: f64, x: f64, amp: f64) -> BranchSpec {
        BranchSpec {
            from,
            to,
            r_ohm: r,
            x_ohm: x,
            ampacity_a: amp,
            length_m: 1000.0,
            is_breaker: false,
            cable_type: "legacy".into(),
        }
    }

    pub(crate) fn path3() -> NetworkCase {
        NetworkCase::new(
            vec![
                bus(1, BusKind::Substation, 0, 0.0, 0.0),
                bus(2, BusKind::Load, 2, 100.0, 30.0),
                bus(3, BusKind::Load, 3, 150.0, 50.0),
            ],
            vec![line(1, 2, 0.2, 0.1, 300.0), line(2, 3, 0.3, 0.15, 200.0)],
            CaseParams::new(6.9),
        )
        .unwrap()
    }

    #[test]
    fn per_unit_round_trip() {
        for &z in &[1e-4, 0.37, 12.5, 987.0] {
            for &kv in &[4.16, 6.9, 13.8, 34.5] {
                let back = pu_to_ohm(ohm_to_pu(z, kv, 10.0), kv, 10.0);
                assert!(((back - z) / z).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rejects_two_substations() {
        let err = NetworkCase::new(
            vec![
                bus(1, BusKind::Substation, 0, 0.0, 0.0),
                bus(2, BusKind::Substation, 0, 0.0, 0.0),
            ],
            vec![line(1, 2, 0.1, 0.1, 100.0)],
            CaseParams::new(6.9),
        )
        .unwrap_err();
        assert!(matches!(err, GridError::Topology(_)));
    }

    #[test]
    fn rejects_nonpositive_ampacity() {
        let err = NetworkCase::new(
            vec![
                bus(1, BusKind::Substation, 0, 0.0, 0.0),
                bus(2, BusKind::Load, 1, 1.0, 0.0),
            ],
            vec![line(1, 2, 0.1, 0.1, 0.0)],
            CaseParams::new(6.9),
        )
        .unwrap_err();
        assert!(matches!(err, GridError::Unit(_)));
    }

    #[test]
    fn rebase_scales_per_unit_impedance() {
        let net = path3();
        let up = net.rebase_voltage(13.8).unwrap();
        let ratio = up.r_pu(0) / net.r_pu(0);
        assert!((ratio - 0.25).abs() < 1e-15);
        assert_eq!(up.branches()[0].r_ohm, net.branches()[0].r_ohm);
        assert_eq!(up.branches()[0].ampacity_a, net.branches()[0].ampacity_a);
        assert_eq!(net.rebase_voltage(6.9).unwrap(), net);
        assert!(matches!(net.rebase_voltage(0.0), Err(GridError::Unit(_))));
        assert!(matches!(net.rebase_voltage(-1.0), Err(GridError::Unit(_))));
    }

    #[test]
    fn upgrade_is_pure_and_checks_kind() {
        let net = path3();
        let before = net.clone();
        let cable = CableType::conductor("240mm2", 485.0, 0.125, 0.104, 155.0);
        let up = net.apply_upgrade(2, 3, &cable).unwrap();
        assert_eq!(net, before);
        let br = &up.branches()[1];
        assert_eq!(br.ampacity_a, 485.0);
        assert!((br.r_ohm - 0.125).abs() < 1e-15);
        assert_eq!(br.length_m, 1000.0);
        let cb = CableType::breaker("C.B.-630", 630.0, 18_000.0);
        assert!(matches!(
            net.apply_upgrade(2, 3, &cb),
            Err(GridError::CableMismatch { .. })
        ));
        assert!(matches!(
            net.apply_upgrade(3, 4, &cable),
            Err(GridError::UnknownBranch(3, 4))
        ));
    }

    #[test]
    fn upgrade_with_identical_cable_is_identity() {
        let cable = CableType::conductor("legacy", 300.0, 0.2, 0.1, 100.0);
        let net = path3();
        let up = net.apply_upgrade(1, 2, &cable).unwrap();
        assert_eq!(up, net);
    }

    #[test]
    fn breaker_upgrade_keeps_impedance() {
        let mut net = path3();
        let mut branches = net.branches().to_vec();
        branches[0].is_breaker = true;
        branches[0].cable_type = "C.B.-630".into();
        net = net.with_branches(branches).unwrap();
        let cb = CableType::breaker("C.B.-1250", 1250.0, 24_000.0);
        let up = net.apply_upgrade(1, 2, &cb).unwrap();
        assert_eq!(up.branches()[0].ampacity_a, 1250.0);
        let ratio = up.branches()[0].impedance_ohm() / net.branches()[0].impedance_ohm();
        assert_eq!(ratio, 1.0);
        let conductor = CableType::conductor("185mm2", 420.0, 0.164, 0.107, 130.0);
        assert!(net.apply_upgrade(1, 2, &conductor).is_err());
    }
}
