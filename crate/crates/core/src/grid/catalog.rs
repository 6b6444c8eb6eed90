use serde::{Deserialize, Serialize};

use super::{BranchSpec, GridError};

/// A replacement conductor or breaker rating.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CableType {
    pub name: String,
    pub ampacity_a: f64,
    pub r_ohm_per_km: f64,
    pub x_ohm_per_km: f64,
    /// $/m; zero for breakers.
    pub cost_per_m: f64,
    pub is_breaker: bool,
    /// One-time cost in $; zero for conductors.
    pub fixed_cost: f64,
}

impl CableType {
    pub fn conductor(
        name: &str,
        ampacity_a: f64,
        r_ohm_per_km: f64,
        x_ohm_per_km: f64,
        cost_per_m: f64,
    ) -> Self {
        Self {
            name: name.to_string(),
            ampacity_a,
            r_ohm_per_km,
            x_ohm_per_km,
            cost_per_m,
            is_breaker: false,
            fixed_cost: 0.0,
        }
    }

    pub fn breaker(name: &str, ampacity_a: f64, fixed_cost: f64) -> Self {
        Self {
            name: name.to_string(),
            ampacity_a,
            r_ohm_per_km: 0.0,
            x_ohm_per_km: 0.0,
            cost_per_m: 0.0,
            is_breaker: true,
            fixed_cost,
        }
    }

    /// Capital cost of installing this type on `branch`.
    pub fn cost_for(&self, branch: &BranchSpec) -> f64 {
        if self.is_breaker {
            self.fixed_cost
        } else {
            self.cost_per_m * branch.length_m
        }
    }

    /// Whether this entry fits the branch kind (breaker ratings on breakers only).
    pub fn fits(&self, branch: &BranchSpec) -> bool {
        self.is_breaker == branch.is_breaker
    }

    fn validate(&self) -> Result<(), GridError> {
        if !(self.ampacity_a > 0.0) {
            return Err(GridError::Unit(format!(
                "cable `{}`: ampacity must be positive",
                self.name
            )));
        }
        if self.is_breaker {
            if !(self.fixed_cost >= 0.0) || self.cost_per_m != 0.0 {
                return Err(GridError::Unit(format!(
                    "breaker `{}`: needs a fixed cost and zero per-length cost",
                    self.name
                )));
            }
        } else if !(self.cost_per_m >= 0.0) || self.r_ohm_per_km < 0.0 {
            return Err(GridError::Unit(format!(
                "cable `{}`: invalid cost or resistance",
                self.name
            )));
        }
        Ok(())
    }
}

/// Ordered list of cable types, unique by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CableCatalog {
    entries: Vec<CableType>,
}

const BUNDLED: &str = include_str!("../../data/cables.csv");

impl CableCatalog {
    pub fn new(entries: Vec<CableType>) -> Result<Self, GridError> {
        for (i, e) in entries.iter().enumerate() {
            e.validate()?;
            if entries[..i].iter().any(|o| o.name == e.name) {
                return Err(GridError::Parse(format!(
                    "duplicate cable type `{}`",
                    e.name
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Commercial conductor prices from 120 to 2*500 mm² plus the 630 A and
    /// 1250 A breaker ratings.
    pub fn bundled() -> Self {
        super::io::parse_catalog_csv(BUNDLED).expect("bundled catalog is valid")
    }

    pub fn entries(&self) -> &[CableType] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&CableType> {
        self.entries.iter().find(|c| c.name == name)
    }

    /// Entries that fit `branch` with ampacity at least `min_ampacity_a`,
    /// cheapest first (ties: lower ampacity, then name).
    pub fn menu(&self, branch: &BranchSpec, min_ampacity_a: f64) -> Vec<&CableType> {
        let mut out: Vec<&CableType> = self
            .entries
            .iter()
            .filter(|c| c.fits(branch) && c.ampacity_a >= min_ampacity_a)
            .collect();
        out.sort_by(|a, b| {
            a.cost_for(branch)
                .total_cmp(&b.cost_for(branch))
                .then(a.ampacity_a.total_cmp(&b.ampacity_a))
                .then(a.name.cmp(&b.name))
        });
        out
    }

    /// Most expensive entry applicable to `branch`, in $.
    pub fn max_cost_for(&self, branch: &BranchSpec) -> f64 {
        self.entries
            .iter()
            .filter(|c| c.fits(branch))
            .map(|c| c.cost_for(branch))
            .fold(0.0, f64::max)
    }
}
