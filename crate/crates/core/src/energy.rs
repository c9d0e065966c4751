//! Battery bookkeeping and the transmission power model.
//!
//! Energy is accounted in integer nanojoules so that the kernel's
//! conservation check (initial − residual = Σ deductions) is exact.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An amount of energy in nanojoules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Energy(pub u64);

impl Energy {
    pub const ZERO: Energy = Energy(0);

    pub fn from_joules(j: f64) -> Energy {
        assert!(
            j.is_finite() && j >= 0.0,
            "energy must be finite and non-negative, got {j}"
        );
        Energy((j * 1e9).round() as u64)
    }

    pub fn joules(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn saturating_sub(self, rhs: Energy) -> Energy {
        Energy(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        self.0 += rhs.0;
    }
}

impl Sub for Energy {
    type Output = Energy;
    fn sub(self, rhs: Energy) -> Energy {
        Energy(self.0 - rhs.0)
    }
}

impl std::iter::Sum for Energy {
    fn sum<I: Iterator<Item = Energy>>(iter: I) -> Energy {
        iter.fold(Energy::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9} J", self.joules())
    }
}

/// Cost of one transmission over `distance` meters:
/// `cost_tx · (distance / range)^alpha`.
///
/// A full-range hop costs exactly `cost_tx`. Distances outside `(0, range]`
/// have no link and are rejected.
pub fn tx_power_cost(distance: f64, range: f64, alpha: f64, cost_tx: f64) -> Result<f64> {
    if !(distance > 0.0 && distance <= range) {
        return Err(Error::OutOfRange { distance, range });
    }
    Ok(cost_tx * (distance / range).powf(alpha))
}

/// Per-node battery state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBudget {
    initial: Energy,
    residual: Energy,
    spent: Energy,
    /// Below this residual the node can no longer transmit and is dead.
    death_threshold: Energy,
    /// Mains-powered nodes record their spending but never deplete.
    mains: bool,
}

impl EnergyBudget {
    pub fn battery(initial: Energy, death_threshold: Energy) -> Self {
        Self {
            initial,
            residual: initial,
            spent: Energy::ZERO,
            death_threshold,
            mains: false,
        }
    }

    pub fn mains(initial: Energy) -> Self {
        Self {
            initial,
            residual: initial,
            spent: Energy::ZERO,
            death_threshold: Energy::ZERO,
            mains: true,
        }
    }

    pub fn residual(&self) -> Energy {
        self.residual
    }

    pub fn initial(&self) -> Energy {
        self.initial
    }

    pub fn spent(&self) -> Energy {
        self.spent
    }

    pub fn is_mains(&self) -> bool {
        self.mains
    }

    pub fn is_dead(&self) -> bool {
        !self.mains && self.residual < self.death_threshold
    }

    /// Deducts up to `cost` and returns what was actually drawn. A battery
    /// can never go below zero.
    pub fn charge(&mut self, cost: Energy) -> Energy {
        let drawn = if self.mains {
            cost
        } else {
            let d = cost.min(self.residual);
            self.residual = self.residual - d;
            d
        };
        self.spent += drawn;
        drawn
    }
}
