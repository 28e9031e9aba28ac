//! Annualised investment and levelised cost of energy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::Design;

#[derive(Debug, Error, PartialEq)]
pub enum EconomicsError {
    #[error("invalid cost model: {0}")]
    InvalidModel(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("LCOE undefined for zero energy served")]
    NoEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    /// $/kW of PV nameplate.
    pub pv_capex: f64,
    /// $/kWh of battery capacity.
    pub batt_capex: f64,
    pub discount_rate: f64,
    pub pv_lifetime_yr: u32,
    pub batt_lifetime_yr: u32,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { pv_capex: 900.0, batt_capex: 300.0, discount_rate: 0.05, pv_lifetime_yr: 25, batt_lifetime_yr: 10 }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), EconomicsError> {
        let bad = |m: String| Err(EconomicsError::InvalidModel(m));
        if !(self.pv_capex.is_finite() && self.pv_capex >= 0.0) {
            return bad(format!("pv_capex {}", self.pv_capex));
        }
        if !(self.batt_capex.is_finite() && self.batt_capex >= 0.0) {
            return bad(format!("batt_capex {}", self.batt_capex));
        }
        if !(0.0..1.0).contains(&self.discount_rate) {
            return bad(format!("discount_rate {} outside [0, 1)", self.discount_rate));
        }
        if self.pv_lifetime_yr == 0 || self.batt_lifetime_yr == 0 {
            return bad("lifetimes must be at least one year".into());
        }
        Ok(())
    }
}

/// Capital recovery: the constant yearly payment repaying `capex` over
/// `years` at `rate`. A zero rate gives straight-line `capex / years`.
pub fn annuity(capex: f64, rate: f64, years: u32) -> f64 {
    assert!(years >= 1, "annuity needs at least one year");
    if rate == 0.0 {
        return capex / years as f64;
    }
    let growth = (1.0 + rate).powi(years as i32);
    capex * rate * growth / (growth - 1.0)
}

/// Yearly cost of a design in $/yr, LCOE in ¢/kWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub op_cost: f64,
    pub inv_pv: f64,
    pub inv_batt: f64,
    pub total: f64,
    pub lcoe: f64,
    pub energy_served: f64,
}

/// Operating cost plus annualised PV and battery investment. All load is
/// served, so `energy_served_kwh` is the yearly load energy.
pub fn total_cost(design: &Design, annual_op_cost: f64, energy_served_kwh: f64, cm: &CostModel) -> Result<CostBreakdown, EconomicsError> {
    cm.validate()?;
    if !(annual_op_cost.is_finite() && annual_op_cost >= 0.0) {
        return Err(EconomicsError::InvalidInput(format!("operating cost {annual_op_cost}")));
    }
    if !(design.battery_kwh.is_finite() && design.battery_kwh >= 0.0 && design.pv_kw.is_finite() && design.pv_kw >= 0.0) {
        return Err(EconomicsError::InvalidInput(format!("design {design}")));
    }
    if !energy_served_kwh.is_finite() || energy_served_kwh < 0.0 {
        return Err(EconomicsError::InvalidInput(format!("energy served {energy_served_kwh}")));
    }
    if energy_served_kwh == 0.0 {
        return Err(EconomicsError::NoEnergy);
    }
    let inv_pv = annuity(cm.pv_capex * design.pv_kw, cm.discount_rate, cm.pv_lifetime_yr);
    let inv_batt = annuity(cm.batt_capex * design.battery_kwh, cm.discount_rate, cm.batt_lifetime_yr);
    let total = annual_op_cost + inv_pv + inv_batt;
    Ok(CostBreakdown {
        op_cost: annual_op_cost,
        inv_pv,
        inv_batt,
        total,
        lcoe: 100.0 * total / energy_served_kwh,
        energy_served: energy_served_kwh,
    })
}

pub const HOURS_PER_YEAR: usize = 8760;

/// [`total_cost`] for a simulation over `hours` hours: operating cost and
/// energy are scaled to a year first, so shorter traces give comparable LCOE.
pub fn yearly_cost(design: &Design, op_cost: f64, energy_kwh: f64, hours: usize, cm: &CostModel) -> Result<CostBreakdown, EconomicsError> {
    if hours == 0 {
        return Err(EconomicsError::InvalidInput("zero simulated hours".into()));
    }
    let scale = HOURS_PER_YEAR as f64 / hours as f64;
    total_cost(design, op_cost * scale, energy_kwh * scale, cm)
}
