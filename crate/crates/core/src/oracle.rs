//! Exhaustive reference dispatch for tiny windows.
//!
//! Battery power is discretised per hour and every sequence is enumerated;
//! the grid/diesel/PV split of each hour is solved in closed form with the
//! diesel unit explicitly off or on. The result is an upper bound on the
//! true optimum that tightens as the grid is refined.

use thiserror::Error;

use crate::dispatch::{DispatchProblem, CHECK_TOL};

pub const MAX_HOURS: usize = 6;
pub const MAX_GRID_POINTS: usize = 21;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle limited to {MAX_HOURS} hours and {MAX_GRID_POINTS} grid points, got {hours} and {grid_points}")]
    TooLarge { hours: usize, grid_points: usize },
    #[error("need at least 2 grid points")]
    TooCoarse,
    #[error("no feasible battery sequence on the grid")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub cost: f64,
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    /// Length `T + 1`.
    pub soc: Vec<f64>,
}

/// Cost of serving `demand` in one hour with the diesel unit forced off or
/// on; `None` when the on state cannot be balanced.
fn hour_cost(demand: f64, pv_cap: f64, grid_price: f64, diesel_price: f64, d_min: f64, d_max: f64, on: bool) -> Option<f64> {
    let after_pv = (demand - pv_cap).max(0.0);
    if !on {
        return Some(grid_price * after_pv);
    }
    // PV can be curtailed, so any output in [d_min, min(d_max, demand)] works.
    let top = d_max.min(demand);
    if d_min > top || d_max <= 0.0 {
        return None;
    }
    let d = if diesel_price >= grid_price { d_min } else { after_pv.clamp(d_min, top) };
    Some(diesel_price * d + grid_price * (after_pv - d).max(0.0))
}

pub fn oracle_dispatch(problem: &DispatchProblem, grid_points: usize) -> Result<OracleSolution, OracleError> {
    let n = problem.hours();
    if n > MAX_HOURS || grid_points > MAX_GRID_POINTS {
        return Err(OracleError::TooLarge { hours: n, grid_points });
    }
    if grid_points < 2 {
        return Err(OracleError::TooCoarse);
    }
    let fractions: Vec<f64> = (0..grid_points).map(|i| -1.0 + 2.0 * i as f64 / (grid_points - 1) as f64).collect();
    let mut search = Search {
        problem,
        fractions,
        best: f64::INFINITY,
        best_path: Vec::new(),
        path: Vec::with_capacity(n),
    };
    search.descend(0, problem.soc_start, 0.0);
    if !search.best.is_finite() {
        return Err(OracleError::Infeasible);
    }
    let p = problem.params;
    let mut soc = vec![problem.soc_start];
    let (mut charge, mut discharge) = (Vec::new(), Vec::new());
    for &(ch, dis) in &search.best_path {
        charge.push(ch);
        discharge.push(dis);
        soc.push(soc.last().unwrap() + p.eta_charge * ch - dis / p.eta_discharge);
    }
    Ok(OracleSolution { cost: search.best, charge, discharge, soc })
}

struct Search<'a, 'p> {
    problem: &'a DispatchProblem<'p>,
    fractions: Vec<f64>,
    best: f64,
    best_path: Vec<(f64, f64)>,
    path: Vec<(f64, f64)>,
}

impl Search<'_, '_> {
    /// Bus demands at which the marginal source of hour `t` changes.
    fn kinks(&self, t: usize) -> [f64; 2] {
        let avail = self.problem.pv_cap(t);
        [avail, avail + self.problem.params.diesel_max_kw]
    }

    /// SOC levels after hour `t` that the following hours can use up
    /// exactly, for each kink kind.
    fn target_levels(&self, t: usize) -> Vec<f64> {
        let pr = self.problem;
        let p = pr.params;
        let mut levels = Vec::new();
        for kind in 0..2 {
            let (mut deficit, mut surplus) = (0.0, 0.0);
            for k in t + 1..pr.hours() {
                let kink = self.kinks(k)[kind];
                deficit += (pr.load_kw[k] - kink).max(0.0);
                surplus += (kink - pr.load_kw[k]).max(0.0);
                levels.push(pr.soc_min() + deficit / p.eta_discharge);
                levels.push(pr.soc_max() - surplus * p.eta_charge);
            }
        }
        levels.retain(|&l| l >= pr.soc_min() && l <= pr.soc_max());
        levels
    }

    fn descend(&mut self, t: usize, soc: f64, cost: f64) {
        let pr = self.problem;
        if t == pr.hours() {
            if cost < self.best {
                self.best = cost;
                self.best_path = self.path.clone();
            }
            return;
        }
        let p = pr.params;
        let cap = pr.battery_power_cap();
        let max_ch = cap.min((pr.soc_max() - soc).max(0.0) / p.eta_charge);
        let max_dis = cap.min((soc - pr.soc_min()).max(0.0) * p.eta_discharge);
        let load = pr.load_kw[t];
        let avail = pr.pv_cap(t);

        let mut moves: Vec<(f64, f64)> = self
            .fractions
            .iter()
            .map(|&f| if f < 0.0 { (-f * max_ch, 0.0) } else { (0.0, f * max_dis) })
            .collect();
        // Exact breakpoints. In this hour: bring the bus demand to where PV,
        // then PV plus full diesel, runs out.
        for kink in self.kinks(t) {
            moves.push(((kink - load).max(0.0).min(max_ch), 0.0));
            moves.push((0.0, (load - kink).max(0.0).min(max_dis)));
        }
        // Across hours: land on the SOC that covers the following hours'
        // deficits down to the floor, or absorbs their surpluses up to the
        // ceiling.
        for level in self.target_levels(t) {
            if level > soc {
                moves.push((((level - soc) / p.eta_charge).min(max_ch), 0.0));
            } else if level < soc {
                moves.push((0.0, ((soc - level) * p.eta_discharge).min(max_dis)));
            }
        }

        for (ch, dis) in moves {
            let demand = load + ch - dis;
            if demand < -CHECK_TOL {
                continue;
            }
            let demand = demand.max(0.0);
            let price = pr.grid_price[t];
            let dprice = pr.diesel_price_at(t);
            let off = hour_cost(demand, avail, price, dprice, p.diesel_min_kw, p.diesel_max_kw, false);
            let on = hour_cost(demand, avail, price, dprice, p.diesel_min_kw, p.diesel_max_kw, true);
            let hour = match (off, on) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => continue,
            };
            if cost + hour >= self.best {
                continue;
            }
            let next = (soc + p.eta_charge * ch - dis / p.eta_discharge).clamp(pr.soc_min(), pr.soc_max());
            self.path.push((ch, dis));
            self.descend(t + 1, next, cost + hour);
            self.path.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::{DispatchParams, Design};

    fn params() -> DispatchParams {
        DispatchParams {
            diesel_price: 0.3,
            diesel_max_kw: 10.0,
            diesel_min_kw: 0.0,
            eta_charge: 0.9,
            eta_discharge: 0.9,
            soc_min_frac: 0.0,
            soc_max_frac: 1.0,
            soc_init_frac: 0.0,
            c_rate: None,
        }
    }

    #[test]
    fn no_storage_is_hourly_cheapest() {
        let p = params();
        let load = [3.0, 12.0];
        let price = [0.1, 0.5];
        let pr = DispatchProblem {
            design: Design::new(0.0, 0.0),
            params: &p,
            load_kw: &load,
            grid_price: &price,
            pv_availability: &[0.0, 0.0],
            diesel_price: None,
            soc_start: 0.0,
        };
        let s = oracle_dispatch(&pr, 5).unwrap();
        assert!((s.cost - (0.3 + 3.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_load_costs_nothing() {
        let p = params();
        let pr = DispatchProblem {
            design: Design::new(10.0, 5.0),
            params: &p,
            load_kw: &[0.0; 3],
            grid_price: &[0.2; 3],
            pv_availability: &[0.5; 3],
            diesel_price: None,
            soc_start: 0.0,
        };
        assert_eq!(oracle_dispatch(&pr, 3).unwrap().cost, 0.0);
    }

    #[test]
    fn limits() {
        let p = params();
        let pr = DispatchProblem {
            design: Design::new(0.0, 0.0),
            params: &p,
            load_kw: &[1.0; 7],
            grid_price: &[0.2; 7],
            pv_availability: &[0.0; 7],
            diesel_price: None,
            soc_start: 0.0,
        };
        assert!(matches!(oracle_dispatch(&pr, 3), Err(OracleError::TooLarge { .. })));
        let short = DispatchProblem { load_kw: &[1.0], grid_price: &[0.2], pv_availability: &[0.0], ..pr };
        assert_eq!(oracle_dispatch(&short, 22), Err(OracleError::TooLarge { hours: 1, grid_points: 22 }));
        assert_eq!(oracle_dispatch(&short, 1), Err(OracleError::TooCoarse));
    }

    #[test]
    fn on_state_closed_form() {
        // Demand 2 below a 5 kW minimum cannot be balanced with diesel on.
        assert_eq!(hour_cost(2.0, 0.0, 0.5, 0.2, 5.0, 10.0, true), None);
        // Cheap diesel takes everything PV leaves, up to its cap.
        assert_eq!(hour_cost(15.0, 2.0, 0.5, 0.2, 5.0, 10.0, true), Some(2.0 + 1.5));
        // Expensive diesel runs at its minimum, PV curtailed if needed.
        assert_eq!(hour_cost(6.0, 6.0, 0.1, 0.3, 5.0, 10.0, true), Some(1.5));
    }
}
