//! Reference dispatch policies: dynamic programming on a SOC lattice and a
//! greedy hour-by-hour rule.

use serde::{Deserialize, Serialize};
use crate::dispatch::{DispatchError, DispatchProblem, DispatchSolution, CHECK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DPConfig {
    pub soc_levels: usize,
}

impl Default for DPConfig {
    fn default() -> Self {
        Self { soc_levels: 51 }
    }
}

impl DPConfig {
    pub fn validate(&self) -> Result<(), DispatchError> {
        if self.soc_levels < 2 {
            return Err(DispatchError::InvalidParams(format!("soc_levels {} must be at least 2", self.soc_levels)));
        }
        Ok(())
    }
}

/// Generation serving a residual demand in one hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceMix {
    pub pv: f64,
    pub diesel: f64,
    pub grid: f64,
    pub on: bool,
    pub cost: f64,
}

/// Cheapest way to serve `demand >= 0` from PV (free, up to `pv_cap`), grid
/// and a diesel unit that is either off or between `d_min` and `d_max`.
pub fn cheapest_mix(demand: f64, pv_cap: f64, grid_price: f64, diesel_price: f64, d_min: f64, d_max: f64) -> SourceMix {
    let with_diesel = |d: f64, on: bool| {
        let pv = pv_cap.min(demand - d).max(0.0);
        let grid = (demand - d - pv).max(0.0);
        SourceMix { pv, diesel: d, grid, on, cost: grid_price * grid + diesel_price * d }
    };
    let mut best = with_diesel(0.0, false);
    let hi = d_max.min(demand);
    if d_min <= hi && d_max > 0.0 {
        // Cost is piecewise linear in the diesel output with a kink where PV
        // stops covering the rest.
        for d in [d_min, (demand - pv_cap).clamp(d_min, hi), hi] {
            let m = with_diesel(d, true);
            if m.cost < best.cost {
                best = m;
            }
        }
    }
    best
}

fn soc_grid(problem: &DispatchProblem, levels: usize) -> Vec<f64> {
    let (lo, hi) = (problem.soc_min(), problem.soc_max());
    if hi <= lo {
        return vec![lo];
    }
    (0..levels).map(|i| if i + 1 == levels { hi } else { lo + i as f64 * (hi - lo) / (levels - 1) as f64 }).collect()
}

struct Step {
    charge: f64,
    discharge: f64,
    mix: SourceMix,
}

fn transition(problem: &DispatchProblem, t: usize, from: f64, to: f64) -> Option<Step> {
    let p = problem.params;
    let delta = to - from;
    let (charge, discharge) = if delta >= 0.0 { (delta / p.eta_charge, 0.0) } else { (0.0, -delta * p.eta_discharge) };
    let cap = problem.battery_power_cap();
    if charge > cap + CHECK_TOL || discharge > cap + CHECK_TOL {
        return None;
    }
    let demand = problem.load_kw[t] + charge - discharge;
    if demand < -CHECK_TOL {
        return None;
    }
    let mix = cheapest_mix(
        demand.max(0.0),
        problem.pv_cap(t),
        problem.grid_price[t],
        problem.diesel_price_at(t),
        p.diesel_min_kw,
        p.diesel_max_kw,
    );
    Some(Step { charge, discharge, mix })
}

/// Backward recursion over a uniform SOC lattice between the SOC limits.
/// The first hour starts from `soc_start`, every later state is a lattice
/// point, and each transition is served by [`cheapest_mix`].
pub fn dp_dispatch(problem: &DispatchProblem, cfg: DPConfig) -> Result<DispatchSolution, DispatchError> {
    problem.validate()?;
    cfg.validate()?;
    let n = problem.hours();
    let grid = soc_grid(problem, cfg.soc_levels);
    let k = grid.len();

    // value[i]: cost-to-go from lattice point i at the current stage.
    let mut value = vec![0.0f64; k];
    let mut choice = vec![vec![usize::MAX; k]; n];
    for t in (1..n).rev() {
        let mut next = vec![f64::INFINITY; k];
        for i in 0..k {
            for j in 0..k {
                if !value[j].is_finite() {
                    continue;
                }
                if let Some(step) = transition(problem, t, grid[i], grid[j]) {
                    let c = step.mix.cost + value[j];
                    if c < next[i] {
                        next[i] = c;
                        choice[t][i] = j;
                    }
                }
            }
        }
        value = next;
    }
    let mut first = None;
    let mut best = f64::INFINITY;
    for j in 0..k {
        if !value[j].is_finite() {
            continue;
        }
        if let Some(step) = transition(problem, 0, problem.soc_start, grid[j]) {
            let c = step.mix.cost + value[j];
            if c < best {
                best = c;
                first = Some(j);
            }
        }
    }
    let mut j = first.ok_or(DispatchError::Infeasible { hour: 0 })?;

    let mut sol = empty_solution(n, problem.soc_start);
    let mut from = problem.soc_start;
    for t in 0..n {
        let step = transition(problem, t, from, grid[j]).ok_or(DispatchError::Infeasible { hour: t })?;
        record(&mut sol, t, &step, grid[j]);
        from = grid[j];
        if t + 1 < n {
            j = choice[t + 1][j];
            if j == usize::MAX {
                return Err(DispatchError::Infeasible { hour: t + 1 });
            }
        }
    }
    sol.op_cost = sol.cost_under(problem);
    sol.check(problem)?;
    Ok(sol)
}

/// Hour-by-hour rule without lookahead: PV serves the load, surplus PV
/// charges the battery, the battery covers what it can of the deficit, and
/// the rest comes from diesel (only when it is cheaper than the grid and
/// the deficit reaches its minimum output) or the grid.
pub fn greedy_dispatch(problem: &DispatchProblem) -> Result<DispatchSolution, DispatchError> {
    problem.validate()?;
    let p = problem.params;
    let n = problem.hours();
    let cap = problem.battery_power_cap();
    let (soc_lo, soc_hi) = (problem.soc_min(), problem.soc_max());
    let mut sol = empty_solution(n, problem.soc_start);
    let mut soc = problem.soc_start;
    for t in 0..n {
        let load = problem.load_kw[t];
        let avail = problem.pv_cap(t);
        let mut pv = avail.min(load);
        let mut deficit = load - pv;
        let charge = (avail - pv).min(cap).min(((soc_hi - soc) / p.eta_charge).max(0.0));
        pv += charge;
        let discharge = deficit.min(cap).min(((soc - soc_lo) * p.eta_discharge).max(0.0));
        deficit -= discharge;
        let diesel_price = problem.diesel_price_at(t);
        let diesel = if deficit > 0.0 && deficit >= p.diesel_min_kw && diesel_price < problem.grid_price[t] {
            deficit.min(p.diesel_max_kw)
        } else {
            0.0
        };
        let grid = deficit - diesel;
        soc = (soc + p.eta_charge * charge - discharge / p.eta_discharge).clamp(soc_lo.min(soc), soc_hi.max(soc));
        let mix = SourceMix { pv, diesel, grid, on: diesel > 0.0, cost: 0.0 };
        record(&mut sol, t, &Step { charge, discharge, mix }, soc);
    }
    sol.op_cost = sol.cost_under(problem);
    sol.check(problem)?;
    Ok(sol)
}

fn empty_solution(n: usize, soc_start: f64) -> DispatchSolution {
    let mut soc = vec![0.0; n + 1];
    soc[0] = soc_start;
    DispatchSolution {
        grid: vec![0.0; n],
        diesel: vec![0.0; n],
        pv: vec![0.0; n],
        charge: vec![0.0; n],
        discharge: vec![0.0; n],
        soc,
        commitment: Some(vec![false; n]),
        op_cost: 0.0,
    }
}

fn record(sol: &mut DispatchSolution, t: usize, step: &Step, soc_next: f64) {
    sol.grid[t] = step.mix.grid;
    sol.diesel[t] = step.mix.diesel;
    sol.pv[t] = step.mix.pv;
    sol.charge[t] = step.charge;
    sol.discharge[t] = step.discharge;
    sol.soc[t + 1] = soc_next;
    if let Some(u) = &mut sol.commitment {
        u[t] = step.mix.on;
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
            diesel_min_kw: 4.0,
            eta_charge: 0.9,
            eta_discharge: 0.9,
            soc_min_frac: 0.0,
            soc_max_frac: 1.0,
            soc_init_frac: 0.0,
            c_rate: None,
        }
    }

    fn problem<'a>(p: &'a DispatchParams, d: Design, load: &'a [f64], price: &'a [f64], avail: &'a [f64]) -> DispatchProblem<'a> {
        DispatchProblem {
            design: d,
            params: p,
            load_kw: load,
            grid_price: price,
            pv_availability: avail,
            diesel_price: None,
            soc_start: p.soc_init_frac * d.battery_kwh,
        }
    }

    #[test]
    fn mix_honours_minimum_output() {
        // 3 kW below the 4 kW minimum: grid only.
        let m = cheapest_mix(3.0, 0.0, 0.5, 0.3, 4.0, 10.0);
        assert_eq!((m.diesel, m.grid, m.on), (0.0, 3.0, false));
        // 12 kW: diesel at its cap, grid for the rest.
        let m = cheapest_mix(12.0, 0.0, 0.5, 0.3, 4.0, 10.0);
        assert_eq!((m.diesel, m.grid), (10.0, 2.0));
        assert!((m.cost - 4.0).abs() < 1e-12);
        // PV curtailed so diesel can sit at its minimum when that is cheaper
        // than the grid share.
        let m = cheapest_mix(5.0, 3.0, 1.0, 0.3, 4.0, 10.0);
        assert_eq!((m.pv, m.diesel, m.grid), (1.0, 4.0, 0.0));
        assert!((m.cost - 1.2).abs() < 1e-12, "{m:?}");
        let m = cheapest_mix(5.0, 3.0, 0.5, 0.3, 4.0, 10.0);
        assert_eq!((m.pv, m.diesel, m.grid), (3.0, 0.0, 2.0));
        // Grid cheaper than diesel.
        let m = cheapest_mix(5.0, 0.0, 0.1, 0.3, 0.0, 10.0);
        assert_eq!((m.diesel, m.grid), (0.0, 5.0));
    }

    #[test]
    fn greedy_charges_from_surplus() {
        let p = params();
        let load = [0.0; 4];
        let price = [0.1; 4];
        let avail = [1.0; 4];
        let pr = problem(&p, Design::new(20.0, 10.0), &load, &price, &avail);
        let s = greedy_dispatch(&pr).unwrap();
        assert_eq!(s.op_cost, 0.0);
        assert!((s.soc_end() - 20.0).abs() < 1e-9);
        assert!(s.charge[3] < s.charge[0]);
    }

    #[test]
    fn without_storage_both_match_hourly_cheapest() {
        let p = params();
        let load = [3.0, 8.0, 12.0];
        let price = [0.1, 0.5, 0.5];
        let pr = problem(&p, Design::new(0.0, 0.0), &load, &price, &[0.0; 3]);
        let expected = 0.3 + 8.0 * 0.3 + 10.0 * 0.3 + 2.0 * 0.5;
        assert!((greedy_dispatch(&pr).unwrap().op_cost - expected).abs() < 1e-12);
        assert!((dp_dispatch(&pr, DPConfig::default()).unwrap().op_cost - expected).abs() < 1e-12);
    }

    #[test]
    fn dp_stores_cheap_energy() {
        let p = DispatchParams { soc_min_frac: 0.0, ..params() };
        let load = [0.0, 8.1];
        let price = [0.1, 1.0];
        let pr = problem(&p, Design::new(10.0, 0.0), &load, &price, &[0.0; 2]);
        let s = dp_dispatch(&pr, DPConfig { soc_levels: 11 }).unwrap();
        // 10 kWh from the grid store 9 kWh, which deliver 8.1 kW.
        assert!((s.soc[1] - 9.0).abs() < 1e-9, "{:?}", s.soc);
        assert!((s.op_cost - 1.0).abs() < 1e-9, "{}", s.op_cost);
    }

    #[test]
    fn dp_reports_unreachable_lattice() {
        let p = DispatchParams { c_rate: Some(0.01), soc_init_frac: 0.55, ..params() };
        let pr = problem(&p, Design::new(100.0, 0.0), &[1.0, 1.0], &[0.1, 0.1], &[0.0; 2]);
        let err = dp_dispatch(&pr, DPConfig { soc_levels: 2 }).unwrap_err();
        assert!(matches!(err, DispatchError::Infeasible { hour: 0 }));
        assert!(DPConfig { soc_levels: 1 }.validate().is_err());
    }
}
