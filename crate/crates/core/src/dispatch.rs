//! Hourly dispatch of grid, diesel, PV and battery over one window.
//!
//! The LP serves the load at minimum grid plus diesel cost. The MILP adds an
//! on/off commitment per hour so the diesel unit runs either at zero or
//! between its minimum and maximum output.

use boost_solver::{Model, ModelError, SolveReport, SolveStatus, VarId};
use thiserror::Error;

/// Absolute tolerance used by the schedule consistency checks.
pub const CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solver returned {0}")]
    Solver(SolveStatus),
    #[error("no feasible schedule at hour {hour}")]
    Infeasible { hour: usize },
    #[error("schedule check failed at hour {hour}: {what} off by {amount:e}")]
    Inconsistent { what: &'static str, hour: usize, amount: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchParams {
    /// $/kWh, used when the trace carries no per-hour diesel price.
    pub diesel_price: f64,
    pub diesel_max_kw: f64,
    /// Minimum output while the diesel unit is on (MILP and baselines only).
    pub diesel_min_kw: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    /// SOC limits and starting level as fractions of battery capacity.
    pub soc_min_frac: f64,
    pub soc_max_frac: f64,
    pub soc_init_frac: f64,
    /// Charge/discharge power limit in multiples of capacity per hour.
    pub c_rate: Option<f64>,
}

impl DispatchParams {
    /// Defaults sized to a load profile: diesel rated at the peak load with a
    /// 30% minimum output.
    pub fn for_peak_load(peak_kw: f64) -> Self {
        Self {
            diesel_price: 0.30,
            diesel_max_kw: peak_kw,
            diesel_min_kw: 0.3 * peak_kw,
            eta_charge: 0.95,
            eta_discharge: 0.95,
            soc_min_frac: 0.1,
            soc_max_frac: 1.0,
            soc_init_frac: 0.5,
            c_rate: None,
        }
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        let bad = |msg: String| Err(DispatchError::InvalidParams(msg));
        let fields = [
            ("diesel_price", self.diesel_price),
            ("diesel_max_kw", self.diesel_max_kw),
            ("diesel_min_kw", self.diesel_min_kw),
            ("eta_charge", self.eta_charge),
            ("eta_discharge", self.eta_discharge),
            ("soc_min_frac", self.soc_min_frac),
            ("soc_max_frac", self.soc_max_frac),
            ("soc_init_frac", self.soc_init_frac),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return bad(format!("{name} is not finite ({v})"));
        }
        if self.diesel_price < 0.0 {
            return bad(format!("diesel_price {} is negative", self.diesel_price));
        }
        if !(0.0 <= self.diesel_min_kw && self.diesel_min_kw <= self.diesel_max_kw) {
            return bad(format!(
                "need 0 <= diesel_min_kw ({}) <= diesel_max_kw ({})",
                self.diesel_min_kw, self.diesel_max_kw
            ));
        }
        for (name, eta) in [("eta_charge", self.eta_charge), ("eta_discharge", self.eta_discharge)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return bad(format!("{name} {eta} outside (0, 1]"));
            }
        }
        if !(0.0 <= self.soc_min_frac && self.soc_min_frac < self.soc_max_frac && self.soc_max_frac <= 1.0) {
            return bad(format!(
                "need 0 <= soc_min_frac ({}) < soc_max_frac ({}) <= 1",
                self.soc_min_frac, self.soc_max_frac
            ));
        }
        if !(self.soc_min_frac <= self.soc_init_frac && self.soc_init_frac <= self.soc_max_frac) {
            return bad(format!("soc_init_frac {} outside the SOC limits", self.soc_init_frac));
        }
        if let Some(c) = self.c_rate {
            if !(c.is_finite() && c > 0.0) {
                return bad(format!("c_rate {c} must be positive"));
            }
        }
        Ok(())
    }
}

/// A sizing candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Design {
    pub battery_kwh: f64,
    pub pv_kw: f64,
}

impl Design {
    pub fn new(battery_kwh: f64, pv_kw: f64) -> Self {
        Self { battery_kwh, pv_kw }
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        if !(self.battery_kwh.is_finite() && self.battery_kwh >= 0.0) {
            return Err(DispatchError::InvalidProblem(format!("battery capacity {} kWh", self.battery_kwh)));
        }
        if !(self.pv_kw.is_finite() && self.pv_kw >= 0.0) {
            return Err(DispatchError::InvalidProblem(format!("PV size {} kW", self.pv_kw)));
        }
        Ok(())
    }

    /// Lexicographic order on (battery, PV), used to break cost ties.
    pub fn lex_cmp(&self, other: &Design) -> std::cmp::Ordering {
        self.battery_kwh.total_cmp(&other.battery_kwh).then(self.pv_kw.total_cmp(&other.pv_kw))
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({} kWh, {} kW)", self.battery_kwh, self.pv_kw)
    }
}

/// One window's data. Slices all have the window length `T`.
#[derive(Debug, Clone, Copy)]
pub struct DispatchProblem<'a> {
    pub design: Design,
    pub params: &'a DispatchParams,
    pub load_kw: &'a [f64],
    pub grid_price: &'a [f64],
    pub pv_availability: &'a [f64],
    pub diesel_price: Option<&'a [f64]>,
    /// Stored energy at the start of the window, kWh.
    pub soc_start: f64,
}

impl<'a> DispatchProblem<'a> {
    pub fn hours(&self) -> usize {
        self.load_kw.len()
    }

    pub fn soc_min(&self) -> f64 {
        self.params.soc_min_frac * self.design.battery_kwh
    }

    pub fn soc_max(&self) -> f64 {
        self.params.soc_max_frac * self.design.battery_kwh
    }

    pub fn diesel_price_at(&self, t: usize) -> f64 {
        self.diesel_price.map_or(self.params.diesel_price, |d| d[t])
    }

    pub fn pv_cap(&self, t: usize) -> f64 {
        self.pv_availability[t] * self.design.pv_kw
    }

    /// Per-hour battery power limit (infinite without a C-rate, zero without
    /// a battery).
    pub fn battery_power_cap(&self) -> f64 {
        if self.design.battery_kwh == 0.0 {
            0.0
        } else {
            self.params.c_rate.map_or(f64::INFINITY, |c| c * self.design.battery_kwh)
        }
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        self.params.validate()?;
        self.design.validate()?;
        let t = self.hours();
        if t == 0 {
            return Err(DispatchError::InvalidProblem("empty window".into()));
        }
        if self.grid_price.len() != t
            || self.pv_availability.len() != t
            || self.diesel_price.is_some_and(|d| d.len() != t)
        {
            return Err(DispatchError::InvalidProblem("series lengths differ".into()));
        }
        let tol = CHECK_TOL * self.design.battery_kwh.max(1.0);
        if !(self.soc_start >= self.soc_min() - tol && self.soc_start <= self.soc_max() + tol) {
            return Err(DispatchError::InvalidProblem(format!(
                "start SOC {} outside [{}, {}]",
                self.soc_start,
                self.soc_min(),
                self.soc_max()
            )));
        }
        Ok(())
    }
}

/// Power schedule for one window (kW per hour, SOC in kWh at hour
/// boundaries).
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    pub grid: Vec<f64>,
    pub diesel: Vec<f64>,
    pub pv: Vec<f64>,
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    /// Length `T + 1`; `soc[0]` is the start level.
    pub soc: Vec<f64>,
    /// Diesel on/off per hour, for methods that model commitment.
    pub commitment: Option<Vec<bool>>,
    pub op_cost: f64,
}

impl DispatchSolution {
    pub fn hours(&self) -> usize {
        self.grid.len()
    }

    pub fn soc_end(&self) -> f64 {
        *self.soc.last().expect("SOC series is never empty")
    }

    /// Grid plus diesel cost of the schedule.
    pub fn cost_under(&self, problem: &DispatchProblem) -> f64 {
        (0..self.hours()).map(|t| problem.grid_price[t] * self.grid[t] + problem.diesel_price_at(t) * self.diesel[t]).sum()
    }

    /// Checks balance, SOC recursion, bounds and (when commitment is
    /// present) the diesel minimum output.
    pub fn check(&self, problem: &DispatchProblem) -> Result<(), DispatchError> {
        let p = problem.params;
        let n = problem.hours();
        let fail = |what, hour, amount| Err(DispatchError::Inconsistent { what, hour, amount });
        if [self.grid.len(), self.diesel.len(), self.pv.len(), self.charge.len(), self.discharge.len()]
            .iter()
            .any(|&l| l != n)
            || self.soc.len() != n + 1
        {
            return fail("series length", 0, n as f64);
        }
        if (self.soc[0] - problem.soc_start).abs() > CHECK_TOL {
            return fail("start SOC", 0, self.soc[0] - problem.soc_start);
        }
        let cap = problem.battery_power_cap();
        for t in 0..n {
            let load = problem.load_kw[t];
            let bal = self.pv[t] + self.diesel[t] + self.grid[t] + self.discharge[t] - self.charge[t] - load;
            if bal.abs() > CHECK_TOL * load.max(1.0) {
                return fail("power balance", t, bal);
            }
            let rec = self.soc[t + 1] - self.soc[t] - p.eta_charge * self.charge[t] + self.discharge[t] / p.eta_discharge;
            if rec.abs() > CHECK_TOL {
                return fail("SOC recursion", t, rec);
            }
            let below = |v: f64, lo: f64| lo - v;
            let above = |v: f64, hi: f64| v - hi;
            let checks = [
                ("grid lower bound", below(self.grid[t], 0.0)),
                ("diesel lower bound", below(self.diesel[t], 0.0)),
                ("diesel upper bound", above(self.diesel[t], p.diesel_max_kw)),
                ("PV lower bound", below(self.pv[t], 0.0)),
                ("PV upper bound", above(self.pv[t], problem.pv_cap(t))),
                ("charge lower bound", below(self.charge[t], 0.0)),
                ("charge upper bound", above(self.charge[t], cap)),
                ("discharge lower bound", below(self.discharge[t], 0.0)),
                ("discharge upper bound", above(self.discharge[t], cap)),
                ("SOC lower bound", below(self.soc[t + 1], problem.soc_min())),
                ("SOC upper bound", above(self.soc[t + 1], problem.soc_max())),
            ];
            for (what, v) in checks {
                if v > CHECK_TOL {
                    return fail(what, t, v);
                }
            }
            if let Some(u) = &self.commitment {
                let d = self.diesel[t];
                if !u[t] && d > CHECK_TOL {
                    return fail("diesel output while off", t, d);
                }
                if u[t] && d < p.diesel_min_kw - CHECK_TOL {
                    return fail("diesel minimum output", t, p.diesel_min_kw - d);
                }
            }
        }
        let cost = self.cost_under(problem);
        if (cost - self.op_cost).abs() > CHECK_TOL * cost.abs().max(1.0) {
            return fail("operating cost", n, cost - self.op_cost);
        }
        Ok(())
    }
}

/// Column positions of the dispatch model.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub hours: usize,
    pub milp: bool,
}

impl Layout {
    pub fn grid(&self, t: usize) -> VarId {
        5 * t
    }
    pub fn diesel(&self, t: usize) -> VarId {
        5 * t + 1
    }
    pub fn pv(&self, t: usize) -> VarId {
        5 * t + 2
    }
    pub fn charge(&self, t: usize) -> VarId {
        5 * t + 3
    }
    pub fn discharge(&self, t: usize) -> VarId {
        5 * t + 4
    }
    /// `t` in `0..=hours`.
    pub fn soc(&self, t: usize) -> VarId {
        5 * self.hours + t
    }
    pub fn on(&self, t: usize) -> VarId {
        6 * self.hours + 1 + 3 * t
    }
    fn slack_hi(&self, t: usize) -> VarId {
        6 * self.hours + 2 + 3 * t
    }
    fn slack_lo(&self, t: usize) -> VarId {
        6 * self.hours + 3 + 3 * t
    }
}

/// LP dispatch model. Diesel output is bounded by `[0, diesel_max_kw]`.
pub fn build_lp(problem: &DispatchProblem) -> Model {
    let n = problem.hours();
    let p = problem.params;
    let cap = problem.battery_power_cap();
    let mut m = Model::new();
    for t in 0..n {
        m.add_var(format!("grid_{t}"), problem.grid_price[t], 0.0, f64::INFINITY);
        m.add_var(format!("diesel_{t}"), problem.diesel_price_at(t), 0.0, p.diesel_max_kw);
        m.add_var(format!("pv_{t}"), 0.0, 0.0, problem.pv_cap(t));
        m.add_var(format!("charge_{t}"), 0.0, 0.0, cap);
        m.add_var(format!("discharge_{t}"), 0.0, 0.0, cap);
    }
    m.add_var("soc_0", 0.0, problem.soc_start, problem.soc_start);
    for t in 1..=n {
        m.add_var(format!("soc_{t}"), 0.0, problem.soc_min(), problem.soc_max());
    }
    let l = Layout { hours: n, milp: false };
    for t in 0..n {
        m.add_eq(
            format!("balance_{t}"),
            &[(l.pv(t), 1.0), (l.diesel(t), 1.0), (l.grid(t), 1.0), (l.discharge(t), 1.0), (l.charge(t), -1.0)],
            problem.load_kw[t],
        );
        m.add_eq(
            format!("soc_{t}"),
            &[
                (l.soc(t + 1), 1.0),
                (l.soc(t), -1.0),
                (l.charge(t), -p.eta_charge),
                (l.discharge(t), 1.0 / p.eta_discharge),
            ],
            0.0,
        );
    }
    m
}

/// MILP dispatch model: the LP plus a binary `on_t` per hour with
/// `diesel_min_kw * on_t <= diesel_t <= diesel_max_kw * on_t`, and a
/// tightening row for hours whose load is below the unit's maximum.
pub fn build_milp(problem: &DispatchProblem) -> Model {
    let n = problem.hours();
    let p = problem.params;
    let mut m = build_lp(problem);
    let l = Layout { hours: n, milp: true };
    for t in 0..n {
        let on = m.add_binary(format!("on_{t}"), 0.0);
        let hi = m.add_var(format!("slack_hi_{t}"), 0.0, 0.0, f64::INFINITY);
        let lo = m.add_var(format!("slack_lo_{t}"), 0.0, 0.0, f64::INFINITY);
        debug_assert_eq!((on, hi, lo), (l.on(t), l.slack_hi(t), l.slack_lo(t)));
        m.add_eq(format!("diesel_max_{t}"), &[(l.diesel(t), 1.0), (on, -p.diesel_max_kw), (hi, 1.0)], 0.0);
        m.add_eq(format!("diesel_min_{t}"), &[(l.diesel(t), 1.0), (on, -p.diesel_min_kw), (lo, -1.0)], 0.0);
    }
    // With the unit on, diesel and PV together serve at most the load plus
    // charging; with it off, PV alone is capped by its availability:
    // diesel_t + pv_t <= (load_t - A_t) * on_t + A_t + charge_t, A_t = PV
    // cap. Integer points already satisfy this, but without it the
    // relaxation covers a residual below the unit's minimum at a fractional
    // commitment.
    // The same holds with discharge added on the left, whose hourly output
    // is bounded by the usable energy.
    let usable = (problem.soc_max().max(problem.soc_start) - problem.soc_min()).max(0.0) * p.eta_discharge;
    let discharge_cap = problem.battery_power_cap().min(usable);
    for t in 0..n {
        let (load, avail) = (problem.load_kw[t], problem.pv_cap(t));
        let reach = avail + discharge_cap;
        if discharge_cap > 0.0 && reach < load && load - reach < p.diesel_max_kw {
            let s = m.add_var(format!("slack_serve_dis_{t}"), 0.0, 0.0, f64::INFINITY);
            m.add_eq(
                format!("diesel_serve_dis_{t}"),
                &[(l.diesel(t), 1.0), (l.pv(t), 1.0), (l.discharge(t), 1.0), (l.on(t), -(load - reach)), (l.charge(t), -1.0), (s, 1.0)],
                reach,
            );
        }
    }
    for t in 0..n {
        let (load, avail) = (problem.load_kw[t], problem.pv_cap(t));
        if avail < load && load - avail < p.diesel_max_kw {
            let s = m.add_var(format!("slack_serve_{t}"), 0.0, 0.0, f64::INFINITY);
            m.add_eq(
                format!("diesel_serve_{t}"),
                &[(l.diesel(t), 1.0), (l.pv(t), 1.0), (l.on(t), -(load - avail)), (l.charge(t), -1.0), (s, 1.0)],
                avail,
            );
        }
    }
    m
}

/// Maps an optimal solver point back to a schedule, removes simultaneous
/// charge and discharge where possible, and checks the result.
pub fn extract_solution(model: &Model, report: &SolveReport, problem: &DispatchProblem) -> Result<DispatchSolution, DispatchError> {
    if !report.status.is_optimal() {
        return Err(DispatchError::Solver(report.status));
    }
    let n = problem.hours();
    let milp = model.num_vars() > 6 * n + 1;
    let l = Layout { hours: n, milp };
    let x = &report.x;
    // Clip round-off outside the bounds.
    let val = |v: VarId| x[v].clamp(model.lower()[v], model.upper()[v]);
    let series = |f: fn(&Layout, usize) -> VarId| (0..n).map(|t| val(f(&l, t))).collect::<Vec<f64>>();
    let mut sol = DispatchSolution {
        grid: series(Layout::grid),
        diesel: series(Layout::diesel),
        pv: series(Layout::pv),
        charge: series(Layout::charge),
        discharge: series(Layout::discharge),
        soc: (0..=n).map(|t| val(l.soc(t))).collect(),
        commitment: milp.then(|| (0..n).map(|t| x[l.on(t)] > 0.5).collect()),
        op_cost: 0.0,
    };
    if let Some(u) = &mut sol.commitment {
        // An "on" hour at zero output is the same schedule as an "off" hour
        // when the minimum is zero.
        for (on, &d) in u.iter_mut().zip(&sol.diesel) {
            if *on && d <= CHECK_TOL && problem.params.diesel_min_kw <= CHECK_TOL {
                *on = false;
            }
        }
    }
    remove_simultaneous_flow(&mut sol, problem);
    sol.op_cost = sol.cost_under(problem);
    sol.check(problem)?;
    Ok(sol)
}

/// Replaces charge and discharge in the same hour by the one-directional flow
/// with the same SOC change. The freed bus power is taken off PV, then grid,
/// then diesel (never below the minimum output of a committed unit). Flow
/// that cannot be offset this way is left in place.
pub fn remove_simultaneous_flow(sol: &mut DispatchSolution, problem: &DispatchProblem) {
    let p = problem.params;
    let round_trip = p.eta_charge * p.eta_discharge;
    for t in 0..sol.hours() {
        let (ch, dis) = (sol.charge[t], sol.discharge[t]);
        if ch <= 0.0 || dis <= 0.0 {
            continue;
        }
        // Lowering charge by `a` and discharge by `round_trip * a` keeps the
        // SOC change and frees `a * (1 - round_trip)` on the bus.
        let full = ch.min(dis / round_trip);
        let committed = sol.commitment.as_ref().is_some_and(|u| u[t]);
        let diesel_floor = if committed { p.diesel_min_kw.min(sol.diesel[t]) } else { 0.0 };
        let spare = sol.pv[t] + sol.grid[t] + (sol.diesel[t] - diesel_floor);
        let loss = 1.0 - round_trip;
        let a = if loss * full <= spare { full } else { spare / loss };
        if a <= 0.0 {
            continue;
        }
        let mut surplus = a * loss;
        if a == full {
            if full == ch {
                sol.charge[t] = 0.0;
                sol.discharge[t] = dis - round_trip * ch;
            } else {
                sol.discharge[t] = 0.0;
                sol.charge[t] = ch - dis / round_trip;
            }
        } else {
            sol.charge[t] = ch - a;
            sol.discharge[t] = dis - round_trip * a;
        }
        for source in [&mut sol.pv[t], &mut sol.grid[t]] {
            let take = surplus.min(*source);
            *source -= take;
            surplus -= take;
        }
        let take = surplus.min(sol.diesel[t] - diesel_floor).max(0.0);
        sol.diesel[t] -= take;
        if let Some(u) = &mut sol.commitment {
            if u[t] && sol.diesel[t] <= 0.0 && p.diesel_min_kw <= 0.0 {
                u[t] = false;
            }
        }
    }
}
