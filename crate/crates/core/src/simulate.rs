//! Year-long dispatch as a chain of windows with SOC carried across.

use serde::{Deserialize, Serialize};
use boost_solver::{BranchAndBound, BranchRule, MilpOptions, SimplexSolver, Solver};
use thiserror::Error;

use crate::baselines::{dp_dispatch, greedy_dispatch, DPConfig};
use crate::dispatch::{build_lp, build_milp, extract_solution, Design, DispatchError, DispatchParams, DispatchProblem, DispatchSolution};
use crate::timeseries::{windows, HourlyTrace, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lp,
    Milp,
    Dp,
    Greedy,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Lp, Method::Milp, Method::Dp, Method::Greedy];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lp => "lp",
            Method::Milp => "milp",
            Method::Dp => "dp",
            Method::Greedy => "greedy",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown method `{s}` (expected lp, milp, dp or greedy)"))
    }
}

#[derive(Debug, Error)]
#[error("window {window} (hours {start}..{end}): {source}")]
pub struct WindowError {
    pub window: usize,
    pub start: usize,
    pub end: usize,
    #[source]
    pub source: DispatchError,
}

#[derive(Debug, Clone)]
pub struct YearRun {
    pub op_cost: f64,
    pub window_costs: Vec<f64>,
    /// Concatenated schedule; `soc` has one more entry than the hours.
    pub schedule: Option<DispatchSolution>,
    pub iterations: usize,
    pub nodes: usize,
}

/// Dispatch settings shared by every design of a run.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub params: DispatchParams,
    pub window_hours: usize,
    pub dp: DPConfig,
    pub lp: SimplexSolver,
    pub milp: BranchAndBound,
}

impl Simulator {
    pub fn new(params: DispatchParams, window_hours: usize) -> Self {
        // Storage makes the relaxation's optimal face flat, and no fixed
        // variable order copes with every week; learned gains do.
        let milp = BranchAndBound::new(MilpOptions { branching: BranchRule::Reliability, ..MilpOptions::default() });
        Self { params, window_hours, dp: DPConfig::default(), lp: SimplexSolver::default(), milp }
    }

    pub fn with_milp_options(mut self, options: MilpOptions) -> Self {
        self.lp = SimplexSolver::new(options.lp);
        self.milp = BranchAndBound::new(options);
        self
    }

    /// Solves one window with the given method.
    pub fn solve_window(&self, problem: &DispatchProblem, method: Method) -> Result<(DispatchSolution, usize, usize), DispatchError> {
        match method {
            Method::Lp | Method::Milp => {
                problem.validate()?;
                let model = if method == Method::Lp { build_lp(problem) } else { build_milp(problem) };
                let report = if method == Method::Lp { self.lp.solve(&model)? } else { self.milp.solve(&model)? };
                let sol = extract_solution(&model, &report, problem)?;
                Ok((sol, report.iterations, report.nodes))
            }
            Method::Dp => Ok((dp_dispatch(problem, self.dp)?, 0, 0)),
            Method::Greedy => Ok((greedy_dispatch(problem)?, 0, 0)),
        }
    }

    /// Runs the whole trace window by window. Each window starts from the
    /// previous window's final SOC, clipped to the SOC limits.
    pub fn run(&self, trace: &HourlyTrace, design: Design, method: Method, keep_schedule: bool) -> Result<YearRun, WindowError> {
        let wins = windows(trace.len(), self.window_hours).map_err(|e| WindowError {
            window: 0,
            start: 0,
            end: 0,
            source: DispatchError::InvalidProblem(e.to_string()),
        })?;
        let (soc_lo, soc_hi) = (self.params.soc_min_frac * design.battery_kwh, self.params.soc_max_frac * design.battery_kwh);
        let mut soc = self.params.soc_init_frac * design.battery_kwh;
        let mut run = YearRun {
            op_cost: 0.0,
            window_costs: Vec::with_capacity(wins.len()),
            schedule: keep_schedule.then(|| empty_schedule(trace.len(), soc, method)),
            iterations: 0,
            nodes: 0,
        };
        for (w, &win) in wins.iter().enumerate() {
            let problem = self.problem(trace, design, win, soc);
            let (sol, it, nodes) = self.solve_window(&problem, method).map_err(|source| WindowError {
                window: w,
                start: win.start,
                end: win.start + win.len,
                source,
            })?;
            run.op_cost += sol.op_cost;
            run.window_costs.push(sol.op_cost);
            run.iterations += it;
            run.nodes += nodes;
            soc = sol.soc_end().clamp(soc_lo, soc_hi);
            if let Some(s) = &mut run.schedule {
                append(s, &sol, win, soc);
            }
        }
        Ok(run)
    }

    pub fn problem<'a>(&'a self, trace: &'a HourlyTrace, design: Design, win: Window, soc_start: f64) -> DispatchProblem<'a> {
        let r = win.range();
        DispatchProblem {
            design,
            params: &self.params,
            load_kw: &trace.load_kw()[r.clone()],
            grid_price: &trace.grid_price()[r.clone()],
            pv_availability: &trace.pv_availability()[r.clone()],
            diesel_price: trace.diesel_price().map(|d| &d[r]),
            soc_start,
        }
    }
}

fn empty_schedule(hours: usize, soc_start: f64, method: Method) -> DispatchSolution {
    let mut soc = vec![0.0; hours + 1];
    soc[0] = soc_start;
    DispatchSolution {
        grid: vec![0.0; hours],
        diesel: vec![0.0; hours],
        pv: vec![0.0; hours],
        charge: vec![0.0; hours],
        discharge: vec![0.0; hours],
        soc,
        commitment: (method != Method::Lp).then(|| vec![false; hours]),
        op_cost: 0.0,
    }
}

fn append(year: &mut DispatchSolution, sol: &DispatchSolution, win: Window, soc_next: f64) {
    let r = win.range();
    year.grid[r.clone()].copy_from_slice(&sol.grid);
    year.diesel[r.clone()].copy_from_slice(&sol.diesel);
    year.pv[r.clone()].copy_from_slice(&sol.pv);
    year.charge[r.clone()].copy_from_slice(&sol.charge);
    year.discharge[r.clone()].copy_from_slice(&sol.discharge);
    year.soc[win.start + 1..win.start + win.len].copy_from_slice(&sol.soc[1..win.len]);
    year.soc[win.start + win.len] = soc_next;
    if let (Some(y), Some(u)) = (&mut year.commitment, &sol.commitment) {
        y[r].copy_from_slice(u);
    }
    year.op_cost += sol.op_cost;
}
