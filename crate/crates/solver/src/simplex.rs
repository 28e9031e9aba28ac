//! Bounded-variable revised simplex.
//!
//! Every row gets an auxiliary column `e_i` with bounds `[0, 0]`; the
//! all-auxiliary basis is the cold start. Phase 1 minimises the sum of bound
//! violations of the basic variables, so any starting basis is accepted.
//! The dual simplex is used to re-optimise after bound changes.

use crate::lu::BasisFactor;
use crate::model::Model;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// The dual simplex was asked to start from a basis that is not dual
    /// feasible.
    NotDualFeasible,
}

/// Basis snapshot: basic variable per position and, for nonbasic
/// variables, whether they rest on their upper bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub(crate) head: Vec<usize>,
    pub(crate) at_upper: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EngineOptions {
    pub max_iterations: usize,
    pub refactor_interval: usize,
    pub stall_threshold: usize,
}

/// Basis, values and bounds of an [`Engine`], for cheap rollback.
pub(crate) struct Snapshot {
    head: Vec<usize>,
    position: Vec<usize>,
    x: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    factor: BasisFactor,
}

pub(crate) struct Engine {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_entries: Vec<(usize, f64)>,
    b: Vec<f64>,
    cost: Vec<f64>,
    pub(crate) lb: Vec<f64>,
    pub(crate) ub: Vec<f64>,
    pub(crate) x: Vec<f64>,
    head: Vec<usize>,
    position: Vec<usize>,
    factor: BasisFactor,
    opts: EngineOptions,
    pub(crate) iterations: usize,
    /// Iterations of the current `primal` or `dual` call.
    call_iterations: usize,
    // scratch
    work_row: Vec<f64>,
    work_pos: Vec<f64>,
    alpha: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Engine {
    pub fn new(model: &Model, opts: EngineOptions) -> Self {
        let m = model.num_rows();
        let n = model.num_vars();
        let nt = n + m;
        let mut col_start = Vec::with_capacity(nt + 1);
        let mut col_entries = Vec::new();
        col_start.push(0);
        for v in 0..n {
            let mut col: Vec<(usize, f64)> =
                model.column(v).iter().copied().filter(|e| e.1 != 0.0).collect();
            col.sort_by_key(|e| e.0);
            col_entries.extend(col);
            col_start.push(col_entries.len());
        }
        for i in 0..m {
            col_entries.push((i, 1.0));
            col_start.push(col_entries.len());
        }
        let mut cost = model.objective().to_vec();
        cost.resize(nt, 0.0);
        let mut lb = model.lower().to_vec();
        let mut ub = model.upper().to_vec();
        lb.resize(nt, 0.0);
        ub.resize(nt, 0.0);

        let mut engine = Engine {
            m,
            n,
            col_start,
            col_entries,
            b: model.rhs().to_vec(),
            cost,
            lb,
            ub,
            x: vec![0.0; nt],
            head: (n..nt).collect(),
            position: vec![NONE; nt],
            factor: BasisFactor::default(),
            opts,
            iterations: 0,
            call_iterations: 0,
            work_row: vec![0.0; m],
            work_pos: vec![0.0; m],
            alpha: vec![0.0; m],
            y: vec![0.0; m],
            d: vec![0.0; nt],
        };
        for (p, &j) in engine.head.iter().enumerate() {
            engine.position[j] = p;
        }
        for j in 0..n {
            engine.x[j] = engine.resting_value(j, false);
        }
        engine
    }

    pub fn num_structural(&self) -> usize {
        self.n
    }

    fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.col_entries[self.col_start[j]..self.col_start[j + 1]]
    }

    fn resting_value(&self, j: usize, at_upper: bool) -> f64 {
        let (l, u) = (self.lb[j], self.ub[j]);
        if at_upper && u.is_finite() {
            u
        } else if l.is_finite() {
            l
        } else if u.is_finite() {
            u
        } else {
            0.0
        }
    }

    fn is_basic(&self, j: usize) -> bool {
        self.position[j] != NONE
    }

    pub fn basis(&self) -> Basis {
        let at_upper = (0..self.x.len())
            .map(|j| !self.is_basic(j) && self.ub[j].is_finite() && self.x[j] == self.ub[j] && self.lb[j] != self.ub[j])
            .collect();
        Basis { head: self.head.clone(), at_upper }
    }

    /// Change the bounds of a variable. A nonbasic variable is moved onto the
    /// new bound; the basis must be refreshed before the next solve.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lb[j] = lower;
        self.ub[j] = upper;
        if !self.is_basic(j) {
            let at_upper = self.x[j] >= upper && upper.is_finite();
            self.x[j] = self.resting_value(j, at_upper);
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            head: self.head.clone(),
            position: self.position.clone(),
            x: self.x.clone(),
            lb: self.lb.clone(),
            ub: self.ub.clone(),
            factor: self.factor.clone(),
        }
    }

    /// Return to a snapshot without refactoring.
    pub fn restore(&mut self, s: &Snapshot) {
        self.head.clone_from(&s.head);
        self.position.clone_from(&s.position);
        self.x.clone_from(&s.x);
        self.lb.clone_from(&s.lb);
        self.ub.clone_from(&s.ub);
        self.factor.clone_from(&s.factor);
    }

    /// Recompute basic values after bound changes, keeping the factorization.
    pub fn update_primal(&mut self) {
        self.compute_primal();
    }

    pub fn load_basis(&mut self, basis: &Basis) {
        self.position.iter_mut().for_each(|p| *p = NONE);
        self.head.clone_from(&basis.head);
        for (p, &j) in self.head.iter().enumerate() {
            self.position[j] = p;
        }
        for j in 0..self.x.len() {
            if !self.is_basic(j) {
                self.x[j] = self.resting_value(j, basis.at_upper[j]);
            }
        }
    }

    /// Refactor the basis, repairing singularities with auxiliary columns,
    /// and recompute basic values.
    pub fn refresh(&mut self) {
        for _ in 0..=self.m {
            let heads = self.head.clone();
            let result = {
                let cs = &self.col_start;
                let ce = &self.col_entries;
                self.factor.factorize(self.m, |p| {
                    let j = heads[p];
                    &ce[cs[j]..cs[j + 1]]
                })
            };
            match result {
                Ok(()) => break,
                Err(singular) => {
                    for (&p, &r) in singular.positions.iter().zip(&singular.rows) {
                        let old = self.head[p];
                        let aux = self.n + r;
                        self.position[old] = NONE;
                        self.x[old] = nearest_bound(self.x[old], self.lb[old], self.ub[old]);
                        if self.is_basic(aux) {
                            // The auxiliary is already basic elsewhere; cannot
                            // happen for a consistent singular report.
                            continue;
                        }
                        self.head[p] = aux;
                        self.position[aux] = p;
                    }
                }
            }
        }
        self.compute_primal();
    }

    fn compute_primal(&mut self) {
        let mut rhs = self.b.clone();
        for j in 0..self.x.len() {
            if self.is_basic(j) || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            for &(i, a) in &self.col_entries[self.col_start[j]..self.col_start[j + 1]] {
                rhs[i] -= a * xj;
            }
        }
        let mut out = vec![0.0; self.m];
        self.factor.ftran(&mut rhs, &mut out);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = out[p];
        }
    }

    /// Dual values for basic costs `cb` (indexed by position), into `self.y`.
    fn compute_duals(&mut self, cb: &[f64]) {
        self.work_pos.copy_from_slice(cb);
        self.factor.btran(&mut self.work_pos, &mut self.y);
    }

    fn reduced_cost(&self, j: usize, cj: f64) -> f64 {
        let mut s = cj;
        for &(i, a) in self.column(j) {
            s -= a * self.y[i];
        }
        s
    }

    fn ftran_column(&mut self, j: usize) {
        self.work_row.iter_mut().for_each(|v| *v = 0.0);
        for k in self.col_start[j]..self.col_start[j + 1] {
            let (i, a) = self.col_entries[k];
            self.work_row[i] = a;
        }
        self.factor.ftran(&mut self.work_row, &mut self.alpha);
    }

    fn pivot(&mut self, leave_pos: usize, enter: usize) {
        let leave = self.head[leave_pos];
        self.position[leave] = NONE;
        self.head[leave_pos] = enter;
        self.position[enter] = leave_pos;
        self.factor.update(leave_pos, &self.alpha);
    }

    /// Row duals `y` with `B'y = c_B` for the current basis.
    pub fn row_duals(&mut self) -> Vec<f64> {
        let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        self.compute_duals(&cb);
        self.y.clone()
    }

    /// Reduced costs of `vars` for the current basis.
    pub fn reduced_costs(&mut self, vars: &[usize]) -> Vec<f64> {
        let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        self.compute_duals(&cb);
        vars.iter().map(|&j| self.reduced_cost(j, self.cost[j])).collect()
    }

    /// Reduced costs of every column for the current basis.
    pub fn all_reduced_costs(&mut self) -> Vec<f64> {
        let all: Vec<usize> = (0..self.x.len()).collect();
        self.reduced_costs(&all)
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    pub fn set_costs(&mut self, cost: Vec<f64>) {
        debug_assert_eq!(cost.len(), self.x.len());
        self.cost = cost;
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    /// Column basic at position `p`.
    pub fn basic_at(&self, p: usize) -> usize {
        self.head[p]
    }

    /// Row `p` of `B^-1 A` over every column; basic columns read zero.
    pub fn tableau_row(&mut self, p: usize) -> Vec<f64> {
        let mut rho = vec![0.0; self.m];
        self.work_pos.iter_mut().for_each(|v| *v = 0.0);
        self.work_pos[p] = 1.0;
        self.factor.btran(&mut self.work_pos, &mut rho);
        (0..self.x.len())
            .map(|j| if self.is_basic(j) { 0.0 } else { self.column(j).iter().map(|&(i, a)| a * rho[i]).sum() })
            .collect()
    }

    pub fn is_nonbasic(&self, j: usize) -> bool {
        !self.is_basic(j)
    }

    pub fn objective(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lb[j] - PRIMAL_TOL {
            self.lb[j] - v
        } else if v > self.ub[j] + PRIMAL_TOL {
            v - self.ub[j]
        } else {
            0.0
        }
    }

    fn max_iterations_reached(&self) -> bool {
        self.call_iterations >= self.opts.max_iterations
    }

    /// Primal simplex from the current basis (phase 1 as needed).
    pub fn primal(&mut self) -> LpOutcome {
        self.call_iterations = 0;
        let nt = self.x.len();
        let mut cb = vec![0.0; self.m];
        let mut bland = false;
        let mut best_obj = f64::INFINITY;
        let mut stalled = 0usize;
        let mut was_phase1 = true;

        loop {
            if self.factor.updates() >= self.opts.refactor_interval {
                self.refresh();
            }

            let mut phase1 = false;
            for p in 0..self.m {
                let j = self.head[p];
                let v = self.x[j];
                cb[p] = if v < self.lb[j] - PRIMAL_TOL {
                    phase1 = true;
                    -1.0
                } else if v > self.ub[j] + PRIMAL_TOL {
                    phase1 = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !phase1 {
                for p in 0..self.m {
                    cb[p] = self.cost[self.head[p]];
                }
            }
            if phase1 != was_phase1 {
                best_obj = f64::INFINITY;
                stalled = 0;
                bland = false;
                was_phase1 = phase1;
            }
            let obj = if phase1 {
                (0..self.m).map(|p| self.infeasibility(self.head[p])).sum()
            } else {
                self.objective()
            };
            if obj < best_obj - 1e-12 * best_obj.abs().max(1.0) {
                best_obj = obj;
                stalled = 0;
                bland = false;
            } else {
                stalled += 1;
                if stalled > self.opts.stall_threshold {
                    bland = true;
                }
            }

            self.compute_duals(&cb);

            // Pricing.
            let mut enter = NONE;
            let mut enter_dir = 0.0;
            let mut best = 0.0;
            for j in 0..nt {
                if self.is_basic(j) || self.lb[j] == self.ub[j] {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.cost[j] };
                let dj = self.reduced_cost(j, cj);
                let xj = self.x[j];
                let dir = if dj < -DUAL_TOL && xj < self.ub[j] {
                    1.0
                } else if dj > DUAL_TOL && xj > self.lb[j] {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    enter = j;
                    enter_dir = dir;
                    break;
                }
                if dj.abs() > best {
                    best = dj.abs();
                    enter = j;
                    enter_dir = dir;
                }
            }

            if enter == NONE {
                if self.factor.updates() > 0 {
                    // Confirm on a fresh factorization before declaring.
                    self.refresh();
                    if self.factor.updates() == 0 && self.confirm_no_entering(phase1) {
                        return self.finish_primal(phase1);
                    }
                    continue;
                }
                return self.finish_primal(phase1);
            }

            if self.max_iterations_reached() {
                return LpOutcome::IterationLimit;
            }
            self.iterations += 1;
            self.call_iterations += 1;

            self.ftran_column(enter);
            match self.primal_ratio(enter, enter_dir, phase1, bland) {
                RatioResult::Unbounded => {
                    if phase1 {
                        // A phase-1 ray with no blocking variable only
                        // arises from round-off; refresh and retry.
                        self.refresh();
                        bland = true;
                        continue;
                    }
                    return LpOutcome::Unbounded;
                }
                RatioResult::BoundFlip(theta) => {
                    self.apply_step(enter, enter_dir, theta);
                    self.x[enter] = if enter_dir > 0.0 { self.ub[enter] } else { self.lb[enter] };
                }
                RatioResult::Pivot { pos, theta, leave_value } => {
                    self.apply_step(enter, enter_dir, theta);
                    let leave = self.head[pos];
                    self.pivot(pos, enter);
                    self.x[leave] = leave_value;
                }
            }
        }
    }

    fn confirm_no_entering(&mut self, phase1: bool) -> bool {
        let mut cb = vec![0.0; self.m];
        let mut now_phase1 = false;
        for p in 0..self.m {
            let j = self.head[p];
            let v = self.x[j];
            cb[p] = if v < self.lb[j] - PRIMAL_TOL {
                now_phase1 = true;
                -1.0
            } else if v > self.ub[j] + PRIMAL_TOL {
                now_phase1 = true;
                1.0
            } else {
                0.0
            };
        }
        if now_phase1 != phase1 {
            return false;
        }
        if !phase1 {
            for p in 0..self.m {
                cb[p] = self.cost[self.head[p]];
            }
        }
        self.compute_duals(&cb);
        for j in 0..self.x.len() {
            if self.is_basic(j) || self.lb[j] == self.ub[j] {
                continue;
            }
            let cj = if phase1 { 0.0 } else { self.cost[j] };
            let dj = self.reduced_cost(j, cj);
            if (dj < -DUAL_TOL && self.x[j] < self.ub[j]) || (dj > DUAL_TOL && self.x[j] > self.lb[j]) {
                return false;
            }
        }
        true
    }

    fn finish_primal(&mut self, phase1: bool) -> LpOutcome {
        if phase1 {
            LpOutcome::Infeasible
        } else {
            self.snap_basics();
            LpOutcome::Optimal
        }
    }

    /// Basic values within tolerance of a bound are placed on it.
    fn snap_basics(&mut self) {
        for &j in &self.head {
            let v = self.x[j];
            if v < self.lb[j] {
                self.x[j] = self.lb[j];
            } else if v > self.ub[j] {
                self.x[j] = self.ub[j];
            }
        }
    }

    fn apply_step(&mut self, enter: usize, dir: f64, theta: f64) {
        if theta == 0.0 {
            return;
        }
        self.x[enter] += dir * theta;
        for p in 0..self.m {
            let a = self.alpha[p];
            if a != 0.0 {
                let j = self.head[p];
                self.x[j] -= dir * theta * a;
            }
        }
    }

    /// Harris two-pass ratio test for the primal simplex.
    fn primal_ratio(&self, enter: usize, dir: f64, phase1: bool, bland: bool) -> RatioResult {
        // Pass 1: relaxed step bound.
        let mut theta_max = f64::INFINITY;
        let range = self.ub[enter] - self.lb[enter];
        for p in 0..self.m {
            let a = self.alpha[p];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            if let Some((dist, _)) = self.block_distance(p, -dir * a, phase1) {
                let rate = a.abs();
                theta_max = theta_max.min((dist + PRIMAL_TOL) / rate);
            }
        }
        if range.is_finite() && range <= theta_max {
            return RatioResult::BoundFlip(range);
        }
        if theta_max == f64::INFINITY {
            return RatioResult::Unbounded;
        }

        // Pass 2: largest pivot among candidates within the relaxed bound.
        let mut chosen = NONE;
        let mut chosen_alpha = 0.0;
        let mut chosen_theta = 0.0;
        let mut chosen_value = 0.0;
        for p in 0..self.m {
            let a = self.alpha[p];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            if let Some((dist, bound)) = self.block_distance(p, -dir * a, phase1) {
                let ratio = dist / a.abs();
                if ratio <= theta_max {
                    let better = if bland {
                        chosen == NONE || ratio < chosen_theta - PRIMAL_TOL
                            || (ratio <= chosen_theta + PRIMAL_TOL && self.head[p] < self.head[chosen])
                    } else {
                        a.abs() > chosen_alpha
                    };
                    if better {
                        chosen = p;
                        chosen_alpha = a.abs();
                        chosen_theta = ratio;
                        chosen_value = bound;
                    }
                }
            }
        }
        RatioResult::Pivot { pos: chosen, theta: chosen_theta.max(0.0), leave_value: chosen_value }
    }

    /// Distance a basic variable can travel at `rate` (signed change per
    /// unit step) before blocking, and the bound it stops at.
    fn block_distance(&self, p: usize, rate: f64, phase1: bool) -> Option<(f64, f64)> {
        let j = self.head[p];
        let (v, l, u) = (self.x[j], self.lb[j], self.ub[j]);
        if rate < 0.0 {
            if phase1 && v > u + PRIMAL_TOL {
                Some((v - u, u))
            } else if phase1 && v < l - PRIMAL_TOL {
                None
            } else if l.is_finite() {
                Some(((v - l).max(0.0), l))
            } else {
                None
            }
        } else if phase1 && v < l - PRIMAL_TOL {
            Some((l - v, l))
        } else if phase1 && v > u + PRIMAL_TOL {
            None
        } else if u.is_finite() {
            Some(((u - v).max(0.0), u))
        } else {
            None
        }
    }

    /// Dual simplex from a dual-feasible basis.
    pub fn dual(&mut self) -> LpOutcome {
        self.call_iterations = 0;
        let nt = self.x.len();
        let mut cb = vec![0.0; self.m];
        let mut rho = vec![0.0; self.m];
        let mut row_alpha = vec![0.0; nt];
        let mut first = true;

        loop {
            if self.factor.updates() >= self.opts.refactor_interval {
                self.refresh();
            }
            for p in 0..self.m {
                cb[p] = self.cost[self.head[p]];
            }
            self.compute_duals(&cb);
            for j in 0..nt {
                self.d[j] = if self.is_basic(j) { 0.0 } else { self.reduced_cost(j, self.cost[j]) };
            }
            if first {
                first = false;
                for j in 0..nt {
                    if self.is_basic(j) || self.lb[j] == self.ub[j] {
                        continue;
                    }
                    let dj = self.d[j];
                    let x = self.x[j];
                    if (dj < -DUAL_TOL && x < self.ub[j]) || (dj > DUAL_TOL && x > self.lb[j]) {
                        return LpOutcome::NotDualFeasible;
                    }
                }
            }

            // Leaving row: largest bound violation.
            let mut leave_pos = NONE;
            let mut worst = 0.0;
            for p in 0..self.m {
                let viol = self.infeasibility(self.head[p]);
                if viol > worst {
                    worst = viol;
                    leave_pos = p;
                }
            }
            if leave_pos == NONE {
                self.snap_basics();
                return LpOutcome::Optimal;
            }
            if self.max_iterations_reached() {
                return LpOutcome::IterationLimit;
            }
            self.iterations += 1;
            self.call_iterations += 1;

            let leave = self.head[leave_pos];
            let below = self.x[leave] < self.lb[leave];
            let target = if below { self.lb[leave] } else { self.ub[leave] };

            self.work_pos.iter_mut().for_each(|v| *v = 0.0);
            self.work_pos[leave_pos] = 1.0;
            self.factor.btran(&mut self.work_pos, &mut rho);
            for j in 0..nt {
                if self.is_basic(j) || self.lb[j] == self.ub[j] {
                    row_alpha[j] = 0.0;
                    continue;
                }
                let mut s = 0.0;
                for &(i, a) in self.column(j) {
                    s += a * rho[i];
                }
                row_alpha[j] = s;
            }

            // Harris ratio test on the reduced costs.
            let eligible = |a: f64, x: f64, l: f64, u: f64| -> bool {
                let (can_up, can_down) = (x < u, x > l);
                if below {
                    (a < -PIVOT_TOL && can_up) || (a > PIVOT_TOL && can_down)
                } else {
                    (a > PIVOT_TOL && can_up) || (a < -PIVOT_TOL && can_down)
                }
            };
            let mut bound = f64::INFINITY;
            for j in 0..nt {
                let a = row_alpha[j];
                if a == 0.0 || !eligible(a, self.x[j], self.lb[j], self.ub[j]) {
                    continue;
                }
                bound = bound.min((self.d[j].abs() + DUAL_TOL) / a.abs());
            }
            if bound == f64::INFINITY {
                return LpOutcome::Infeasible;
            }
            let mut enter = NONE;
            let mut enter_alpha = 0.0;
            for j in 0..nt {
                let a = row_alpha[j];
                if a == 0.0 || !eligible(a, self.x[j], self.lb[j], self.ub[j]) {
                    continue;
                }
                if self.d[j].abs() / a.abs() <= bound && a.abs() > enter_alpha {
                    enter = j;
                    enter_alpha = a.abs();
                }
            }

            self.ftran_column(enter);
            let a_r = self.alpha[leave_pos];
            if a_r.abs() <= PIVOT_TOL {
                // Column and row disagree: refactor and try again.
                self.refresh();
                continue;
            }
            let theta = (self.x[leave] - target) / a_r;
            self.x[enter] += theta;
            for p in 0..self.m {
                let a = self.alpha[p];
                if a != 0.0 {
                    let j = self.head[p];
                    self.x[j] -= theta * a;
                }
            }
            self.pivot(leave_pos, enter);
            self.x[leave] = target;
        }
    }
}

enum RatioResult {
    Unbounded,
    BoundFlip(f64),
    Pivot { pos: usize, theta: f64, leave_value: f64 },
}

fn nearest_bound(v: f64, l: f64, u: f64) -> f64 {
    match (l.is_finite(), u.is_finite()) {
        (true, true) => {
            if (v - l).abs() <= (u - v).abs() {
                l
            } else {
                u
            }
        }
        (true, false) => l,
        (false, true) => u,
        (false, false) => 0.0,
    }
}
