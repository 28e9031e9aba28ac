//! Best-first branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::model::{Model, ModelError};
use crate::simplex::{Basis, Engine, LpOutcome, Snapshot};
use crate::{LpOptions, SolveReport, SolveStatus, Solver};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpOptions {
    /// Nodes solved before giving up and returning the incumbent.
    pub node_limit: usize,
    pub integrality_tol: f64,
    /// Nodes whose bound is within this relative distance of the incumbent
    /// are pruned. Zero means exact search up to round-off.
    pub relative_gap: f64,
    /// Search the optimal face for an incumbent at the root and then
    /// every this many nodes (0 disables).
    pub heuristic_interval: usize,
    pub branching: BranchRule,
    /// Rounds of Gomory mixed-integer cuts added at the root (0 disables).
    pub cut_rounds: usize,
    pub lp: LpOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchRule {
    /// Fractional part closest to one half.
    #[default]
    MostFractional,
    /// Lowest-index fractional variable. On models whose integers follow a
    /// time axis this resolves commitments in order and tends to need far
    /// fewer nodes on degenerate relaxations.
    FirstFractional,
    /// Pseudocost branching on the product of estimated bound gains, with
    /// strong branching until a variable has a few observations each way.
    Reliability,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self { node_limit: 200_000, integrality_tol: 1e-6, relative_gap: 0.0, heuristic_interval: 25, branching: BranchRule::MostFractional, cut_rounds: 10, lp: LpOptions::default() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BranchAndBound {
    pub options: MilpOptions,
}

impl BranchAndBound {
    pub fn new(options: MilpOptions) -> Self {
        Self { options }
    }
}

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    changes: Vec<(usize, f64, f64)>,
    basis: Basis,
    /// Branch that created this node, for pseudocost updates: position in
    /// the integer list, direction (up = true), distance moved and the
    /// parent objective.
    origin: Option<(usize, bool, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap pops the greatest: lowest bound, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

impl Default for Node {
    fn default() -> Self {
        Node { bound: f64::NEG_INFINITY, depth: 0, seq: 0, changes: Vec::new(), basis: Basis { head: Vec::new(), at_upper: Vec::new() }, origin: None }
    }
}

fn prune_tol(incumbent: f64, gap: f64) -> f64 {
    (gap * incumbent.abs()).max(1e-9 * incumbent.abs().max(1.0))
}

fn reoptimize(engine: &mut Engine) -> LpOutcome {
    match engine.dual() {
        LpOutcome::NotDualFeasible => engine.primal(),
        other => other,
    }
}

impl Solver for BranchAndBound {
    fn solve(&self, model: &Model) -> Result<SolveReport, ModelError> {
        model.validate()?;
        let start = Instant::now();
        let opts = self.options;
        let n = model.num_vars();
        let mut engine = Engine::new(model, opts.lp.engine());
        engine.refresh();

        let report = |status, x: Vec<f64>, iterations, nodes, incumbents| {
            let objective = if x.is_empty() { f64::INFINITY } else { model.objective_value(&x) };
            SolveReport { status, objective, x, iterations, nodes, incumbents, duals: Vec::new(), basis: None, elapsed: start.elapsed() }
        };

        match engine.primal() {
            LpOutcome::Optimal => {}
            LpOutcome::Infeasible => return Ok(report(SolveStatus::Infeasible, Vec::new(), engine.iterations, 1, Vec::new())),
            LpOutcome::Unbounded => return Ok(report(SolveStatus::Unbounded, Vec::new(), engine.iterations, 1, Vec::new())),
            _ => return Ok(report(SolveStatus::IterationLimit, Vec::new(), engine.iterations, 1, Vec::new())),
        }

        let ints: Vec<usize> = model.integer_vars().collect();
        let work = if opts.cut_rounds > 0 && !ints.is_empty() {
            let (work, cut_engine) = root_cuts(model, engine, &ints, opts);
            engine = cut_engine;
            std::borrow::Cow::Owned(work)
        } else {
            std::borrow::Cow::Borrowed(model)
        };
        let original = model;
        let model = work.as_ref();
        let shifts = free_shifts(model, &ints);
        let (lower, upper) = (model.lower(), model.upper());
        let mut pseudo = Pseudocosts::new(ints.len());

        let mut heap = BinaryHeap::new();
        heap.push(Node { bound: engine.objective(), basis: engine.basis(), ..Node::default() });
        let mut seq = 1usize;
        let mut incumbent: Option<(f64, Vec<f64>)> = None;
        let mut incumbents = Vec::new();
        let mut incumbent_basis = engine.basis();
        let mut nodes = 0usize;
        let mut complete = true;

        while let Some(node) = heap.pop() {
            if let Some((inc, _)) = &incumbent {
                if node.bound >= inc - prune_tol(*inc, opts.relative_gap) {
                    continue;
                }
            }
            if nodes >= opts.node_limit {
                complete = false;
                break;
            }
            nodes += 1;

            for &v in &ints {
                engine.set_bounds(v, lower[v], upper[v]);
            }
            for &(v, l, u) in &node.changes {
                engine.set_bounds(v, l, u);
            }
            engine.load_basis(&node.basis);
            engine.refresh();
            match reoptimize(&mut engine) {
                LpOutcome::Optimal => {}
                LpOutcome::Infeasible => continue,
                LpOutcome::Unbounded => {
                    return Ok(report(SolveStatus::Unbounded, Vec::new(), engine.iterations, nodes, incumbents))
                }
                _ => {
                    complete = false;
                    continue;
                }
            }
            let obj = engine.objective();
            if let Some((k, up, dist, parent)) = node.origin {
                pseudo.record(k, up, (obj - parent) / dist);
            }
            if let Some((inc, _)) = &incumbent {
                if obj >= inc - prune_tol(*inc, opts.relative_gap) {
                    continue;
                }
            }

            // Branch on the repaired point, where whatever can move to an
            // integer for free already has.
            let point = repair(&engine, &ints, &shifts, opts.integrality_tol);
            let branch_var = pick_branch(&point, &ints, opts.branching, opts.integrality_tol);

            match branch_var {
                None => {
                    // Fix the integers exactly and re-solve so the reported
                    // point satisfies the linking rows without round-off.
                    if let Some(value) = polish(&mut engine, &ints, &point) {
                        if incumbent.as_ref().is_none_or(|(inc, _)| value < *inc) {
                            incumbents.push(value);
                            incumbent = Some((value, engine.x[..n].to_vec()));
                            incumbent_basis = engine.basis();
                        }
                    }
                }
                Some(v) => {
                    let basis = engine.basis();
                    let mut changes = node.changes.clone();
                    // Reduced-cost fixing: a binary resting on a bound whose
                    // move to the other bound would push the bound past the
                    // incumbent stays put in this subtree.
                    if let Some((inc, _)) = &incumbent {
                        let slack = inc - prune_tol(*inc, opts.relative_gap) - obj;
                        let rc = engine.reduced_costs(&ints);
                        for (&j, &d) in ints.iter().zip(&rc) {
                            if j == v || !engine.is_nonbasic(j) || engine.lb[j] == engine.ub[j] {
                                continue;
                            }
                            let x = engine.x[j];
                            let at_lower = x == engine.lb[j] && d > 0.0 && d * (engine.ub[j] - x) >= slack;
                            let at_upper = x == engine.ub[j] && d < 0.0 && -d * (x - engine.lb[j]) >= slack;
                            if at_lower || at_upper {
                                changes.push((j, x, x));
                            }
                        }
                    }
                    let cutoff = incumbent.as_ref().map_or(f64::INFINITY, |(inc, _)| inc - prune_tol(*inc, opts.relative_gap));
                    let choice = if opts.branching == BranchRule::Reliability {
                        reliability(&mut engine, &point, &ints, &mut pseudo, &node, model, obj, cutoff, opts.integrality_tol)
                    } else {
                        Choice::Branch { k: ints.iter().position(|&j| j == v).unwrap_or(0), down: obj, up: obj }
                    };
                    if opts.heuristic_interval > 0 && (nodes - 1).is_multiple_of(opts.heuristic_interval) {
                        let cutoff = incumbent.as_ref().map_or(f64::INFINITY, |(inc, _)| *inc);
                        let found = face_search(&mut engine, &ints, &shifts, cutoff, opts.integrality_tol).or_else(|| {
                            // Diving is dearer, so it runs only until there is
                            // an incumbent and then at a quarter of the rate.
                            let due = incumbent.is_none() || (nodes - 1).is_multiple_of(4 * opts.heuristic_interval);
                            if !due {
                                return None;
                            }
                            engine.load_basis(&basis);
                            for &v in &ints {
                                engine.set_bounds(v, lower[v], upper[v]);
                            }
                            for &(v, l, u) in &changes {
                                engine.set_bounds(v, l, u);
                            }
                            engine.refresh();
                            if reoptimize(&mut engine) != LpOutcome::Optimal {
                                return None;
                            }
                            dive(&mut engine, &ints, &shifts, cutoff, opts.integrality_tol)
                        });
                        if let Some(value) = found {
                            incumbents.push(value);
                            incumbent = Some((value, engine.x[..n].to_vec()));
                            incumbent_basis = engine.basis();
                        }
                    }
                    let depth = node.depth + 1;
                    match choice {
                        Choice::Prune => {}
                        Choice::Fix(fixes, bound) => {
                            changes.extend(fixes);
                            heap.push(Node { bound, depth, seq, changes, basis, origin: None });
                            seq += 1;
                        }
                        Choice::Branch { k, down: down_bound, up: up_bound } => {
                            let v = ints[k];
                            let val = point[v];
                            let (lo, hi) = node.bounds_of(v, lower[v], upper[v]);
                            let frac = val - val.floor();
                            let mut down = changes.clone();
                            down.push((v, lo, val.floor()));
                            let mut up = changes;
                            up.push((v, val.ceil(), hi));
                            let children = [(down, down_bound, false, frac), (up, up_bound, true, 1.0 - frac)];
                            for (changes, bound, dir, dist) in children {
                                let origin = Some((k, dir, dist, obj));
                                heap.push(Node { bound, depth, seq, changes, basis: basis.clone(), origin });
                                seq += 1;
                            }
                        }
                    }
                }
            }
        }

        let status = match (&incumbent, complete) {
            (Some(_), true) => SolveStatus::Optimal,
            (Some(_), false) => SolveStatus::NodeLimit,
            (None, true) => SolveStatus::Infeasible,
            (None, false) => SolveStatus::NodeLimit,
        };
        let mut x = incumbent.map(|(_, x)| x).unwrap_or_default();
        if !x.is_empty() && model.num_vars() > n {
            // Cuts are redundant once the integers are fixed; re-solving
            // without them avoids their round-off in the reported point.
            if let Some(clean) = resolve_without_cuts(original, &x, &ints, &incumbent_basis, model.num_vars(), opts) {
                x = clean;
            }
        }
        Ok(report(status, x, engine.iterations, nodes, incumbents))
    }
}

/// For each integer variable, the rows it appears in paired with a
/// zero-cost continuous column that appears in that row alone. Empty when
/// some row has no such partner.
type Shifts = Vec<Vec<(f64, usize, f64)>>;

fn free_shifts(model: &Model, ints: &[usize]) -> Shifts {
    let n = model.num_vars();
    let cost = model.objective();
    let mut partner = vec![None; model.num_rows()];
    for k in 0..n {
        if model.is_integer(k) || cost[k] != 0.0 {
            continue;
        }
        if let [(r, b)] = model.column(k) {
            partner[*r].get_or_insert((k, *b));
        }
    }
    ints.iter()
        .map(|&j| {
            if cost[j] != 0.0 {
                return Vec::new();
            }
            let col = model.column(j);
            let pairs: Vec<_> = col.iter().filter_map(|&(r, a)| partner[r].map(|(k, b)| (a, k, b))).collect();
            if pairs.len() == col.len() {
                pairs
            } else {
                Vec::new()
            }
        })
        .collect()
}

/// Copy of the engine's point in which each fractional integer that can be
/// moved to its nearest (else farther) integer by adjusting only its free
/// partners has been moved. The objective is unchanged.
fn repair(engine: &Engine, ints: &[usize], shifts: &Shifts, tol: f64) -> Vec<f64> {
    let mut x = engine.x[..engine.num_structural()].to_vec();
    for (&j, pairs) in ints.iter().zip(shifts) {
        let v = x[j];
        let frac = v - v.floor();
        if pairs.is_empty() || frac.min(1.0 - frac) <= tol {
            continue;
        }
        let (near, far) = if frac < 0.5 { (v.floor(), v.ceil()) } else { (v.ceil(), v.floor()) };
        for target in [near, far] {
            if target < engine.lb[j] || target > engine.ub[j] {
                continue;
            }
            let delta = target - v;
            let fits = pairs.iter().all(|&(a, k, b)| {
                let nk = x[k] - a * delta / b;
                nk >= engine.lb[k] - tol && nk <= engine.ub[k] + tol
            });
            if fits {
                for &(a, k, b) in pairs {
                    x[k] = (x[k] - a * delta / b).clamp(engine.lb[k], engine.ub[k]);
                }
                x[j] = target;
                break;
            }
        }
    }
    x
}

/// Branching variable under `rule`, lowest index on ties.
fn pick_branch(x: &[f64], ints: &[usize], rule: BranchRule, tol: f64) -> Option<usize> {
    let mut best = None;
    let mut best_score = f64::INFINITY;
    for &v in ints {
        let val = x[v];
        let frac = val - val.floor();
        if frac.min(1.0 - frac) <= tol {
            continue;
        }
        let score = match rule {
            BranchRule::MostFractional => (frac - 0.5).abs(),
            BranchRule::FirstFractional | BranchRule::Reliability => return Some(v),
        };
        if score < best_score {
            best_score = score;
            best = Some(v);
        }
    }
    best
}

/// Fixes every integer variable at its rounded value and re-solves.
fn polish(engine: &mut Engine, ints: &[usize], point: &[f64]) -> Option<f64> {
    for &v in ints {
        let r = point[v].round();
        engine.set_bounds(v, r, r);
    }
    engine.refresh();
    (reoptimize(engine) == LpOutcome::Optimal).then(|| engine.objective())
}

/// Searches the optimal face of the current relaxation for an integral
/// point. Nonbasic columns with a nonzero reduced cost are pinned, so every
/// point reached keeps the node objective; a secondary objective then pushes
/// the fractional integers toward their nearest integer, and the push is
/// reversed for those that stay fractional. On success the engine holds the
/// polished point and its objective is returned.
fn face_search(engine: &mut Engine, ints: &[usize], shifts: &Shifts, cutoff: f64, tol: f64) -> Option<f64> {
    const ROUNDS: usize = 4;
    if engine.objective() >= cutoff {
        return None;
    }
    let (lb, ub, cost) = (engine.lb.clone(), engine.ub.clone(), engine.costs().to_vec());
    let d = engine.all_reduced_costs();
    let scale = cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
    for j in 0..d.len() {
        if engine.is_nonbasic(j) && lb[j] < ub[j] && d[j].abs() > 1e-9 * scale {
            let x = engine.x[j];
            engine.set_bounds(j, x, x);
        }
    }
    let mut push = vec![0.0; d.len()];
    let mut found = None;
    for round in 0..ROUNDS {
        let point = repair(engine, ints, shifts, tol);
        let mut any = false;
        for &j in ints {
            let frac = point[j] - point[j].floor();
            if frac.min(1.0 - frac) > tol {
                any = true;
                let toward_floor = (frac < 0.5) == (round == 0);
                push[j] = if toward_floor { 1.0 } else { -1.0 };
            }
        }
        if !any {
            found = Some(point);
            break;
        }
        engine.set_costs(push.clone());
        if engine.primal() != LpOutcome::Optimal {
            break;
        }
    }
    engine.set_costs(cost);
    engine.lb = lb;
    engine.ub = ub;
    let value = polish(engine, ints, &found?)?;
    (value < cutoff).then_some(value)
}

/// Average objective gain per unit of distance, for each integer variable
/// and direction.
struct Pseudocosts {
    sum: Vec<[f64; 2]>,
    count: Vec<[u32; 2]>,
    total: [f64; 2],
    total_count: [u32; 2],
}

impl Pseudocosts {
    /// Observations each way before a variable's estimate is trusted.
    const RELIABLE: u32 = 4;

    fn new(len: usize) -> Self {
        Pseudocosts { sum: vec![[0.0; 2]; len], count: vec![[0; 2]; len], total: [0.0; 2], total_count: [0; 2] }
    }

    fn record(&mut self, k: usize, up: bool, rate: f64) {
        if !rate.is_finite() {
            return;
        }
        let rate = rate.max(0.0);
        let d = up as usize;
        self.sum[k][d] += rate;
        self.count[k][d] += 1;
        self.total[d] += rate;
        self.total_count[d] += 1;
    }

    fn rate(&self, k: usize, d: usize) -> f64 {
        if self.count[k][d] > 0 {
            self.sum[k][d] / self.count[k][d] as f64
        } else if self.total_count[d] > 0 {
            self.total[d] / self.total_count[d] as f64
        } else {
            1.0
        }
    }

    fn reliable(&self, k: usize) -> bool {
        self.count[k].iter().all(|&c| c >= Self::RELIABLE)
    }
}

enum Choice {
    /// Branch on `ints[k]` with the given child bounds.
    Branch { k: usize, down: f64, up: f64 },
    /// One side of some variables is dead: re-solve with these bounds.
    Fix(Vec<(usize, f64, f64)>, f64),
    /// Both sides of some variable are dead.
    Prune,
}

fn score(obj: f64, down: f64, up: f64) -> f64 {
    let eps = 1e-9 * obj.abs().max(1.0);
    (down - obj).max(eps) * (up - obj).max(eps)
}

/// Bound of the node with `j` restricted to `[lo, hi]`, solved from the
/// snapshot's basis; `+inf` when infeasible, `None` when the solve stopped.
fn trial(engine: &mut Engine, snap: &Snapshot, j: usize, lo: f64, hi: f64) -> Option<f64> {
    engine.restore(snap);
    engine.set_bounds(j, lo, hi);
    engine.update_primal();
    match reoptimize(engine) {
        LpOutcome::Optimal => Some(engine.objective()),
        LpOutcome::Infeasible => Some(f64::INFINITY),
        _ => None,
    }
}

/// Reliability branching at a solved node. Candidates are visited in order
/// of their pseudocost score; unreliable ones are strong branched until the
/// best score has not improved for a while. The engine is left as found.
#[allow(clippy::too_many_arguments)]
fn reliability(
    engine: &mut Engine,
    point: &[f64],
    ints: &[usize],
    pseudo: &mut Pseudocosts,
    node: &Node,
    model: &Model,
    obj: f64,
    cutoff: f64,
    tol: f64,
) -> Choice {
    const MAX_TRIALS: usize = 16;
    const LOOKAHEAD: usize = 8;
    let mut cands: Vec<(usize, f64, f64)> = Vec::new();
    for (k, &j) in ints.iter().enumerate() {
        let frac = point[j] - point[j].floor();
        if frac.min(1.0 - frac) > tol {
            let est = score(obj, obj + pseudo.rate(k, 0) * frac, obj + pseudo.rate(k, 1) * (1.0 - frac));
            cands.push((k, frac, est));
        }
    }
    cands.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));

    let snap = engine.snapshot();
    let (lower, upper) = (model.lower(), model.upper());
    let mut best = (cands[0].0, obj, obj);
    let mut best_score = f64::NEG_INFINITY;
    let (mut trials, mut stale) = (0, 0);
    let mut fixes = Vec::new();
    let mut fixed_bound = obj;
    let mut dead = false;
    for &(k, frac, est) in &cands {
        let (mut down, mut up) = (obj, obj);
        let mut s = est;
        if !pseudo.reliable(k) && trials < MAX_TRIALS && stale < LOOKAHEAD {
            trials += 1;
            let j = ints[k];
            let (lo, hi) = node.bounds_of(j, lower[j], upper[j]);
            let val = point[j];
            let d = trial(engine, &snap, j, lo, val.floor());
            let u = trial(engine, &snap, j, val.ceil(), hi);
            if let Some(d) = d.filter(|d| d.is_finite()) {
                pseudo.record(k, false, (d - obj) / frac);
            }
            if let Some(u) = u.filter(|u| u.is_finite()) {
                pseudo.record(k, true, (u - obj) / (1.0 - frac));
            }
            down = d.unwrap_or(obj).max(obj);
            up = u.unwrap_or(obj).max(obj);
            match (down >= cutoff, up >= cutoff) {
                (true, true) => {
                    dead = true;
                    break;
                }
                (true, false) => {
                    fixes.push((j, val.ceil(), hi));
                    fixed_bound = fixed_bound.max(up);
                    continue;
                }
                (false, true) => {
                    fixes.push((j, lo, val.floor()));
                    fixed_bound = fixed_bound.max(down);
                    continue;
                }
                (false, false) => s = score(obj, down, up),
            }
        }
        if s > best_score {
            best_score = s;
            best = (k, down, up);
            stale = 0;
        } else {
            stale += 1;
        }
    }
    engine.restore(&snap);
    if dead {
        Choice::Prune
    } else if !fixes.is_empty() {
        Choice::Fix(fixes, fixed_bound)
    } else {
        Choice::Branch { k: best.0, down: best.1, up: best.2 }
    }
}

/// Adds rounds of Gomory mixed-integer cuts to a copy of `model`, each
/// re-solved from the previous basis with the new cut slacks basic. Stops
/// early when a round moves the bound by less than a part in 1e6. Returns
/// the extended model and an engine at its optimal root.
fn root_cuts(model: &Model, mut engine: Engine, ints: &[usize], opts: MilpOptions) -> (Model, Engine) {
    const MAX_CUTS: usize = 50;
    let mut work = model.clone();
    let mut is_int = vec![false; model.num_vars()];
    for &j in ints {
        is_int[j] = true;
    }
    for _ in 0..opts.cut_rounds {
        let before = engine.objective();
        let mut cuts = gomory_cuts(&mut engine, &is_int);
        if cuts.is_empty() {
            break;
        }
        cuts.sort_by(|a, b| b.2.total_cmp(&a.2));
        cuts.truncate(MAX_CUTS);
        let basis = engine.basis();
        let (n_old, m_old) = (work.num_vars(), work.num_rows());
        let mut next = work.clone();
        for (k, (terms, rhs, _)) in cuts.iter().enumerate() {
            let s = next.add_var(format!("cut_slack_{}", m_old + k), 0.0, 0.0, f64::INFINITY);
            let mut row = terms.clone();
            row.push((s, -1.0));
            next.add_eq(format!("cut_{}", m_old + k), &row, *rhs);
        }
        // Old columns keep their status; auxiliaries shift past the new
        // slacks, which enter the basis.
        let added = cuts.len();
        let n_new = n_old + added;
        let remap = |j: usize| if j < n_old { j } else { j + added };
        let mut head: Vec<usize> = basis.head.iter().map(|&j| remap(j)).collect();
        head.extend(n_old..n_new);
        let mut at_upper = vec![false; n_new + m_old + added];
        for (j, &u) in basis.at_upper.iter().enumerate() {
            at_upper[remap(j)] = u;
        }
        let mut fresh = Engine::new(&next, opts.lp.engine());
        fresh.iterations = engine.iterations;
        fresh.load_basis(&Basis { head, at_upper });
        fresh.refresh();
        if reoptimize(&mut fresh) != LpOutcome::Optimal {
            break;
        }
        let gain = fresh.objective() - before;
        work = next;
        engine = fresh;
        if gain <= 1e-6 * before.abs().max(1.0) {
            break;
        }
    }
    (work, engine)
}

/// Solves `model` with its integers fixed at their values in `x`, starting
/// from `basis` of the cut-extended model whose column count is `n_work`.
fn resolve_without_cuts(model: &Model, x: &[f64], ints: &[usize], basis: &Basis, n_work: usize, opts: MilpOptions) -> Option<Vec<f64>> {
    let (n, m) = (model.num_vars(), model.num_rows());
    let mut head: Vec<usize> = basis
        .head
        .iter()
        .filter_map(|&j| if j < n { Some(j) } else if j >= n_work && j - n_work < m { Some(n + j - n_work) } else { None })
        .collect();
    head.truncate(m);
    let mut used = vec![false; n + m];
    for &j in &head {
        used[j] = true;
    }
    let mut spare = (n..n + m).filter(|&j| !used[j]);
    while head.len() < m {
        head.push(spare.next()?);
    }
    let mut at_upper = vec![false; n + m];
    at_upper[..n].copy_from_slice(&basis.at_upper[..n]);
    let mut engine = Engine::new(model, opts.lp.engine());
    for &v in ints {
        let r = x[v].round();
        engine.set_bounds(v, r, r);
    }
    engine.load_basis(&Basis { head, at_upper });
    engine.refresh();
    (reoptimize(&mut engine) == LpOutcome::Optimal).then(|| engine.x[..n].to_vec())
}

/// Sparse terms, rhs and efficacy of a `terms . x >= rhs` cut.
type Cut = (Vec<(usize, f64)>, f64, f64);

/// Gomory mixed-integer cuts from the tableau rows of fractional basic
/// integers, as `(terms, rhs, efficacy)` for `terms . x >= rhs`. Rows that
/// would involve a free or auxiliary nonbasic column, or whose coefficients
/// span too wide a range, are skipped.
fn gomory_cuts(engine: &mut Engine, is_int: &[bool]) -> Vec<Cut> {
    const MIN_FRAC: f64 = 0.01;
    const MAX_DYNAMISM: f64 = 1e6;
    let n = engine.num_structural();
    let mut cuts = Vec::new();
    for p in 0..engine.num_rows() {
        let i = engine.basic_at(p);
        if i >= n || !is_int.get(i).copied().unwrap_or(false) {
            continue;
        }
        let f0 = engine.x[i] - engine.x[i].floor();
        if !(MIN_FRAC..=1.0 - MIN_FRAC).contains(&f0) {
            continue;
        }
        let row = engine.tableau_row(p);
        let mut terms = Vec::new();
        let mut rhs = 1.0;
        let mut usable = true;
        for (j, &a) in row.iter().enumerate() {
            let (l, u, x) = (engine.lb[j], engine.ub[j], engine.x[j]);
            // Entries this small are round-off in the tableau.
            if a.abs() < 1e-11 || l == u {
                continue;
            }
            let at_lower = x == l;
            if j >= n || !(at_lower || x == u) {
                usable = false;
                break;
            }
            let abar = if at_lower { a } else { -a };
            let pi = if is_int.get(j).copied().unwrap_or(false) {
                let fj = abar - abar.floor();
                if fj <= f0 { fj / f0 } else { (1.0 - fj) / (1.0 - f0) }
            } else if abar > 0.0 {
                abar / f0
            } else {
                -abar / (1.0 - f0)
            };
            if pi <= 0.0 {
                continue;
            }
            if at_lower {
                terms.push((j, pi));
                rhs += pi * l;
            } else {
                terms.push((j, -pi));
                rhs -= pi * u;
            }
        }
        if !usable || terms.is_empty() {
            continue;
        }
        // Drop terms too small to matter next to the largest, relaxing the
        // right-hand side by their largest possible contribution. A small
        // term on an unbounded column rejects the cut.
        let big = terms.iter().fold(0.0f64, |m, t| m.max(t.1.abs()));
        let mut kept = Vec::with_capacity(terms.len());
        for (j, c) in terms {
            if c.abs() * MAX_DYNAMISM >= big {
                kept.push((j, c));
            } else if (engine.ub[j] - engine.lb[j]).is_finite() {
                rhs -= c.abs() * (engine.ub[j] - engine.lb[j]);
            } else {
                usable = false;
                break;
            }
        }
        if !usable {
            continue;
        }
        let mut terms = kept;
        for t in &mut terms {
            t.1 /= big;
        }
        rhs /= big;
        // A little slack against round-off in the tableau.
        rhs -= 1e-9 * rhs.abs().max(1.0);
        let lhs: f64 = terms.iter().map(|&(j, c)| c * engine.x[j]).sum();
        let norm = terms.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
        cuts.push((terms, rhs, (rhs - lhs) / norm));
    }
    cuts
}

/// Fractional diving: repeatedly fixes the integer closest to integrality
/// at its nearest value (the other one if that fails) and re-solves, until
/// the point is integral. On success the engine holds the polished point.
fn dive(engine: &mut Engine, ints: &[usize], shifts: &Shifts, cutoff: f64, tol: f64) -> Option<f64> {
    let (lb, ub) = (engine.lb.clone(), engine.ub.clone());
    let mut found = None;
    for _ in 0..=ints.len() {
        if engine.objective() >= cutoff {
            break;
        }
        let point = repair(engine, ints, shifts, tol);
        let pick = ints
            .iter()
            .map(|&j| (j, point[j] - point[j].floor()))
            .filter(|&(_, f)| f.min(1.0 - f) > tol)
            .min_by(|a, b| a.1.min(1.0 - a.1).total_cmp(&b.1.min(1.0 - b.1)));
        let Some((j, frac)) = pick else {
            found = Some(point);
            break;
        };
        let v = point[j];
        let (near, far) = if frac < 0.5 { (v.floor(), v.ceil()) } else { (v.ceil(), v.floor()) };
        let snap = engine.snapshot();
        let mut ok = false;
        for r in [near, far] {
            engine.restore(&snap);
            engine.set_bounds(j, r, r);
            engine.update_primal();
            if reoptimize(engine) == LpOutcome::Optimal && engine.objective() < cutoff {
                ok = true;
                break;
            }
        }
        if !ok {
            break;
        }
    }
    engine.lb = lb;
    engine.ub = ub;
    let value = polish(engine, ints, &found?)?;
    (value < cutoff).then_some(value)
}

impl Node {
    /// Current bounds of `v` at this node.
    fn bounds_of(&self, v: usize, lower: f64, upper: f64) -> (f64, f64) {
        self.changes.iter().rev().find(|c| c.0 == v).map_or((lower, upper), |c| (c.1, c.2))
    }
}
