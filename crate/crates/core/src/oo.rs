//! Two-phase ordinal optimisation over (battery, PV) designs.
//!
//! Phase 1 ranks `N` sampled designs by yearly cost under the LP dispatch.
//! Phase 2 re-evaluates the best `s` of them with the MILP dispatch and
//! re-ranks. `N` follows from the chance of sampling a top-alpha design and
//! `s` from the alignment probability between the phase-1 top set and the
//! truly good set.

use serde::{Deserialize, Serialize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

use crate::dispatch::Design;
use crate::economics::{yearly_cost, CostBreakdown, CostModel};
use crate::simulate::{Method, Simulator};
use crate::timeseries::HourlyTrace;

#[derive(Debug, Error, PartialEq)]
pub enum OOError {
    #[error("{0}")]
    InvalidArgument(String),
    #[error("no s <= {n} reaches alignment probability {target}")]
    TargetUnreachable { n: usize, target: f64 },
    #[error("need at least 2 finalists, got {0}")]
    TooFewFinalists(usize),
    #[error("every design failed in phase {0}")]
    AllFailed(u8),
}

fn invalid<T>(msg: String) -> Result<T, OOError> {
    Err(OOError::InvalidArgument(msg))
}

/// Smallest `N` with `1 - (1 - alpha)^N >= confidence`.
pub fn compute_n(confidence: f64, alpha: f64) -> Result<usize, OOError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return invalid(format!("confidence {confidence} outside (0, 1)"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha {alpha} outside (0, 1)"));
    }
    let ratio = (1.0 - confidence).ln() / (1.0 - alpha).ln();
    // Absorb round-off so exact integer ratios are not bumped up.
    Ok(((ratio - 1e-9).ceil() as usize).max(1))
}

/// Probability that exactly `i` of `s` designs drawn without replacement
/// from `n` fall in a good set of size `g`.
pub fn hypergeometric_pmf(n: usize, g: usize, s: usize, i: usize) -> f64 {
    if i > g || i > s || s - i > n - g || s > n {
        return 0.0;
    }
    let (n, g, s, i) = (n as u64, g as u64, s as u64, i as u64);
    (ln_binomial(g, i) + ln_binomial(n - g, s - i) - ln_binomial(n, s)).exp()
}

/// Probability that at least `k` of the selected `s` designs are among the
/// `g` good ones, out of `n`.
pub fn alignment_probability(n: usize, g: usize, s: usize, k: usize) -> Result<f64, OOError> {
    if k < 1 || k > g.min(s) {
        return invalid(format!("need 1 <= k ({k}) <= min(g ({g}), s ({s}))"));
    }
    if g > n || s > n {
        return invalid(format!("g ({g}) and s ({s}) must not exceed N ({n})"));
    }
    let ap: f64 = (k..=g.min(s)).map(|i| hypergeometric_pmf(n, g, s, i)).sum();
    Ok(ap.clamp(0.0, 1.0))
}

/// Smallest `s` whose alignment probability reaches `target`.
pub fn compute_s(n: usize, g: usize, k: usize, target: f64) -> Result<usize, OOError> {
    if !(target > 0.0 && target < 1.0) {
        return invalid(format!("AP target {target} outside (0, 1)"));
    }
    if k < 1 || k > g || g > n {
        return invalid(format!("need 1 <= k ({k}) <= g ({g}) <= N ({n})"));
    }
    for s in k..=n {
        if alignment_probability(n, g, s, k)? >= target {
            return Ok(s);
        }
    }
    Err(OOError::TargetUnreachable { n, target })
}

/// User-facing knobs from which an [`OOPlan`] is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OOSettings {
    pub confidence: f64,
    pub alpha: f64,
    /// Good-set size as a fraction of `N`.
    pub g_fraction: f64,
    pub k: usize,
    pub ap_target: f64,
    pub n_override: Option<usize>,
    pub s_override: Option<usize>,
}

impl Default for OOSettings {
    fn default() -> Self {
        Self { confidence: 0.99, alpha: 0.05, g_fraction: 0.10, k: 1, ap_target: 0.90, n_override: None, s_override: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OOPlan {
    pub confidence: f64,
    pub alpha: f64,
    pub n: usize,
    pub g: usize,
    pub k: usize,
    pub ap_target: f64,
    pub s: usize,
    /// Alignment probability achieved by `s`.
    pub ap: f64,
}

impl OOSettings {
    pub fn resolve(&self) -> Result<OOPlan, OOError> {
        let formula_n = compute_n(self.confidence, self.alpha)?;
        let n = match self.n_override {
            Some(0) => return invalid("N must be at least 1".into()),
            Some(n) => n,
            None => formula_n,
        };
        if !(self.g_fraction > 0.0 && self.g_fraction <= 1.0) {
            return invalid(format!("g fraction {} outside (0, 1]", self.g_fraction));
        }
        let g = ((self.g_fraction * n as f64).round() as usize).clamp(1, n);
        if self.k < 1 || self.k > g {
            return invalid(format!("need 1 <= k ({}) <= g ({g})", self.k));
        }
        let s = match self.s_override {
            Some(s) if s < self.k || s > n => return invalid(format!("need k ({}) <= s ({s}) <= N ({n})", self.k)),
            Some(s) => s,
            None => compute_s(n, g, self.k, self.ap_target)?,
        };
        let ap = alignment_probability(n, g, s, self.k)?;
        if ap < self.ap_target {
            log::warn!("s = {s} gives alignment probability {ap:.4}, below the target {}", self.ap_target);
        }
        Ok(OOPlan { confidence: self.confidence, alpha: self.alpha, n, g, k: self.k, ap_target: self.ap_target, s, ap })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingStrategy {
    Grid,
    Random,
}

impl std::str::FromStr for SamplingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "grid" => Ok(SamplingStrategy::Grid),
            "random" | "uniform" | "uniform-random" => Ok(SamplingStrategy::Random),
            _ => Err(format!("unknown sampling strategy `{s}` (expected grid or random)")),
        }
    }
}

impl std::fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplingStrategy::Grid => "grid",
            SamplingStrategy::Random => "random",
        })
    }
}

/// Search rectangle, kWh × kW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignBounds {
    pub battery_kwh: (f64, f64),
    pub pv_kw: (f64, f64),
}

impl Default for DesignBounds {
    fn default() -> Self {
        Self { battery_kwh: (500.0, 5000.0), pv_kw: (500.0, 3000.0) }
    }
}

fn axis(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points).map(|i| if i + 1 == points { hi } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 }).collect()
}

/// `n` distinct designs inside `bounds`. The grid strategy lays a near-square
/// lattice (`ceil(sqrt n)` battery levels) and keeps the first `n` points in
/// battery-major order; the random strategy draws uniformly with a seeded
/// generator.
pub fn sample_designs(n: usize, bounds: &DesignBounds, strategy: SamplingStrategy, seed: u64) -> Result<Vec<Design>, OOError> {
    if n == 0 {
        return invalid("need at least one design".into());
    }
    let (b, p) = (bounds.battery_kwh, bounds.pv_kw);
    for (name, (lo, hi)) in [("battery", b), ("PV", p)] {
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
            return invalid(format!("{name} bounds [{lo}, {hi}] must satisfy 0 <= min <= max"));
        }
    }
    let (b_flat, p_flat) = (b.0 == b.1, p.0 == p.1);
    if b_flat && p_flat && n > 1 {
        return invalid(format!("a single-point rectangle cannot hold {n} distinct designs"));
    }
    let designs: Vec<Design> = match strategy {
        SamplingStrategy::Grid => {
            let nb = if b_flat {
                1
            } else if p_flat {
                n
            } else {
                (n as f64).sqrt().ceil() as usize
            };
            let np = n.div_ceil(nb);
            let bs = axis(b.0, b.1, nb);
            let ps = axis(p.0, p.1, np);
            bs.iter().flat_map(|&eb| ps.iter().map(move |&pv| Design::new(eb, pv))).take(n).collect()
        }
        SamplingStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out: Vec<Design> = Vec::with_capacity(n);
            while out.len() < n {
                let eb = if b_flat { b.0 } else { rng.gen_range(b.0..=b.1) };
                let pv = if p_flat { p.0 } else { rng.gen_range(p.0..=p.1) };
                let d = Design::new(eb, pv);
                if !out.contains(&d) {
                    out.push(d);
                }
            }
            out
        }
    };
    Ok(designs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedDesign {
    pub design: Design,
    pub phase1: CostBreakdown,
    /// 1-based rank among all successfully evaluated designs.
    pub phase1_rank: usize,
    pub phase2: Option<CostBreakdown>,
    /// 1-based rank among finalists.
    pub phase2_rank: Option<usize>,
    /// Phase-1 rank within the finalists minus the phase-2 rank.
    pub order_gain: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignFailure {
    pub design: Design,
    pub phase: u8,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Robustness {
    pub spearman: f64,
    pub kendall: f64,
    pub max_abs_gain: i64,
    /// Share of finalists with `|order_gain| <= 2`.
    pub within_two: f64,
}

#[derive(Debug, Clone)]
pub struct BoostResult {
    pub plan: OOPlan,
    /// Every evaluated design, in phase-1 order.
    pub ranked: Vec<RankedDesign>,
    pub failures: Vec<DesignFailure>,
    pub robustness: Option<Robustness>,
}

impl BoostResult {
    /// Finalists in phase-2 order.
    pub fn finalists(&self) -> Vec<&RankedDesign> {
        let mut f: Vec<&RankedDesign> = self.ranked.iter().filter(|r| r.phase2_rank.is_some()).collect();
        f.sort_by_key(|r| r.phase2_rank);
        f
    }

    pub fn winner(&self) -> Option<&RankedDesign> {
        self.ranked.iter().find(|r| r.phase2_rank == Some(1))
    }
}

/// Yearly cost of every design under `method`, evaluated on `jobs` threads
/// (0 = rayon default). Results keep the input order.
pub fn evaluate_designs(
    trace: &HourlyTrace,
    designs: &[Design],
    sim: &Simulator,
    cm: &CostModel,
    method: Method,
    jobs: usize,
) -> Vec<Result<CostBreakdown, String>> {
    let energy = trace.energy_kwh();
    let eval = |d: &Design| -> Result<CostBreakdown, String> {
        let run = sim.run(trace, *d, method, false).map_err(|e| e.to_string())?;
        yearly_cost(d, run.op_cost, energy, trace.len(), cm).map_err(|e| e.to_string())
    };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| designs.par_iter().map(eval).collect()),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); evaluating serially");
            designs.iter().map(eval).collect()
        }
    }
}

fn rank_order(items: &[(Design, f64)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| items[a].1.total_cmp(&items[b].1).then(items[a].0.lex_cmp(&items[b].0)));
    idx
}

/// Full two-phase run over the given designs.
pub fn run_boost(
    trace: &HourlyTrace,
    plan: &OOPlan,
    sim: &Simulator,
    cm: &CostModel,
    designs: &[Design],
    jobs: usize,
) -> Result<BoostResult, OOError> {
    cm.validate().map_err(|e| OOError::InvalidArgument(e.to_string()))?;
    sim.params.validate().map_err(|e| OOError::InvalidArgument(e.to_string()))?;
    let mut failures = Vec::new();

    let phase1 = evaluate_designs(trace, designs, sim, cm, Method::Lp, jobs);
    let mut ok: Vec<(Design, CostBreakdown)> = Vec::new();
    for (d, r) in designs.iter().zip(phase1) {
        match r {
            Ok(c) => ok.push((*d, c)),
            Err(message) => {
                log::warn!("design {d} excluded in phase 1: {message}");
                failures.push(DesignFailure { design: *d, phase: 1, message });
            }
        }
    }
    if ok.is_empty() {
        return Err(OOError::AllFailed(1));
    }
    let order = rank_order(&ok.iter().map(|(d, c)| (*d, c.total)).collect::<Vec<_>>());
    let mut ranked: Vec<RankedDesign> = order
        .iter()
        .enumerate()
        .map(|(r, &i)| RankedDesign {
            design: ok[i].0,
            phase1: ok[i].1,
            phase1_rank: r + 1,
            phase2: None,
            phase2_rank: None,
            order_gain: None,
        })
        .collect();

    let s = plan.s.min(ranked.len());
    let selected: Vec<Design> = ranked[..s].iter().map(|r| r.design).collect();
    let phase2 = evaluate_designs(trace, &selected, sim, cm, Method::Milp, jobs);
    let mut finals: Vec<(usize, Design, CostBreakdown)> = Vec::new();
    for (i, r) in phase2.into_iter().enumerate() {
        match r {
            Ok(c) => finals.push((i, selected[i], c)),
            Err(message) => {
                log::warn!("design {} excluded in phase 2: {message}", selected[i]);
                failures.push(DesignFailure { design: selected[i], phase: 2, message });
            }
        }
    }
    if finals.is_empty() {
        return Err(OOError::AllFailed(2));
    }
    let order2 = rank_order(&finals.iter().map(|(_, d, c)| (*d, c.total)).collect::<Vec<_>>());
    // Finalists are taken in phase-1 order, so their position in `finals`
    // is their phase-1 rank within the finalist subset.
    for (r2, &f) in order2.iter().enumerate() {
        let (slot, _, cost) = finals[f];
        let entry = &mut ranked[slot];
        entry.phase2 = Some(cost);
        entry.phase2_rank = Some(r2 + 1);
        entry.order_gain = Some((f + 1) as i64 - (r2 + 1) as i64);
    }
    let result = BoostResult { plan: *plan, ranked, failures, robustness: None };
    let robustness = order_robustness_report(&result.finalists()).ok();
    Ok(BoostResult { robustness, ..result })
}

/// Rank agreement between the two phases over the finalists.
pub fn order_robustness_report(finalists: &[&RankedDesign]) -> Result<Robustness, OOError> {
    let n = finalists.len();
    if n < 2 {
        return Err(OOError::TooFewFinalists(n));
    }
    let mut by_phase1: Vec<&RankedDesign> = finalists.to_vec();
    by_phase1.sort_by_key(|r| r.phase1_rank);
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for (i, r) in by_phase1.iter().enumerate() {
        let r2 = r.phase2_rank.ok_or_else(|| OOError::InvalidArgument(format!("design {} has no phase-2 rank", r.design)))?;
        first.push(i + 1);
        second.push(r2);
    }
    let gains: Vec<i64> = first.iter().zip(&second).map(|(&a, &b)| a as i64 - b as i64).collect();
    Ok(Robustness {
        spearman: spearman(&first, &second)?,
        kendall: kendall(&first, &second)?,
        max_abs_gain: gains.iter().map(|g| g.abs()).max().unwrap_or(0),
        within_two: gains.iter().filter(|g| g.abs() <= 2).count() as f64 / n as f64,
    })
}

fn check_permutations(a: &[usize], b: &[usize]) -> Result<(), OOError> {
    let n = a.len();
    let is_perm = |v: &[usize]| {
        let mut s = v.to_vec();
        s.sort_unstable();
        s.iter().enumerate().all(|(i, &r)| r == i + 1)
    };
    if b.len() != n || n < 2 || !is_perm(a) || !is_perm(b) {
        return invalid("rank correlation needs two permutations of 1..n with n >= 2".into());
    }
    Ok(())
}

/// Spearman correlation of two rankings without ties.
pub fn spearman(a: &[usize], b: &[usize]) -> Result<f64, OOError> {
    check_permutations(a, b)?;
    let n = a.len() as f64;
    let d2: f64 = a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    Ok(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

/// Kendall tau of two rankings without ties.
pub fn kendall(a: &[usize], b: &[usize]) -> Result<f64, OOError> {
    check_permutations(a, b)?;
    let n = a.len();
    let mut score = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let s = (a[i] as i64 - a[j] as i64).signum() * (b[i] as i64 - b[j] as i64).signum();
            score += s;
        }
    }
    Ok(score as f64 / (n * (n - 1) / 2) as f64)
}
