//! Acceptance criteria AC1–AC8. Each test prints one `ACn PASS|FAIL` line
//! with the measured values, then asserts.
//!
//! The full-year sizing run behind AC3 and AC4 is shared through a
//! `OnceLock` and takes several minutes on one core.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use boost_cli::commands::cmd_size;
use boost_cli::config::{Resolved, RunConfig};
use boost_core::baselines::{dp_dispatch, greedy_dispatch, DPConfig};
use boost_core::dispatch::{build_lp, build_milp, extract_solution, DispatchProblem};
use boost_core::economics::{yearly_cost, CostModel};
use boost_core::instances::{small_instance, weekly_instance};
use boost_core::oo::{alignment_probability, compute_n, compute_s, run_boost, sample_designs, BoostResult, DesignBounds, OOSettings, SamplingStrategy};
use boost_core::oracle::oracle_dispatch;
use boost_core::timeseries::{synth_trace, Window};
use boost_core::{Design, DispatchParams, Method, Simulator};
use boost_solver::{solve_lp, solve_milp, BranchAndBound, BranchRule, MilpOptions, Solver};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn verdict(id: &str, pass: bool, detail: String) {
    // Straight to the handle, so the line survives libtest's output capture.
    let _ = writeln!(std::io::stderr(), "{id} {}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{id} failed: {detail}");
}

fn rel_le(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn ac1_alignment_arithmetic() {
    let n = compute_n(0.99, 0.05).unwrap();
    let ap = alignment_probability(100, 10, 20, 1).unwrap();
    let s = compute_s(100, 10, 1, 0.90).unwrap();
    let pass = n == 90 && (ap - 0.9066).abs() <= 0.0005;
    verdict("AC1", pass, format!("compute_N(0.99, 0.05) = {n} (want 90); AP(100,10,20,1) = {ap:.6} (want 0.9066 ± 0.0005); compute_s(100,10,1,0.9) = {s}"));
}

fn dispatch_bnb() -> BranchAndBound {
    BranchAndBound::new(MilpOptions { branching: BranchRule::Reliability, ..MilpOptions::default() })
}

#[test]
fn ac2_relaxation_dominance() {
    const INSTANCES: u64 = 100;
    let bnb = dispatch_bnb();
    let (mut lp_milp, mut milp_dp, mut milp_greedy) = (0, 0, 0);
    for seed in 0..INSTANCES {
        let inst = weekly_instance(&mut ChaCha8Rng::seed_from_u64(seed), 168);
        let p = inst.problem();
        let lpm = build_lp(&p);
        let lp = extract_solution(&lpm, &solve_lp(&lpm).unwrap(), &p).unwrap().op_cost;
        let mm = build_milp(&p);
        let report = bnb.solve(&mm).unwrap();
        assert!(report.status.is_optimal(), "instance {seed}: MILP status {:?}", report.status);
        let milp = extract_solution(&mm, &report, &p).unwrap().op_cost;
        let dp = dp_dispatch(&p, DPConfig::default()).unwrap().op_cost;
        let greedy = greedy_dispatch(&p).unwrap().op_cost;
        lp_milp += usize::from(!rel_le(lp, milp, 1e-6));
        milp_dp += usize::from(!rel_le(milp, dp, 1e-6));
        milp_greedy += usize::from(!rel_le(milp, greedy, 1e-6));
    }
    verdict(
        "AC2",
        lp_milp + milp_dp + milp_greedy == 0,
        format!("{INSTANCES} weekly instances; violations LP<=MILP {lp_milp}, MILP<=DP {milp_dp}, MILP<=greedy {milp_greedy}"),
    );
}

/// Default configuration on the seed-`seed` synthetic year, written to a
/// scratch directory.
fn year_config(seed: u64, out: &Path) -> Resolved {
    let mut cfg = RunConfig::default();
    cfg.trace.synth_seed = seed;
    cfg.sampling.seed = seed;
    cfg.run.out = out.to_path_buf();
    Resolved::new(cfg).unwrap()
}

fn year_run(seed: u64) -> (Resolved, BoostResult) {
    let dir = tempfile::tempdir().unwrap();
    let r = year_config(seed, dir.path());
    let (_, result) = cmd_size(&r).unwrap();
    (r, result)
}

fn seed0_run() -> &'static (Resolved, BoostResult) {
    static RUN: OnceLock<(Resolved, BoostResult)> = OnceLock::new();
    RUN.get_or_init(|| year_run(0))
}

#[test]
fn ac3_method_ordering_on_winner() {
    let (r, result) = seed0_run();
    let winner = result.winner().unwrap().design;
    let sim = r.simulator();
    let energy = r.trace.energy_kwh();
    let lcoe = |m: Method| {
        let run = sim.run(&r.trace, winner, m, false).unwrap();
        yearly_cost(&winner, run.op_cost, energy, r.trace.len(), &r.config.cost_model).unwrap().lcoe
    };
    let (milp, dp, greedy) = (lcoe(Method::Milp), lcoe(Method::Dp), lcoe(Method::Greedy));
    verdict(
        "AC3",
        milp < dp && dp < greedy,
        format!("winner {winner}: LCOE milp {milp:.4} < dp({}) {dp:.4} < greedy {greedy:.4} ¢/kWh", sim.dp.soc_levels),
    );
}

#[test]
fn ac4_order_robustness() {
    let (_, result) = seed0_run();
    let rb = result.robustness.unwrap();
    let plan = result.plan;
    assert_eq!(plan.n, 90);
    assert_eq!(plan.s, compute_s(90, plan.g, plan.k, plan.ap_target).unwrap());
    let mut rhos = vec![rb.spearman];
    let mut detail = format!(
        "seed 0: N={} s={} rho={:.4} tau={:.4} share |gain|<=2 = {:.3} (max |gain| {})",
        plan.n, plan.s, rb.spearman, rb.kendall, rb.within_two, rb.max_abs_gain
    );
    let pass = if rb.spearman >= 0.8 {
        rb.within_two >= 0.6
    } else {
        // Fall back to the distribution over five seeds.
        for seed in 1..5 {
            let (_, res) = year_run(seed);
            let r = res.robustness.unwrap();
            detail.push_str(&format!("; seed {seed}: rho={:.4} share={:.3}", r.spearman, r.within_two));
            rhos.push(r.spearman);
        }
        rhos.sort_by(f64::total_cmp);
        let median = rhos[rhos.len() / 2];
        detail.push_str(&format!("; median rho {median:.4}"));
        median >= 0.8 && rb.within_two >= 0.6
    };
    verdict("AC4", pass, detail);
}

/// Every on/off pattern, each solved as an LP with the diesel output pinned
/// to `[min, max]` or to zero.
fn enumerate_commitments(p: &DispatchProblem) -> f64 {
    let n = p.hours();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let mut m = build_lp(p);
        for t in 0..n {
            let (lo, hi) = if mask >> t & 1 == 1 { (p.params.diesel_min_kw, p.params.diesel_max_kw) } else { (0.0, 0.0) };
            m.set_bounds(5 * t + 1, lo, hi);
        }
        let r = solve_lp(&m).unwrap();
        if r.status.is_optimal() {
            best = best.min(r.objective);
        }
    }
    best
}

#[test]
fn ac5_oracle_equivalence() {
    const INSTANCES: u64 = 60;
    let mut mismatches = 0;
    let mut above = 0;
    let mut worst_gap: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut inst = small_instance(&mut ChaCha8Rng::seed_from_u64(1000 + seed), 1 + (seed % 4) as usize);
        let p = inst.problem();
        let milp = solve_milp(&build_milp(&p)).unwrap();
        let enumerated = enumerate_commitments(&p);
        if (milp.objective - enumerated).abs() > 1e-9 * enumerated.abs().max(1.0) {
            mismatches += 1;
        }
        // The LP carries no minimum output, so it is compared with the
        // oracle of the same relaxation.
        inst.params.diesel_min_kw = 0.0;
        let p = inst.problem();
        let lp = solve_lp(&build_lp(&p)).unwrap().objective;
        let oracle = oracle_dispatch(&p, 21).unwrap().cost;
        if !rel_le(lp, oracle, 1e-9) {
            above += 1;
        }
        if oracle > 1e-9 {
            worst_gap = worst_gap.max((oracle - lp) / oracle);
        }
    }
    verdict(
        "AC5",
        mismatches == 0 && above == 0 && worst_gap < 0.02,
        format!("{INSTANCES} instances (T<=4): MILP != enumeration {mismatches}; LP above oracle {above}; worst LP-oracle gap {:.4}%", 100.0 * worst_gap),
    );
}

#[test]
fn ac6_dp_convergence() {
    let trace = synth_trace(0, 8760).unwrap();
    let week = trace.slice(Window { start: 0, len: 168 });
    let params = DispatchParams::for_peak_load(trace.peak_load());
    let design = Design::new(2750.0, 1750.0);
    let p = DispatchProblem {
        design,
        params: &params,
        load_kw: week.load_kw(),
        grid_price: week.grid_price(),
        pv_availability: week.pv_availability(),
        diesel_price: None,
        soc_start: params.soc_init_frac * design.battery_kwh,
    };
    let mm = build_milp(&p);
    let milp = extract_solution(&mm, &dispatch_bnb().solve(&mm).unwrap(), &p).unwrap().op_cost;
    let dp: Vec<f64> = [11, 51, 201].iter().map(|&k| dp_dispatch(&p, DPConfig { soc_levels: k }).unwrap().op_cost).collect();
    let monotone = dp[1] <= dp[0] && dp[2] <= dp[1];
    let gap = (dp[2] - milp) / milp;
    verdict(
        "AC6",
        monotone && gap.abs() <= 0.01,
        format!("week 1 of seed 0, {design}: DP 11/51/201 = {:.2} / {:.2} / {:.2}, MILP {milp:.2}, gap at 201 {:.3}%", dp[0], dp[1], dp[2], 100.0 * gap),
    );
}

#[test]
fn ac7_exhaustive_equivalence() {
    let trace = synth_trace(0, 336).unwrap();
    let sim = Simulator::new(DispatchParams::for_peak_load(trace.peak_load()), 168);
    let cm = CostModel::default();
    let designs = sample_designs(9, &DesignBounds::default(), SamplingStrategy::Grid, 0).unwrap();
    let plan = OOSettings { n_override: Some(9), s_override: Some(9), ..OOSettings::default() }.resolve().unwrap();
    let result = run_boost(&trace, &plan, &sim, &cm, &designs, 0).unwrap();
    let energy = trace.energy_kwh();
    let brute = designs
        .iter()
        .map(|d| (*d, yearly_cost(d, sim.run(&trace, *d, Method::Milp, false).unwrap().op_cost, energy, trace.len(), &cm).unwrap().total))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.lex_cmp(&b.0)))
        .unwrap();
    let winner = result.winner().unwrap();
    verdict(
        "AC7",
        winner.design == brute.0,
        format!("3x3 lattice, 2 weeks: BOOST winner {} ({:.2} $/yr), brute force {} ({:.2} $/yr)", winner.design, winner.phase2.unwrap().total, brute.0, brute.1),
    );
}

#[test]
fn ac8_size_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.trace.hours = Some(672);
    cfg.oo_plan.n_override = Some(12);
    cfg.oo_plan.s_override = Some(4);
    cfg.sampling.strategy = SamplingStrategy::Random;
    cfg.sampling.seed = 7;
    cfg.run.out = dir.path().to_path_buf();
    let snapshot = || {
        let (outcome, _) = cmd_size(&Resolved::new(cfg.clone()).unwrap()).unwrap();
        outcome.files.iter().map(|f| (f.clone(), fs::read(f).unwrap())).collect::<Vec<_>>()
    };
    let first = snapshot();
    let second = snapshot();
    let identical = first == second;
    verdict("AC8", identical, format!("{} report files compared byte for byte across two runs", first.len()));
}
