//! The four commands. Each writes its reports under the configured output
//! directory and returns the text shown on stdout.

use std::path::PathBuf;

use boost_core::economics::{yearly_cost, CostBreakdown};
use boost_core::oo::{run_boost, sample_designs, BoostResult};
use boost_core::simulate::YearRun;
use boost_core::timeseries::synth_trace;
use boost_core::{Design, Method};

use crate::config::Resolved;
use crate::report::{fixed, write_file, Table};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub text: String,
    pub files: Vec<PathBuf>,
    /// False when some design or solve was dropped; the exit code is then 2.
    pub all_optimal: bool,
}

fn mwh(kwh: f64) -> String {
    fixed(kwh / 1000.0, 3)
}

fn run_method(r: &Resolved, design: Design, method: Method, keep: bool) -> Result<(YearRun, CostBreakdown), CliError> {
    let run = r.simulator().run(&r.trace, design, method, keep).map_err(|e| CliError::Solver(format!("{method} dispatch of {design}: {e}")))?;
    let cost = yearly_cost(&design, run.op_cost, r.trace.energy_kwh(), r.trace.len(), &r.config.cost_model).map_err(|e| CliError::Solver(e.to_string()))?;
    Ok((run, cost))
}

fn cost_rows(t: &mut Table, c: &CostBreakdown) {
    t.push(vec!["operating cost ($/yr)".into(), fixed(c.op_cost, 2)]);
    t.push(vec!["PV annuity ($/yr)".into(), fixed(c.inv_pv, 2)]);
    t.push(vec!["battery annuity ($/yr)".into(), fixed(c.inv_batt, 2)]);
    t.push(vec!["total cost ($/yr)".into(), fixed(c.total, 2)]);
    t.push(vec!["energy served (kWh/yr)".into(), fixed(c.energy_served, 1)]);
    t.push(vec!["LCOE (¢/kWh)".into(), fixed(c.lcoe, 4)]);
}

/// Single-design dispatch: hourly schedule plus a cost summary.
pub fn cmd_dispatch(r: &Resolved, design: Design, method: Method) -> Result<Outcome, CliError> {
    let (run, cost) = run_method(r, design, method, true)?;
    let s = run.schedule.as_ref().expect("schedule was requested");
    let header = r.header();
    let out = &r.config.run.out;

    let mut sched = header.to_string();
    sched.push_str("hour,grid_kw,diesel_kw,pv_kw,charge_kw,discharge_kw,soc_kwh,diesel_on\n");
    for t in 0..s.hours() {
        let on = s.commitment.as_ref().map_or(String::new(), |c| u8::from(c[t]).to_string());
        sched.push_str(&format!(
            "{t},{},{},{},{},{},{},{on}\n",
            s.grid[t], s.diesel[t], s.pv[t], s.charge[t], s.discharge[t], s.soc[t]
        ));
    }
    // The closing SOC gets a row of its own.
    sched.push_str(&format!("{},,,,,,{},\n", s.hours(), s.soc_end()));

    let mut t = Table::new(&format!("Dispatch of {design} with {method}"), &["quantity", "value"]);
    t.push(vec!["battery (kWh)".into(), fixed(design.battery_kwh, 1)]);
    t.push(vec!["PV (kW)".into(), fixed(design.pv_kw, 1)]);
    t.push(vec!["method".into(), method.to_string()]);
    t.push(vec!["windows".into(), run.window_costs.len().to_string()]);
    cost_rows(&mut t, &cost);
    t.push(vec!["simplex iterations".into(), run.iterations.to_string()]);
    if method == Method::Milp {
        t.push(vec!["branch-and-bound nodes".into(), run.nodes.to_string()]);
    }

    let text = format!("{header}\n{}", t.to_text());
    let files = vec![
        write_file(out, &format!("schedule_{method}.csv"), &sched)?,
        write_file(out, &format!("dispatch_{method}.txt"), &text)?,
        write_file(out, &format!("dispatch_{method}.csv"), &format!("{header}{}", t.to_csv()?))?,
    ];
    Ok(Outcome { text, files, all_optimal: true })
}

/// Finalist table in the layout of the usual sizing summary.
pub fn finalist_table(result: &BoostResult) -> Table {
    let mut t = Table::new(
        "Finalists ranked by the MILP dispatch",
        &["Rank", "E_B (MWh)", "PV size (MW)", "LCOE (¢/kWh)", "Order Gain", "LP LCOE (¢/kWh)", "LP rank"],
    );
    for f in result.finalists() {
        let p2 = f.phase2.expect("finalists carry a phase-2 cost");
        t.push(vec![
            f.phase2_rank.expect("finalist rank").to_string(),
            mwh(f.design.battery_kwh),
            mwh(f.design.pv_kw),
            fixed(p2.lcoe, 4),
            format!("{:+}", f.order_gain.expect("finalist gain")),
            fixed(f.phase1.lcoe, 4),
            f.phase1_rank.to_string(),
        ]);
    }
    t
}

/// Full two-phase sizing run.
pub fn cmd_size(r: &Resolved) -> Result<(Outcome, BoostResult), CliError> {
    let cfg = &r.config;
    let plan = cfg.oo_plan.resolve().map_err(|e| CliError::Usage(e.to_string()))?;
    let designs = sample_designs(plan.n, &cfg.sampling.bounds(), cfg.sampling.strategy, cfg.sampling.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let result = run_boost(&r.trace, &plan, &r.simulator(), &cfg.cost_model, &designs, cfg.run.jobs)
        .map_err(|e| CliError::Solver(e.to_string()))?;

    let header = r.header();
    let mut plan_t = Table::new("Ordinal optimisation plan", &["quantity", "value"]);
    plan_t.push(vec!["designs sampled (N)".into(), plan.n.to_string()]);
    plan_t.push(vec!["good set size (g)".into(), plan.g.to_string()]);
    plan_t.push(vec!["required overlap (k)".into(), plan.k.to_string()]);
    plan_t.push(vec!["finalists (s)".into(), plan.s.to_string()]);
    plan_t.push(vec!["alignment probability".into(), fixed(plan.ap, 6)]);
    plan_t.push(vec!["target".into(), fixed(plan.ap_target, 6)]);

    let finals = finalist_table(&result);

    let mut diag = Table::new("Order robustness", &["statistic", "value"]);
    match &result.robustness {
        Some(rb) => {
            diag.push(vec!["Spearman rho".into(), fixed(rb.spearman, 6)]);
            diag.push(vec!["Kendall tau".into(), fixed(rb.kendall, 6)]);
            diag.push(vec!["max |order gain|".into(), rb.max_abs_gain.to_string()]);
            diag.push(vec!["share with |gain| <= 2".into(), fixed(rb.within_two, 4)]);
        }
        None => diag.push(vec!["rank correlation".into(), "n/a (fewer than two finalists)".into()]),
    }

    let mut all = Table::new(
        "All designs ranked by the LP dispatch",
        &["LP rank", "E_B (MWh)", "PV size (MW)", "LP LCOE (¢/kWh)", "LP total ($/yr)", "finalist"],
    );
    for d in &result.ranked {
        all.push(vec![
            d.phase1_rank.to_string(),
            mwh(d.design.battery_kwh),
            mwh(d.design.pv_kw),
            fixed(d.phase1.lcoe, 4),
            fixed(d.phase1.total, 2),
            if d.phase2_rank.is_some() { "yes" } else { "no" }.into(),
        ]);
    }

    let mut text = format!("{header}\n{}\n{}\n{}", plan_t.to_text(), finals.to_text(), diag.to_text());
    if let Some(w) = result.winner() {
        text.push_str(&format!("\nwinner: {} at {} ¢/kWh\n", w.design, fixed(w.phase2.expect("winner cost").lcoe, 4)));
    }
    if !result.failures.is_empty() {
        let mut ft = Table::new("Excluded designs", &["E_B (MWh)", "PV size (MW)", "phase", "reason"]);
        for f in &result.failures {
            ft.push(vec![mwh(f.design.battery_kwh), mwh(f.design.pv_kw), f.phase.to_string(), f.message.clone()]);
        }
        text.push('\n');
        text.push_str(&ft.to_text());
    }
    let out = &cfg.run.out;
    let files = vec![
        write_file(out, "size.txt", &text)?,
        write_file(out, "size.csv", &format!("{header}{}", finals.to_csv()?))?,
        write_file(out, "designs.csv", &format!("{header}{}", all.to_csv()?))?,
        write_file(out, "diagnostics.csv", &format!("{header}{}", diag.to_csv()?))?,
    ];
    let all_optimal = result.failures.is_empty();
    Ok((Outcome { text, files, all_optimal }, result))
}

/// LCOE of one design under MILP, DP and greedy dispatch. Without a design
/// the sizing run is performed first and its winner is used.
pub fn cmd_compare(r: &Resolved, design: Option<Design>) -> Result<Outcome, CliError> {
    let (design, source) = match design {
        Some(d) => (d, "given"),
        None => {
            let (_, result) = cmd_size(r)?;
            (result.winner().expect("a sizing result has a winner").design, "sizing winner")
        }
    };
    let mut t = Table::new(
        &format!("Dispatch methods on {design} ({source})"),
        &["method", "LCOE (¢/kWh)", "operating cost ($/yr)", "total cost ($/yr)"],
    );
    for method in [Method::Milp, Method::Dp, Method::Greedy] {
        let (_, c) = run_method(r, design, method, false)?;
        let label = if method == Method::Dp { format!("dp ({} levels)", r.config.dp_config.soc_levels) } else { method.to_string() };
        t.push(vec![label, fixed(c.lcoe, 4), fixed(c.op_cost, 2), fixed(c.total, 2)]);
    }
    let header = r.header();
    let text = format!("{header}\n{}", t.to_text());
    let out = &r.config.run.out;
    let files = vec![
        write_file(out, "compare.txt", &text)?,
        write_file(out, "compare.csv", &format!("{header}{}", t.to_csv()?))?,
    ];
    Ok(Outcome { text, files, all_optimal: true })
}

/// Writes a synthetic trace for the configured seed and length.
pub fn cmd_synth(r: &crate::config::RunConfig) -> Result<Outcome, CliError> {
    let hours = r.trace.hours.unwrap_or(8760);
    let trace = synth_trace(r.trace.synth_seed, hours).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut body = Vec::new();
    trace.write_csv(&mut body).map_err(|e| CliError::Usage(e.to_string()))?;
    let text = format!("# synthetic trace, seed {}, {hours} hours\n{}", r.trace.synth_seed, String::from_utf8(body).expect("csv output is UTF-8"));
    let name = format!("synth_seed{}.csv", r.trace.synth_seed);
    let path = write_file(&r.run.out, &name, &text)?;
    Ok(Outcome {
        text: format!("wrote {} ({hours} hours, peak {:.1} kW)\n", path.display(), trace.peak_load()),
        files: vec![path],
        all_optimal: true,
    })
}
