//! LP and MILP results checked against brute-force vertex enumeration.

use boost_solver::{solve_lp, solve_milp, BranchAndBound, BranchRule, MilpOptions, Model, SolveStatus, Solver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense description of a small bounded LP.
#[derive(Clone, Debug)]
struct Dense {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    binary: Vec<bool>,
}

impl Dense {
    fn to_model(&self) -> Model {
        let mut m = Model::new();
        let n = self.c.len();
        for j in 0..n {
            if self.binary[j] {
                let v = m.add_binary(format!("x{j}"), self.c[j]);
                m.set_bounds(v, self.lo[j], self.hi[j]);
            } else {
                m.add_var(format!("x{j}"), self.c[j], self.lo[j], self.hi[j]);
            }
        }
        for (i, row) in self.a.iter().enumerate() {
            let terms: Vec<(usize, f64)> =
                row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j, v)).collect();
            m.add_eq(format!("r{i}"), &terms, self.b[i]);
        }
        m
    }
}

fn solve_dense(a: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut aug: Vec<Vec<f64>> = a.iter().zip(rhs).map(|(r, &b)| {
        let mut r = r.clone();
        r.push(b);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[piv][col].abs() < 1e-10 {
            return None;
        }
        aug.swap(col, piv);
        for i in 0..n {
            if i != col {
                let f = aug[i][col] / aug[col][col];
                let pivot = aug[col].clone();
                for (a, p) in aug[i][col..].iter_mut().zip(&pivot[col..]) {
                    *a -= f * p;
                }
            }
        }
    }
    Some((0..n).map(|i| aug[i][n] / aug[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum over all basic solutions; `None` when infeasible. Rows are
/// assumed to have full rank among the candidate bases that matter.
fn vertex_min(p: &Dense) -> Option<f64> {
    let m = p.b.len();
    let n = p.c.len();
    let mut best: Option<f64> = None;
    // Rank-deficient systems: also try smaller bases by dropping rows that
    // are combinations of others. Keep it simple: enumerate subsets of rows.
    for rows in (0..=m).rev().flat_map(|k| combinations(m, k)) {
        let k = rows.len();
        for basic in combinations(n, k) {
            let nonbasic: Vec<usize> = (0..n).filter(|j| !basic.contains(j)).collect();
            for mask in 0..(1u32 << nonbasic.len()) {
                let mut x = vec![0.0; n];
                for (t, &j) in nonbasic.iter().enumerate() {
                    x[j] = if mask >> t & 1 == 1 { p.hi[j] } else { p.lo[j] };
                }
                let sub: Vec<Vec<f64>> = rows.iter().map(|&i| basic.iter().map(|&j| p.a[i][j]).collect()).collect();
                let rhs: Vec<f64> = rows
                    .iter()
                    .map(|&i| p.b[i] - nonbasic.iter().map(|&j| p.a[i][j] * x[j]).sum::<f64>())
                    .collect();
                let Some(xb) = solve_dense(&sub, &rhs) else { continue };
                for (t, &j) in basic.iter().enumerate() {
                    x[j] = xb[t];
                }
                let feasible_bounds = (0..n).all(|j| x[j] >= p.lo[j] - 1e-9 && x[j] <= p.hi[j] + 1e-9);
                let feasible_rows = (0..m).all(|i| {
                    let lhs: f64 = (0..n).map(|j| p.a[i][j] * x[j]).sum();
                    (lhs - p.b[i]).abs() < 1e-8
                });
                if feasible_bounds && feasible_rows {
                    let obj: f64 = (0..n).map(|j| p.c[j] * x[j]).sum();
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
        }
        if best.is_some() {
            // A feasible vertex for full-rank rows is found in the first
            // pass; smaller row subsets are only needed when rows are
            // dependent, and they give the same optimum.
            return best;
        }
    }
    best
}

fn random_problem(rng: &mut ChaCha8Rng, binaries: usize) -> Dense {
    let m = rng.gen_range(1..=3);
    let n = rng.gen_range(m + 1..=6).max(binaries + 1);
    let a: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| if rng.gen_bool(0.7) { rng.gen_range(-3..=3) as f64 } else { 0.0 }).collect())
        .collect();
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let binary: Vec<bool> = (0..n).map(|j| j < binaries).collect();
    for j in 0..n {
        if j < binaries {
            lo.push(0.0);
            hi.push(1.0);
        } else {
            let l = rng.gen_range(-2..=1) as f64;
            lo.push(l);
            hi.push(l + rng.gen_range(1..=4) as f64);
        }
    }
    // Mostly feasible: rhs from a random point inside the box.
    let b: Vec<f64> = if rng.gen_bool(0.8) {
        let x: Vec<f64> = (0..n)
            .map(|j| if binary[j] { rng.gen_range(0..=1) as f64 } else { rng.gen_range(lo[j]..=hi[j]) })
            .collect();
        a.iter().map(|row| row.iter().zip(&x).map(|(p, q)| p * q).sum()).collect()
    } else {
        (0..m).map(|_| rng.gen_range(-6.0..6.0)).collect()
    };
    let c = (0..n).map(|_| rng.gen_range(-5..=5) as f64).collect();
    Dense { a, b, c, lo, hi, binary }
}

#[test]
fn lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut feasible = 0;
    for case in 0..400 {
        let p = random_problem(&mut rng, 0);
        let report = solve_lp(&p.to_model()).unwrap();
        match vertex_min(&p) {
            Some(best) => {
                feasible += 1;
                assert_eq!(report.status, SolveStatus::Optimal, "case {case}: {p:?}");
                assert!((report.objective - best).abs() < 1e-7, "case {case}: {} vs {best}", report.objective);
                let model = p.to_model();
                assert!(model.max_residual(&report.x) < 1e-9);
                assert!(model.max_bound_violation(&report.x) <= 1e-9);
            }
            None => assert_eq!(report.status, SolveStatus::Infeasible, "case {case}: {p:?}"),
        }
    }
    assert!(feasible > 250);
}

#[test]
fn milp_matches_enumeration_over_binaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let p = random_problem(&mut rng, 3);
        let nb = p.binary.iter().filter(|&&b| b).count();
        let mut best: Option<f64> = None;
        for mask in 0..(1u32 << nb) {
            let mut q = p.clone();
            for j in 0..nb {
                let v = (mask >> j & 1) as f64;
                q.lo[j] = v;
                q.hi[j] = v;
            }
            if let Some(v) = vertex_min(&q) {
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        let report = solve_milp(&p.to_model()).unwrap();
        match best {
            Some(b) => {
                assert_eq!(report.status, SolveStatus::Optimal, "case {case}");
                assert!((report.objective - b).abs() < 1e-7, "case {case}: {} vs {b}", report.objective);
                for j in 0..nb {
                    assert_eq!(report.x[j], report.x[j].round());
                }
                // Incumbents only ever improve.
                assert!(report.incumbents.windows(2).all(|w| w[1] < w[0]));
                let relax = solve_lp(&p.to_model()).unwrap();
                assert!(relax.objective <= report.objective + 1e-9);
            }
            None => assert_eq!(report.status, SolveStatus::Infeasible, "case {case}"),
        }
        // Other rules, heuristic and cut settings reach the same optimum.
        let variants = [
            (BranchRule::FirstFractional, 25, 10),
            (BranchRule::MostFractional, 1, 0),
            (BranchRule::FirstFractional, 0, 3),
            (BranchRule::Reliability, 25, 10),
            (BranchRule::Reliability, 0, 0),
        ];
        for (branching, heuristic_interval, cut_rounds) in variants {
            let other = BranchAndBound::new(MilpOptions { branching, heuristic_interval, cut_rounds, ..MilpOptions::default() })
                .solve(&p.to_model())
                .unwrap();
            assert_eq!(other.status, report.status, "case {case}");
            if let Some(b) = best {
                assert!((other.objective - b).abs() < 1e-7, "case {case} {branching:?}: {} vs {b}", other.objective);
            }
        }
    }
}

#[test]
fn reduced_costs_have_optimal_signs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for _ in 0..200 {
        let p = random_problem(&mut rng, 0);
        let model = p.to_model();
        let report = solve_lp(&model).unwrap();
        if report.status != SolveStatus::Optimal {
            continue;
        }
        checked += 1;
        let y = &report.duals;
        for j in 0..model.num_vars() {
            let d = model.objective()[j] - model.column(j).iter().map(|&(i, a)| a * y[i]).sum::<f64>();
            let x = report.x[j];
            let (l, u) = (model.lower()[j], model.upper()[j]);
            if l == u {
                continue;
            }
            if x > l + 1e-9 && x < u - 1e-9 {
                assert!(d.abs() < 1e-8, "interior variable with reduced cost {d}");
            } else if x <= l + 1e-9 {
                assert!(d >= -1e-8, "variable at lower bound with reduced cost {d}");
            } else {
                assert!(d <= 1e-8, "variable at upper bound with reduced cost {d}");
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn unbounded_and_free_variables() {
    let mut m = Model::new();
    let x = m.add_var("x", -1.0, 0.0, f64::INFINITY);
    let y = m.add_var("y", 0.0, 0.0, f64::INFINITY);
    m.add_eq("r", &[(x, 1.0), (y, -1.0)], 1.0);
    assert_eq!(solve_lp(&m).unwrap().status, SolveStatus::Unbounded);

    // min z  s.t.  z - w = 0, w in [-3, 5], z free.
    let mut m = Model::new();
    let z = m.add_var("z", 1.0, f64::NEG_INFINITY, f64::INFINITY);
    let w = m.add_var("w", 0.0, -3.0, 5.0);
    m.add_eq("r", &[(z, 1.0), (w, -1.0)], 0.0);
    let r = solve_lp(&m).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective + 3.0).abs() < 1e-12);
}

#[test]
fn single_bound_example() {
    // min x  s.t.  x - s = 3, s >= 0
    let mut m = Model::new();
    let x = m.add_var("x", 1.0, f64::NEG_INFINITY, f64::INFINITY);
    let s = m.add_var("s", 0.0, 0.0, f64::INFINITY);
    m.add_eq("ge", &[(x, 1.0), (s, -1.0)], 3.0);
    let r = solve_lp(&m).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert_eq!(r.x[x], 3.0);
    assert_eq!(r.objective, 3.0);
}

#[test]
fn node_limit_is_reported() {
    // Knapsack-like equality that needs branching once cuts are off.
    let mut m = Model::new();
    let vars: Vec<usize> = (0..8).map(|i| m.add_binary(format!("b{i}"), -((i % 3) as f64 + 1.0))).collect();
    let slack = m.add_var("s", 0.0, 0.0, f64::INFINITY);
    let mut terms: Vec<(usize, f64)> = vars.iter().enumerate().map(|(i, &v)| (v, 2.0 + i as f64 * 0.7)).collect();
    terms.push((slack, 1.0));
    m.add_eq("cap", &terms, 9.3);
    let limited = BranchAndBound::new(MilpOptions { node_limit: 1, cut_rounds: 0, ..MilpOptions::default() });
    let r = limited.solve(&m).unwrap();
    assert_eq!(r.status, SolveStatus::NodeLimit);
    let full = solve_milp(&m).unwrap();
    assert_eq!(full.status, SolveStatus::Optimal);
}

#[test]
fn repeated_solves_are_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..30 {
        let p = random_problem(&mut rng, 2);
        let model = p.to_model();
        let a = solve_milp(&model).unwrap();
        let b = solve_milp(&model).unwrap();
        assert!(a.same_outcome(&b));
        let a = solve_lp(&model).unwrap();
        let b = solve_lp(&model).unwrap();
        assert!(a.same_outcome(&b));
    }
}
