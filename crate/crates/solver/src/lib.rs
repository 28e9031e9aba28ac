//! Small, deterministic LP/MILP solver.
//!
//! Models are equality-form with per-variable bounds ([`Model`]). LPs are
//! solved with a bounded-variable revised simplex over a sparse LU basis
//! factorization; MILPs with binary variables are solved by best-first
//! branch-and-bound that re-optimises each node with the dual simplex.
//!
//! Both solvers implement [`Solver`], so an external backend can be
//! substituted behind the same interface.

// Simplex kernels index several parallel arrays by the same position.
#![allow(clippy::needless_range_loop)]

mod branch;
mod lu;
mod model;
mod simplex;

use std::time::{Duration, Instant};

pub use branch::{BranchAndBound, BranchRule, MilpOptions};
pub use model::{Model, ModelError, RowId, VarId};
pub use simplex::Basis;

use simplex::{Engine, EngineOptions, LpOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// Branch-and-bound stopped early; `x` holds the best incumbent found,
    /// if any.
    NodeLimit,
}

impl SolveStatus {
    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::IterationLimit => "iteration-limit",
            SolveStatus::NodeLimit => "node-limit",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Objective at `x`; `+inf` when no point is available.
    pub objective: f64,
    /// Values of the model's variables (empty when no point is available).
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Branch-and-bound nodes solved (1 for a plain LP).
    pub nodes: usize,
    /// Objective of each new incumbent, in the order found.
    pub incumbents: Vec<f64>,
    /// Row duals of an optimal LP (empty otherwise).
    pub duals: Vec<f64>,
    /// Final basis of an LP solve, usable as a warm start.
    pub basis: Option<Basis>,
    pub elapsed: Duration,
}

impl SolveReport {
    /// Equality of everything except wall time.
    pub fn same_outcome(&self, other: &SolveReport) -> bool {
        self.status == other.status
            && self.objective.to_bits() == other.objective.to_bits()
            && self.x.len() == other.x.len()
            && self.x.iter().zip(&other.x).all(|(a, b)| a.to_bits() == b.to_bits())
            && self.iterations == other.iterations
            && self.nodes == other.nodes
            && self.incumbents == other.incumbents
            && self.duals.len() == other.duals.len()
            && self.duals.iter().zip(&other.duals).all(|(a, b)| a.to_bits() == b.to_bits())
            && self.basis == other.basis
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpOptions {
    /// Iteration cap for each simplex call, so a branch-and-bound search is
    /// limited per node rather than in total.
    pub max_iterations: usize,
    /// Basis updates between refactorizations.
    pub refactor_interval: usize,
    /// Non-improving iterations before switching to Bland's rule.
    pub stall_threshold: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { max_iterations: 200_000, refactor_interval: 80, stall_threshold: 50 }
    }
}

impl LpOptions {
    fn engine(self) -> EngineOptions {
        EngineOptions {
            max_iterations: self.max_iterations,
            refactor_interval: self.refactor_interval,
            stall_threshold: self.stall_threshold,
        }
    }
}

pub trait Solver {
    fn solve(&self, model: &Model) -> Result<SolveReport, ModelError>;
}

/// LP solver; integrality marks are ignored (the LP relaxation is solved).
#[derive(Debug, Clone, Default)]
pub struct SimplexSolver {
    pub options: LpOptions,
}

impl SimplexSolver {
    pub fn new(options: LpOptions) -> Self {
        Self { options }
    }

    /// Solve starting from `basis` instead of the auxiliary basis. The basis
    /// must come from a model with the same shape.
    pub fn solve_from(&self, model: &Model, basis: Option<&Basis>) -> Result<SolveReport, ModelError> {
        model.validate()?;
        let start = Instant::now();
        let mut engine = Engine::new(model, self.options.engine());
        if let Some(b) = basis {
            if b.head.len() == model.num_rows() && b.at_upper.len() == model.num_rows() + model.num_vars() {
                engine.load_basis(b);
            }
        }
        engine.refresh();
        let outcome = engine.primal();
        let status = match outcome {
            LpOutcome::Optimal => SolveStatus::Optimal,
            LpOutcome::Infeasible => SolveStatus::Infeasible,
            LpOutcome::Unbounded => SolveStatus::Unbounded,
            LpOutcome::IterationLimit | LpOutcome::NotDualFeasible => SolveStatus::IterationLimit,
        };
        let (x, duals, basis) = if status.is_optimal() {
            (engine.x[..engine.num_structural()].to_vec(), engine.row_duals(), Some(engine.basis()))
        } else {
            (Vec::new(), Vec::new(), None)
        };
        let objective = if x.is_empty() { f64::INFINITY } else { model.objective_value(&x) };
        Ok(SolveReport {
            status,
            objective,
            x,
            iterations: engine.iterations,
            nodes: 1,
            incumbents: Vec::new(),
            duals,
            basis,
            elapsed: start.elapsed(),
        })
    }
}

impl Solver for SimplexSolver {
    fn solve(&self, model: &Model) -> Result<SolveReport, ModelError> {
        self.solve_from(model, None)
    }
}

/// Solve the LP relaxation of `model` with default options.
pub fn solve_lp(model: &Model) -> Result<SolveReport, ModelError> {
    SimplexSolver::default().solve(model)
}

/// Solve `model` to integer optimality with default options.
pub fn solve_milp(model: &Model) -> Result<SolveReport, ModelError> {
    BranchAndBound::default().solve(model)
}
