//! Battery and PV sizing for a grid-connected microgrid with a diesel unit.
//!
//! Candidate designs are ranked by yearly cost under a fast LP dispatch,
//! and the best few are re-ranked with a MILP dispatch that respects the
//! diesel unit's minimum output.

pub mod baselines;
pub mod dispatch;
pub mod economics;
pub mod instances;
pub mod oo;
pub mod oracle;
pub mod simulate;
pub mod timeseries;

pub use dispatch::{Design, DispatchParams, DispatchProblem, DispatchSolution};
pub use economics::{CostBreakdown, CostModel};
pub use simulate::{Method, Simulator};
pub use timeseries::HourlyTrace;
