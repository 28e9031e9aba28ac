//! Standard-form model: `min c'x  s.t.  Ax = b,  l <= x <= u`, with an
//! optional integrality mask.

use std::fmt::Write as _;
use std::io;

use thiserror::Error;

pub type VarId = usize;
pub type RowId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("variable {var} has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { var: VarId, lower: f64, upper: f64 },
    #[error("integer variable {var} must have bounds inside [0, 1], got [{lower}, {upper}]")]
    NonBinaryInteger { var: VarId, lower: f64, upper: f64 },
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("coefficient references row {row} but the model has {rows} rows")]
    RowOutOfRange { row: RowId, rows: usize },
}

/// Sparse equality-form model shared by the LP and MILP solvers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Model {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    integer: Vec<bool>,
    var_names: Vec<String>,
    columns: Vec<Vec<(RowId, f64)>>,
    rhs: Vec<f64>,
    row_names: Vec<String>,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a continuous variable and returns its index.
    pub fn add_var(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> VarId {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.integer.push(false);
        self.var_names.push(name.into());
        self.columns.push(Vec::new());
        self.objective.len() - 1
    }

    /// Adds a `{0, 1}` variable.
    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        let v = self.add_var(name, cost, 0.0, 1.0);
        self.integer[v] = true;
        v
    }

    /// Adds the row `sum(coef * x[var]) = rhs`. Repeated variables are summed.
    pub fn add_eq(&mut self, name: impl Into<String>, terms: &[(VarId, f64)], rhs: f64) -> RowId {
        let row = self.rhs.len();
        self.rhs.push(rhs);
        self.row_names.push(name.into());
        for &(var, coef) in terms {
            let col = &mut self.columns[var];
            match col.iter_mut().find(|(r, _)| *r == row) {
                Some(entry) => entry.1 += coef,
                None => col.push((row, coef)),
            }
        }
        row
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn is_integer(&self, var: VarId) -> bool {
        self.integer[var]
    }

    pub fn has_integers(&self) -> bool {
        self.integer.iter().any(|&i| i)
    }

    pub fn integer_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.integer.iter().enumerate().filter(|(_, &i)| i).map(|(v, _)| v)
    }

    pub fn column(&self, var: VarId) -> &[(RowId, f64)] {
        &self.columns[var]
    }

    pub fn var_name(&self, var: VarId) -> &str {
        &self.var_names[var]
    }

    pub fn row_name(&self, row: RowId) -> &str {
        &self.row_names[row]
    }

    /// The same model with the integrality mask cleared.
    pub fn relaxation(&self) -> Model {
        let mut m = self.clone();
        m.integer.iter_mut().for_each(|i| *i = false);
        m
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let rows = self.num_rows();
        for (i, &b) in self.rhs.iter().enumerate() {
            if !b.is_finite() {
                return Err(ModelError::NonFinite { what: "rhs", index: i });
            }
        }
        for v in 0..self.num_vars() {
            let (lower, upper) = (self.lower[v], self.upper[v]);
            if !self.objective[v].is_finite() {
                return Err(ModelError::NonFinite { what: "objective", index: v });
            }
            if lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
                return Err(ModelError::NonFinite { what: "bounds", index: v });
            }
            if lower > upper {
                return Err(ModelError::InvertedBounds { var: v, lower, upper });
            }
            if self.integer[v] && (lower < 0.0 || upper > 1.0) {
                return Err(ModelError::NonBinaryInteger { var: v, lower, upper });
            }
            for &(row, coef) in &self.columns[v] {
                if row >= rows {
                    return Err(ModelError::RowOutOfRange { row, rows });
                }
                if !coef.is_finite() {
                    return Err(ModelError::NonFinite { what: "matrix", index: v });
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// `Ax - b` for every row.
    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = self.rhs.iter().map(|b| -b).collect();
        for (v, col) in self.columns.iter().enumerate() {
            for &(row, coef) in col {
                r[row] += coef * x[v];
            }
        }
        r
    }

    pub fn max_residual(&self, x: &[f64]) -> f64 {
        self.residuals(x).iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn max_bound_violation(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Plain-text listing in CPLEX LP syntax, for cross-checking with an
    /// external solver.
    pub fn write_lp<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        let name = |v: VarId| -> String {
            if self.var_names[v].is_empty() {
                format!("x{v}")
            } else {
                self.var_names[v].clone()
            }
        };
        let mut line = String::from("Minimize\n obj:");
        for v in 0..self.num_vars() {
            if self.objective[v] != 0.0 {
                write_term(&mut line, self.objective[v], &name(v));
            }
        }
        writeln!(w, "{line}")?;
        writeln!(w, "Subject To")?;

        let mut row_terms: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); self.num_rows()];
        for (v, col) in self.columns.iter().enumerate() {
            for &(row, coef) in col {
                row_terms[row].push((v, coef));
            }
        }
        for (row, terms) in row_terms.iter().enumerate() {
            let label = if self.row_names[row].is_empty() {
                format!("r{row}")
            } else {
                self.row_names[row].clone()
            };
            let mut line = format!(" {label}:");
            if terms.is_empty() {
                line.push_str(" 0 x0");
            }
            for &(v, coef) in terms {
                write_term(&mut line, coef, &name(v));
            }
            writeln!(w, "{line} = {}", self.rhs[row])?;
        }

        writeln!(w, "Bounds")?;
        for v in 0..self.num_vars() {
            let (l, u) = (self.lower[v], self.upper[v]);
            match (l.is_finite(), u.is_finite()) {
                (true, true) if l == u => writeln!(w, " {} = {}", name(v), l)?,
                (true, true) => writeln!(w, " {} <= {} <= {}", l, name(v), u)?,
                (true, false) => writeln!(w, " {} >= {}", name(v), l)?,
                (false, true) => writeln!(w, " -inf <= {} <= {}", name(v), u)?,
                (false, false) => writeln!(w, " {} free", name(v))?,
            }
        }
        if self.has_integers() {
            writeln!(w, "Binaries")?;
            for v in self.integer_vars() {
                writeln!(w, " {}", name(v))?;
            }
        }
        writeln!(w, "End")
    }
}

fn write_term(line: &mut String, coef: f64, name: &str) {
    if coef < 0.0 {
        let _ = write!(line, " - {} {}", -coef, name);
    } else {
        let _ = write!(line, " + {} {}", coef, name);
    }
}
