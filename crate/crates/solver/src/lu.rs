//! Sparse LU factorization of the simplex basis with product-form updates.
//!
//! The basis `B` is factored as `E B = U` where `E` is a sequence of
//! elimination etas and `U` is triangular under the pivot permutation.
//! Column replacements after a simplex pivot are appended as eta matrices
//! until the next refactorization.

const SINGULAR_TOL: f64 = 1e-11;
const THRESHOLD: f64 = 0.01;
const DROP_TOL: f64 = 1e-14;

/// Positions and rows left unpivoted when the basis is singular.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Default, Clone)]
pub(crate) struct BasisFactor {
    m: usize,
    // Elimination etas: for each pivot, rows below get `v[i] -= l * v[r]`.
    l_row: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    // U, one row per pivot step, entries indexed by basis position.
    u_row: Vec<usize>,
    u_pos: Vec<usize>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    // Product-form column replacements.
    eta_pos: Vec<usize>,
    eta_pivot: Vec<f64>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
}

impl BasisFactor {
    pub fn updates(&self) -> usize {
        self.eta_pos.len()
    }

    /// Factor the `m x m` basis whose column at position `p` is `column(p)`,
    /// given as `(row, value)` pairs.
    pub fn factorize<'a, F>(&mut self, m: usize, column: F) -> Result<(), Singular>
    where
        F: Fn(usize) -> &'a [(usize, f64)],
    {
        self.clear(m);

        let mut cols: Vec<Vec<(usize, f64)>> = (0..m).map(|p| column(p).to_vec()).collect();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut row_count = vec![0usize; m];
        for (p, col) in cols.iter().enumerate() {
            for &(r, _) in col {
                rows[r].push(p);
                row_count[r] += 1;
            }
        }
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut mark = vec![0usize; m];
        let mut lcol: Vec<(usize, f64)> = Vec::new();
        let mut urow: Vec<(usize, f64)> = Vec::new();

        for _ in 0..m {
            let Some((r, c)) = choose_pivot(&cols, &rows, &row_count, &row_done, &col_done) else {
                let positions = (0..m).filter(|&p| !col_done[p]).collect();
                let rows = (0..m).filter(|&r| !row_done[r]).collect();
                return Err(Singular { positions, rows });
            };

            let piv = cols[c].iter().find(|e| e.0 == r).map(|e| e.1).unwrap_or(0.0);

            // Pivot row entries of the remaining active columns.
            urow.clear();
            for &j in &rows[r] {
                if j == c || col_done[j] {
                    continue;
                }
                let col = &mut cols[j];
                if let Some(k) = col.iter().position(|e| e.0 == r) {
                    urow.push((j, col[k].1));
                    col.swap_remove(k);
                }
            }

            // Multipliers from the pivot column.
            lcol.clear();
            for &(i, v) in &cols[c] {
                if i != r {
                    lcol.push((i, v / piv));
                    row_count[i] -= 1;
                }
            }

            // Schur complement update.
            if !lcol.is_empty() {
                for &(j, arj) in &urow {
                    let col = &mut cols[j];
                    for (k, e) in col.iter().enumerate() {
                        mark[e.0] = k + 1;
                    }
                    for &(i, l) in &lcol {
                        let delta = -l * arj;
                        if mark[i] != 0 {
                            col[mark[i] - 1].1 += delta;
                        } else {
                            col.push((i, delta));
                            mark[i] = col.len();
                            rows[i].push(j);
                            row_count[i] += 1;
                        }
                    }
                    for e in col.iter() {
                        mark[e.0] = 0;
                    }
                }
            }

            self.l_row.push(r);
            for &(i, l) in &lcol {
                if l.abs() > DROP_TOL {
                    self.l_idx.push(i);
                    self.l_val.push(l);
                }
            }
            self.l_start.push(self.l_idx.len());

            self.u_row.push(r);
            self.u_pos.push(c);
            self.u_diag.push(piv);
            for &(j, v) in &urow {
                if v.abs() > DROP_TOL {
                    self.u_idx.push(j);
                    self.u_val.push(v);
                }
            }
            self.u_start.push(self.u_idx.len());

            row_done[r] = true;
            col_done[c] = true;
            cols[c].clear();
        }
        Ok(())
    }

    fn clear(&mut self, m: usize) {
        self.m = m;
        for v in [&mut self.l_row, &mut self.l_idx, &mut self.u_row, &mut self.u_pos, &mut self.u_idx] {
            v.clear();
        }
        self.l_start.clear();
        self.l_start.push(0);
        self.u_start.clear();
        self.u_start.push(0);
        self.l_val.clear();
        self.u_val.clear();
        self.u_diag.clear();
        self.eta_pos.clear();
        self.eta_pivot.clear();
        self.eta_start.clear();
        self.eta_start.push(0);
        self.eta_idx.clear();
        self.eta_val.clear();
    }

    /// Solve `B x = v`. `v` is indexed by row and is overwritten; the result
    /// is written to `out`, indexed by basis position.
    pub fn ftran(&self, v: &mut [f64], out: &mut [f64]) {
        for k in 0..self.l_row.len() {
            let t = v[self.l_row[k]];
            if t != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    v[self.l_idx[e]] -= self.l_val[e] * t;
                }
            }
        }
        for k in (0..self.u_row.len()).rev() {
            let mut s = v[self.u_row[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[e] * out[self.u_idx[e]];
            }
            out[self.u_pos[k]] = s / self.u_diag[k];
        }
        for k in 0..self.eta_pos.len() {
            let p = self.eta_pos[k];
            let t = out[p] / self.eta_pivot[k];
            out[p] = t;
            if t != 0.0 {
                for e in self.eta_start[k]..self.eta_start[k + 1] {
                    out[self.eta_idx[e]] -= self.eta_val[e] * t;
                }
            }
        }
    }

    /// Solve `B' y = d`. `d` is indexed by basis position and is overwritten;
    /// the result is written to `out`, indexed by row.
    pub fn btran(&self, d: &mut [f64], out: &mut [f64]) {
        for k in (0..self.eta_pos.len()).rev() {
            let p = self.eta_pos[k];
            let mut s = d[p];
            for e in self.eta_start[k]..self.eta_start[k + 1] {
                s -= self.eta_val[e] * d[self.eta_idx[e]];
            }
            d[p] = s / self.eta_pivot[k];
        }
        for k in 0..self.u_row.len() {
            let w = d[self.u_pos[k]] / self.u_diag[k];
            out[self.u_row[k]] = w;
            if w != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    d[self.u_idx[e]] -= self.u_val[e] * w;
                }
            }
        }
        for k in (0..self.l_row.len()).rev() {
            let mut s = 0.0;
            for e in self.l_start[k]..self.l_start[k + 1] {
                s += self.l_val[e] * out[self.l_idx[e]];
            }
            out[self.l_row[k]] -= s;
        }
    }

    /// Record that the basis column at `pos` was replaced by a column whose
    /// FTRAN image (under the current factor) is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        self.eta_pos.push(pos);
        self.eta_pivot.push(alpha[pos]);
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > DROP_TOL {
                self.eta_idx.push(i);
                self.eta_val.push(a);
            }
        }
        self.eta_start.push(self.eta_idx.len());
    }
}

/// Markowitz pivot choice with threshold partial pivoting. Singletons are
/// taken first; otherwise the sparsest columns are searched.
fn choose_pivot(
    cols: &[Vec<(usize, f64)>],
    rows: &[Vec<usize>],
    row_count: &[usize],
    row_done: &[bool],
    col_done: &[bool],
) -> Option<(usize, usize)> {
    let m = cols.len();
    let mut any_active = false;
    for c in 0..m {
        if col_done[c] {
            continue;
        }
        let n = cols[c].len();
        if n == 0 {
            return None;
        }
        if n == 1 && cols[c][0].1.abs() > SINGULAR_TOL {
            return Some((cols[c][0].0, c));
        }
        any_active = true;
    }
    if !any_active {
        return None;
    }

    for r in 0..m {
        if row_done[r] || row_count[r] != 1 {
            continue;
        }
        if let Some(&c) = rows[r].iter().find(|&&c| !col_done[c]) {
            let col = &cols[c];
            let cmax = col.iter().fold(0.0f64, |a, e| a.max(e.1.abs()));
            if let Some(e) = col.iter().find(|e| e.0 == r) {
                if e.1.abs() > SINGULAR_TOL && e.1.abs() >= THRESHOLD * cmax {
                    return Some((r, c));
                }
            }
        }
    }

    // Search a handful of the sparsest columns.
    let mut cand: Vec<(usize, usize)> =
        (0..m).filter(|&c| !col_done[c]).map(|c| (cols[c].len(), c)).collect();
    if cand.len() > 4 {
        cand.select_nth_unstable(3);
        cand.truncate(4);
    }
    cand.sort_unstable();
    let mut best: Option<(usize, usize, usize, f64)> = None;
    for &(count, c) in &cand {
        let col = &cols[c];
        let cmax = col.iter().fold(0.0f64, |a, e| a.max(e.1.abs()));
        if cmax <= SINGULAR_TOL {
            continue;
        }
        for &(r, v) in col {
            if v.abs() < THRESHOLD * cmax || v.abs() <= SINGULAR_TOL {
                continue;
            }
            let cost = (row_count[r] - 1) * (count - 1);
            let better = match best {
                None => true,
                Some((_, _, bc, bv)) => cost < bc || (cost == bc && v.abs() > bv),
            };
            if better {
                best = Some((r, c, cost, v.abs()));
            }
        }
    }
    best.map(|(r, c, _, _)| (r, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m)
            .map(|j| (0..m).filter(|&i| a[i][j] != 0.0).map(|i| (i, a[i][j])).collect())
            .collect()
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    fn mat_t_vec(a: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let m = a.len();
        (0..m).map(|j| (0..m).map(|i| a[i][j] * y[i]).sum()).collect()
    }

    #[test]
    fn solves_against_dense_matrix() {
        let a = vec![
            vec![4.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0, 1.0],
            vec![1.0, 3.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 5.0],
        ];
        let cols = dense_cols(&a);
        let mut f = BasisFactor::default();
        f.factorize(4, |p| &cols[p]).unwrap();

        let x_true = [1.0, -2.0, 0.5, 3.0];
        let mut b = matvec(&a, &x_true);
        let mut x = vec![0.0; 4];
        f.ftran(&mut b, &mut x);
        for (p, q) in x.iter().zip(&x_true) {
            assert!((p - q).abs() < 1e-12);
        }

        let y_true = [0.3, -1.0, 2.0, 0.25];
        let mut d = mat_t_vec(&a, &y_true);
        let mut y = vec![0.0; 4];
        f.btran(&mut d, &mut y);
        for (p, q) in y.iter().zip(&y_true) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_update_tracks_column_replacement() {
        let mut a = vec![
            vec![2.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 3.0],
        ];
        let cols = dense_cols(&a);
        let mut f = BasisFactor::default();
        f.factorize(3, |p| &cols[p]).unwrap();

        // Replace column 1 by (1, 1, 1).
        let newcol = [1.0, 1.0, 1.0];
        let mut v = newcol.to_vec();
        let mut alpha = vec![0.0; 3];
        f.ftran(&mut v, &mut alpha);
        f.update(1, &alpha);
        for i in 0..3 {
            a[i][1] = newcol[i];
        }

        let x_true = [1.0, 2.0, -1.0];
        let mut b = matvec(&a, &x_true);
        let mut x = vec![0.0; 3];
        f.ftran(&mut b, &mut x);
        for (p, q) in x.iter().zip(&x_true) {
            assert!((p - q).abs() < 1e-12, "{x:?}");
        }
        let y_true = [1.0, -1.0, 0.5];
        let mut d = mat_t_vec(&a, &y_true);
        let mut y = vec![0.0; 3];
        f.btran(&mut d, &mut y);
        for (p, q) in y.iter().zip(&y_true) {
            assert!((p - q).abs() < 1e-12, "{y:?}");
        }
    }

    #[test]
    fn reports_singular_basis() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let cols = dense_cols(&a);
        let mut f = BasisFactor::default();
        let err = f.factorize(2, |p| &cols[p]).unwrap_err();
        assert_eq!(err.positions.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }
}
