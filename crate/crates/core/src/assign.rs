//! Minimum-cost bipartite assignment (Kuhn-Munkres with potentials).

use crate::error::{Error, Result};

/// Cost given to forbidden pairs before solving; any match that lands on
/// one is dropped from the result.
pub const FORBIDDEN_COST: f64 = 1e9;

/// Dense `rows x cols` cost matrix with a mask of forbidden pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<f64>,
    forbidden: Vec<bool>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != rows * cols {
            return Err(Error::dim(format!(
                "cost matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                costs.len()
            )));
        }
        // non-finite entries are treated as forbidden
        let forbidden = costs.iter().map(|c| !c.is_finite()).collect();
        Ok(CostMatrix {
            rows,
            cols,
            costs,
            forbidden,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut costs = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                costs.push(f(r, c));
            }
        }
        let forbidden = costs.iter().map(|c: &f64| !c.is_finite()).collect();
        CostMatrix {
            rows,
            cols,
            costs,
            forbidden,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("ragged cost matrix"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.costs[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, cost: f64) {
        let i = row * self.cols + col;
        self.costs[i] = cost;
        self.forbidden[i] = !cost.is_finite();
    }

    pub fn forbid(&mut self, row: usize, col: usize) {
        self.forbidden[row * self.cols + col] = true;
    }

    pub fn is_forbidden(&self, row: usize, col: usize) -> bool {
        self.forbidden[row * self.cols + col]
    }

    /// Sum of the costs of `matches`.
    pub fn total(&self, matches: &[(usize, usize)]) -> f64 {
        matches.iter().map(|&(r, c)| self.get(r, c)).sum()
    }
}

/// Minimum-cost matching over allowed pairs.
///
/// Covers `min(rows, cols)` pairs whenever enough allowed pairs exist; rows
/// or columns left with only forbidden options stay unmatched. Among
/// equal-cost optima the lexicographically smallest `(row, col)` list wins.
/// The result is sorted by row.
pub fn solve(matrix: &CostMatrix) -> Vec<(usize, usize)> {
    let n = matrix.rows.max(matrix.cols);
    if matrix.rows == 0 || matrix.cols == 0 {
        return Vec::new();
    }
    let mut square = vec![0.0; n * n];
    let mut sentinel = vec![false; n * n];
    let mut scale = 1.0f64;
    for r in 0..matrix.rows {
        for c in 0..matrix.cols {
            let i = r * n + c;
            if matrix.is_forbidden(r, c) {
                square[i] = FORBIDDEN_COST;
                sentinel[i] = true;
            } else {
                square[i] = matrix.get(r, c);
                scale = scale.max(square[i].abs());
            }
        }
    }
    let (row_of_col, u, v) = hungarian(n, &square);
    let mut col_of_row = vec![0usize; n];
    for (c, &r) in row_of_col.iter().enumerate() {
        col_of_row[r] = c;
    }
    let tol = 1e-9 * scale;
    canonicalize(n, &mut col_of_row, |r, c| {
        let i = r * n + c;
        !sentinel[i] && (square[i] - u[r] - v[c]).abs() <= tol
    });
    let mut out: Vec<(usize, usize)> = col_of_row
        .iter()
        .enumerate()
        .filter(|&(r, &c)| r < matrix.rows && c < matrix.cols && !matrix.is_forbidden(r, c))
        .map(|(r, &c)| (r, c))
        .collect();
    out.sort_unstable();
    out
}

/// Shortest-augmenting-path Hungarian method on an `n x n` matrix.
/// Returns the row assigned to each column and the dual potentials.
fn hungarian(n: usize, a: &[f64]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    // 1-based internally; index 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let row_of_col = (1..=n).map(|j| p[j] - 1).collect();
    (row_of_col, u[1..].to_vec(), v[1..].to_vec())
}

/// Rewrites an optimal perfect matching into the lexicographically smallest
/// one among matchings using only `tight` edges (the equality subgraph of
/// the optimal duals, so every such matching is also optimal).
fn canonicalize(n: usize, col_of_row: &mut [usize], tight: impl Fn(usize, usize) -> bool) {
    let mut row_of_col = vec![0usize; n];
    for (r, &c) in col_of_row.iter().enumerate() {
        row_of_col[c] = r;
    }
    let is_edge = |r: usize, c: usize, current: &[usize]| current[r] == c || tight(r, c);

    for i in 0..n {
        for j in 0..n {
            if col_of_row[i] == j {
                break;
            }
            // columns already fixed to earlier rows are off limits
            if row_of_col[j] < i || !is_edge(i, j, col_of_row) {
                continue;
            }
            // reroute the row currently on `j` to the column `i` releases
            let displaced = row_of_col[j];
            let target = col_of_row[i];
            let mut trial_cols = col_of_row.to_vec();
            let mut trial_rows = row_of_col.clone();
            trial_cols[i] = j;
            trial_rows[j] = i;
            let mut visited = vec![false; n];
            visited[j] = true;
            if reroute(
                displaced,
                target,
                i,
                &mut trial_cols,
                &mut trial_rows,
                &mut visited,
                &tight,
                col_of_row,
            ) {
                col_of_row.copy_from_slice(&trial_cols);
                row_of_col = trial_rows;
                break;
            }
        }
    }
}

/// Depth-first alternating path that gives `row` a new tight column, ending
/// at the free column `free`. Rows at or before `fixed` are not moved.
#[allow(clippy::too_many_arguments)]
fn reroute(
    row: usize,
    free: usize,
    fixed: usize,
    cols: &mut [usize],
    rows: &mut [usize],
    visited: &mut [bool],
    tight: &impl Fn(usize, usize) -> bool,
    original: &[usize],
) -> bool {
    let n = cols.len();
    for c in 0..n {
        if visited[c] || !(tight(row, c) || original[row] == c) {
            continue;
        }
        visited[c] = true;
        if c == free {
            cols[row] = c;
            rows[c] = row;
            return true;
        }
        let holder = rows[c];
        if holder <= fixed {
            continue;
        }
        if reroute(holder, free, fixed, cols, rows, visited, tight, original) {
            cols[row] = c;
            rows[c] = row;
            return true;
        }
    }
    false
}
