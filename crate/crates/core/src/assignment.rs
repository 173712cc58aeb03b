//! Gated minimum-cost bipartite matching.
//!
//! The solver is a shortest-augmenting-path method in the Jonker-Volgenant
//! family: one Dijkstra-like search per row over reduced costs, with dual
//! potentials updated after every augmentation. Rectangular inputs are solved
//! on the orientation with fewer rows, so the smaller side is always fully
//! assigned before gating.

use crate::error::{Error, Result};

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "cost matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged cost matrix rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    fn transposed(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            data.extend((0..self.rows).map(|r| self.get(r, c)));
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub row: usize,
    pub col: usize,
    pub cost: f64,
}

/// Outcome of [`solve`]. All index lists are ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub matches: Vec<Match>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl MatchResult {
    pub fn total_cost(&self) -> f64 {
        self.matches.iter().map(|m| m.cost).sum()
    }
}

/// Minimum-cost assignment followed by gating: the full matrix is solved
/// first, then every assigned pair costing more than `max_cost` is split back
/// into the unmatched lists.
pub fn solve(costs: &CostMatrix, max_cost: f64) -> Result<MatchResult> {
    if !max_cost.is_finite() {
        return Err(Error::invalid(format!("gating threshold {max_cost} is not finite")));
    }
    if let Some(pos) = costs.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite cost at ({}, {})",
            pos / costs.cols.max(1),
            pos % costs.cols.max(1)
        )));
    }

    let pairs = if costs.rows <= costs.cols {
        assign_wide(costs)
    } else {
        let mut p = assign_wide(&costs.transposed());
        for pair in &mut p {
            *pair = (pair.1, pair.0);
        }
        p.sort_unstable();
        p
    };

    let mut row_used = vec![false; costs.rows];
    let mut col_used = vec![false; costs.cols];
    let mut matches = Vec::with_capacity(pairs.len());
    for (row, col) in pairs {
        let cost = costs.get(row, col);
        if cost <= max_cost {
            row_used[row] = true;
            col_used[col] = true;
            matches.push(Match { row, col, cost });
        }
    }
    let unused = |used: &[bool]| {
        used.iter()
            .enumerate()
            .filter_map(|(i, &u)| (!u).then_some(i))
            .collect::<Vec<_>>()
    };
    Ok(MatchResult {
        matches,
        unmatched_rows: unused(&row_used),
        unmatched_cols: unused(&col_used),
    })
}

/// Assigns every row of a matrix with `rows <= cols`. Returns `(row, col)`
/// pairs sorted by row.
fn assign_wide(costs: &CostMatrix) -> Vec<(usize, usize)> {
    let (nr, nc) = (costs.rows, costs.cols);
    debug_assert!(nr <= nc);
    if nr == 0 {
        return Vec::new();
    }

    const NONE: usize = usize::MAX;
    let mut u = vec![0.0f64; nr];
    let mut v = vec![0.0f64; nc];
    let mut col4row = vec![NONE; nr];
    let mut row4col = vec![NONE; nc];
    let mut shortest = vec![f64::INFINITY; nc];
    let mut path = vec![NONE; nc];
    let mut row_seen = vec![false; nr];
    let mut col_seen = vec![false; nc];
    let mut seen_rows = Vec::with_capacity(nr);
    let mut seen_cols = Vec::with_capacity(nc);

    for cur_row in 0..nr {
        shortest.fill(f64::INFINITY);
        path.fill(NONE);
        row_seen.fill(false);
        col_seen.fill(false);
        seen_rows.clear();
        seen_cols.clear();

        let mut min_val = 0.0;
        let mut row = cur_row;
        let sink = loop {
            row_seen[row] = true;
            seen_rows.push(row);
            let mut lowest = f64::INFINITY;
            let mut best = NONE;
            let base = row * nc;
            for col in 0..nc {
                if col_seen[col] {
                    continue;
                }
                let reduced = min_val + costs.data[base + col] - u[row] - v[col];
                if reduced < shortest[col] {
                    path[col] = row;
                    shortest[col] = reduced;
                }
                // Lowest index wins ties, except that a free column beats an
                // assigned one at equal distance.
                if shortest[col] < lowest
                    || (shortest[col] == lowest && best != NONE && row4col[col] == NONE && row4col[best] != NONE)
                {
                    lowest = shortest[col];
                    best = col;
                }
            }
            debug_assert!(best != NONE, "finite costs always leave a reachable column");
            min_val = lowest;
            col_seen[best] = true;
            seen_cols.push(best);
            if row4col[best] == NONE {
                break best;
            }
            row = row4col[best];
        };

        u[cur_row] += min_val;
        for &r in &seen_rows {
            if r != cur_row {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for &c in &seen_cols {
            v[c] -= min_val - shortest[c];
        }

        let mut col = sink;
        loop {
            let r = path[col];
            row4col[col] = r;
            let prev = std::mem::replace(&mut col4row[r], col);
            if r == cur_row {
                break;
            }
            col = prev;
        }
    }

    col4row.into_iter().enumerate().collect()
}
