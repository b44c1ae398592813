//! Dense linear programming for the Chebyshev center and bounding boxes.
//!
//! Problems arrive in inequality form `max c·x s.t. Ax <= b` with `x` free,
//! usually with far more rows than columns (`n >> m`). Rather than a primal
//! tableau with `n` slack columns and split variables, we run a two-phase
//! tableau simplex on the dual `min b·y s.t. Aᵀy = c, y >= 0`, which has `m`
//! rows and `n` columns. The primal optimum is read off the dual multipliers
//! and then polished by solving the final active set directly.
//!
//! Pivoting uses Dantzig's rule and falls back to Bland's rule after a run of
//! degenerate pivots, which rules out cycling.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{dot, norm, AxisBox, HPolytope};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
/// Reduced cost an unpivotable column needs before it counts as a ray.
const UNBOUNDED_TOL: f64 = 1e-7;
/// Degenerate pivots in a row before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 20;
const REPRICE_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Maximizer; empty unless `status == Optimal`.
    pub x: Vec<f64>,
    /// Optimal objective; NaN unless `status == Optimal`.
    pub value: f64,
}

impl LpOutcome {
    fn without_solution(status: LpStatus) -> Self {
        Self { status, x: Vec::new(), value: f64::NAN }
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

/// Dense tableau for `min cost·y s.t. M y = r, y >= 0` with `r >= 0`, one
/// artificial column per row.
struct Tableau {
    rows: usize,
    /// Structural columns; artificial column `k` sits at index `cols + k`.
    cols: usize,
    /// `rows x (cols + rows + 1)`, last column is the right-hand side.
    t: Vec<f64>,
    /// Reduced costs for every non-rhs column.
    d: Vec<f64>,
    /// Column costs the reduced costs were last priced against.
    cost: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    cap: usize,
}

impl Tableau {
    fn new(rows: usize, cols: usize, m: &[f64], r: &[f64], cap: usize) -> Self {
        let width = cols + rows + 1;
        let mut t = vec![0.0; rows * width];
        for i in 0..rows {
            let row = &mut t[i * width..(i + 1) * width];
            let sign = if r[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..cols {
                row[j] = sign * m[i * cols + j];
            }
            row[cols + i] = 1.0;
            row[width - 1] = sign * r[i];
        }
        Self {
            rows,
            cols,
            t,
            d: vec![0.0; cols + rows],
            cost: vec![0.0; cols + rows],
            basis: (cols..cols + rows).collect(),
            iterations: 0,
            cap,
        }
    }

    fn width(&self) -> usize {
        self.cols + self.rows + 1
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.width() + self.width() - 1]
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width() + j]
    }

    /// Reduced costs for column costs `cost` (length `cols + rows`).
    fn price(&mut self, cost: &[f64]) {
        self.cost.copy_from_slice(cost);
        self.reprice();
    }

    /// Recomputes reduced costs from the tableau, discarding drift from
    /// incremental updates.
    fn reprice(&mut self) {
        let w = self.width();
        let cost = &self.cost;
        self.d.copy_from_slice(cost);
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * w..i * w + w - 1];
                for (dj, tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width();
        let inv = 1.0 / self.t[pr * w + pc];
        for v in &mut self.t[pr * w..(pr + 1) * w] {
            *v *= inv;
        }
        let pivot_row: Vec<f64> = self.t[pr * w..(pr + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == pr {
                continue;
            }
            let f = self.t[i * w + pc];
            if f != 0.0 {
                for (v, p) in self.t[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                self.t[i * w + pc] = 0.0;
            }
        }
        let f = self.d[pc];
        if f != 0.0 {
            for (dj, p) in self.d.iter_mut().zip(&pivot_row) {
                *dj -= f * p;
            }
            self.d[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Runs simplex pivots until optimality or unboundedness. Only the first
    /// `enter_limit` columns may enter the basis. A column with no usable
    /// pivot and a reduced cost within round-off of zero is set aside until
    /// the next pivot instead of being reported as an unbounded direction.
    fn run(&mut self, enter_limit: usize) -> Result<Phase> {
        let mut streak = 0;
        let mut blocked = vec![false; enter_limit];
        let mut fresh = false;
        loop {
            if self.iterations >= self.cap {
                return Err(Error::IterationLimit { cap: self.cap });
            }
            if self.iterations.is_multiple_of(REPRICE_EVERY) && !fresh {
                self.reprice();
                fresh = true;
            }
            let bland = streak >= DEGENERATE_STREAK;
            let eligible = |j: &usize| !blocked[*j] && self.d[*j] < -COST_TOL;
            let entering = if bland {
                (0..enter_limit).find(eligible)
            } else {
                (0..enter_limit)
                    .filter(eligible)
                    .min_by(|&a, &b| self.d[a].total_cmp(&self.d[b]))
            };
            let Some(pc) = entering else {
                if !fresh {
                    self.reprice();
                    fresh = true;
                    continue;
                }
                return Ok(Phase::Optimal);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12 * (1.0 + br.abs())
                                || (ratio <= br + 1e-12 * (1.0 + br.abs())
                                    && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((pr, ratio)) = best else {
                if !fresh {
                    self.reprice();
                    fresh = true;
                    continue;
                }
                if self.d[pc] < -UNBOUNDED_TOL {
                    return Ok(Phase::Unbounded);
                }
                blocked[pc] = true;
                continue;
            };
            streak = if ratio.abs() <= 1e-12 { streak + 1 } else { 0 };
            self.pivot(pr, pc);
            fresh = false;
            blocked.fill(false);
            self.iterations += 1;
        }
    }

    /// Phase one. Returns false when `M y = r, y >= 0` has no solution.
    fn find_feasible(&mut self) -> Result<bool> {
        let total = self.cols + self.rows;
        let mut cost = vec![0.0; total];
        cost[self.cols..].fill(1.0);
        self.price(&cost);
        // Phase one is bounded below by zero; an unbounded report is round-off.
        let _ = self.run(total)?;
        let infeasibility: f64 = (0..self.rows)
            .filter(|&i| self.basis[i] >= self.cols)
            .map(|i| self.rhs(i))
            .sum();
        let rhs_mass: f64 = (0..self.rows).map(|i| self.rhs(i).abs()).sum::<f64>();
        if infeasibility > FEAS_TOL * (1.0 + rhs_mass) {
            return Ok(false);
        }
        // Drive zero-level artificials out where a structural pivot exists.
        for i in 0..self.rows {
            if self.basis[i] >= self.cols {
                if let Some(j) = (0..self.cols).find(|&j| self.at(i, j).abs() > PIVOT_TOL) {
                    self.pivot(i, j);
                }
            }
        }
        Ok(true)
    }

    /// Phase two on structural costs `cost` (length `cols`).
    fn optimize(&mut self, cost: &[f64]) -> Result<Phase> {
        let mut full = cost.to_vec();
        full.resize(self.cols + self.rows, 0.0);
        self.price(&full);
        self.run(self.cols)
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        (0..self.rows)
            .filter(|&i| self.basis[i] < self.cols)
            .map(|i| cost[self.basis[i]] * self.rhs(i))
            .sum()
    }

    /// Multipliers of the (sign-normalized) rows, `π_k = -d[art_k]`.
    fn multipliers(&self, r: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|k| {
                let sign = if r[k] < 0.0 { -1.0 } else { 1.0 };
                -sign * self.d[self.cols + k]
            })
            .collect()
    }

    fn structural_basis(&self) -> Vec<usize> {
        self.basis.iter().copied().filter(|&j| j < self.cols).collect()
    }
}

/// Solves the square system `a x = b` (row-major) by partial pivoting.
pub(crate) fn solve_square(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    debug_assert_eq!(a.len(), m * m);
    let amax = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for col in 0..m {
        let p = (col..m).max_by(|&i, &j| a[i * m + col].abs().total_cmp(&a[j * m + col].abs()))?;
        if a[p * m + col].abs() <= 1e-12 * amax.max(1e-300) {
            return None;
        }
        if p != col {
            for j in 0..m {
                a.swap(p * m + j, col * m + j);
            }
            b.swap(p, col);
        }
        let piv = a[col * m + col];
        for i in col + 1..m {
            let f = a[i * m + col] / piv;
            if f != 0.0 {
                for j in col..m {
                    a[i * m + j] -= f * a[col * m + j];
                }
                b[i] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|j| a[i * m + j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i * m + i];
    }
    Some(x)
}

/// Rows normalized to unit length; all-zero rows are dropped after checking `0 <= b_i`.
struct Normalized {
    /// `m x n` transpose of the normalized constraint matrix.
    at: Vec<f64>,
    b: Vec<f64>,
    rows: Vec<Vec<f64>>,
    feasible_zero_rows: bool,
}

fn normalize(a: &[f64], b: &[f64], m: usize) -> Normalized {
    let mut rows = Vec::with_capacity(b.len());
    let mut nb = Vec::with_capacity(b.len());
    let mut feasible_zero_rows = true;
    for (row, &bi) in a.chunks_exact(m).zip(b) {
        let s = norm(row);
        if s == 0.0 {
            feasible_zero_rows &= bi >= 0.0;
            continue;
        }
        rows.push(row.iter().map(|v| v / s).collect::<Vec<_>>());
        nb.push(bi / s);
    }
    let n = rows.len();
    let mut at = vec![0.0; m * n];
    for (i, row) in rows.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            at[k * n + i] = *v;
        }
    }
    Normalized { at, b: nb, rows, feasible_zero_rows }
}

/// Whether `{x : Ax <= b}` is non-empty, by Farkas: it is empty iff some
/// `y >= 0` with `Aᵀy = 0`, `Σy = 1` has `b·y < 0`.
fn primal_feasible(nz: &Normalized, m: usize, cap: usize) -> Result<bool> {
    let n = nz.b.len();
    let mut mat = nz.at.clone();
    mat.extend(std::iter::repeat_n(1.0, n));
    let mut r = vec![0.0; m];
    r.push(1.0);
    let mut tab = Tableau::new(m + 1, n, &mat, &r, cap);
    if !tab.find_feasible()? {
        return Ok(true);
    }
    match tab.optimize(&nz.b)? {
        Phase::Unbounded => Ok(false),
        Phase::Optimal => Ok(tab.objective(&nz.b) >= -FEAS_TOL),
    }
}

/// `max c·x s.t. Ax <= b` over free `x`. `a` is row-major `n x m`.
pub fn solve_lp(c: &[f64], a: &[f64], b: &[f64]) -> Result<LpOutcome> {
    let m = c.len();
    let n = b.len();
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("LP needs at least one variable and one row".into()));
    }
    if a.len() != n * m {
        return Err(Error::DimensionMismatch { expected: n * m, got: a.len() });
    }
    if a.iter().chain(b).chain(c).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "linear program" });
    }
    let cap = 50 * (n + m);
    let nz = normalize(a, b, m);
    if !nz.feasible_zero_rows {
        return Ok(LpOutcome::without_solution(LpStatus::Infeasible));
    }
    let c_norm = norm(c);
    let c_hat: Vec<f64> = if c_norm > 0.0 { c.iter().map(|v| v / c_norm).collect() } else { c.to_vec() };
    let nrows = nz.b.len();
    if nrows == 0 {
        // Only trivially true rows: every x is feasible.
        return Ok(if c_norm > 0.0 {
            LpOutcome::without_solution(LpStatus::Unbounded)
        } else {
            LpOutcome { status: LpStatus::Optimal, x: vec![0.0; m], value: 0.0 }
        });
    }

    let mut tab = Tableau::new(m, nrows, &nz.at, &c_hat, cap);
    if !tab.find_feasible()? {
        // Dual infeasible: the primal is unbounded or infeasible.
        let status = if primal_feasible(&nz, m, cap)? {
            LpStatus::Unbounded
        } else {
            LpStatus::Infeasible
        };
        return Ok(LpOutcome::without_solution(status));
    }
    if let Phase::Unbounded = tab.optimize(&nz.b)? {
        return Ok(LpOutcome::without_solution(LpStatus::Infeasible));
    }

    let mut x = tab.multipliers(&c_hat);
    let active = tab.structural_basis();
    if active.len() == m {
        let sys: Vec<f64> = active.iter().flat_map(|&i| nz.rows[i].iter().copied()).collect();
        let rhs: Vec<f64> = active.iter().map(|&i| nz.b[i]).collect();
        if let Some(polished) = solve_square(sys, rhs) {
            let worst = |x: &[f64]| {
                nz.rows
                    .iter()
                    .zip(&nz.b)
                    .map(|(r, b)| dot(r, x) - b)
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            if worst(&polished) <= worst(&x).max(FEAS_TOL) {
                x = polished;
            }
        }
    }
    let value = dot(c, &x);
    Ok(LpOutcome { status: LpStatus::Optimal, x, value })
}

/// Center and radius of the largest ball inside a polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// `max r s.t. a_i·x + r ||a_i|| <= b_i`.
pub fn chebyshev_center(p: &HPolytope) -> Result<ChebyshevBall> {
    let d = p.dim();
    let mut a = Vec::with_capacity(p.n_facets() * (d + 1));
    for (row, rn) in p.rows().zip(p.row_norms()) {
        a.extend_from_slice(row);
        a.push(*rn);
    }
    let mut c = vec![0.0; d + 1];
    c[d] = 1.0;
    let out = solve_lp(&c, &a, p.rhs())?;
    match out.status {
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::UnboundedRadius),
        LpStatus::Optimal => {
            let radius = out.x[d];
            if radius < -FEAS_TOL * p.scale() {
                return Err(Error::Infeasible);
            }
            let mut center = out.x;
            center.truncate(d);
            Ok(ChebyshevBall { center, radius: radius.max(0.0) })
        }
    }
}

/// Tight axis-aligned bounding box from `2d` LPs, solved in parallel.
pub fn bounding_box(p: &HPolytope) -> Result<AxisBox> {
    let d = p.dim();
    let extremes: Vec<Result<f64>> = (0..2 * d)
        .into_par_iter()
        .map(|k| {
            let j = k / 2;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let mut c = vec![0.0; d];
            c[j] = sign;
            let out = solve_lp(&c, p.matrix(), p.rhs())?;
            match out.status {
                LpStatus::Optimal => Ok(sign * out.value),
                LpStatus::Unbounded => Err(Error::Unbounded { direction: Some((j, sign)) }),
                LpStatus::Infeasible => Err(Error::Infeasible),
            }
        })
        .collect();
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for (k, v) in extremes.into_iter().enumerate() {
        let v = v?;
        if k % 2 == 0 {
            hi[k / 2] = v;
        } else {
            lo[k / 2] = v;
        }
    }
    for j in 0..d {
        // LP round-off can leave lo a hair above hi on flat polytopes.
        if lo[j] > hi[j] {
            let mid = 0.5 * (lo[j] + hi[j]);
            lo[j] = mid;
            hi[j] = mid;
        }
    }
    AxisBox::new(lo, hi)
}
