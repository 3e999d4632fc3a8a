//! Dense bounded-variable simplex on a full tableau.
//!
//! Every structural column must have finite bounds. Rows are `lo ≤ a·x ≤ hi`
//! with either side possibly infinite; each row gets a logical variable
//! `s_r = a_r·x` carrying the row bounds. Starting from the all-logical basis
//! with each structural at the bound favoured by its cost, the basis is dual
//! feasible, so the dual simplex method applies directly. The same property
//! makes warm starts cheap: adding rows or changing bounds keeps dual
//! feasibility and only needs a few dual pivots.

use crate::error::{Error, Result};

pub const PIVOT_TOL: f64 = 1e-9;
pub const FEAS_TOL: f64 = 1e-9;
/// Accepted row residual and bound violation on returned solutions.
pub const RESIDUAL_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
const STALL_LIMIT: usize = 100;
const DRIFT_TOL: f64 = 1e-7;
// relative to the largest entry of the pivot row
const REL_PIVOT_TOL: f64 = 1e-7;
const REFRESH_EVERY: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coefs: Vec<(usize, f64)>,
    pub lo: f64,
    pub hi: f64,
}

/// `maximize cost·x` subject to rows and column bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpProblem {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn new(n: usize) -> Self {
        LpProblem {
            cost: vec![0.0; n],
            lower: vec![0.0; n],
            upper: vec![0.0; n],
            rows: Vec::new(),
        }
    }

    pub fn add_var(&mut self, lo: f64, hi: f64, cost: f64) -> usize {
        self.cost.push(cost);
        self.lower.push(lo);
        self.upper.push(hi);
        self.cost.len() - 1
    }

    pub fn add_row(&mut self, coefs: Vec<(usize, f64)>, lo: f64, hi: f64) {
        self.rows.push(LpRow { coefs, lo, hi });
    }

    pub fn n(&self) -> usize {
        self.cost.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    /// Cannot occur with bounded columns; kept for API completeness.
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Solve once from scratch.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    let mut s = DualSimplex::new(p)?;
    let status = s.solve();
    Ok(LpSolution {
        status,
        x: s.x().to_vec(),
        objective: s.objective(),
        iterations: s.iterations(),
    })
}

/// Warm-startable solver state.
#[derive(Debug, Clone)]
pub struct DualSimplex {
    n: usize,
    /// Minimization costs over structurals then logicals.
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    tab: Vec<Vec<f64>>,
    d: Vec<f64>,
    basis: Vec<usize>,
    /// Row of a basic variable, `usize::MAX` when nonbasic.
    pos: Vec<usize>,
    at_upper: Vec<bool>,
    x: Vec<f64>,
    iters: usize,
    pub max_iterations: usize,
}

impl DualSimplex {
    pub fn new(p: &LpProblem) -> Result<Self> {
        let n = p.n();
        if p.lower.len() != n || p.upper.len() != n {
            return Err(Error::InvalidArgument("bound vectors do not match cost length".into()));
        }
        for j in 0..n {
            let (l, u) = (p.lower[j], p.upper[j]);
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidArgument(format!("column {j} has an infinite bound")));
            }
            if l > u + FEAS_TOL {
                return Err(Error::InvalidArgument(format!("column {j} has lower {l} > upper {u}")));
            }
        }
        let mut s = DualSimplex {
            n,
            cost: p.cost.iter().map(|c| -c).collect(),
            lo: p.lower.clone(),
            hi: p.upper.iter().zip(&p.lower).map(|(&u, &l)| u.max(l)).collect(),
            rows: Vec::new(),
            tab: Vec::new(),
            d: Vec::new(),
            basis: Vec::new(),
            pos: vec![usize::MAX; n],
            at_upper: vec![false; n],
            x: vec![0.0; n],
            iters: 0,
            max_iterations: 200_000,
        };
        s.d = s.cost.clone();
        for j in 0..n {
            s.at_upper[j] = s.d[j] < 0.0;
            s.x[j] = if s.at_upper[j] { s.hi[j] } else { s.lo[j] };
        }
        for r in &p.rows {
            s.add_row(&r.coefs, r.lo, r.hi)?;
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn iterations(&self) -> usize {
        self.iters
    }

    /// Structural values.
    pub fn x(&self) -> &[f64] {
        &self.x[..self.n]
    }

    /// Objective in the caller's maximization sense.
    pub fn objective(&self) -> f64 {
        -(0..self.n).map(|j| self.cost[j] * self.x[j]).sum::<f64>()
    }

    /// Row duals `y` of the minimization form `min -c·x`.
    pub fn duals(&self) -> Vec<f64> {
        (0..self.m()).map(|r| self.d[self.n + r]).collect()
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    fn width(&self) -> usize {
        self.n + self.rows.len()
    }

    /// Append `lo ≤ a·x ≤ hi`; its logical enters the basis.
    pub fn add_row(&mut self, coefs: &[(usize, f64)], lo: f64, hi: f64) -> Result<()> {
        if lo > hi + FEAS_TOL || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidArgument(format!("row bounds [{lo}, {hi}] are empty")));
        }
        let mut dense_a = vec![0.0; self.n];
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coefs.len());
        for &(j, a) in coefs {
            if j >= self.n {
                return Err(Error::IndexOutOfRange {
                    what: "column",
                    index: j,
                    limit: self.n,
                });
            }
            if !a.is_finite() {
                return Err(Error::InvalidArgument("non-finite row coefficient".into()));
            }
            dense_a[j] += a;
        }
        for (j, &a) in dense_a.iter().enumerate() {
            if a != 0.0 {
                merged.push((j, a));
            }
        }
        let w_old = self.width();
        // new tableau row: a_B^T T - [a, 0] plus a unit entry on its own logical
        let mut row = vec![0.0; w_old + 1];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n && dense_a[b] != 0.0 {
                let f = dense_a[b];
                for (v, t) in row.iter_mut().zip(&self.tab[i]) {
                    *v += f * t;
                }
            }
        }
        for &(j, a) in &merged {
            row[j] -= a;
        }
        for (j, v) in row.iter_mut().enumerate().take(w_old) {
            if self.pos[j] != usize::MAX || v.abs() < DROP_TOL {
                *v = 0.0;
            }
        }
        row[w_old] = 1.0;
        for t in &mut self.tab {
            t.push(0.0);
        }
        let value: f64 = merged.iter().map(|&(j, a)| a * self.x[j]).sum();
        self.tab.push(row);
        self.rows.push(merged);
        self.cost.push(0.0);
        self.lo.push(lo);
        self.hi.push(hi.max(lo));
        self.d.push(0.0);
        self.pos.push(self.basis.len());
        self.basis.push(w_old);
        self.at_upper.push(false);
        self.x.push(value);
        Ok(())
    }

    /// Change column bounds; nonbasic columns move to the bound their reduced
    /// cost favours, which keeps the basis dual feasible.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        assert!(j < self.n, "set_bounds on a non-structural column");
        let hi = hi.max(lo);
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.pos[j] != usize::MAX {
            return;
        }
        if self.d[j] > 0.0 {
            self.at_upper[j] = false;
        } else if self.d[j] < 0.0 {
            self.at_upper[j] = true;
        }
        let new = if self.at_upper[j] { hi } else { lo };
        let delta = new - self.x[j];
        if delta != 0.0 {
            for (i, &b) in self.basis.iter().enumerate() {
                let t = self.tab[i][j];
                if t != 0.0 {
                    self.x[b] -= t * delta;
                }
            }
            self.x[j] = new;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let piv = self.tab[r][q];
        let inv = 1.0 / piv;
        let mut nz: Vec<(usize, f64)> = Vec::new();
        for (j, v) in self.tab[r].iter_mut().enumerate() {
            if *v != 0.0 {
                *v *= inv;
                if v.abs() < DROP_TOL {
                    *v = 0.0;
                } else {
                    nz.push((j, *v));
                }
            }
        }
        self.tab[r][q] = 1.0;
        for i in 0..self.tab.len() {
            if i == r {
                continue;
            }
            let f = self.tab[i][q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i];
            for &(j, v) in &nz {
                let nv = row[j] - f * v;
                row[j] = if nv.abs() < DROP_TOL { 0.0 } else { nv };
            }
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &(j, v) in &nz {
                self.d[j] -= f * v;
            }
        }
        self.d[q] = 0.0;
        let leaving = self.basis[r];
        self.pos[leaving] = usize::MAX;
        self.basis[r] = q;
        self.pos[q] = r;
    }

    /// Basic values from the nonbasic ones.
    fn refresh_primal(&mut self) {
        let w = self.width();
        for j in 0..w {
            if self.pos[j] == usize::MAX {
                self.x[j] = if self.at_upper[j] { self.hi[j] } else { self.lo[j] };
            }
        }
        for i in 0..self.basis.len() {
            let mut v = 0.0;
            for (j, &t) in self.tab[i].iter().enumerate() {
                if t != 0.0 && self.pos[j] == usize::MAX {
                    v -= t * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    fn refresh_duals(&mut self) {
        let w = self.width();
        let mut d = self.cost.clone();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = self.cost[b];
            if cb != 0.0 {
                for (j, &t) in self.tab[i].iter().enumerate() {
                    if t != 0.0 {
                        d[j] -= cb * t;
                    }
                }
            }
        }
        for j in 0..w {
            if self.pos[j] != usize::MAX {
                d[j] = 0.0;
            }
        }
        self.d = d;
    }

    fn slack_tableau(&mut self) {
        let w = self.width();
        let m = self.rows.len();
        self.tab = (0..m)
            .map(|r| {
                let mut row = vec![0.0; w];
                for &(j, a) in &self.rows[r] {
                    row[j] = -a;
                }
                row[self.n + r] = 1.0;
                row
            })
            .collect();
        self.basis = (0..m).map(|r| self.n + r).collect();
        self.pos = vec![usize::MAX; w];
        for r in 0..m {
            self.pos[self.n + r] = r;
        }
    }

    /// Rebuild the tableau for the current basis from the original rows.
    /// Columns that cannot be pivoted in are left nonbasic.
    fn refactor(&mut self) {
        let target: Vec<usize> = self.basis.clone();
        let mut in_target = vec![false; self.width()];
        for &b in &target {
            in_target[b] = true;
        }
        self.slack_tableau();
        let n = self.n;
        for &j in target.iter().filter(|&&j| j < n) {
            let mut best = None;
            let mut best_abs = 1e-11;
            for i in 0..self.basis.len() {
                let b = self.basis[i];
                if b >= self.n && !in_target[b] {
                    let a = self.tab[i][j].abs();
                    if a > best_abs {
                        best_abs = a;
                        best = Some(i);
                    }
                }
            }
            if let Some(i) = best {
                self.pivot(i, j);
            }
        }
        self.refresh_duals();
        self.repair_dual_status();
        self.refresh_primal();
    }

    /// Put nonbasic columns on the bound matching their reduced cost. Returns
    /// false if some logical would need an infinite bound.
    fn repair_dual_status(&mut self) -> bool {
        let mut ok = true;
        for j in 0..self.width() {
            if self.pos[j] != usize::MAX {
                continue;
            }
            if self.d[j] > DUAL_TOL {
                if self.lo[j].is_finite() {
                    self.at_upper[j] = false;
                } else {
                    ok = false;
                }
            } else if self.d[j] < -DUAL_TOL {
                if self.hi[j].is_finite() {
                    self.at_upper[j] = true;
                } else {
                    ok = false;
                }
            } else if self.at_upper[j] && !self.hi[j].is_finite() {
                self.at_upper[j] = false;
            } else if !self.at_upper[j] && !self.lo[j].is_finite() {
                self.at_upper[j] = true;
            }
        }
        ok
    }

    fn cold_start(&mut self) {
        self.slack_tableau();
        self.d = self.cost.clone();
        for j in 0..self.n {
            self.at_upper[j] = self.d[j] < 0.0;
        }
        self.refresh_primal();
    }

    fn max_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, row) in self.rows.iter().enumerate() {
            let ax: f64 = row.iter().map(|&(j, a)| a * self.x[j]).sum();
            worst = worst.max((ax - self.x[self.n + r]).abs());
            worst = worst.max(self.lo[self.n + r] - ax).max(ax - self.hi[self.n + r]);
        }
        for j in 0..self.n {
            worst = worst.max(self.lo[j] - self.x[j]).max(self.x[j] - self.hi[j]);
        }
        worst
    }

    fn violation(&self, b: usize) -> (f64, bool) {
        let v = self.x[b];
        if v < self.lo[b] {
            (self.lo[b] - v, true)
        } else {
            ((v - self.hi[b]).max(0.0), false)
        }
    }

    /// Most violated basic row. Columns in `tolerated` are skipped while their
    /// violation stays within the residual tolerance.
    fn leaving_row(&self, bland: bool, tolerated: &[bool]) -> Option<(usize, bool)> {
        let mut best: Option<(usize, bool)> = None;
        let mut best_key = 0.0;
        for (i, &b) in self.basis.iter().enumerate() {
            let (inf, below) = self.violation(b);
            if inf <= FEAS_TOL || (tolerated[b] && inf <= RESIDUAL_TOL) {
                continue;
            }
            if bland {
                if best.map_or(true, |(bi, _)| b < self.basis[bi]) {
                    best = Some((i, below));
                }
            } else if inf > best_key {
                best_key = inf;
                best = Some((i, below));
            }
        }
        best
    }

    /// Entering column and whether it needed the loose pivot tolerance.
    fn entering_col(&self, r: usize, below: bool, bland: bool) -> Option<(usize, bool)> {
        let row_max = self.tab[r].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let strict = PIVOT_TOL.max(REL_PIVOT_TOL * row_max);
        if let Some(q) = self.entering_col_tol(r, below, bland, strict) {
            return Some((q, false));
        }
        self.entering_col_tol(r, below, bland, PIVOT_TOL).map(|q| (q, true))
    }

    fn entering_col_tol(&self, r: usize, below: bool, bland: bool, tol: f64) -> Option<usize> {
        let row = &self.tab[r];
        // candidates: (column, |alpha|, dual slack)
        let mut cand: Vec<(usize, f64, f64)> = Vec::new();
        for (j, &t) in row.iter().enumerate() {
            if t.abs() <= tol || self.pos[j] != usize::MAX || self.lo[j] == self.hi[j] {
                continue;
            }
            let up = self.at_upper[j];
            // leaving below its lower bound needs the basic value to increase
            let ok = if below { (t < 0.0 && !up) || (t > 0.0 && up) } else { (t > 0.0 && !up) || (t < 0.0 && up) };
            if !ok {
                continue;
            }
            let slack = if up { (-self.d[j]).max(0.0) } else { self.d[j].max(0.0) };
            cand.push((j, t.abs(), slack));
        }
        if cand.is_empty() {
            return None;
        }
        if bland {
            let theta = cand.iter().map(|c| c.2 / c.1).fold(f64::INFINITY, f64::min);
            return cand
                .iter()
                .filter(|c| c.2 / c.1 <= theta + 1e-12)
                .map(|c| c.0)
                .min();
        }
        // two-pass ratio test: admissible step with a small dual tolerance,
        // then the largest pivot among the ratios inside it
        let bound = cand.iter().map(|c| (c.2 + DUAL_TOL) / c.1).fold(f64::INFINITY, f64::min);
        let mut best = None;
        let mut best_abs = 0.0;
        for &(j, a, s) in &cand {
            if s / a <= bound && a > best_abs {
                best_abs = a;
                best = Some(j);
            }
        }
        best
    }

    /// Run dual simplex from the current basis.
    pub fn solve(&mut self) -> LpStatus {
        let mut start = self.iters;
        let mut stall = 0usize;
        let mut since_refresh = 1usize;
        let mut repairs = 0usize;
        let mut last_obj = f64::NEG_INFINITY;
        let mut rebuilt = false;
        // rows left slightly infeasible because no pivot can repair them
        let mut tolerated = vec![false; self.width()];
        if self.iters > 0 && self.rebuild_if_drifted() {
            rebuilt = true;
        }
        loop {
            if self.iters - start >= self.max_iterations {
                if !rebuilt && self.rebuild_if_drifted() {
                    rebuilt = true;
                    start = self.iters;
                    stall = 0;
                    last_obj = f64::NEG_INFINITY;
                    continue;
                }
                return LpStatus::IterationLimit;
            }
            if since_refresh >= REFRESH_EVERY {
                self.rebuild_if_drifted();
                self.refresh_primal();
                since_refresh = 0;
            }
            let bland = stall >= STALL_LIMIT;
            let Some((r, below)) = self.leaving_row(bland, &tolerated) else {
                self.refresh_primal();
                if self.leaving_row(false, &tolerated).is_some() {
                    since_refresh = 0;
                    continue;
                }
                if self.rebuild_if_drifted() {
                    since_refresh = 0;
                    continue;
                }
                if self.max_residual() <= RESIDUAL_TOL {
                    return LpStatus::Optimal;
                }
                if repairs >= 2 {
                    return LpStatus::NumericalFailure;
                }
                repairs += 1;
                if repairs == 1 {
                    self.rebuild();
                } else {
                    self.cold_start();
                }
                since_refresh = 0;
                continue;
            };
            let Some((q, loose)) = self.entering_col(r, below, bland) else {
                // confirm against freshly recomputed basic values before giving up
                if since_refresh == 0 {
                    if self.rebuild_if_drifted() {
                        continue;
                    }
                    let p = self.basis[r];
                    if self.violation(p).0 <= RESIDUAL_TOL {
                        tolerated[p] = true;
                        continue;
                    }
                    return LpStatus::Infeasible;
                }
                self.refresh_primal();
                since_refresh = 0;
                continue;
            };
            let p = self.basis[r];
            let target = if below { self.lo[p] } else { self.hi[p] };
            let t_rq = self.tab[r][q];
            let delta = -(target - self.x[p]) / t_rq;
            for (i, &b) in self.basis.iter().enumerate() {
                let t = self.tab[i][q];
                if t != 0.0 {
                    self.x[b] -= t * delta;
                }
            }
            self.x[q] += delta;
            self.x[p] = target;
            self.at_upper[p] = !below;
            self.pivot(r, q);
            self.iters += 1;
            since_refresh += 1;
            if loose && self.rebuild_if_drifted() {
                self.refresh_primal();
                since_refresh = 0;
            }
            // the dual objective rises monotonically; flat steps count as stalls
            let obj = -self.objective_min_form();
            if obj > last_obj + 1e-12 {
                stall = 0;
                last_obj = obj;
            } else {
                stall += 1;
            }
        }
    }

    /// Largest disagreement between the structural part of the tableau and
    /// the same rows rebuilt from the logical part and the original data.
    fn drift(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut est = vec![0.0; self.n];
        for row_t in &self.tab {
            est.iter_mut().for_each(|e| *e = 0.0);
            for (k, row) in self.rows.iter().enumerate() {
                let pk = row_t[self.n + k];
                if pk != 0.0 {
                    for &(j, a) in row {
                        est[j] -= pk * a;
                    }
                }
            }
            for j in 0..self.n {
                worst = worst.max((est[j] - row_t[j]).abs());
            }
        }
        worst
    }

    /// Refactor if the tableau has drifted; fall back to the slack basis
    /// when the refactored basis is not dual feasible.
    fn rebuild_if_drifted(&mut self) -> bool {
        if self.drift() <= DRIFT_TOL {
            return false;
        }
        self.rebuild();
        true
    }

    fn rebuild(&mut self) {
        self.refactor();
        if !self.dual_feasible() || self.drift() > DRIFT_TOL {
            self.cold_start();
        }
    }

    fn objective_min_form(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum::<f64>()
    }

    fn dual_feasible(&self) -> bool {
        (0..self.width()).all(|j| {
            self.pos[j] != usize::MAX
                || self.lo[j] == self.hi[j]
                || (if self.at_upper[j] { self.d[j] <= DUAL_TOL } else { self.d[j] >= -DUAL_TOL })
        })
    }
}
