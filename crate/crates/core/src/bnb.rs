//! LP-based branch-and-bound with outer approximation of convex rows and
//! user separators.
//!
//! One warm-started [`DualSimplex`] carries the whole search: nodes only
//! differ in binary bounds, and every cut is globally valid so it stays in
//! the LP for good.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::lp::{DualSimplex, LpStatus};
use crate::modelir::{decode_plan, LinRow, Model, RowSense, VarKind};
use crate::problem::Plan;

pub const INT_TOL: f64 = 1e-6;
pub const CONVEX_TOL: f64 = 1e-7;
/// Rounds of cut generation at an integral node before it is given up.
const MAX_INTEGRAL_ROUNDS: usize = 400;

/// Lazy cut generator. Cuts must be valid for every integer-feasible point.
pub trait Separator {
    fn name(&self) -> &str;
    /// Cuts violated at `x`; `integral` is set when all binaries are integral.
    fn separate(&mut self, model: &Model, x: &[f64], integral: bool) -> Vec<LinRow>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching {
    /// Binary closest to 0.5, ties by lowest id.
    MostFractional,
}

#[derive(Debug, Clone)]
pub struct SolveParams {
    pub rel_gap: f64,
    pub abs_gap: f64,
    pub time_limit: Duration,
    pub node_limit: Option<usize>,
    pub branching: Branching,
    /// Cut rounds at the root and at other fractional nodes.
    pub root_cut_rounds: usize,
    pub node_cut_rounds: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            rel_gap: 0.005,
            abs_gap: 1e-6,
            time_limit: Duration::from_secs(3600),
            node_limit: None,
            branching: Branching::MostFractional,
            root_cut_rounds: 50,
            node_cut_rounds: 4,
        }
    }
}

impl SolveParams {
    /// Settings used when comparing against enumeration oracles.
    pub fn exact() -> Self {
        SolveParams {
            rel_gap: 0.0,
            abs_gap: 1e-7,
            ..Default::default()
        }
    }

    pub fn with_gap(mut self, rel_gap: f64) -> Self {
        self.rel_gap = rel_gap;
        self
    }

    pub fn with_time_limit(mut self, t: Duration) -> Self {
        self.time_limit = t;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    TimeLimit,
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Best integer objective `R_IP`, `-inf` without an incumbent.
    pub objective: f64,
    /// Dual bound `R_U`.
    pub bound: f64,
    pub root_bound: f64,
    pub gap: f64,
    pub plan: Option<Plan>,
    pub values: Option<Vec<f64>>,
    pub nodes: usize,
    pub cuts: usize,
    pub lp_iterations: usize,
    pub wall_time: Duration,
}

impl SolveReport {
    pub fn has_incumbent(&self) -> bool {
        self.plan.is_some()
    }
}

pub fn relative_gap(bound: f64, incumbent: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    ((bound - incumbent) / incumbent.abs().max(1e-10)).max(0.0)
}

/// Cut pool with deduplication at 1e-9 coefficient resolution.
#[derive(Debug, Default)]
pub struct CutPool {
    seen: HashSet<Vec<i64>>,
    pub rows: Vec<LinRow>,
}

impl CutPool {
    fn key(r: &LinRow) -> Vec<i64> {
        let q = |v: f64| (v * 1e9).round() as i64;
        let mut coefs = r.coefs.clone();
        coefs.sort_by_key(|c| c.0);
        let mut k: Vec<i64> = coefs.iter().flat_map(|&(j, a)| [j as i64, q(a)]).collect();
        k.push(match r.sense {
            RowSense::Le => -1,
            RowSense::Ge => 1,
            RowSense::Eq => 0,
        });
        k.push(q(r.rhs));
        k
    }

    /// True if the row was new.
    pub fn insert(&mut self, r: LinRow) -> bool {
        if self.seen.insert(Self::key(&r)) {
            self.rows.push(r);
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn add_cut(lp: &mut DualSimplex, r: &LinRow) -> Result<()> {
    let (lo, hi) = r.bounds();
    lp.add_row(&r.coefs, lo, hi)
}

/// Violated cuts from the model's convex rows and the separators.
fn collect_cuts(model: &Model, x: &[f64], integral: bool, seps: &mut [&mut dyn Separator]) -> Vec<LinRow> {
    let mut out: Vec<LinRow> = model.convex.iter().filter_map(|c| c.separate(x, CONVEX_TOL)).collect();
    for s in seps.iter_mut() {
        out.extend(s.separate(model, x, integral));
    }
    out
}

fn is_integral(model: &Model, x: &[f64]) -> bool {
    model
        .vars
        .iter()
        .zip(x)
        .all(|(v, &val)| v.kind != VarKind::Binary || (val - val.round()).abs() <= INT_TOL)
}

fn most_fractional(model: &Model, x: &[f64], lp: &DualSimplex) -> Option<usize> {
    let mut best = None;
    let mut best_dist = f64::INFINITY;
    for (j, v) in model.vars.iter().enumerate() {
        if v.kind != VarKind::Binary {
            continue;
        }
        let (lo, hi) = lp.bounds(j);
        if lo == hi {
            continue;
        }
        let f = x[j] - x[j].floor();
        if f <= INT_TOL || f >= 1.0 - INT_TOL {
            continue;
        }
        let d = (f - 0.5).abs();
        if d < best_dist {
            best_dist = d;
            best = Some(j);
        }
    }
    best
}

#[derive(Debug, Clone)]
struct Node {
    id: usize,
    bound: f64,
    fixes: Vec<(usize, f64)>,
}

struct ByBound(Node);

impl PartialEq for ByBound {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for ByBound {}
impl PartialOrd for ByBound {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for ByBound {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0
            .bound
            .total_cmp(&o.0.bound)
            .then_with(|| o.0.id.cmp(&self.0.id))
    }
}

enum NodeOutcome {
    Infeasible,
    /// LP bound after cuts; integral solution values if accepted.
    Solved { bound: f64, x: Vec<f64>, integral: bool },
    Unresolved { bound: f64 },
}

struct Search<'a> {
    model: &'a Model,
    lp: DualSimplex,
    pool: CutPool,
    root_lo: Vec<f64>,
    root_hi: Vec<f64>,
}

impl<'a> Search<'a> {
    fn new(model: &'a Model) -> Result<Self> {
        let lp = DualSimplex::new(&model.to_lp())?;
        Ok(Search {
            model,
            lp,
            pool: CutPool::default(),
            root_lo: model.vars.iter().map(|v| v.lower).collect(),
            root_hi: model.vars.iter().map(|v| v.upper).collect(),
        })
    }

    fn apply(&mut self, fixes: &[(usize, f64)]) {
        let mut lo = self.root_lo.clone();
        let mut hi = self.root_hi.clone();
        for &(j, v) in fixes {
            lo[j] = v;
            hi[j] = v;
        }
        for j in 0..self.model.n_vars() {
            if self.lp.bounds(j) != (lo[j], hi[j]) {
                self.lp.set_bounds(j, lo[j], hi[j]);
            }
        }
    }

    fn solve_lp(&mut self) -> Result<Option<(f64, Vec<f64>)>> {
        match self.lp.solve() {
            LpStatus::Optimal => Ok(Some((self.lp.objective(), self.lp.x().to_vec()))),
            LpStatus::Infeasible => Ok(None),
            s => Err(Error::Lp(format!("{s:?} after {} iterations", self.lp.iterations()))),
        }
    }

    fn process(&mut self, fixes: &[(usize, f64)], rounds: usize, seps: &mut [&mut dyn Separator], cutoff: f64) -> Result<NodeOutcome> {
        self.apply(fixes);
        let mut round = 0;
        loop {
            let Some((obj, x)) = self.solve_lp()? else {
                return Ok(NodeOutcome::Infeasible);
            };
            if obj <= cutoff {
                return Ok(NodeOutcome::Solved { bound: obj, x, integral: false });
            }
            let integral = is_integral(self.model, &x);
            let limit = if integral { MAX_INTEGRAL_ROUNDS } else { rounds };
            if round >= limit {
                return Ok(if integral {
                    NodeOutcome::Unresolved { bound: obj }
                } else {
                    NodeOutcome::Solved { bound: obj, x, integral: false }
                });
            }
            let mut added = 0;
            for c in collect_cuts(self.model, &x, integral, seps) {
                if self.pool.insert(c.clone()) {
                    add_cut(&mut self.lp, &c)?;
                    added += 1;
                }
            }
            if added == 0 {
                return Ok(NodeOutcome::Solved { bound: obj, x, integral });
            }
            round += 1;
        }
    }
}

/// Solve a model to optimality within `params`.
pub fn solve_mip(model: &Model, params: &SolveParams, seps: &mut [&mut dyn Separator]) -> Result<SolveReport> {
    solve_mip_with_cuts(model, params, seps, &[])
}

/// As [`solve_mip`], starting from extra globally valid rows.
pub fn solve_mip_with_cuts(
    model: &Model,
    params: &SolveParams,
    seps: &mut [&mut dyn Separator],
    initial_cuts: &[LinRow],
) -> Result<SolveReport> {
    let start = Instant::now();
    let mut search = Search::new(model)?;
    for c in initial_cuts {
        if search.pool.insert(c.clone()) {
            add_cut(&mut search.lp, c)?;
        }
    }
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut pruned_bound = f64::NEG_INFINITY;
    let mut root_bound = f64::INFINITY;
    let mut nodes = 0usize;
    let mut next_id = 1usize;
    let mut dive: Vec<Node> = vec![Node {
        id: 0,
        bound: f64::INFINITY,
        fixes: Vec::new(),
    }];
    let mut heap: BinaryHeap<ByBound> = BinaryHeap::new();
    let mut status = SolveStatus::Optimal;

    let tol = |inc: f64| params.abs_gap.max(params.rel_gap * inc.abs());

    loop {
        let inc_val = incumbent.as_ref().map_or(f64::NEG_INFINITY, |v| v.0);
        let open_best = dive
            .iter()
            .map(|n| n.bound)
            .chain(heap.peek().map(|n| n.0.bound))
            .fold(f64::NEG_INFINITY, f64::max);
        if dive.is_empty() && heap.is_empty() {
            break;
        }
        if incumbent.is_some() && open_best - inc_val <= tol(inc_val) {
            pruned_bound = pruned_bound.max(open_best);
            break;
        }
        if start.elapsed() >= params.time_limit {
            status = SolveStatus::TimeLimit;
            break;
        }
        if params.node_limit.is_some_and(|l| nodes >= l) {
            status = SolveStatus::NodeLimit;
            break;
        }
        let node = if incumbent.is_none() {
            match dive.pop() {
                Some(n) => n,
                None => heap.pop().map(|b| b.0).expect("nonempty"),
            }
        } else {
            for n in dive.drain(..) {
                heap.push(ByBound(n));
            }
            heap.pop().map(|b| b.0).expect("nonempty")
        };
        if incumbent.is_some() && node.bound - inc_val <= tol(inc_val) {
            pruned_bound = pruned_bound.max(node.bound);
            continue;
        }
        nodes += 1;
        let rounds = if node.id == 0 { params.root_cut_rounds } else { params.node_cut_rounds };
        let cutoff = if incumbent.is_some() { inc_val + tol(inc_val) } else { f64::NEG_INFINITY };
        let outcome = search.process(&node.fixes, rounds, seps, cutoff)?;
        let (bound, x, integral) = match outcome {
            NodeOutcome::Infeasible => {
                if node.id == 0 {
                    root_bound = f64::NEG_INFINITY;
                }
                continue;
            }
            NodeOutcome::Unresolved { bound } => {
                pruned_bound = pruned_bound.max(bound.min(node.bound));
                continue;
            }
            NodeOutcome::Solved { bound, x, integral } => (bound.min(node.bound), x, integral),
        };
        if node.id == 0 {
            root_bound = bound;
        }
        if incumbent.is_some() && bound <= cutoff {
            pruned_bound = pruned_bound.max(bound);
            continue;
        }
        if integral {
            if incumbent.as_ref().is_none_or(|(v, _)| bound > *v) {
                incumbent = Some((bound, x));
            }
            continue;
        }
        let Some(j) = most_fractional(model, &x, &search.lp) else {
            // all free binaries integral but bounds fixed elsewhere: treat as integral
            if incumbent.as_ref().is_none_or(|(v, _)| bound > *v) {
                incumbent = Some((bound, x));
            }
            continue;
        };
        let up_first = x[j] >= 0.5;
        let mk = |v: f64, id: usize| {
            let mut f = node.fixes.clone();
            f.push((j, v));
            Node { id, bound, fixes: f }
        };
        let (a, b) = if up_first { (0.0, 1.0) } else { (1.0, 0.0) };
        let first = mk(a, next_id);
        let second = mk(b, next_id + 1);
        next_id += 2;
        if incumbent.is_none() {
            dive.push(first);
            dive.push(second);
        } else {
            heap.push(ByBound(first));
            heap.push(ByBound(second));
        }
    }

    let inc_val = incumbent.as_ref().map_or(f64::NEG_INFINITY, |v| v.0);
    let open_best = dive
        .iter()
        .map(|n| n.bound)
        .chain(heap.iter().map(|n| n.0.bound))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut bound = inc_val.max(open_best).max(pruned_bound);
    if status == SolveStatus::Optimal && incumbent.is_none() {
        status = SolveStatus::Infeasible;
    }
    if bound == f64::NEG_INFINITY && status != SolveStatus::Infeasible {
        bound = root_bound;
    }
    let plan = incumbent.as_ref().map(|(_, x)| decode_plan(model, x));
    Ok(SolveReport {
        status,
        objective: inc_val,
        bound,
        root_bound,
        gap: relative_gap(bound, inc_val),
        plan,
        values: incumbent.map(|(_, x)| x),
        nodes,
        cuts: search.pool.len(),
        lp_iterations: search.lp.iterations(),
        wall_time: start.elapsed(),
    })
}

/// Continuous-relaxation outer-approximation run.
#[derive(Debug, Clone)]
pub struct RelaxTrace {
    /// Value after the last round.
    pub value: f64,
    /// Value after each LP solve, starting with the cut-free relaxation.
    pub history: Vec<f64>,
    pub cuts: Vec<LinRow>,
    pub x: Vec<f64>,
}

/// Root relaxation with cut rounds until the improvement drops below `tol`.
pub fn relax_value(model: &Model, seps: &mut [&mut dyn Separator], tol: f64) -> Result<RelaxTrace> {
    relax_rounds(model, seps, tol, usize::MAX)
}

/// As [`relax_value`] with at most `max_rounds` cut rounds.
pub fn relax_rounds(model: &Model, seps: &mut [&mut dyn Separator], tol: f64, max_rounds: usize) -> Result<RelaxTrace> {
    let mut search = Search::new(model)?;
    let mut history = Vec::new();
    let mut round = 0usize;
    // hard cap keeps tangent cuts on nearly flat pieces from running forever
    let cap = max_rounds.min(2000);
    loop {
        let Some((obj, x)) = search.solve_lp()? else {
            return Err(Error::Lp("relaxation is infeasible".into()));
        };
        if let Some(&prev) = history.last() {
            let prev: f64 = prev;
            if prev - obj < tol {
                history.push(obj);
                return Ok(RelaxTrace {
                    value: obj,
                    history,
                    cuts: search.pool.rows,
                    x,
                });
            }
        }
        history.push(obj);
        if round >= cap {
            return Ok(RelaxTrace {
                value: obj,
                history,
                cuts: search.pool.rows,
                x,
            });
        }
        let mut added = 0;
        for c in collect_cuts(model, &x, false, seps) {
            if search.pool.insert(c.clone()) {
                add_cut(&mut search.lp, &c)?;
                added += 1;
            }
        }
        if added == 0 {
            return Ok(RelaxTrace {
                value: obj,
                history,
                cuts: search.pool.rows,
                x,
            });
        }
        round += 1;
    }
}

/// Replace convex rows by up to `rounds` rounds of root outer-approximation cuts.
pub fn linearize(model: &Model, rounds: usize) -> Result<Model> {
    let trace = relax_rounds(model, &mut [], 0.0, rounds)?;
    let mut out = model.clone();
    out.convex.clear();
    for (k, mut c) in trace.cuts.into_iter().enumerate() {
        c.name = format!("{}_{k}", c.name);
        out.rows.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelir::{build_env_milp, Key};
    use crate::problem::{plan_revenue, Instance};

    #[test]
    fn static_two_products() {
        let inst = Instance::static_mnl(vec![4.0, 3.0], vec![0.0, 0.5], 1).unwrap();
        let m = build_env_milp(&inst).unwrap();
        let r = solve_mip(&m, &SolveParams::exact(), &mut []).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        // enumerate the four assortments
        let mut best = 0.0f64;
        for mask in 0..4u8 {
            let p = Plan::from_sets(&[(0..2).filter(|i| mask >> i & 1 == 1).collect()], 2, false);
            best = best.max(plan_revenue(&inst, &p).unwrap());
        }
        assert!((r.objective - best).abs() < 1e-7);
        assert!(r.bound >= r.objective - 1e-9);
        assert!((plan_revenue(&inst, r.plan.as_ref().unwrap()).unwrap() - r.objective).abs() < 1e-6);
    }

    #[test]
    fn pure_lp_model_matches_lp() {
        let inst = Instance::static_mnl(vec![4.0, 3.0], vec![0.0, 0.5], 1).unwrap();
        let mut m = build_env_milp(&inst).unwrap();
        for v in &mut m.vars {
            v.kind = VarKind::Continuous;
        }
        let r = solve_mip(&m, &SolveParams::exact(), &mut []).unwrap();
        let lp = crate::lp::solve_lp(&m.to_lp()).unwrap();
        assert!((r.objective - lp.objective).abs() < 1e-9);
        assert_eq!(r.nodes, 1);
        assert!(m.var(Key::Rho { t: 0 }).is_some());
    }
}
