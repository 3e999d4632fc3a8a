//! Cyclic policies: position arithmetic, the assortment graph, maximum mean
//! cycles and the cyclic formulations.

use std::collections::VecDeque;

use crate::bnb::{solve_mip, SolveParams, SolveReport, SolveStatus};
use crate::cutplane::bf_k_driver;
use crate::error::{Error, Result};
use crate::modelir::{build_cycle_conic, build_mplus1_base};
use crate::problem::{attraction_unchecked, plan_revenue, Instance, Plan};

/// Position `m` periods before position `t` on a cycle of length `l`, 1-based.
pub fn tau(m: usize, t: usize, l: usize) -> usize {
    assert!(l > 0 && (1..=l).contains(&t), "tau needs 1 <= t <= L");
    let r = (t as i64 - m as i64).rem_euclid(l as i64) as usize;
    if r == 0 {
        l
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub to: usize,
    pub weight: f64,
    /// Assortment offered on this arc, bit `i` = product `i`.
    pub label: u32,
}

/// Weighted digraph as adjacency lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Digraph {
    pub out: Vec<Vec<Arc>>,
}

impl Digraph {
    pub fn new(n: usize) -> Self {
        Digraph { out: vec![Vec::new(); n] }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, weight: f64, label: u32) {
        self.out[from].push(Arc { to, weight, label });
    }

    pub fn n_nodes(&self) -> usize {
        self.out.len()
    }

    pub fn n_arcs(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    /// Strongly connected components (Kosaraju, iterative).
    pub fn sccs(&self) -> Vec<Vec<usize>> {
        let n = self.n_nodes();
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut stack = vec![(s, 0usize)];
            while let Some(&mut (v, ref mut k)) = stack.last_mut() {
                if *k < self.out[v].len() {
                    let w = self.out[v][*k].to;
                    *k += 1;
                    if !seen[w] {
                        seen[w] = true;
                        stack.push((w, 0));
                    }
                } else {
                    order.push(v);
                    stack.pop();
                }
            }
        }
        let mut rev = vec![Vec::new(); n];
        for (v, arcs) in self.out.iter().enumerate() {
            for a in arcs {
                rev[a.to].push(v);
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for &s in order.iter().rev() {
            if comp[s] != usize::MAX {
                continue;
            }
            let c = out.len();
            let mut members = vec![s];
            comp[s] = c;
            let mut k = 0;
            while k < members.len() {
                let v = members[k];
                k += 1;
                for &w in &rev[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = c;
                        members.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

/// Largest `N·M` accepted by [`AssortmentGraph::build`].
pub const GRAPH_MAX_NODE_BITS: usize = 16;
/// Largest `N·(M+1)` accepted by [`AssortmentGraph::build`].
pub const GRAPH_MAX_ARC_BITS: usize = 20;

/// Nodes are the last `M` assortments packed as `N·M` bits: block `k`
/// (bits `kN..(k+1)N`) holds the assortment offered `k + 1` periods ago.
#[derive(Debug, Clone, PartialEq)]
pub struct AssortmentGraph {
    pub n_products: usize,
    pub memory: usize,
    pub graph: Digraph,
}

impl AssortmentGraph {
    /// Arcs for every assortment allowed by the cardinality cap and, when set,
    /// the non-overlap rule. Offer caps have no meaning on an infinite horizon
    /// and are ignored.
    pub fn build(inst: &Instance) -> Result<Self> {
        inst.validate()?;
        let n = inst.n_products;
        let m = inst.memory;
        if n * m > GRAPH_MAX_NODE_BITS || n * (m + 1) > GRAPH_MAX_ARC_BITS {
            return Err(Error::SizeGuard(format!(
                "assortment graph needs N*M <= {GRAPH_MAX_NODE_BITS} and N*(M+1) <= {GRAPH_MAX_ARC_BITS}"
            )));
        }
        let nodes = 1usize << (n * m);
        let full = nodes - 1;
        let cap = inst.constraints.cardinality_cap.unwrap_or(n);
        let sets: Vec<u32> = (0..1u32 << n).filter(|s| s.count_ones() as usize <= cap).collect();
        let g = AssortmentGraph {
            n_products: n,
            memory: m,
            graph: Digraph::new(nodes),
        };
        let mut graph = Digraph::new(nodes);
        let set_mask = (1u32 << n) - 1;
        for v in 0..nodes {
            let recent = (0..m).fold(0u32, |acc, k| acc | ((v >> (k * n)) as u32 & set_mask));
            for &s in &sets {
                if inst.constraints.non_overlapping && s & recent != 0 {
                    continue;
                }
                let w = g.arc_weight(inst, v, s);
                graph.add_arc(v, g.next(v, s) & full, w, s);
            }
        }
        Ok(AssortmentGraph { graph, ..g })
    }

    pub fn next(&self, node: usize, set: u32) -> usize {
        if self.memory == 0 {
            return 0;
        }
        let full = (1usize << (self.n_products * self.memory)) - 1;
        ((node << self.n_products) | set as usize) & full
    }

    /// Assortment offered `m` periods before the node's next period (`m >= 1`).
    pub fn past(&self, node: usize, m: usize) -> u32 {
        ((node >> ((m - 1) * self.n_products)) as u32) & ((1u32 << self.n_products) - 1)
    }

    /// Single-period MNL revenue of `set` given the history stored in `node`.
    pub fn arc_weight(&self, inst: &Instance, node: usize, set: u32) -> f64 {
        let (mut num, mut den) = (0.0, 1.0);
        for i in 0..self.n_products {
            if set >> i & 1 == 0 {
                continue;
            }
            let hist: Vec<u8> = (1..=self.memory).map(|m| (self.past(node, m) >> i & 1) as u8).collect();
            let a = attraction_unchecked(inst, i, &hist);
            num += inst.revenue[i] * a;
            den += a;
        }
        num / den
    }

    pub fn plan_of(&self, labels: &[u32]) -> Plan {
        Plan::cycle(
            labels
                .iter()
                .map(|&s| (0..self.n_products).map(|i| (s >> i & 1) as u8).collect())
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleResult {
    pub len: usize,
    /// Nodes in cycle order, starting from the smallest.
    pub nodes: Vec<usize>,
    /// Arc labels, `labels[k]` leaves `nodes[k]`.
    pub labels: Vec<u32>,
    pub mean: f64,
}

/// Karp's maximum cycle mean of one component, `None` without cycles.
/// Uses `O(V)` memory by recomputing the walk table in a second pass.
fn karp_component(g: &Digraph, members: &[usize], local: &[usize]) -> Option<f64> {
    let k = members.len();
    let step = |d: &[f64]| -> Vec<f64> {
        let mut nd = vec![f64::NEG_INFINITY; k];
        for (a, &v) in members.iter().enumerate() {
            if d[a] == f64::NEG_INFINITY {
                continue;
            }
            for arc in &g.out[v] {
                let b = local[arc.to];
                if b != usize::MAX {
                    nd[b] = nd[b].max(d[a] + arc.weight);
                }
            }
        }
        nd
    };
    let mut d = vec![f64::NEG_INFINITY; k];
    d[0] = 0.0;
    for _ in 0..k {
        d = step(&d);
    }
    let dk = d;
    let mut worst = vec![f64::INFINITY; k];
    let mut d = vec![f64::NEG_INFINITY; k];
    d[0] = 0.0;
    for j in 0..k {
        for v in 0..k {
            if dk[v] > f64::NEG_INFINITY && d[v] > f64::NEG_INFINITY {
                worst[v] = worst[v].min((dk[v] - d[v]) / (k - j) as f64);
            }
        }
        d = step(&d);
    }
    worst
        .into_iter()
        .zip(&dk)
        .filter(|(_, &x)| x > f64::NEG_INFINITY)
        .map(|(w, _)| w)
        .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |a| a.max(w))))
}

/// Longest-walk potentials under weights `w - lambda` from the first member.
fn potentials(g: &Digraph, members: &[usize], local: &[usize], lambda: f64) -> Vec<f64> {
    let k = members.len();
    let mut pi = vec![f64::NEG_INFINITY; k];
    let mut d = vec![f64::NEG_INFINITY; k];
    d[0] = 0.0;
    for _ in 0..k {
        let mut nd = vec![f64::NEG_INFINITY; k];
        for a in 0..k {
            pi[a] = pi[a].max(d[a]);
            if d[a] == f64::NEG_INFINITY {
                continue;
            }
            for arc in &g.out[members[a]] {
                let b = local[arc.to];
                if b != usize::MAX {
                    nd[b] = nd[b].max(d[a] + arc.weight - lambda);
                }
            }
        }
        d = nd;
    }
    pi
}

/// Exact maximum mean cycle. Ties go to the shortest cycle, then to the
/// lexicographically smallest node sequence (started at its smallest node),
/// then to the smallest arc labels.
pub fn max_mean_cycle(g: &Digraph) -> Option<CycleResult> {
    let n = g.n_nodes();
    let comps = g.sccs();
    let mut local = vec![usize::MAX; n];
    let mut found: Vec<(f64, Vec<usize>)> = Vec::new();
    for members in &comps {
        for (a, &v) in members.iter().enumerate() {
            local[v] = a;
        }
        if let Some(l) = karp_component(g, members, &local) {
            found.push((l, members.clone()));
        }
        for &v in members {
            local[v] = usize::MAX;
        }
    }
    let best = found.iter().map(|f| f.0).fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return None;
    }
    let tol = 1e-9 * (1.0 + best.abs());
    // tight subgraph: best arc (u, v) with zero reduced weight
    let mut tight: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
    for (lambda, members) in found.iter().filter(|f| f.0 >= best - tol) {
        for (a, &v) in members.iter().enumerate() {
            local[v] = a;
        }
        let pi = potentials(g, members, &local, *lambda);
        for (a, &v) in members.iter().enumerate() {
            let mut arcs: Vec<(usize, u32)> = g.out[v]
                .iter()
                .filter(|arc| {
                    let b = local[arc.to];
                    b != usize::MAX && pi[a] + arc.weight - lambda >= pi[b] - tol
                })
                .map(|arc| (arc.to, arc.label))
                .collect();
            arcs.sort_unstable();
            arcs.dedup_by_key(|x| x.0);
            tight[v] = arcs;
        }
        for &v in members {
            local[v] = usize::MAX;
        }
    }
    let (nodes, labels) = shortest_lex_cycle(&tight)?;
    let len = nodes.len();
    let mean = (0..len)
        .map(|k| {
            let (v, w, s) = (nodes[k], nodes[(k + 1) % len], labels[k]);
            g.out[v]
                .iter()
                .filter(|a| a.to == w && a.label == s)
                .map(|a| a.weight)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / len as f64;
    Some(CycleResult {
        len,
        nodes,
        labels,
        mean,
    })
}

/// BFS distances to `s` over arcs among nodes `>= s`.
fn dist_to(tight: &[Vec<(usize, u32)>], rev: &[Vec<usize>], s: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; tight.len()];
    dist[s] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        for &u in &rev[v] {
            if u > s && dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                q.push_back(u);
            }
        }
    }
    dist
}

fn shortest_lex_cycle(tight: &[Vec<(usize, u32)>]) -> Option<(Vec<usize>, Vec<u32>)> {
    let n = tight.len();
    let mut rev = vec![Vec::new(); n];
    for (v, arcs) in tight.iter().enumerate() {
        for &(w, _) in arcs {
            rev[w].push(v);
        }
    }
    // shortest cycle whose smallest node is s
    let cycle_len = |s: usize, dist: &[usize]| -> Option<usize> {
        tight[s]
            .iter()
            .filter(|&&(w, _)| w >= s && dist[w] != usize::MAX)
            .map(|&(w, _)| dist[w] + 1)
            .min()
    };
    let mut best_len = usize::MAX;
    for s in 0..n {
        if tight[s].is_empty() {
            continue;
        }
        let dist = dist_to(tight, &rev, s);
        if let Some(l) = cycle_len(s, &dist) {
            best_len = best_len.min(l);
        }
    }
    if best_len == usize::MAX {
        return None;
    }
    for s in 0..n {
        if tight[s].is_empty() {
            continue;
        }
        let dist = dist_to(tight, &rev, s);
        if cycle_len(s, &dist) != Some(best_len) {
            continue;
        }
        let mut nodes = vec![s];
        let mut labels = Vec::new();
        let mut v = s;
        for k in 0..best_len {
            let left = best_len - k - 1;
            let &(w, lab) = tight[v]
                .iter()
                .find(|&&(w, _)| w >= s && dist[w] == left)
                .expect("a shortest continuation exists");
            labels.push(lab);
            if k + 1 < best_len {
                nodes.push(w);
            }
            v = w;
        }
        return Some((nodes, labels));
    }
    None
}

/// Maximum cycle mean by enumerating simple cycles; exponential, for checks.
pub fn max_mean_cycle_exhaustive(g: &Digraph) -> Option<f64> {
    let n = g.n_nodes();
    let mut best: Option<f64> = None;
    let mut on_path = vec![false; n];
    fn dfs(g: &Digraph, s: usize, v: usize, len: usize, sum: f64, on: &mut [bool], best: &mut Option<f64>) {
        for a in &g.out[v] {
            if a.to == s {
                let mean = (sum + a.weight) / (len + 1) as f64;
                *best = Some(best.map_or(mean, |b| b.max(mean)));
            } else if a.to > s && !on[a.to] {
                on[a.to] = true;
                dfs(g, s, a.to, len + 1, sum + a.weight, on, best);
                on[a.to] = false;
            }
        }
    }
    for s in 0..n {
        on_path[s] = true;
        dfs(g, s, s, 0, 0.0, &mut on_path, &mut best);
        on_path[s] = false;
    }
    best
}

/// Optimal infinite-horizon cyclic policy from the assortment graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicPolicy {
    pub cycle: CycleResult,
    pub plan: Plan,
}

pub fn karp_policy(inst: &Instance) -> Result<CyclicPolicy> {
    let g = AssortmentGraph::build(inst)?;
    let cycle = max_mean_cycle(&g.graph).ok_or_else(|| Error::InvalidInstance("assortment graph has no cycle".into()))?;
    let plan = g.plan_of(&cycle.labels);
    Ok(CyclicPolicy { cycle, plan })
}

/// Best cycle of the graph restricted to non-overlapping arcs.
pub fn karp_policy_nonoverlap(inst: &Instance) -> Result<CyclicPolicy> {
    let mut i2 = inst.clone();
    i2.constraints.non_overlapping = true;
    karp_policy(&i2)
}

/// The returned value is the exact long-run revenue of the decoded plan.
fn finish(inst: &Instance, rep: SolveReport) -> Result<(Plan, f64, SolveReport)> {
    match (rep.status, rep.plan.clone()) {
        (SolveStatus::Infeasible, _) => Err(Error::InvalidInstance("cyclic model is infeasible".into())),
        (_, Some(p)) => {
            let v = plan_revenue(inst, &p)?;
            Ok((p, v, rep))
        }
        (_, None) => Err(Error::Lp(format!("no incumbent ({:?})", rep.status))),
    }
}

/// Best `L`-cyclic plan via the cycle formulation.
pub fn solve_l_cyclic(inst: &Instance, len: usize, params: &SolveParams) -> Result<(Plan, f64, SolveReport)> {
    let model = build_cycle_conic(inst, len)?;
    finish(inst, solve_mip(&model, params, &mut [])?)
}

/// Best `(M+1)`-cyclic plan under non-overlap, from the Base model or from
/// Base tightened by `cut_rounds` rounds of projected cuts.
pub fn solve_mplus1_nonoverlap(
    inst: &Instance,
    use_bound_free: bool,
    cut_rounds: usize,
    params: &SolveParams,
) -> Result<(Plan, f64, SolveReport)> {
    if !inst.constraints.non_overlapping {
        return Err(Error::InvalidArgument("the (M+1)-cyclic model needs non_overlapping".into()));
    }
    if inst.memory >= inst.n_products {
        return Err(Error::InvalidArgument(format!(
            "(M+1)-cyclic model needs M < N, got M = {} and N = {}",
            inst.memory, inst.n_products
        )));
    }
    let rep = if use_bound_free {
        bf_k_driver(inst, cut_rounds, params)?.report
    } else {
        solve_mip(&build_mplus1_base(inst)?, params, &mut [])?
    };
    finish(inst, rep)
}
