//! Enumeration oracle, revenue-ordered assortments and the sequential policies.

use crate::error::{Error, Result};
use crate::problem::{attraction_unchecked, Instance, Plan};

/// Largest `N·T` accepted by [`brute_force`].
pub const BRUTE_FORCE_MAX_CELLS: usize = 24;
const TIE_TOL: f64 = 1e-12;

/// Per-product attraction for every history bitmask (bit `m` = offered `m + 1` periods ago).
struct AttrTable {
    m: usize,
    table: Vec<Vec<f64>>,
}

impl AttrTable {
    fn new(inst: &Instance) -> Self {
        let m = inst.memory;
        let table = (0..inst.n_products)
            .map(|i| {
                (0..1usize << m)
                    .map(|h| {
                        let hist: Vec<u8> = (0..m).map(|b| ((h >> b) & 1) as u8).collect();
                        attraction_unchecked(inst, i, &hist)
                    })
                    .collect()
            })
            .collect();
        AttrTable { m, table }
    }

    /// Revenue of offering `mask` after `prev` (most recent last).
    fn period_revenue(&self, revenue: &[f64], mask: u32, prev: &[u32]) -> f64 {
        let mut num = 0.0;
        let mut den = 1.0;
        let n = revenue.len();
        for i in 0..n {
            if mask & bit(n, i) == 0 {
                continue;
            }
            let mut h = 0usize;
            for m in 0..self.m {
                if m < prev.len() && prev[prev.len() - 1 - m] & bit(n, i) != 0 {
                    h |= 1 << m;
                }
            }
            let a = self.table[i][h];
            num += revenue[i] * a;
            den += a;
        }
        num / den
    }
}

/// Bit of product `i`; product 0 is the most significant so that increasing
/// masks enumerate offer rows in lexicographic order.
fn bit(n: usize, i: usize) -> u32 {
    1 << (n - 1 - i)
}

fn mask_to_row(n: usize, mask: u32) -> Vec<u8> {
    (0..n).map(|i| (mask & bit(n, i) != 0) as u8).collect()
}

struct Enumerator<'a> {
    inst: &'a Instance,
    attr: AttrTable,
    masks: Vec<u32>,
    stack: Vec<u32>,
    counts: Vec<usize>,
}

impl<'a> Enumerator<'a> {
    fn new(inst: &'a Instance) -> Self {
        let n = inst.n_products;
        let masks = (0..1u32 << n)
            .filter(|m| inst.constraints.cardinality_cap.is_none_or(|c| m.count_ones() as usize <= c))
            .collect();
        Enumerator {
            inst,
            attr: AttrTable::new(inst),
            masks,
            stack: Vec::new(),
            counts: vec![0; n],
        }
    }

    fn allowed(&self, mask: u32) -> bool {
        let n = self.inst.n_products;
        let c = &self.inst.constraints;
        if let Some(k) = c.offer_cap {
            if (0..n).any(|i| mask & bit(n, i) != 0 && self.counts[i] >= k) {
                return false;
            }
        }
        if c.non_overlapping {
            let back = self.inst.memory.min(self.stack.len());
            for p in &self.stack[self.stack.len() - back..] {
                if p & mask != 0 {
                    return false;
                }
            }
        }
        true
    }

    /// Visit every feasible plan in lexicographic order with its total revenue.
    fn walk(&mut self, acc: f64, visit: &mut dyn FnMut(&[u32], f64)) {
        let t = self.stack.len();
        if t == self.inst.horizon {
            visit(&self.stack, acc);
            return;
        }
        let n = self.inst.n_products;
        for k in 0..self.masks.len() {
            let mask = self.masks[k];
            if !self.allowed(mask) {
                continue;
            }
            let r = self.attr.period_revenue(&self.inst.revenue, mask, &self.stack);
            for i in 0..n {
                if mask & bit(n, i) != 0 {
                    self.counts[i] += 1;
                }
            }
            self.stack.push(mask);
            self.walk(acc + r, visit);
            self.stack.pop();
            for i in 0..n {
                if mask & bit(n, i) != 0 {
                    self.counts[i] -= 1;
                }
            }
        }
    }
}

fn guard(inst: &Instance) -> Result<()> {
    inst.validate()?;
    let cells = inst.n_products * inst.horizon;
    if cells > BRUTE_FORCE_MAX_CELLS {
        return Err(Error::SizeGuard(format!(
            "brute force needs N*T <= {BRUTE_FORCE_MAX_CELLS}, got {cells}"
        )));
    }
    Ok(())
}

fn masks_to_plan(n: usize, masks: &[u32]) -> Plan {
    Plan {
        offers: masks.iter().map(|&m| mask_to_row(n, m)).collect(),
        is_cycle: false,
    }
}

/// Exact optimum over feasible plans; ties go to the lexicographically
/// smallest offer matrix (period 0 first, product 0 first).
pub fn brute_force(inst: &Instance) -> Result<(Plan, f64)> {
    guard(inst)?;
    let mut e = Enumerator::new(inst);
    let mut best = f64::NEG_INFINITY;
    let mut arg: Vec<u32> = Vec::new();
    e.walk(0.0, &mut |masks, total| {
        if total > best + TIE_TOL {
            best = total;
            arg = masks.to_vec();
        }
    });
    Ok((masks_to_plan(inst.n_products, &arg), best / inst.horizon as f64))
}

/// Every plan within `tol` of the optimum, in lexicographic order.
pub fn brute_force_all(inst: &Instance, tol: f64) -> Result<(Vec<Plan>, f64)> {
    let (_, best) = brute_force(inst)?;
    let mut e = Enumerator::new(inst);
    let mut out = Vec::new();
    let t = inst.horizon as f64;
    e.walk(0.0, &mut |masks, total| {
        if total / t >= best - tol {
            out.push(masks_to_plan(inst.n_products, masks));
        }
    });
    Ok((out, best))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoResult {
    /// Number of products offered from the revenue order.
    pub cutoff: usize,
    /// Offered products, in revenue order.
    pub assortment: Vec<usize>,
    pub value: f64,
    pub nu: Vec<f64>,
}

/// Products by revenue descending, index ascending.
pub fn revenue_order(revenues: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..revenues.len()).collect();
    idx.sort_by(|&a, &b| revenues[b].total_cmp(&revenues[a]).then(a.cmp(&b)));
    idx
}

fn ro_over(revenues: &[f64], nu: &[f64], order: &[usize], cap: usize) -> RoResult {
    let mut best_k = 0;
    let mut best = 0.0;
    let (mut num, mut den) = (0.0, 1.0);
    for (k, &i) in order.iter().enumerate().take(cap) {
        num += revenues[i] * nu[i];
        den += nu[i];
        let v = num / den;
        // ties favour the larger cutoff
        if v >= best - TIE_TOL {
            best = best.max(v);
            best_k = k + 1;
        }
    }
    RoResult {
        cutoff: best_k,
        assortment: order[..best_k].to_vec(),
        value: best,
        nu: nu.to_vec(),
    }
}

/// Best revenue-ordered assortment for attractions `nu`.
pub fn ro_assortment(revenues: &[f64], nu: &[f64]) -> Result<RoResult> {
    if revenues.len() != nu.len() {
        return Err(Error::InvalidArgument("revenues and attractions differ in length".into()));
    }
    if nu.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument("attractions must be non-negative".into()));
    }
    let order = revenue_order(revenues);
    Ok(ro_over(revenues, nu, &order, revenues.len()))
}

/// Attractions in period `t` given the offers already fixed in `plan`.
fn current_nu(inst: &Instance, plan: &Plan, t: usize) -> Vec<f64> {
    (0..inst.n_products)
        .map(|i| attraction_unchecked(inst, i, &plan.history(i, t, inst.memory)))
        .collect()
}

/// Products still allowed in period `t` by offer caps and non-overlap.
fn eligible(inst: &Instance, plan: &Plan, t: usize) -> Vec<bool> {
    let c = &inst.constraints;
    (0..inst.n_products)
        .map(|i| {
            if let Some(k) = c.offer_cap {
                if (0..t).filter(|&s| plan.offered(s, i)).count() >= k {
                    return false;
                }
            }
            if c.non_overlapping && (1..=inst.memory.min(t)).any(|m| plan.offered(t - m, i)) {
                return false;
            }
            true
        })
        .collect()
}

fn ro_step(inst: &Instance, plan: &Plan, t: usize) -> RoResult {
    let nu = current_nu(inst, plan, t);
    let ok = eligible(inst, plan, t);
    let order: Vec<usize> = revenue_order(&inst.revenue).into_iter().filter(|&i| ok[i]).collect();
    let cap = inst.constraints.cardinality_cap.unwrap_or(inst.n_products);
    ro_over(&inst.revenue, &nu, &order, cap)
}

fn set_period(plan: &mut Plan, t: usize, set: &[usize]) {
    plan.offers[t].iter_mut().for_each(|v| *v = 0);
    for &i in set {
        plan.offers[t][i] = 1;
    }
}

/// Sequential revenue-ordered policy with the chosen cutoff per period.
///
/// Side constraints, when present, are respected by restricting the candidate
/// order; the result is then a heuristic.
pub fn sequential_ro_trace(inst: &Instance) -> (Plan, Vec<usize>) {
    let mut plan = Plan::empty(inst.horizon, inst.n_products);
    let mut cutoffs = Vec::with_capacity(inst.horizon);
    for t in 0..inst.horizon {
        let r = ro_step(inst, &plan, t);
        set_period(&mut plan, t, &r.assortment);
        cutoffs.push(r.cutoff);
    }
    (plan, cutoffs)
}

pub fn sequential_ro(inst: &Instance) -> Plan {
    sequential_ro_trace(inst).0
}

/// Product with at least one negative effect.
pub fn is_satiation_product(inst: &Instance, i: usize) -> bool {
    inst.effect[i].iter().any(|&b| b < 0.0)
}

fn period_revenue(inst: &Instance, plan: &Plan, t: usize) -> f64 {
    let nu = current_nu(inst, plan, t);
    let (mut num, mut den) = (0.0, 1.0);
    for i in 0..inst.n_products {
        if plan.offered(t, i) {
            num += inst.revenue[i] * nu[i];
            den += nu[i];
        }
    }
    num / den
}

/// Revenue of period `t` plus the next `min(M, T - 1 - t)` periods filled by
/// sequential RO, with periods up to `t` taken from `plan`.
fn lookahead(inst: &Instance, plan: &Plan, t: usize) -> f64 {
    let mut p = plan.clone();
    let mut total = period_revenue(inst, &p, t);
    let h = inst.memory.min(inst.horizon - 1 - t);
    for s in t + 1..=t + h {
        let r = ro_step(inst, &p, s);
        set_period(&mut p, s, &r.assortment);
        total += r.value;
    }
    total
}

/// Sequential RO that may drop one satiation product per period.
///
/// In each period the RO assortment is compared with every variant missing one
/// satiation product; the score is the look-ahead of [`lookahead`]. A variant
/// replaces the RO assortment only if it scores strictly higher; among equal
/// best variants the smallest product index wins.
pub fn sequential_lospo(inst: &Instance) -> Plan {
    let mut plan = Plan::empty(inst.horizon, inst.n_products);
    for t in 0..inst.horizon {
        let base = ro_step(inst, &plan, t).assortment;
        set_period(&mut plan, t, &base);
        let base_score = lookahead(inst, &plan, t);
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut cands: Vec<usize> = base.iter().copied().filter(|&i| is_satiation_product(inst, i)).collect();
        cands.sort_unstable();
        for j in cands {
            let set: Vec<usize> = base.iter().copied().filter(|&i| i != j).collect();
            set_period(&mut plan, t, &set);
            let s = lookahead(inst, &plan, t);
            if s > base_score + TIE_TOL && best.as_ref().is_none_or(|(b, _)| s > *b + TIE_TOL) {
                best = Some((s, set));
            }
        }
        match best {
            Some((_, s)) => set_period(&mut plan, t, &s),
            None => set_period(&mut plan, t, &base),
        }
    }
    plan
}

/// Whether the set of products offered at least once is revenue-ordered:
/// no offered product has lower revenue than a never-offered one.
pub fn union_is_ro(plan: &Plan, revenues: &[f64]) -> bool {
    let n = revenues.len();
    let offered: Vec<bool> = (0..n).map(|i| plan.offers.iter().any(|row| row[i] != 0)).collect();
    let min_in = (0..n).filter(|&i| offered[i]).map(|i| revenues[i]).fold(f64::INFINITY, f64::min);
    let max_out = (0..n).filter(|&i| !offered[i]).map(|i| revenues[i]).fold(f64::NEG_INFINITY, f64::max);
    min_in >= max_out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{plan_revenue, ConstraintSpec};

    #[test]
    fn brute_force_trivial() {
        let inst = Instance::static_mnl(vec![4.0], vec![0.0], 1).unwrap();
        let (p, v) = brute_force(&inst).unwrap();
        assert_eq!(p.offers, vec![vec![1]]);
        assert!((v - 2.0).abs() < 1e-15);
        let inst = Instance::static_mnl(vec![0.0, 0.0], vec![0.0, 0.0], 2).unwrap();
        let (p, v) = brute_force(&inst).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(p, Plan::empty(2, 2));
        let big = Instance::static_mnl(vec![1.0; 5], vec![0.0; 5], 5).unwrap();
        assert!(matches!(brute_force(&big), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn brute_force_value_matches_evaluator() {
        let inst = Instance::new(
            vec![5.0, 3.0],
            vec![0.2, -0.3],
            vec![vec![-1.2], vec![0.4]],
            3,
            ConstraintSpec::default(),
        )
        .unwrap();
        let (p, v) = brute_force(&inst).unwrap();
        assert!((plan_revenue(&inst, &p).unwrap() - v).abs() < 1e-12);
    }

    #[test]
    fn ro_examples() {
        let r = ro_assortment(&[2.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!((r.cutoff, r.value), (2, 1.0));
        let r = ro_assortment(&[2.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!((r.cutoff, r.value), (2, 0.0));
        let r = ro_assortment(&[5.0], &[1.0]).unwrap();
        assert_eq!((r.cutoff, r.value), (1, 2.5));
        assert!(ro_assortment(&[1.0], &[-1.0]).is_err());
    }

    #[test]
    fn sequential_ro_addictive_single() {
        let inst = Instance::new(vec![5.0], vec![0.0], vec![vec![1.0]], 2, ConstraintSpec::default()).unwrap();
        assert_eq!(sequential_ro(&inst).offers, vec![vec![1], vec![1]]);
        assert_eq!(sequential_lospo(&inst), sequential_ro(&inst));
    }

    #[test]
    fn union_examples() {
        assert!(union_is_ro(&Plan::empty(2, 3), &[3.0, 2.0, 1.0]));
        let p = Plan::from_sets(&[vec![0], vec![2]], 3, false);
        assert!(!union_is_ro(&p, &[3.0, 2.0, 1.0]));
        let p = Plan::from_sets(&[vec![0], vec![1]], 3, false);
        assert!(union_is_ro(&p, &[3.0, 2.0, 1.0]));
    }

    #[test]
    fn lospo_keeps_single_product_when_dropping_hurts() {
        // dropping the only product leaves period revenue at zero
        let inst = Instance::new(vec![5.0], vec![0.0], vec![vec![-0.1]], 1, ConstraintSpec::default()).unwrap();
        assert_eq!(sequential_lospo(&inst).offers, vec![vec![1]]);
    }
}
