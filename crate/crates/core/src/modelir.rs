//! Solver-agnostic model representation and the formulation builders.
//!
//! A [`Model`] is a maximization over bounded variables with linear rows and a
//! list of tagged convex rows. Convex rows are never handed to the LP solver;
//! branch-and-bound separates them by outer approximation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::envelope::{self, LinIneq, ProductAttraction, Sense};
use crate::error::{Error, Result};
use crate::lp::LpProblem;
use crate::problem::{rho_bounds, Instance, Plan};

/// Largest memory for which all `M!` chain rows are emitted eagerly.
pub const EAGER_CONCAVE_MAX_M: usize = 3;
/// Largest memory accepted by the multilinear builder.
pub const MULTILINEAR_MAX_M: usize = 4;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Var {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub obj: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinRow {
    pub name: String,
    pub coefs: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl LinRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            RowSense::Le => (a - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - a).max(0.0),
            RowSense::Eq => (a - self.rhs).abs(),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self.sense {
            RowSense::Le => (f64::NEG_INFINITY, self.rhs),
            RowSense::Ge => (self.rhs, f64::INFINITY),
            RowSense::Eq => (self.rhs, self.rhs),
        }
    }
}

/// Nonlinear rows handled by outer approximation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ConvexRow {
    /// `y ≥ γ exp(β⁰ + β·z/γ)`.
    ExpPerspective {
        y: VarId,
        gamma: VarId,
        z: Vec<VarId>,
        attr: ProductAttraction,
    },
    /// `ρ w ≥ 1` with `ρ, w > 0`.
    Reciprocal { rho: VarId, w: VarId },
    /// `y ≤` perspective of the concave envelope, i.e. every chain row.
    ConcaveEnvelope {
        y: VarId,
        gamma: VarId,
        z: Vec<VarId>,
        attr: ProductAttraction,
    },
}

impl ConvexRow {
    /// A cut violated by more than `tol` at `x`, if any.
    pub fn separate(&self, x: &[f64], tol: f64) -> Option<LinRow> {
        match self {
            ConvexRow::ExpPerspective { y, gamma, z, attr } => {
                let zv: Vec<f64> = z.iter().map(|&k| x[k]).collect();
                let (_, conv) = envelope::separate_lifted(attr, x[*y], x[*gamma], &zv, tol);
                conv.map(|c| lift_row("oa_exp", &c, *y, *gamma, z))
            }
            ConvexRow::ConcaveEnvelope { y, gamma, z, attr } => {
                let zv: Vec<f64> = z.iter().map(|&k| x[k]).collect();
                let (conc, _) = envelope::separate_lifted(attr, x[*y], x[*gamma], &zv, tol);
                conc.map(|c| lift_row("chain", &c, *y, *gamma, z))
            }
            ConvexRow::Reciprocal { rho, w } => {
                let (r, wv) = (x[*rho], x[*w]);
                if wv <= 0.0 || r * wv >= 1.0 - tol {
                    return None;
                }
                // tangent of 1/w at ŵ: ρ + w/ŵ² ≥ 2/ŵ
                let row = LinRow {
                    name: "oa_recip".into(),
                    coefs: vec![(*rho, 1.0), (*w, 1.0 / (wv * wv))],
                    sense: RowSense::Ge,
                    rhs: 2.0 / wv,
                };
                (row.violation(x) > tol).then_some(row)
            }
        }
    }

    /// Violation amount at `x` (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            ConvexRow::ExpPerspective { y, gamma, z, attr } => {
                let g = x[*gamma].max(0.0);
                if g <= 1e-12 {
                    return (-x[*y]).max(0.0);
                }
                let w: Vec<f64> = z.iter().map(|&k| (x[k] / g).clamp(0.0, 1.0)).collect();
                (g * attr.alpha_frac(&w) - x[*y]).max(0.0)
            }
            ConvexRow::ConcaveEnvelope { y, gamma, z, attr } => {
                let g = x[*gamma].max(0.0);
                let zc: Vec<f64> = z.iter().map(|&k| x[k].clamp(0.0, g)).collect();
                let s = envelope::most_violated_permutation(attr, g, &zc);
                (x[*y] - envelope::concave_rhs(attr, &s, g, &zc)).max(0.0)
            }
            ConvexRow::Reciprocal { rho, w } => (1.0 - x[*rho] * x[*w]).max(0.0),
        }
    }
}

/// Map an inequality in `(y, γ, z)` onto model variables.
pub fn lift_row(name: &str, c: &LinIneq, y: VarId, gamma: VarId, z: &[VarId]) -> LinRow {
    let mut coefs = Vec::with_capacity(2 + z.len());
    if c.coef_y != 0.0 {
        coefs.push((y, c.coef_y));
    }
    if c.coef_gamma != 0.0 {
        coefs.push((gamma, c.coef_gamma));
    }
    for (&v, &a) in z.iter().zip(&c.coef_z) {
        if a != 0.0 {
            coefs.push((v, a));
        }
    }
    LinRow {
        name: name.to_string(),
        coefs,
        sense: match c.sense {
            Sense::Le => RowSense::Le,
            Sense::Ge => RowSense::Ge,
        },
        rhs: c.rhs,
    }
}

/// Metadata keys; `i`, `j` products, `t` period or cycle position, `m` memory
/// index (0 is one period back), `k` subset bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Key {
    X { i: usize, t: usize },
    Rho { t: usize },
    Y { i: usize, t: usize },
    Gamma { i: usize, t: usize },
    Z { i: usize, m: usize, t: usize },
    BigGamma { i: usize, j: usize, t: usize },
    W { t: usize },
    Theta { i: usize, k: usize, t: usize },
    Omega { i: usize, k: usize, t: usize },
}

impl Key {
    pub fn name(&self) -> String {
        match *self {
            Key::X { i, t } => format!("x_{i}_{t}"),
            Key::Rho { t } => format!("rho_{t}"),
            Key::Y { i, t } => format!("y_{i}_{t}"),
            Key::Gamma { i, t } => format!("gamma_{i}_{t}"),
            Key::Z { i, m, t } => format!("z_{i}_{}_{t}", m + 1),
            Key::BigGamma { i, j, t } => format!("Gam_{i}_{j}_{t}"),
            Key::W { t } => format!("w_{t}"),
            Key::Theta { i, k, t } => format!("theta_{i}_{k}_{t}"),
            Key::Omega { i, k, t } => format!("omega_{i}_{k}_{t}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Formulation {
    Conic,
    Env,
    Multilinear,
    CycleConic { len: usize },
    Base,
    /// Base without the reciprocal row and its `w` variables.
    McCormickBase,
    BoundFree,
}

impl Formulation {
    pub fn label(&self) -> String {
        match self {
            Formulation::Conic => "conic".into(),
            Formulation::Env => "env".into(),
            Formulation::Multilinear => "ml".into(),
            Formulation::CycleConic { len } => format!("cycle{len}"),
            Formulation::Base => "base".into(),
            Formulation::McCormickBase => "mccormick".into(),
            Formulation::BoundFree => "bf".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Model {
    pub formulation: Formulation,
    pub n_products: usize,
    /// Number of periods (or cycle positions) in the decision matrix.
    pub periods: usize,
    pub is_cycle: bool,
    pub vars: Vec<Var>,
    pub rows: Vec<LinRow>,
    pub convex: Vec<ConvexRow>,
    #[serde(serialize_with = "ser_meta")]
    pub meta: BTreeMap<Key, VarId>,
}

fn ser_meta<S: serde::Serializer>(m: &BTreeMap<Key, VarId>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(&k.name(), v)?;
    }
    map.end()
}

impl Model {
    fn new(formulation: Formulation, n_products: usize, periods: usize, is_cycle: bool) -> Self {
        Model {
            formulation,
            n_products,
            periods,
            is_cycle,
            vars: Vec::new(),
            rows: Vec::new(),
            convex: Vec::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn add_var(&mut self, key: Key, kind: VarKind, lower: f64, upper: f64) -> VarId {
        let id = self.vars.len();
        self.vars.push(Var {
            name: key.name(),
            kind,
            lower,
            upper,
            obj: 0.0,
        });
        self.meta.insert(key, id);
        id
    }

    pub fn add_row(&mut self, name: impl Into<String>, coefs: Vec<(VarId, f64)>, sense: RowSense, rhs: f64) {
        self.rows.push(LinRow {
            name: name.into(),
            coefs,
            sense,
            rhs,
        });
    }

    pub fn var(&self, key: Key) -> Option<VarId> {
        self.meta.get(&key).copied()
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn binaries(&self) -> Vec<VarId> {
        (0..self.vars.len()).filter(|&j| self.vars[j].kind == VarKind::Binary).collect()
    }

    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.vars.iter().filter(|v| v.kind == kind).count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, x)| v.obj * x).sum()
    }

    /// Continuous relaxation of the linear part.
    pub fn to_lp(&self) -> LpProblem {
        let mut p = LpProblem::default();
        for v in &self.vars {
            p.add_var(v.lower, v.upper, v.obj);
        }
        for r in &self.rows {
            let (lo, hi) = r.bounds();
            p.add_row(r.coefs.clone(), lo, hi);
        }
        p
    }

    /// Largest row or bound violation at `x`, linear rows only.
    pub fn max_linear_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for r in &self.rows {
            worst = worst.max(r.violation(x));
        }
        for (v, &val) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - val).max(val - v.upper);
        }
        worst
    }

    pub fn max_convex_violation(&self, x: &[f64]) -> f64 {
        self.convex.iter().map(|c| c.violation(x)).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// Plan encoded by the `x` variables of a solution vector.
pub fn decode_plan(model: &Model, values: &[f64]) -> Plan {
    let mut offers = vec![vec![0u8; model.n_products]; model.periods];
    for (t, row) in offers.iter_mut().enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            if let Some(id) = model.var(Key::X { i, t }) {
                *v = (values[id] > 0.5) as u8;
            }
        }
    }
    Plan {
        offers,
        is_cycle: model.is_cycle,
    }
}

/// Fix the `x` variables of a model to a plan.
pub fn fix_plan(model: &mut Model, plan: &Plan) -> Result<()> {
    if plan.periods() != model.periods {
        return Err(Error::InvalidArgument(format!(
            "plan has {} periods, model has {}",
            plan.periods(),
            model.periods
        )));
    }
    for t in 0..model.periods {
        for i in 0..model.n_products {
            if let Some(id) = model.var(Key::X { i, t }) {
                let v = plan.offers[t][i] as f64;
                model.vars[id].lower = v;
                model.vars[id].upper = v;
            }
        }
    }
    Ok(())
}

/// `x` variable of product `i` `m + 1` periods before `t`, `None` before the horizon.
fn hist_x(x: &[Vec<VarId>], i: usize, t: usize, m: usize, periods: usize, cyclic: bool) -> Option<VarId> {
    let back = m + 1;
    if cyclic {
        let p = (t as isize - back as isize).rem_euclid(periods as isize) as usize;
        Some(x[p][i])
    } else if t >= back {
        Some(x[t - back][i])
    } else {
        None
    }
}

fn add_x_vars(model: &mut Model, n: usize, periods: usize) -> Vec<Vec<VarId>> {
    (0..periods)
        .map(|t| {
            (0..n)
                .map(|i| model.add_var(Key::X { i, t }, VarKind::Binary, 0.0, 1.0))
                .collect()
        })
        .collect()
}

/// Cardinality, offer-cap and non-overlap rows over `x[t][i]`.
fn add_side_constraints(model: &mut Model, inst: &Instance, x: &[Vec<VarId>], cyclic: bool) -> Result<()> {
    let periods = x.len();
    let n = inst.n_products;
    let c = &inst.constraints;
    if let Some(cap) = c.cardinality_cap {
        for (t, row) in x.iter().enumerate() {
            model.add_row(format!("card_{t}"), row.iter().map(|&v| (v, 1.0)).collect(), RowSense::Le, cap as f64);
        }
    }
    if let Some(cap) = c.offer_cap {
        for i in 0..n {
            model.add_row(format!("offer_{i}"), x.iter().map(|r| (r[i], 1.0)).collect(), RowSense::Le, cap as f64);
        }
    }
    if c.non_overlapping {
        let w = inst.memory + 1;
        if cyclic && periods <= inst.memory {
            return Err(Error::InvalidArgument(format!(
                "cycle length {periods} must exceed memory {} under non-overlap",
                inst.memory
            )));
        }
        for i in 0..n {
            let mut seen: Vec<Vec<usize>> = Vec::new();
            let starts = if cyclic { periods } else { periods.saturating_sub(1) };
            for s in 0..starts {
                let mut ts: Vec<usize> = if cyclic {
                    (0..w).map(|k| (s + k) % periods).collect()
                } else {
                    (s..(s + w).min(periods)).collect()
                };
                ts.sort_unstable();
                ts.dedup();
                if ts.len() < 2 || seen.contains(&ts) {
                    continue;
                }
                model.add_row(
                    format!("nonoverlap_{i}_{s}"),
                    ts.iter().map(|&t| (x[t][i], 1.0)).collect(),
                    RowSense::Le,
                    1.0,
                );
                seen.push(ts);
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum LiftedKind {
    Conic,
    Env,
}

fn build_lifted(inst: &Instance, periods: usize, cyclic: bool, kind: LiftedKind, form: Formulation) -> Result<Model> {
    inst.validate()?;
    let n = inst.n_products;
    let mm = inst.memory;
    if kind == LiftedKind::Env && mm > 2 {
        return Err(Error::Unsupported(format!("the envelope MILP needs M <= 2, got {mm}")));
    }
    let rb = rho_bounds(inst);
    let (rl, ru) = (rb.lower, rb.upper);
    let mut model = Model::new(form, n, periods, cyclic);
    let x = add_x_vars(&mut model, n, periods);
    let scale = 1.0 / periods as f64;
    for t in 0..periods {
        let rho = model.add_var(Key::Rho { t }, VarKind::Continuous, rl, ru);
        let mut balance = vec![(rho, 1.0)];
        for i in 0..n {
            let attr = ProductAttraction::of(inst, i);
            let xi = x[t][i];
            let y = model.add_var(Key::Y { i, t }, VarKind::Continuous, 0.0, 1.0);
            model.vars[y].obj = inst.revenue[i] * scale;
            balance.push((y, 1.0));
            let g = model.add_var(Key::Gamma { i, t }, VarKind::Continuous, 0.0, ru);
            // γ = ρ x
            model.add_row(format!("relax1a_{i}_{t}"), vec![(g, 1.0), (xi, -rl), (rho, -1.0)], RowSense::Le, -rl);
            model.add_row(format!("relax1b_{i}_{t}"), vec![(g, 1.0), (xi, -ru)], RowSense::Le, 0.0);
            model.add_row(format!("relax1c_{i}_{t}"), vec![(g, 1.0), (xi, -rl)], RowSense::Ge, 0.0);
            model.add_row(format!("relax1d_{i}_{t}"), vec![(g, 1.0), (xi, -ru), (rho, -1.0)], RowSense::Ge, -ru);
            let mut zs = Vec::with_capacity(mm);
            for m in 0..mm {
                let h = hist_x(&x, i, t, m, periods, cyclic);
                let z = model.add_var(Key::Z { i, m, t }, VarKind::Continuous, 0.0, if h.is_some() { ru } else { 0.0 });
                // z = γ x^{hist}; a missing history is the constant 0
                let hz = |c: f64| h.map(|hv| vec![(hv, c)]).unwrap_or_default();
                model.add_row(format!("relax2a_{i}_{m}_{t}"), vec![(z, 1.0), (g, -1.0)], RowSense::Le, 0.0);
                model.add_row(format!("relax2b_{i}_{m}_{t}"), [vec![(z, 1.0)], hz(-ru)].concat(), RowSense::Le, 0.0);
                model.add_row(format!("relax2c_{i}_{m}_{t}"), vec![(z, 1.0)], RowSense::Ge, 0.0);
                model.add_row(
                    format!("relax2d_{i}_{m}_{t}"),
                    [vec![(z, 1.0), (g, -1.0)], hz(-ru)].concat(),
                    RowSense::Ge,
                    -ru,
                );
                zs.push(z);
            }
            if mm <= EAGER_CONCAVE_MAX_M {
                for (k, s) in envelope::permutations(mm).iter().enumerate() {
                    let c = envelope::concave_ineq(&attr, s)?;
                    let mut r = lift_row("", &c, y, g, &zs);
                    r.name = format!("chain_{i}_{t}_{k}");
                    model.rows.push(r);
                }
            } else {
                model.convex.push(ConvexRow::ConcaveEnvelope {
                    y,
                    gamma: g,
                    z: zs.clone(),
                    attr: attr.clone(),
                });
            }
            match kind {
                LiftedKind::Conic => model.convex.push(ConvexRow::ExpPerspective { y, gamma: g, z: zs, attr }),
                LiftedKind::Env => {
                    for (k, c) in envelope::convex_env_ineqs_small_m(&attr)?.iter().enumerate() {
                        let mut r = lift_row("", c, y, g, &zs);
                        r.name = format!("convenv_{i}_{t}_{k}");
                        model.rows.push(r);
                    }
                }
            }
        }
        model.add_row(format!("balance_{t}"), balance, RowSense::Eq, 1.0);
    }
    add_side_constraints(&mut model, inst, &x, cyclic)?;
    Ok(model)
}

/// Lifted formulation with McCormick rows, chain rows and exp-perspective rows.
pub fn build_conic(inst: &Instance) -> Result<Model> {
    build_lifted(inst, inst.horizon, false, LiftedKind::Conic, Formulation::Conic)
}

/// Mixed-integer linear variant with closed-form convex envelope rows (`M ≤ 2`).
pub fn build_env_milp(inst: &Instance) -> Result<Model> {
    build_lifted(inst, inst.horizon, false, LiftedKind::Env, Formulation::Env)
}

/// Conic formulation over a cycle of length `len`; histories wrap.
pub fn build_cycle_conic(inst: &Instance, len: usize) -> Result<Model> {
    if len == 0 {
        return Err(Error::InvalidArgument("cycle length must be positive".into()));
    }
    if inst.constraints.non_overlapping && len <= inst.memory {
        return Err(Error::InvalidArgument(format!(
            "cycle length {len} must exceed memory {} under non-overlap",
            inst.memory
        )));
    }
    build_lifted(inst, len, true, LiftedKind::Conic, Formulation::CycleConic { len })
}

/// Möbius coefficients of `α_i` over subsets of `[M]` (bitmask-indexed), so
/// that `α_i(χ^S) = Σ_{k ⊆ S} a[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilinearCoeffs {
    pub coeffs: Vec<f64>,
}

impl MultilinearCoeffs {
    pub fn new(attr: &ProductAttraction) -> Self {
        let m = attr.m();
        let size = 1usize << m;
        let mut a: Vec<f64> = (0..size)
            .map(|k| {
                let h: Vec<u8> = (0..m).map(|b| ((k >> b) & 1) as u8).collect();
                attr.alpha(&h)
            })
            .collect();
        // inverse zeta transform over the subset lattice
        for b in 0..m {
            for k in 0..size {
                if k & (1 << b) != 0 {
                    a[k] -= a[k ^ (1 << b)];
                }
            }
        }
        MultilinearCoeffs { coeffs: a }
    }
}

/// Multilinear-extension formulation (`M ≤ 4`).
///
/// `θ_{ik}^t = x_i^t Π_{m∈S_k} x_i^{t-m}` is built recursively: the product for
/// `S_k` multiplies the product for `S_k` minus its largest element by the
/// history variable of that element, one McCormick block per step. Each
/// `ω_{ik}^t = ρ^t θ_{ik}^t` is linearized with the bounds of `ρ`.
pub fn build_multilinear(inst: &Instance) -> Result<Model> {
    inst.validate()?;
    let n = inst.n_products;
    let mm = inst.memory;
    if mm > MULTILINEAR_MAX_M {
        return Err(Error::SizeGuard(format!("multilinear formulation needs M <= {MULTILINEAR_MAX_M}, got {mm}")));
    }
    let periods = inst.horizon;
    let rb = rho_bounds(inst);
    let (rl, ru) = (rb.lower, rb.upper);
    let mut model = Model::new(Formulation::Multilinear, n, periods, false);
    let x = add_x_vars(&mut model, n, periods);
    let scale = 1.0 / periods as f64;
    for t in 0..periods {
        let rho = model.add_var(Key::Rho { t }, VarKind::Continuous, rl, ru);
        let mut balance = vec![(rho, 1.0)];
        for i in 0..n {
            let coeffs = MultilinearCoeffs::new(&ProductAttraction::of(inst, i));
            let y = model.add_var(Key::Y { i, t }, VarKind::Continuous, 0.0, 1.0);
            model.vars[y].obj = inst.revenue[i] * scale;
            balance.push((y, 1.0));
            let mut theta: Vec<Option<VarId>> = vec![None; 1 << mm];
            theta[0] = Some(x[t][i]);
            let mut link = vec![(y, 1.0)];
            for k in 0..(1usize << mm) {
                if k > 0 {
                    let top = usize::BITS as usize - 1 - k.leading_zeros() as usize;
                    let (Some(prev), Some(h)) = (theta[k ^ (1 << top)], hist_x(&x, i, t, top, periods, false)) else {
                        continue;
                    };
                    let th = model.add_var(Key::Theta { i, k, t }, VarKind::Continuous, 0.0, 1.0);
                    model.add_row(format!("thA_{i}_{k}_{t}"), vec![(th, 1.0), (prev, -1.0)], RowSense::Le, 0.0);
                    model.add_row(format!("thB_{i}_{k}_{t}"), vec![(th, 1.0), (h, -1.0)], RowSense::Le, 0.0);
                    model.add_row(
                        format!("thC_{i}_{k}_{t}"),
                        vec![(th, 1.0), (prev, -1.0), (h, -1.0)],
                        RowSense::Ge,
                        -1.0,
                    );
                    theta[k] = Some(th);
                }
                let th = theta[k].expect("set above");
                let om = model.add_var(Key::Omega { i, k, t }, VarKind::Continuous, 0.0, ru);
                // ω = ρ θ
                model.add_row(format!("omA_{i}_{k}_{t}"), vec![(om, 1.0), (th, -ru)], RowSense::Le, 0.0);
                model.add_row(format!("omB_{i}_{k}_{t}"), vec![(om, 1.0), (th, -rl)], RowSense::Ge, 0.0);
                model.add_row(format!("omC_{i}_{k}_{t}"), vec![(om, 1.0), (rho, -1.0), (th, -rl)], RowSense::Le, -rl);
                model.add_row(format!("omD_{i}_{k}_{t}"), vec![(om, 1.0), (rho, -1.0), (th, -ru)], RowSense::Ge, -ru);
                link.push((om, -coeffs.coeffs[k]));
            }
            model.add_row(format!("mlink_{i}_{t}"), link, RowSense::Eq, 0.0);
        }
        model.add_row(format!("balance_{t}"), balance, RowSense::Eq, 1.0);
    }
    add_side_constraints(&mut model, inst, &x, false)?;
    Ok(model)
}

/// Charnes-Cooper block shared by the `(M+1)`-cyclic models.
#[derive(Debug, Clone, PartialEq)]
pub struct CharnesCooperBlock {
    pub u: Vec<f64>,
    pub rho: Vec<VarId>,
    pub gamma: Vec<Vec<VarId>>,
    pub x: Vec<Vec<VarId>>,
}

impl CharnesCooperBlock {
    pub fn of(model: &Model, inst: &Instance) -> Self {
        let l = model.periods;
        let n = inst.n_products;
        CharnesCooperBlock {
            u: inst.base_utility.iter().map(|b| b.exp()).collect(),
            rho: (0..l).map(|t| model.var(Key::Rho { t }).expect("rho")).collect(),
            gamma: (0..l)
                .map(|t| (0..n).map(|i| model.var(Key::Gamma { i, t }).expect("gamma")).collect())
                .collect(),
            x: (0..l)
                .map(|t| (0..n).map(|i| model.var(Key::X { i, t }).expect("x")).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CycleKind {
    Base,
    McCormick,
    BoundFree,
}

fn build_mplus1(inst: &Instance, kind: CycleKind) -> Result<Model> {
    inst.validate()?;
    let n = inst.n_products;
    let l = inst.memory + 1;
    let u: Vec<f64> = inst.base_utility.iter().map(|b| b.exp()).collect();
    let form = match kind {
        CycleKind::Base => Formulation::Base,
        CycleKind::McCormick => Formulation::McCormickBase,
        CycleKind::BoundFree => Formulation::BoundFree,
    };
    let mut model = Model::new(form, n, l, true);
    let x = add_x_vars(&mut model, n, l);
    let (rl, ru) = match kind {
        CycleKind::BoundFree => (0.0, 1.0),
        _ => {
            let rb = rho_bounds(inst);
            (rb.lower, rb.upper)
        }
    };
    let scale = 1.0 / l as f64;
    for t in 0..l {
        let rho = model.add_var(Key::Rho { t }, VarKind::Continuous, rl, ru);
        let g: Vec<VarId> = (0..n)
            .map(|i| {
                let id = model.add_var(Key::Gamma { i, t }, VarKind::Continuous, 0.0, ru);
                model.vars[id].obj = inst.revenue[i] * u[i] * scale;
                id
            })
            .collect();
        let mut balance = vec![(rho, 1.0)];
        balance.extend((0..n).map(|i| (g[i], u[i])));
        model.add_row(format!("balance_{t}"), balance, RowSense::Eq, 1.0);
        if kind == CycleKind::BoundFree {
            for i in 0..n {
                model.add_row(format!("gle_{i}_{t}"), vec![(g[i], 1.0), (rho, -1.0)], RowSense::Le, 0.0);
            }
            let gam: Vec<Vec<VarId>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| model.add_var(Key::BigGamma { i, j, t }, VarKind::Continuous, 0.0, 1.0))
                        .collect()
                })
                .collect();
            for i in 0..n {
                let mut r = vec![(x[t][i], 1.0), (g[i], -1.0)];
                r.extend((0..n).map(|j| (gam[i][j], -u[j])));
                model.add_row(format!("bfx_{i}_{t}"), r, RowSense::Eq, 0.0);
                for j in 0..n {
                    if i == j {
                        model.add_row(format!("bfdiag_{i}_{t}"), vec![(gam[i][i], 1.0), (g[i], -1.0)], RowSense::Eq, 0.0);
                        continue;
                    }
                    let gij = gam[i][j];
                    model.add_row(format!("bfl_{i}_{j}_{t}"), vec![(gij, 1.0), (g[i], -1.0), (g[j], -1.0), (rho, 1.0)], RowSense::Ge, 0.0);
                    model.add_row(format!("bfui_{i}_{j}_{t}"), vec![(gij, 1.0), (g[i], -1.0)], RowSense::Le, 0.0);
                    model.add_row(format!("bfuj_{i}_{j}_{t}"), vec![(gij, 1.0), (g[j], -1.0)], RowSense::Le, 0.0);
                }
            }
        } else {
            for i in 0..n {
                let xi = x[t][i];
                let gi = g[i];
                model.add_row(format!("relax1a_{i}_{t}"), vec![(gi, 1.0), (xi, -rl), (rho, -1.0)], RowSense::Le, -rl);
                model.add_row(format!("relax1b_{i}_{t}"), vec![(gi, 1.0), (xi, -ru)], RowSense::Le, 0.0);
                model.add_row(format!("relax1c_{i}_{t}"), vec![(gi, 1.0), (xi, -rl)], RowSense::Ge, 0.0);
                model.add_row(format!("relax1d_{i}_{t}"), vec![(gi, 1.0), (xi, -ru), (rho, -1.0)], RowSense::Ge, -ru);
            }
            if kind == CycleKind::Base {
                let wmax = 1.0 + u.iter().sum::<f64>();
                let w = model.add_var(Key::W { t }, VarKind::Continuous, 1.0, wmax);
                let mut r = vec![(w, 1.0)];
                r.extend((0..n).map(|j| (x[t][j], -u[j])));
                model.add_row(format!("wdef_{t}"), r, RowSense::Eq, 1.0);
                model.convex.push(ConvexRow::Reciprocal { rho, w });
            }
        }
    }
    // every window of M + 1 cycle positions is the whole cycle
    for i in 0..n {
        model.add_row(format!("nonoverlap_{i}"), (0..l).map(|t| (x[t][i], 1.0)).collect(), RowSense::Le, 1.0);
    }
    let mut rest = inst.clone();
    rest.constraints.non_overlapping = false;
    add_side_constraints(&mut model, &rest, &x, true)?;
    Ok(model)
}

/// Charnes-Cooper model over `M + 1` cycle positions with the reciprocal row.
pub fn build_mplus1_base(inst: &Instance) -> Result<Model> {
    build_mplus1(inst, CycleKind::Base)
}

/// Base without the reciprocal row: McCormick rows only.
pub fn build_mplus1_mccormick(inst: &Instance) -> Result<Model> {
    build_mplus1(inst, CycleKind::McCormick)
}

/// Bound-free model with pairwise `Γ` variables.
pub fn build_bound_free(inst: &Instance) -> Result<Model> {
    build_mplus1(inst, CycleKind::BoundFree)
}

fn fmt_num(v: f64) -> String {
    // shortest round-trip representation
    format!("{v:?}")
}

fn fmt_terms(out: &mut String, coefs: &[(VarId, f64)], vars: &[Var]) {
    if coefs.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&vars.first().map(|v| v.name.clone()).unwrap_or_default());
        return;
    }
    for (k, &(j, a)) in coefs.iter().enumerate() {
        let sign = if a < 0.0 { "-" } else { "+" };
        if k == 0 && a >= 0.0 {
            let _ = write!(out, " {} {}", fmt_num(a), vars[j].name);
        } else {
            let _ = write!(out, " {sign} {} {}", fmt_num(a.abs()), vars[j].name);
        }
    }
}

/// CPLEX LP text. Refuses models that still carry convex rows.
pub fn lp_text(model: &Model) -> Result<String> {
    if !model.convex.is_empty() {
        return Err(Error::ConvexRowsPresent(model.convex.len()));
    }
    let mut out = String::new();
    let _ = writeln!(out, "\\ formulation {}", model.formulation.label());
    out.push_str("Maximize\n obj:");
    let obj: Vec<(VarId, f64)> = model
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| v.obj != 0.0)
        .map(|(j, v)| (j, v.obj))
        .collect();
    fmt_terms(&mut out, &obj, &model.vars);
    out.push_str("\nSubject To\n");
    for (k, r) in model.rows.iter().enumerate() {
        let _ = write!(out, " r{k}_{}:", r.name);
        fmt_terms(&mut out, &r.coefs, &model.vars);
        let op = match r.sense {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", fmt_num(r.rhs));
    }
    out.push_str("Bounds\n");
    for v in &model.vars {
        let _ = writeln!(out, " {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper));
    }
    let bins: Vec<&str> = model
        .vars
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for b in bins {
            let _ = writeln!(out, " {b}");
        }
    }
    out.push_str("End\n");
    Ok(out)
}

pub fn export_lp(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let text = lp_text(model)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Summary of an LP file as read back by [`parse_lp`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedLp {
    pub objective_terms: usize,
    pub rows: Vec<(String, Vec<(String, f64)>, RowSense, f64)>,
    pub bounds: Vec<(String, f64, f64)>,
    pub binaries: Vec<String>,
}

fn parse_terms(s: &str) -> Result<Vec<(String, f64)>> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    let mut out = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for tok in toks {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    coef = Some(v);
                } else {
                    out.push((tok.to_string(), sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                }
            }
        }
    }
    Ok(out)
}

/// Minimal reader for the subset of LP syntax written by [`lp_text`].
pub fn parse_lp(text: &str) -> Result<ParsedLp> {
    #[derive(PartialEq)]
    enum Sec {
        None,
        Obj,
        Rows,
        Bounds,
        Bin,
    }
    let mut sec = Sec::None;
    let mut p = ParsedLp::default();
    let bad = |l: &str| Error::Schema(format!("cannot parse LP line: {l}"));
    for line in text.lines() {
        let l = line.trim();
        if l.is_empty() || l.starts_with('\\') {
            continue;
        }
        match l {
            "Maximize" | "Minimize" => {
                sec = Sec::Obj;
                continue;
            }
            "Subject To" => {
                sec = Sec::Rows;
                continue;
            }
            "Bounds" => {
                sec = Sec::Bounds;
                continue;
            }
            "Binaries" => {
                sec = Sec::Bin;
                continue;
            }
            "End" => break,
            _ => {}
        }
        match sec {
            Sec::Obj => {
                let body = l.split_once(':').map_or(l, |(_, b)| b);
                p.objective_terms = parse_terms(body)?.len();
            }
            Sec::Rows => {
                let (name, body) = l.split_once(':').ok_or_else(|| bad(l))?;
                let (op, sense) = if body.contains("<=") {
                    ("<=", RowSense::Le)
                } else if body.contains(">=") {
                    (">=", RowSense::Ge)
                } else {
                    ("=", RowSense::Eq)
                };
                let (lhs, rhs) = body.split_once(op).ok_or_else(|| bad(l))?;
                let rhs: f64 = rhs.trim().parse().map_err(|_| bad(l))?;
                p.rows.push((name.trim().to_string(), parse_terms(lhs)?, sense, rhs));
            }
            Sec::Bounds => {
                let parts: Vec<&str> = l.split("<=").map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(bad(l));
                }
                let lo = parts[0].parse().map_err(|_| bad(l))?;
                let hi = parts[2].parse().map_err(|_| bad(l))?;
                p.bounds.push((parts[1].to_string(), lo, hi));
            }
            Sec::Bin => p.binaries.push(l.to_string()),
            Sec::None => return Err(bad(l)),
        }
    }
    Ok(p)
}
