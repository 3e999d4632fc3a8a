//! Projected cuts for the `(M+1)`-cyclic Base model and lazy envelope cuts
//! for large memory.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bnb::{relax_rounds, relax_value, solve_mip, SolveParams, SolveReport, Separator, CONVEX_TOL};
use crate::envelope::{self, LinIneq, ProductAttraction};
use crate::error::{Error, Result};
use crate::modelir::{build_conic, build_mplus1_base, lift_row, CharnesCooperBlock, ConvexRow, Key, LinRow, Model, RowSense, VarKind};
use crate::problem::{rho_bounds, Instance};

/// Minimum violation for a cut to be emitted.
pub const EMIT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CutTag {
    BfLower,
    BfUpper,
    ConcavePerm,
    Subgradient,
}

impl fmt::Display for CutTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CutTag::BfLower => "bf-lower",
            CutTag::BfUpper => "bf-upper",
            CutTag::ConcavePerm => "concave-perm",
            CutTag::Subgradient => "subgradient",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CutBatch {
    pub cuts: Vec<(LinRow, CutTag)>,
}

impl CutBatch {
    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn rows(&self) -> Vec<LinRow> {
        self.cuts.iter().map(|(r, _)| r.clone()).collect()
    }
}

fn merged(terms: impl IntoIterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (k, v) in terms {
        *acc.entry(k).or_default() += v;
    }
    acc.into_iter().filter(|&(_, v)| v != 0.0).collect()
}

/// Projected separation for the Base model at `values`.
///
/// For each `(i, t)`, `A` holds `j ≠ i` with `γ_i + γ_j ≥ ρ`, `B` holds `j`
/// with `γ_j ≥ γ_i` (including `i`) and `C` the rest. A lower cut is emitted
/// when `x_i` sits below `(1+u_i)γ_i + Σ_A u_j(γ_i+γ_j-ρ)`, otherwise an upper
/// cut when it sits above `γ_i + Σ_B u_j γ_i + Σ_C u_j γ_j`.
pub fn bf_separate(block: &CharnesCooperBlock, values: &[f64]) -> CutBatch {
    let n = block.u.len();
    let u = &block.u;
    let mut out = CutBatch::default();
    for t in 0..block.rho.len() {
        let rho = block.rho[t];
        let g = &block.gamma[t];
        let rh = values[rho];
        for i in 0..n {
            let gi = values[g[i]];
            let xi = values[block.x[t][i]];
            let a: Vec<usize> = (0..n).filter(|&j| j != i && gi + values[g[j]] >= rh).collect();
            let (b, c): (Vec<usize>, Vec<usize>) = (0..n).partition(|&j| values[g[j]] >= gi);
            let lower = (1.0 + u[i]) * gi + a.iter().map(|&j| u[j] * (gi + values[g[j]] - rh)).sum::<f64>();
            let upper = gi + b.iter().map(|&j| u[j] * gi).sum::<f64>() + c.iter().map(|&j| u[j] * values[g[j]]).sum::<f64>();
            if lower - xi > EMIT_TOL {
                // x_i - (1+u_i)γ_i - Σ_A u_j(γ_i + γ_j - ρ) ≥ 0
                let mut terms = vec![(block.x[t][i], 1.0), (g[i], -(1.0 + u[i]))];
                for &j in &a {
                    terms.extend([(g[i], -u[j]), (g[j], -u[j]), (rho, u[j])]);
                }
                out.cuts.push((
                    LinRow {
                        name: format!("bflo_{i}_{t}"),
                        coefs: merged(terms),
                        sense: RowSense::Ge,
                        rhs: 0.0,
                    },
                    CutTag::BfLower,
                ));
            } else if xi - upper > EMIT_TOL {
                let mut terms = vec![(block.x[t][i], 1.0), (g[i], -1.0)];
                terms.extend(b.iter().map(|&j| (g[i], -u[j])));
                terms.extend(c.iter().map(|&j| (g[j], -u[j])));
                out.cuts.push((
                    LinRow {
                        name: format!("bfup_{i}_{t}"),
                        coefs: merged(terms),
                        sense: RowSense::Le,
                        rhs: 0.0,
                    },
                    CutTag::BfUpper,
                ));
            }
        }
    }
    out
}

/// [`bf_separate`] as a branch-and-bound separator.
pub struct BfSeparator {
    block: CharnesCooperBlock,
    pub emitted: usize,
}

impl BfSeparator {
    pub fn new(model: &Model, inst: &Instance) -> Self {
        BfSeparator {
            block: CharnesCooperBlock::of(model, inst),
            emitted: 0,
        }
    }
}

impl Separator for BfSeparator {
    fn name(&self) -> &str {
        "bf"
    }

    fn separate(&mut self, _model: &Model, x: &[f64], _integral: bool) -> Vec<LinRow> {
        let rows = bf_separate(&self.block, x).rows();
        self.emitted += rows.len();
        rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GClosedStats {
    /// Relaxation values `Opt_0 ..= Opt_K`.
    pub opt: Vec<f64>,
    /// Relaxation value of Base with all pairwise `Γ` rows.
    pub opt_inf: f64,
    /// `GClosed_k` for `k = 1..=K`, `None` when `Opt_0 = Opt_∞`.
    pub gclosed: Vec<Option<f64>>,
}

impl GClosedStats {
    pub fn from_values(opt: Vec<f64>, opt_inf: f64) -> Self {
        let span = opt[0] - opt_inf;
        let gclosed = opt[1..]
            .iter()
            .map(|&o| (span > 1e-9 * (1.0 + opt[0].abs())).then(|| 100.0 * (opt[0] - o) / span))
            .collect();
        GClosedStats { opt, opt_inf, gclosed }
    }
}

#[derive(Debug, Clone)]
pub struct BfKResult {
    /// Base model plus the projected cuts of `K` rounds.
    pub model: Model,
    pub stats: GClosedStats,
    pub cuts: Vec<(LinRow, CutTag)>,
    pub report: SolveReport,
}

/// Base plus every pairwise `Γ` variable and its linking rows.
pub fn base_with_full_gamma(inst: &Instance) -> Result<Model> {
    let mut model = build_mplus1_base(inst)?;
    let block = CharnesCooperBlock::of(&model, inst);
    let n = inst.n_products;
    let ru = rho_bounds(inst).upper;
    for t in 0..block.rho.len() {
        let g = &block.gamma[t];
        let gam: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| model.add_var(Key::BigGamma { i, j, t }, VarKind::Continuous, 0.0, ru))
                    .collect()
            })
            .collect();
        for i in 0..n {
            let mut r = vec![(block.x[t][i], 1.0), (g[i], -1.0)];
            r.extend((0..n).map(|j| (gam[i][j], -block.u[j])));
            model.add_row(format!("bfx_{i}_{t}"), r, RowSense::Eq, 0.0);
            model.add_row(format!("bfdiag_{i}_{t}"), vec![(gam[i][i], 1.0), (g[i], -1.0)], RowSense::Eq, 0.0);
            for j in (0..n).filter(|&j| j != i) {
                let gij = gam[i][j];
                let rho = block.rho[t];
                model.add_row(format!("bfl_{i}_{j}_{t}"), vec![(gij, 1.0), (g[i], -1.0), (g[j], -1.0), (rho, 1.0)], RowSense::Ge, 0.0);
                model.add_row(format!("bfui_{i}_{j}_{t}"), vec![(gij, 1.0), (g[i], -1.0)], RowSense::Le, 0.0);
                model.add_row(format!("bfuj_{i}_{j}_{t}"), vec![(gij, 1.0), (g[j], -1.0)], RowSense::Le, 0.0);
            }
        }
    }
    Ok(model)
}

fn push_rows(model: &mut Model, rows: impl IntoIterator<Item = LinRow>, prefix: &str) {
    for (k, mut r) in rows.into_iter().enumerate() {
        r.name = format!("{prefix}{k}_{}", r.name);
        model.rows.push(r);
    }
}

/// `K` rounds of relax-and-separate on the Base model, then the integer
/// solve with the projected oracle kept as a lazy separator.
///
/// Tangent cuts of the reciprocal row found in a round stay in the model, so
/// each relaxation contains the previous one and `Opt_k` cannot increase.
pub fn bf_k_driver(inst: &Instance, rounds: usize, params: &SolveParams) -> Result<BfKResult> {
    let base = build_mplus1_base(inst)?;
    let block = CharnesCooperBlock::of(&base, inst);
    let mut model = base.clone();
    let mut opt = Vec::with_capacity(rounds + 1);
    let mut cuts = Vec::new();
    for k in 0..=rounds {
        let trace = relax_value(&model, &mut [], 0.0)?;
        opt.push(trace.value);
        if k == rounds {
            break;
        }
        let batch = bf_separate(&block, &trace.x);
        push_rows(&mut model, trace.cuts, &format!("oa{k}_"));
        push_rows(&mut model, batch.rows(), &format!("bf{k}_"));
        cuts.extend(batch.cuts);
    }
    let opt_inf = relax_value(&base_with_full_gamma(inst)?, &mut [], 0.0)?.value;
    let stats = GClosedStats::from_values(opt, opt_inf);
    let mut sep = BfSeparator::new(&model, inst);
    let report = solve_mip(&model, params, &mut [&mut sep])?;
    Ok(BfKResult { model, stats, cuts, report })
}

/// Relaxation point of one `(i, t)` block in `(y, γ, z)` space.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPoint {
    pub y: f64,
    pub gamma: f64,
    pub z: Vec<f64>,
}

/// At most one chain row and one tangent row violated at `p`.
pub fn conic_separate_point(attr: &ProductAttraction, p: &LiftedPoint) -> Vec<(LinIneq, CutTag)> {
    let (conc, conv) = envelope::separate_lifted(attr, p.y, p.gamma, &p.z, EMIT_TOL);
    conc.map(|c| (c, CutTag::ConcavePerm))
        .into_iter()
        .chain(conv.map(|c| (c, CutTag::Subgradient)))
        .collect()
}

/// Envelope cuts for every lazy row of `model` at `values`.
pub fn conic_separate(model: &Model, values: &[f64]) -> CutBatch {
    let mut out = CutBatch::default();
    for c in &model.convex {
        let tag = match c {
            ConvexRow::ExpPerspective { .. } => CutTag::Subgradient,
            ConvexRow::ConcaveEnvelope { .. } => CutTag::ConcavePerm,
            ConvexRow::Reciprocal { .. } => continue,
        };
        if let Some(r) = c.separate(values, EMIT_TOL) {
            out.cuts.push((r, tag));
        }
    }
    out
}

/// Starting cut families shared by every `(i, t)` block.
#[derive(Debug, Clone, PartialEq)]
pub struct Seeds {
    /// Permutations of `0..M` for chain rows.
    pub perms: Vec<Vec<usize>>,
    /// Points of `[0, 1]^M` for tangent rows.
    pub points: Vec<Vec<f64>>,
}

impl Seeds {
    /// Random permutations (2, 10, 20 for `M` = 4, 5, 6; one below, 20 above)
    /// and the binary points with squared norm in `{0, 1, 2, M}`.
    pub fn default_for(m: usize, seed: u64) -> Self {
        let count = match m {
            0..=3 => 1,
            4 => 2,
            5 => 10,
            _ => 20,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perms: Vec<Vec<usize>> = Vec::new();
        let distinct = (1..=m).product::<usize>().max(1);
        while perms.len() < count.min(distinct) {
            let mut p: Vec<usize> = (0..m).collect();
            p.shuffle(&mut rng);
            if !perms.contains(&p) {
                perms.push(p);
            }
        }
        let points = (0..1u32 << m)
            .filter(|mask| {
                let k = mask.count_ones() as usize;
                k <= 2 || k == m
            })
            .map(|mask| (0..m).map(|b| (mask >> b & 1) as f64).collect())
            .collect();
        Seeds { perms, points }
    }
}

#[derive(Debug, Clone)]
pub struct LargeMResult {
    /// Relaxation values, from the seeded model to the last round.
    pub relax_history: Vec<f64>,
    pub model: Model,
    pub report: SolveReport,
}

/// Conic model with every chain row and tangent row handled lazily.
pub fn lazy_conic(inst: &Instance) -> Result<Model> {
    let mut model = build_conic(inst)?;
    model.rows.retain(|r| !r.name.starts_with("chain_"));
    model.convex.clear();
    for t in 0..inst.horizon {
        for i in 0..inst.n_products {
            let (y, gamma, z) = lifted_vars(&model, inst, i, t);
            let attr = ProductAttraction::of(inst, i);
            model.convex.push(ConvexRow::ConcaveEnvelope { y, gamma, z: z.clone(), attr: attr.clone() });
            model.convex.push(ConvexRow::ExpPerspective { y, gamma, z, attr });
        }
    }
    Ok(model)
}

fn lifted_vars(model: &Model, inst: &Instance, i: usize, t: usize) -> (usize, usize, Vec<usize>) {
    (
        model.var(Key::Y { i, t }).expect("y"),
        model.var(Key::Gamma { i, t }).expect("gamma"),
        (0..inst.memory).map(|m| model.var(Key::Z { i, m, t }).expect("z")).collect(),
    )
}

/// Seeded relaxation, cut rounds until the value improves by less than `eps`
/// (at most `max_rounds`), then the integer solve with lazy envelope cuts.
pub fn large_m_driver(inst: &Instance, seeds: &Seeds, eps: f64, max_rounds: usize, params: &SolveParams) -> Result<LargeMResult> {
    if inst.memory == 0 {
        return Err(Error::InvalidArgument("the large-memory driver needs M >= 1".into()));
    }
    if seeds.perms.is_empty() && seeds.points.is_empty() {
        return Err(Error::InvalidArgument("seed families are empty".into()));
    }
    let m = inst.memory;
    if seeds.perms.iter().any(|p| p.len() != m) || seeds.points.iter().any(|w| w.len() != m) {
        return Err(Error::InvalidArgument(format!("seeds must have length M = {m}")));
    }
    let mut model = lazy_conic(inst)?;
    for t in 0..inst.horizon {
        for i in 0..inst.n_products {
            let (y, gamma, z) = lifted_vars(&model, inst, i, t);
            let attr = ProductAttraction::of(inst, i);
            for (k, s) in seeds.perms.iter().enumerate() {
                let c = envelope::concave_ineq(&attr, s)?;
                model.rows.push(lift_row(&format!("seedc_{i}_{t}_{k}"), &c, y, gamma, &z));
            }
            for (k, w) in seeds.points.iter().enumerate() {
                let c = envelope::subgradient_cut(&attr, w);
                model.rows.push(lift_row(&format!("seedg_{i}_{t}_{k}"), &c, y, gamma, &z));
            }
        }
    }
    let trace = relax_rounds(&model, &mut [], eps, max_rounds)?;
    push_rows(&mut model, trace.cuts, "rlx");
    let report = solve_mip(&model, params, &mut [])?;
    Ok(LargeMResult {
        relax_history: trace.history,
        model,
        report,
    })
}

/// Check a cut against a point with the bnb convex tolerance.
pub fn is_violated(row: &LinRow, x: &[f64]) -> bool {
    row.violation(x) > CONVEX_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ConstraintSpec;

    fn nonoverlap(n: usize, m: usize) -> Instance {
        let effect = (0..n).map(|i| vec![-0.3 - 0.1 * i as f64; m]).collect();
        Instance::new(
            (0..n).map(|i| 2.0 + i as f64).collect(),
            (0..n).map(|i| 0.2 * i as f64 - 0.3).collect(),
            effect,
            m + 1,
            ConstraintSpec { non_overlapping: true, ..Default::default() },
        )
        .unwrap()
    }

    #[test]
    fn hand_point_n2() {
        let inst = nonoverlap(2, 1);
        let model = build_mplus1_base(&inst).unwrap();
        let block = CharnesCooperBlock::of(&model, &inst);
        let mut x = vec![0.0; model.n_vars()];
        // x_0 = 1 at position 0 with γ far too small
        x[block.x[0][0]] = 1.0;
        x[block.rho[0]] = 0.6;
        x[block.gamma[0][0]] = 0.1;
        x[block.gamma[0][1]] = 0.2;
        x[block.rho[1]] = 1.0;
        let b = bf_separate(&block, &x);
        let u = &block.u;
        // A = {} (0.1 + 0.2 < 0.6), B = {0, 1}, C = {}: upper = 0.1 + (u0 + u1) 0.1
        let upper = 0.1 + (u[0] + u[1]) * 0.1;
        assert!(1.0 > upper);
        let hits: Vec<_> = b.cuts.iter().filter(|(r, _)| r.name == "bfup_0_0").collect();
        assert_eq!(hits.len(), 1);
        let (r, tag) = hits[0];
        assert_eq!(*tag, CutTag::BfUpper);
        assert!((r.violation(&x) - (1.0 - upper)).abs() < 1e-12);
    }

    #[test]
    fn satisfied_point_is_quiet() {
        let inst = nonoverlap(3, 1);
        let model = build_mplus1_base(&inst).unwrap();
        let block = CharnesCooperBlock::of(&model, &inst);
        // exact lifted integer point: {0} then {1, 2}
        let mut x = vec![0.0; model.n_vars()];
        for (t, set) in [vec![0usize], vec![1, 2]].iter().enumerate() {
            let rho = 1.0 / (1.0 + set.iter().map(|&j| block.u[j]).sum::<f64>());
            x[block.rho[t]] = rho;
            for &j in set {
                x[block.x[t][j]] = 1.0;
                x[block.gamma[t][j]] = rho;
            }
        }
        assert!(bf_separate(&block, &x).is_empty());
    }

    #[test]
    fn seed_sets() {
        let s = Seeds::default_for(4, 1);
        assert_eq!(s.perms.len(), 2);
        assert_eq!(s.points.len(), 1 + 4 + 6 + 1);
        let s = Seeds::default_for(2, 1);
        assert_eq!(s.points.len(), 4);
        assert_eq!(s.perms.len(), 1);
    }
}
