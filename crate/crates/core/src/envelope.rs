//! Envelope algebra for a single product's attraction function
//! `α(h) = exp(β⁰ + Σ_m β^m h_m)` over histories `h ∈ {0,1}^M`.
//!
//! All inequalities live in the lifted space `(y, γ, z_1..z_M)` where `γ`
//! plays the role of `ρ·x` and `z_m` of `ρ·x·x^{t-m}`. Memory indices are
//! 0-based here: `z[0]` is one period back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Instance;

/// Largest memory for which the explicit `M!` enumeration is offered.
pub const MAX_EXHAUSTIVE_M: usize = 6;

const DOMAIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductAttraction {
    pub base: f64,
    pub effects: Vec<f64>,
    /// Memory indices with strictly positive effect.
    pub positive_set: Vec<usize>,
}

impl ProductAttraction {
    pub fn new(base: f64, effects: Vec<f64>) -> Self {
        let positive_set = effects
            .iter()
            .enumerate()
            .filter(|(_, &b)| b > 0.0)
            .map(|(m, _)| m)
            .collect();
        ProductAttraction {
            base,
            effects,
            positive_set,
        }
    }

    pub fn of(inst: &Instance, i: usize) -> Self {
        Self::new(inst.base_utility[i], inst.effect[i].clone())
    }

    pub fn m(&self) -> usize {
        self.effects.len()
    }

    pub fn is_positive(&self, m: usize) -> bool {
        self.effects[m] > 0.0
    }

    /// `α` at a binary history.
    pub fn alpha(&self, h: &[u8]) -> f64 {
        let mut u = self.base;
        for (b, &x) in self.effects.iter().zip(h) {
            if x != 0 {
                u += b;
            }
        }
        u.exp()
    }

    /// `α` at a fractional point, i.e. `exp(β⁰ + β·w)`.
    pub fn alpha_frac(&self, w: &[f64]) -> f64 {
        (self.base + self.effects.iter().zip(w).map(|(b, x)| b * x).sum::<f64>()).exp()
    }

    /// Vertex with only the positive effects switched on.
    pub fn positive_indicator(&self) -> Vec<u8> {
        (0..self.m()).map(|m| self.is_positive(m) as u8).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
}

/// `coef_y·y + coef_gamma·γ + Σ coef_z[m]·z_m  (sense)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinIneq {
    pub coef_y: f64,
    pub coef_gamma: f64,
    pub coef_z: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinIneq {
    pub fn lhs(&self, y: f64, gamma: f64, z: &[f64]) -> f64 {
        self.coef_y * y + self.coef_gamma * gamma + self.coef_z.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Positive amount by which the point violates the row, else 0.
    pub fn violation(&self, y: f64, gamma: f64, z: &[f64]) -> f64 {
        let l = self.lhs(y, gamma, z);
        match self.sense {
            Sense::Le => (l - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - l).max(0.0),
        }
    }

    /// For rows of the form `y (sense) a·γ + b·z`, the value of `a·γ + b·z`.
    pub fn bound_on_y(&self, gamma: f64, z: &[f64]) -> f64 {
        debug_assert!(self.coef_y == 1.0 && self.rhs == 0.0);
        -(self.lhs(0.0, gamma, z))
    }

    pub fn is_finite(&self) -> bool {
        self.coef_y.is_finite()
            && self.coef_gamma.is_finite()
            && self.rhs.is_finite()
            && self.coef_z.iter().all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedChain {
    pub permutation: Vec<usize>,
    pub points: Vec<Vec<u8>>,
}

fn check_permutation(m: usize, sigma: &[usize]) -> Result<()> {
    let mut seen = vec![false; m];
    if sigma.len() != m {
        return Err(Error::InvalidArgument(format!("permutation has length {}, expected {m}", sigma.len())));
    }
    for &s in sigma {
        if s >= m || seen[s] {
            return Err(Error::InvalidArgument(format!("{sigma:?} is not a permutation of 0..{m}")));
        }
        seen[s] = true;
    }
    Ok(())
}

/// Chain from `χ^I` that flips one coordinate per step in the order `σ`:
/// coordinates outside `I` are switched on, those inside are switched off.
pub fn switched_nested(m: usize, positive_set: &[usize], sigma: &[usize]) -> Result<NestedChain> {
    check_permutation(m, sigma)?;
    let mut h = vec![0u8; m];
    for &k in positive_set {
        if k >= m {
            return Err(Error::IndexOutOfRange {
                what: "positive set index",
                index: k,
                limit: m,
            });
        }
        h[k] = 1;
    }
    let mut points = Vec::with_capacity(m + 1);
    points.push(h.clone());
    for &s in sigma {
        h[s] ^= 1;
        points.push(h.clone());
    }
    Ok(NestedChain {
        permutation: sigma.to_vec(),
        points,
    })
}

/// Coefficients `(c_γ, c_z)` with `RHS_σ = c_γ γ + c_z·z`.
fn concave_coeffs(p: &ProductAttraction, sigma: &[usize]) -> (f64, Vec<f64>) {
    let m = p.m();
    let mut h = p.positive_indicator();
    let mut prev = p.alpha(&h);
    let mut cg = prev;
    let mut cz = vec![0.0; m];
    for &s in sigma {
        h[s] ^= 1;
        let a = p.alpha(&h);
        let d = a - prev;
        if p.is_positive(s) {
            // z̃ = γ - z
            cg += d;
            cz[s] -= d;
        } else {
            cz[s] += d;
        }
        prev = a;
    }
    (cg, cz)
}

/// The upper-bounding row `y ≤ RHS_σ(γ, z)` written as `y - RHS_σ ≤ 0`.
pub fn concave_ineq(p: &ProductAttraction, sigma: &[usize]) -> Result<LinIneq> {
    check_permutation(p.m(), sigma)?;
    let (cg, cz) = concave_coeffs(p, sigma);
    Ok(LinIneq {
        coef_y: 1.0,
        coef_gamma: -cg,
        coef_z: cz.into_iter().map(|c| -c).collect(),
        sense: Sense::Le,
        rhs: 0.0,
    })
}

pub(crate) fn concave_rhs(p: &ProductAttraction, sigma: &[usize], gamma: f64, z: &[f64]) -> f64 {
    let (cg, cz) = concave_coeffs(p, sigma);
    cg * gamma + cz.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
}

fn check_domain(gamma: f64, z: &[f64]) -> Result<()> {
    if gamma < -DOMAIN_TOL {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} is negative")));
    }
    for (m, &v) in z.iter().enumerate() {
        if v < -DOMAIN_TOL || v > gamma + DOMAIN_TOL {
            return Err(Error::InvalidArgument(format!("z[{m}] = {v} outside [0, {gamma}]")));
        }
    }
    Ok(())
}

/// All permutations of `0..m` in lexicographic order.
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..m).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(k) = (0..m.saturating_sub(1)).rev().find(|&k| cur[k] < cur[k + 1]) else {
            break;
        };
        let l = (k + 1..m).rev().find(|&l| cur[k] < cur[l]).unwrap();
        cur.swap(k, l);
        cur[k + 1..].reverse();
    }
    out
}

/// Perspective of the concave envelope, as the minimum over all `M!` chain rows.
pub fn concave_env_value(p: &ProductAttraction, gamma: f64, z: &[f64]) -> Result<f64> {
    let m = p.m();
    if m > MAX_EXHAUSTIVE_M {
        return Err(Error::SizeGuard(format!("memory {m} exceeds {MAX_EXHAUSTIVE_M} for exhaustive envelope")));
    }
    if z.len() != m {
        return Err(Error::InvalidArgument(format!("z has length {}, expected {m}", z.len())));
    }
    check_domain(gamma, z)?;
    Ok(permutations(m)
        .iter()
        .map(|s| concave_rhs(p, s, gamma, z))
        .fold(f64::INFINITY, f64::min))
}

/// Permutation whose chain row has the smallest right-hand side at `(γ, z)`.
pub fn most_violated_permutation(p: &ProductAttraction, gamma: f64, z: &[f64]) -> Vec<usize> {
    let g: Vec<f64> = (0..p.m())
        .map(|m| if p.is_positive(m) { gamma - z[m] } else { z[m] })
        .collect();
    let mut sigma: Vec<usize> = (0..p.m()).collect();
    // stable: equal keys keep the smaller index first
    sigma.sort_by(|&a, &b| g[b].partial_cmp(&g[a]).unwrap_or(std::cmp::Ordering::Equal));
    sigma
}

fn ge_row(cg: f64, cz: Vec<f64>) -> LinIneq {
    // y ≥ cg γ + cz·z  ⇔  y - cg γ - cz·z ≥ 0
    LinIneq {
        coef_y: 1.0,
        coef_gamma: -cg,
        coef_z: cz.into_iter().map(|c| -c).collect(),
        sense: Sense::Ge,
        rhs: 0.0,
    }
}

/// Linear description of the perspectified convex envelope for `M ≤ 2`.
///
/// `M = 0` yields the single row `y ≥ α γ`.
pub fn convex_env_ineqs_small_m(p: &ProductAttraction) -> Result<Vec<LinIneq>> {
    match p.m() {
        0 => Ok(vec![ge_row(p.alpha(&[]), vec![])]),
        1 => {
            let a0 = p.alpha(&[0]);
            let a1 = p.alpha(&[1]);
            Ok(vec![ge_row(a0, vec![a1 - a0])])
        }
        2 => {
            let a00 = p.alpha(&[0, 0]);
            let a10 = p.alpha(&[1, 0]);
            let a01 = p.alpha(&[0, 1]);
            let a11 = p.alpha(&[1, 1]);
            if p.is_positive(0) == p.is_positive(1) {
                Ok(vec![
                    // a00(γ - z1 - z2) + a10 z1 + a01 z2
                    ge_row(a00, vec![a10 - a00, a01 - a00]),
                    // a10(γ - z2) + a01(γ - z1) + a11(z1 + z2 - γ)
                    ge_row(a10 + a01 - a11, vec![a11 - a01, a11 - a10]),
                ])
            } else {
                Ok(vec![
                    // a00(γ - z1) + a10(z1 - z2) + a11 z2
                    ge_row(a00, vec![a10 - a00, a11 - a10]),
                    // a00(γ - z2) + a01(z2 - z1) + a11 z1
                    ge_row(a00, vec![a11 - a01, a01 - a00]),
                ])
            }
        }
        m => Err(Error::Unsupported(format!("closed-form convex envelope needs M <= 2, got {m}"))),
    }
}

/// `γ exp(β⁰ + β·z/γ)`, zero at the origin.
pub fn perspective_value(p: &ProductAttraction, gamma: f64, z: &[f64]) -> Result<f64> {
    if gamma < 0.0 {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} is negative")));
    }
    if gamma == 0.0 {
        if z.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument("perspective undefined at gamma = 0 with z != 0".into()));
        }
        return Ok(0.0);
    }
    let w: Vec<f64> = z.iter().map(|v| v / gamma).collect();
    Ok(gamma * p.alpha_frac(&w))
}

/// Tangent of the perspective along the ray through `(1, w)`:
/// `y ≥ γ α(w) + Σ_m (z_m - γ w_m) β^m α(w)`.
pub fn subgradient_cut(p: &ProductAttraction, w: &[f64]) -> LinIneq {
    let a = p.alpha_frac(w);
    let cz: Vec<f64> = p.effects.iter().map(|b| b * a).collect();
    let cg = a - p.effects.iter().zip(w).map(|(b, x)| b * x * a).sum::<f64>();
    ge_row(cg, cz)
}

/// Separation at a lifted point: the most violated chain row if `y` lies above
/// the concave envelope, and the tangent at `w = z/γ` if `y` lies below the
/// perspective. Points with `γ ≤ 1e-12` are skipped. `z` is clamped into
/// `[0, γ]` first.
pub fn separate_lifted(p: &ProductAttraction, y: f64, gamma: f64, z: &[f64], tol: f64) -> (Option<LinIneq>, Option<LinIneq>) {
    if gamma <= 1e-12 {
        return (None, None);
    }
    let zc: Vec<f64> = z.iter().map(|&v| v.clamp(0.0, gamma)).collect();
    let sigma = most_violated_permutation(p, gamma, &zc);
    let conc = concave_ineq(p, &sigma).expect("sorted permutation");
    let concave = (conc.violation(y, gamma, z) > tol).then_some(conc);
    let w: Vec<f64> = zc.iter().map(|v| (v / gamma).clamp(0.0, 1.0)).collect();
    let cut = subgradient_cut(p, &w);
    let convex = (cut.violation(y, gamma, z) > tol).then_some(cut);
    (concave, convex)
}
