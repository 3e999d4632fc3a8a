//! Problem data, the history-dependent MNL choice model, feasibility checks,
//! random instance generation and JSON persistence.
//!
//! Products and periods are 0-based throughout the library. A non-cyclic plan
//! sees an all-zero history before its first period; a cyclic plan of length
//! `L` wraps, so period `t` remembers period `(t - m) mod L`.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cross-product and cross-period side constraints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    /// Max products per period.
    pub cardinality_cap: Option<usize>,
    /// Max periods a product may be offered over the horizon (or one cycle).
    pub offer_cap: Option<usize>,
    /// Each product at most once in any window of `M + 1` consecutive periods.
    pub non_overlapping: bool,
}

impl ConstraintSpec {
    pub fn is_empty(&self) -> bool {
        self.cardinality_cap.is_none() && self.offer_cap.is_none() && !self.non_overlapping
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub n_products: usize,
    pub horizon: usize,
    pub memory: usize,
    pub revenue: Vec<f64>,
    pub base_utility: Vec<f64>,
    /// `effect[i][m - 1]` is the utility shift of product `i` offered `m` periods ago.
    pub effect: Vec<Vec<f64>>,
    pub constraints: ConstraintSpec,
}

impl Instance {
    /// Validating constructor.
    pub fn new(
        revenue: Vec<f64>,
        base_utility: Vec<f64>,
        effect: Vec<Vec<f64>>,
        horizon: usize,
        constraints: ConstraintSpec,
    ) -> Result<Self> {
        let n = revenue.len();
        let memory = effect.first().map_or(0, Vec::len);
        let inst = Instance {
            n_products: n,
            horizon,
            memory,
            revenue,
            base_utility,
            effect,
            constraints,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Instance with `M = 0` (plain MNL in every period).
    pub fn static_mnl(revenue: Vec<f64>, base_utility: Vec<f64>, horizon: usize) -> Result<Self> {
        let n = revenue.len();
        let mut inst = Instance::new(revenue, base_utility, vec![Vec::new(); n], horizon, ConstraintSpec::default())?;
        inst.memory = 0;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_products;
        if n == 0 {
            return Err(Error::InvalidInstance("n_products must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidInstance("horizon must be positive".into()));
        }
        if self.revenue.len() != n {
            return Err(Error::InvalidInstance(format!(
                "revenue has length {}, expected {n}",
                self.revenue.len()
            )));
        }
        if self.base_utility.len() != n {
            return Err(Error::InvalidInstance(format!(
                "base_utility has length {}, expected {n}",
                self.base_utility.len()
            )));
        }
        if self.effect.len() != n {
            return Err(Error::InvalidInstance(format!("effect has {} rows, expected {n}", self.effect.len())));
        }
        for (i, row) in self.effect.iter().enumerate() {
            if row.len() != self.memory {
                return Err(Error::InvalidInstance(format!(
                    "effect row {i} has length {}, expected {}",
                    row.len(),
                    self.memory
                )));
            }
            if row.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidInstance(format!("effect row {i} is not finite")));
            }
        }
        for (i, &r) in self.revenue.iter().enumerate() {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::InvalidInstance(format!("revenue[{i}] = {r} must be finite and >= 0")));
            }
        }
        if self.base_utility.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInstance("base_utility must be finite".into()));
        }
        if self.constraints.cardinality_cap == Some(0) || self.constraints.offer_cap == Some(0) {
            return Err(Error::InvalidInstance("caps must be positive when present".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n_products
    }

    pub fn t(&self) -> usize {
        self.horizon
    }

    pub fn m(&self) -> usize {
        self.memory
    }

    /// Same data with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Instance {
        Instance { horizon, ..self.clone() }
    }

    /// Index set `I_i` of strictly positive effects (0-based memory indices).
    pub fn positive_set(&self, i: usize) -> Vec<usize> {
        self.effect[i]
            .iter()
            .enumerate()
            .filter(|(_, &b)| b > 0.0)
            .map(|(m, _)| m)
            .collect()
    }

    /// Every effect coefficient is `>= 0`.
    pub fn all_effects_nonnegative(&self) -> bool {
        self.effect.iter().flatten().all(|&b| b >= 0.0)
    }
}

/// Binary offer matrix, `offers[t][i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Plan {
    pub offers: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_cycle: bool,
}

impl Plan {
    pub fn empty(periods: usize, n: usize) -> Self {
        Plan {
            offers: vec![vec![0; n]; periods],
            is_cycle: false,
        }
    }

    pub fn cycle(offers: Vec<Vec<u8>>) -> Self {
        Plan { offers, is_cycle: true }
    }

    pub fn from_sets(periods: &[Vec<usize>], n: usize, is_cycle: bool) -> Self {
        let offers = periods
            .iter()
            .map(|s| {
                let mut row = vec![0u8; n];
                for &i in s {
                    row[i] = 1;
                }
                row
            })
            .collect();
        Plan { offers, is_cycle }
    }

    pub fn periods(&self) -> usize {
        self.offers.len()
    }

    pub fn offered(&self, t: usize, i: usize) -> bool {
        self.offers[t][i] != 0
    }

    /// Offer indicator of product `i`, `m` periods before `t` (`m >= 1`).
    pub fn past(&self, i: usize, t: usize, m: usize) -> u8 {
        if self.is_cycle {
            let l = self.offers.len();
            self.offers[(t + l * m - m) % l][i]
        } else if t >= m {
            self.offers[t - m][i]
        } else {
            0
        }
    }

    /// History vector `(x_i^{t-1}, .., x_i^{t-M})`.
    pub fn history(&self, i: usize, t: usize, memory: usize) -> Vec<u8> {
        (1..=memory).map(|m| self.past(i, t, m)).collect()
    }

    pub fn total_offers(&self) -> usize {
        self.offers.iter().flatten().filter(|&&x| x != 0).count()
    }

    fn check_shape(&self, n: usize, expected_periods: Option<usize>) -> Result<()> {
        if let Some(tp) = expected_periods {
            if self.offers.len() != tp {
                return Err(Error::InvalidArgument(format!(
                    "plan has {} periods, expected {tp}",
                    self.offers.len()
                )));
            }
        }
        if self.offers.is_empty() {
            return Err(Error::InvalidArgument("plan has no periods".into()));
        }
        for (t, row) in self.offers.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "plan period {t} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|&x| x > 1) {
                return Err(Error::InvalidArgument(format!("plan period {t} has a non-binary entry")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, row) in self.offers.iter().enumerate() {
            let set: Vec<String> = row
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0)
                .map(|(i, _)| i.to_string())
                .collect();
            if t > 0 {
                write!(f, " ")?;
            }
            write!(f, "{{{}}}", set.join(","))?;
        }
        if self.is_cycle {
            write!(f, " (cycle)")?;
        }
        Ok(())
    }
}

/// Choice probabilities in one period.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceOutcome {
    pub no_purchase: f64,
    pub probs: Vec<f64>,
    pub revenue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `exp(β_i^0 + Σ_m β_i^m h_m)`.
pub fn attraction(inst: &Instance, product: usize, history: &[u8]) -> Result<f64> {
    if product >= inst.n_products {
        return Err(Error::IndexOutOfRange {
            what: "product",
            index: product,
            limit: inst.n_products,
        });
    }
    if history.len() != inst.memory {
        return Err(Error::InvalidArgument(format!(
            "history has length {}, expected {}",
            history.len(),
            inst.memory
        )));
    }
    if history.iter().any(|&h| h > 1) {
        return Err(Error::InvalidArgument("history entries must be 0 or 1".into()));
    }
    Ok(attraction_unchecked(inst, product, history))
}

pub(crate) fn attraction_unchecked(inst: &Instance, i: usize, history: &[u8]) -> f64 {
    let mut u = inst.base_utility[i];
    for (b, &h) in inst.effect[i].iter().zip(history) {
        if h != 0 {
            u += b;
        }
    }
    u.exp()
}

/// Single-period MNL outcome for offer vector `offer` and per-product attractions.
pub fn mnl_outcome(revenue: &[f64], offer: &[u8], attr: &[f64]) -> ChoiceOutcome {
    let mut denom = 1.0;
    for (x, a) in offer.iter().zip(attr) {
        if *x != 0 {
            denom += a;
        }
    }
    let rho = 1.0 / denom;
    let probs: Vec<f64> = offer
        .iter()
        .zip(attr)
        .map(|(x, a)| if *x != 0 { a * rho } else { 0.0 })
        .collect();
    let revenue = probs.iter().zip(revenue).map(|(p, r)| p * r).sum();
    ChoiceOutcome {
        no_purchase: rho,
        probs,
        revenue,
    }
}

/// Choice outcome in period `t` (0-based).
pub fn choice_outcome(inst: &Instance, plan: &Plan, t: usize) -> Result<ChoiceOutcome> {
    plan.check_shape(inst.n_products, None)?;
    if t >= plan.periods() {
        return Err(Error::IndexOutOfRange {
            what: "period",
            index: t,
            limit: plan.periods(),
        });
    }
    Ok(choice_outcome_unchecked(inst, plan, t))
}

pub(crate) fn choice_outcome_unchecked(inst: &Instance, plan: &Plan, t: usize) -> ChoiceOutcome {
    let attr: Vec<f64> = (0..inst.n_products)
        .map(|i| attraction_unchecked(inst, i, &plan.history(i, t, inst.memory)))
        .collect();
    mnl_outcome(&inst.revenue, &plan.offers[t], &attr)
}

/// Average per-period revenue. Non-cyclic plans must span the horizon; cyclic
/// plans are averaged over their own length.
pub fn plan_revenue(inst: &Instance, plan: &Plan) -> Result<f64> {
    let expected = if plan.is_cycle { None } else { Some(inst.horizon) };
    plan.check_shape(inst.n_products, expected)?;
    let tp = plan.periods();
    let total: f64 = (0..tp).map(|t| choice_outcome_unchecked(inst, plan, t).revenue).sum();
    Ok(total / tp as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Cardinality { period: usize, count: usize, cap: usize },
    OfferCap { product: usize, count: usize, cap: usize },
    Overlap { product: usize, start: usize },
    Shape(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cardinality { period, count, cap } => {
                write!(f, "period {period} offers {count} products (cap {cap})")
            }
            Violation::OfferCap { product, count, cap } => {
                write!(f, "product {product} offered {count} times (cap {cap})")
            }
            Violation::Overlap { product, start } => {
                write!(f, "product {product} overlaps in window starting at period {start}")
            }
            Violation::Shape(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn is_feasible(inst: &Instance, plan: &Plan) -> Feasibility {
    let mut violations = Vec::new();
    let expected = if plan.is_cycle { None } else { Some(inst.horizon) };
    if let Err(e) = plan.check_shape(inst.n_products, expected) {
        violations.push(Violation::Shape(e.to_string()));
        return Feasibility { violations };
    }
    let c = &inst.constraints;
    let tp = plan.periods();
    if let Some(cap) = c.cardinality_cap {
        for (t, row) in plan.offers.iter().enumerate() {
            let count = row.iter().filter(|&&x| x != 0).count();
            if count > cap {
                violations.push(Violation::Cardinality { period: t, count, cap });
            }
        }
    }
    if let Some(cap) = c.offer_cap {
        for i in 0..inst.n_products {
            let count = (0..tp).filter(|&t| plan.offered(t, i)).count();
            if count > cap {
                violations.push(Violation::OfferCap { product: i, count, cap });
            }
        }
    }
    if c.non_overlapping {
        let w = inst.memory + 1;
        for i in 0..inst.n_products {
            if plan.is_cycle {
                for start in 0..tp {
                    let s: usize = (0..w).map(|k| plan.offers[(start + k) % tp][i] as usize).sum();
                    if s > 1 {
                        violations.push(Violation::Overlap { product: i, start });
                    }
                }
            } else if tp >= 2 {
                // windows clipped at the horizon end; a window of length < 2 never violates
                for start in 0..tp - 1 {
                    let end = (start + w).min(tp);
                    let s: usize = (start..end).map(|t| plan.offers[t][i] as usize).sum();
                    if s > 1 {
                        violations.push(Violation::Overlap { product: i, start });
                    }
                }
            }
        }
    }
    Feasibility { violations }
}

/// Bounds on the no-purchase probability in any period.
pub fn rho_bounds(inst: &Instance) -> RhoBounds {
    let mut denom = 1.0;
    for i in 0..inst.n_products {
        let u: f64 = inst.base_utility[i] + inst.effect[i].iter().filter(|&&b| b > 0.0).sum::<f64>();
        denom += u.exp();
    }
    RhoBounds {
        lower: 1.0 / denom,
        upper: 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Satiation {
    /// Effects drawn from `U[-1, 0]`.
    Weak,
    /// Effects drawn from `U[-2, -1]`.
    Strong,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n: usize,
    pub t: usize,
    pub m: usize,
    /// Probability that a product has addiction effects, drawn from `U[0, 1]`.
    pub theta: f64,
    pub satiation: Satiation,
    pub revenue_range: (f64, f64),
    pub utility_range: (f64, f64),
    pub constraints: ConstraintSpec,
}

impl GenConfig {
    pub fn new(n: usize, t: usize, m: usize) -> Self {
        GenConfig {
            n,
            t,
            m,
            theta: 0.0,
            satiation: Satiation::Strong,
            revenue_range: (1.0, 10.0),
            utility_range: (-1.0, 1.0),
            constraints: ConstraintSpec::default(),
        }
    }

    pub fn theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn satiation(mut self, s: Satiation) -> Self {
        self.satiation = s;
        self
    }

    pub fn constraints(mut self, c: ConstraintSpec) -> Self {
        self.constraints = c;
        self
    }
}

/// Seeded random instance.
///
/// The generator is ChaCha8 seeded through `seed_from_u64`. For each product in
/// index order it draws, in this order: revenue, base utility, one uniform coin
/// on `[0, 1)`, then the `M` effects. The product is addictive iff the coin is
/// below `theta`. All draws are `gen_range` over half-open ranges.
pub fn generate_instance(cfg: &GenConfig, seed: u64) -> Result<Instance> {
    let bad = |s: &str| Err(Error::InvalidArgument(s.to_string()));
    if !(0.0..=1.0).contains(&cfg.theta) {
        return bad("theta must lie in [0, 1]");
    }
    let (rl, ru) = cfg.revenue_range;
    if !(rl.is_finite() && ru.is_finite() && 0.0 <= rl && rl < ru) {
        return bad("revenue range must satisfy 0 <= lo < hi");
    }
    let (ul, uu) = cfg.utility_range;
    if !(ul.is_finite() && uu.is_finite() && ul < uu) {
        return bad("utility range must satisfy lo < hi");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut revenue = Vec::with_capacity(cfg.n);
    let mut base = Vec::with_capacity(cfg.n);
    let mut effect = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        revenue.push(rng.gen_range(rl..ru));
        base.push(rng.gen_range(ul..uu));
        let coin: f64 = rng.gen();
        let range = if coin < cfg.theta {
            0.0..1.0
        } else {
            match cfg.satiation {
                Satiation::Weak => -1.0..0.0,
                Satiation::Strong => -2.0..-1.0,
            }
        };
        effect.push((0..cfg.m).map(|_| rng.gen_range(range.clone())).collect());
    }
    let inst = Instance {
        n_products: cfg.n,
        horizon: cfg.t,
        memory: cfg.m,
        revenue,
        base_utility: base,
        effect,
        constraints: cfg.constraints.clone(),
    };
    inst.validate()?;
    Ok(inst)
}

pub fn instance_from_json(text: &str) -> Result<Instance> {
    let inst: Instance = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    inst.validate().map_err(|e| Error::Schema(e.to_string()))?;
    Ok(inst)
}

pub fn instance_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(inst).expect("instance serializes")
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    instance_from_json(&text)
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, instance_to_json(inst) + "\n")?;
    Ok(())
}

pub fn plan_to_json(plan: &Plan) -> String {
    serde_json::to_string(plan).expect("plan serializes")
}

pub fn plan_from_json(text: &str) -> Result<Plan> {
    serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(r: f64, b0: f64, eff: Vec<f64>, t: usize) -> Instance {
        Instance::new(vec![r], vec![b0], vec![eff], t, ConstraintSpec::default()).unwrap()
    }

    #[test]
    fn attraction_examples() {
        let inst = one(1.0, 0.0, vec![-(2f64.ln())], 1);
        assert!((attraction(&inst, 0, &[1]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(attraction(&inst, 0, &[0]).unwrap(), 1.0);
        let p1 = one(6.0, 1.3, vec![-0.5], 1);
        assert!((attraction(&p1, 0, &[1]).unwrap() - 0.8f64.exp()).abs() < 1e-14);
        assert!(matches!(attraction(&inst, 3, &[0]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn choice_examples() {
        let inst = one(4.0, 0.0, vec![], 1);
        let plan = Plan::from_sets(&[vec![0]], 1, false);
        let c = choice_outcome(&inst, &plan, 0).unwrap();
        assert!((c.no_purchase - 0.5).abs() < 1e-15 && (c.probs[0] - 0.5).abs() < 1e-15);
        assert!((plan_revenue(&inst, &plan).unwrap() - 2.0).abs() < 1e-15);

        let empty = Plan::empty(1, 1);
        let c = choice_outcome(&inst, &empty, 0).unwrap();
        assert_eq!((c.no_purchase, c.probs[0], c.revenue), (1.0, 0.0, 0.0));

        let inst = one(1.0, 0.0, vec![-(2f64.ln())], 2);
        let plan = Plan::from_sets(&[vec![0], vec![0]], 1, false);
        let c = choice_outcome(&inst, &plan, 1).unwrap();
        assert!((c.no_purchase - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.probs[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cycle_history_wraps() {
        let inst = one(1.0, 0.0, vec![-1.0], 2);
        let plan = Plan::cycle(vec![vec![1], vec![0]]);
        // period 0 remembers period 1 (empty), period 1 remembers period 0
        assert_eq!(plan.history(0, 0, 1), vec![0]);
        assert_eq!(plan.history(0, 1, 1), vec![1]);
        let v = plan_revenue(&inst, &plan).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn feasibility_examples() {
        let mut inst = Instance::static_mnl(vec![1.0, 1.0], vec![0.0, 0.0], 1).unwrap();
        inst.constraints.cardinality_cap = Some(1);
        let plan = Plan::from_sets(&[vec![0, 1]], 2, false);
        assert_eq!(is_feasible(&inst, &plan).violations.len(), 1);
        inst.constraints = ConstraintSpec::default();
        assert!(is_feasible(&inst, &plan).ok());

        let mut inst = one(1.0, 0.0, vec![-1.0], 2);
        inst.constraints.non_overlapping = true;
        let plan = Plan::from_sets(&[vec![0], vec![0]], 1, false);
        assert!(!is_feasible(&inst, &plan).ok());
        let plan = Plan::from_sets(&[vec![0], vec![]], 1, false);
        assert!(is_feasible(&inst, &plan).ok());
        // as a 2-cycle the same plan is fine, a 1-cycle offering is not
        assert!(is_feasible(&inst, &Plan::cycle(vec![vec![1], vec![0]])).ok());
        assert!(!is_feasible(&inst, &Plan::cycle(vec![vec![1]])).ok());
    }

    #[test]
    fn rho_bound_examples() {
        let inst = Instance::new(
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![vec![-1.0], vec![0.0]],
            1,
            ConstraintSpec::default(),
        )
        .unwrap();
        let b = rho_bounds(&inst);
        assert!((b.lower - 1.0 / 3.0).abs() < 1e-15 && b.upper == 1.0);
        let inst = one(1.0, 0.0, vec![3f64.ln()], 1);
        assert!((rho_bounds(&inst).lower - 0.25).abs() < 1e-15);
    }

    #[test]
    fn construction_rejects_degenerate() {
        assert!(Instance::static_mnl(vec![], vec![], 1).is_err());
        assert!(Instance::static_mnl(vec![1.0], vec![0.0], 0).is_err());
        assert!(Instance::static_mnl(vec![-1.0], vec![0.0], 1).is_err());
    }

    #[test]
    fn generator_regimes() {
        let a = generate_instance(&GenConfig::new(5, 3, 2), 7).unwrap();
        let b = generate_instance(&GenConfig::new(5, 3, 2), 7).unwrap();
        assert_eq!(a, b);
        assert!(a.effect.iter().flatten().all(|&x| (-2.0..-1.0).contains(&x)));
        let c = generate_instance(&GenConfig::new(5, 3, 2).theta(1.0), 7).unwrap();
        assert!(c.all_effects_nonnegative());
        let w = generate_instance(&GenConfig::new(5, 3, 2).satiation(Satiation::Weak), 7).unwrap();
        assert!(w.effect.iter().flatten().all(|&x| (-1.0..=0.0).contains(&x)));
        assert!(generate_instance(&GenConfig::new(5, 3, 2).theta(1.5), 7).is_err());
    }

    #[test]
    fn json_schema_errors() {
        let inst = generate_instance(&GenConfig::new(2, 2, 1), 1).unwrap();
        let text = instance_to_json(&inst);
        assert_eq!(instance_from_json(&text).unwrap(), inst);

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v.as_object_mut().unwrap().remove("effect");
        assert!(matches!(instance_from_json(&v.to_string()), Err(Error::Schema(_))));

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["effect"][0] = serde_json::json!([0.1, 0.2]);
        assert!(matches!(instance_from_json(&v.to_string()), Err(Error::Schema(_))));
    }

    #[test]
    fn plan_json_shape() {
        let p = Plan::from_sets(&[vec![1], vec![]], 2, false);
        assert_eq!(plan_to_json(&p), r#"{"offers":[[0,1],[0,0]]}"#);
        let c = Plan::cycle(p.offers.clone());
        assert_eq!(plan_to_json(&c), r#"{"offers":[[0,1],[0,0]],"is_cycle":true}"#);
        assert_eq!(plan_from_json(&plan_to_json(&c)).unwrap(), c);
    }
}
