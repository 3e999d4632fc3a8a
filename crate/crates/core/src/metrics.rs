//! Gap and variety metrics reported by the benchmark.

use crate::error::{Error, Result};
use crate::problem::Plan;

/// `Σ (h_i / H)²` where `h_i` counts offers of product `i` and `H = Σ h_i`.
pub fn hhi(plan: &Plan) -> Result<f64> {
    let n = plan.offers.first().map_or(0, |r| r.len());
    let counts: Vec<usize> = (0..n)
        .map(|i| plan.offers.iter().filter(|row| row[i] != 0).count())
        .collect();
    let h: usize = counts.iter().sum();
    if h == 0 {
        return Err(Error::InvalidArgument("HHI of a plan with no offers".into()));
    }
    let h = h as f64;
    Ok(counts.iter().map(|&c| (c as f64 / h).powi(2)).sum())
}

fn pct(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        100.0 * num / den
    }
}

/// End gap `100 (R_U - R_IP) / R_IP`.
pub fn g_end(r_u: f64, r_ip: f64) -> f64 {
    pct(r_u - r_ip, r_ip)
}

/// Root gap `100 (R_Rlx - R_IP) / R_IP`.
pub fn g_root(r_rlx: f64, r_ip: f64) -> f64 {
    pct(r_rlx - r_ip, r_ip)
}

/// Revenue lost by a heuristic relative to the exact optimum, in percent.
pub fn heuristic_gap(r_env: f64, r_heur: f64) -> f64 {
    pct(r_env - r_heur, r_env)
}
