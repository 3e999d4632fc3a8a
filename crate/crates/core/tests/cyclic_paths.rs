//! Cyclic solvers against the assortment graph.

use hap::bnb::SolveParams;
use hap::cyclic::{karp_policy, karp_policy_nonoverlap, solve_l_cyclic, solve_mplus1_nonoverlap};
use hap::problem::{generate_instance, plan_revenue, ConstraintSpec, GenConfig};
use hap::Instance;

fn table_instance(u3: f64) -> Instance {
    Instance::new(
        vec![6.0, 16.0, 17.0],
        vec![1.3, -0.6, u3],
        vec![vec![-0.5], vec![-0.8], vec![-0.9]],
        3,
        ConstraintSpec::default(),
    )
    .unwrap()
}

#[test]
fn table_flip() {
    let p = SolveParams::exact();
    let low = table_instance(0.2);
    let (_, v2, _) = solve_l_cyclic(&low, 2, &p).unwrap();
    let (_, v3, _) = solve_l_cyclic(&low, 3, &p).unwrap();
    assert!((v2 - 7.69009457).abs() < 1e-6, "{v2}");
    assert!((v3 - 7.68287281).abs() < 1e-6, "{v3}");
    let high = table_instance(0.3);
    let (_, w2, _) = solve_l_cyclic(&high, 2, &p).unwrap();
    let (_, w3, _) = solve_l_cyclic(&high, 3, &p).unwrap();
    assert!((w2 - 7.83371262).abs() < 1e-6, "{w2}");
    assert!((w3 - 7.89352616).abs() < 1e-6, "{w3}");
    // the graph optimum dominates every fixed length
    for inst in [&low, &high] {
        let k = karp_policy(inst).unwrap();
        for l in 1..=4 {
            let (plan, v, _) = solve_l_cyclic(inst, l, &p).unwrap();
            assert!((plan_revenue(inst, &plan).unwrap() - v).abs() < 1e-6);
            assert!(k.cycle.mean >= v - 1e-7, "L={l}: {v} > {}", k.cycle.mean);
        }
        let (_, v, _) = solve_l_cyclic(inst, k.cycle.len, &p).unwrap();
        assert!((v - k.cycle.mean).abs() < 1e-6);
    }
}

#[test]
fn mplus1_matches_graph() {
    let p = SolveParams::exact();
    for seed in 0..12u64 {
        let n = 2 + (seed % 2) as usize;
        let cfg = GenConfig::new(n, 2, 1)
            .theta(0.3)
            .constraints(ConstraintSpec { non_overlapping: true, ..Default::default() });
        let inst = generate_instance(&cfg, seed).unwrap();
        let graph = karp_policy_nonoverlap(&inst).unwrap().cycle.mean;
        let (pb, base, _) = solve_mplus1_nonoverlap(&inst, false, 0, &p).unwrap();
        let (pf, bf, _) = solve_mplus1_nonoverlap(&inst, true, 1, &p).unwrap();
        assert!((base - graph).abs() < 1e-9, "seed {seed}: base {base} graph {graph}");
        assert!((bf - base).abs() < 1e-6, "seed {seed}: bf {bf} base {base}");
        assert!((plan_revenue(&inst, &pb).unwrap() - base).abs() < 1e-9);
        assert!((plan_revenue(&inst, &pf).unwrap() - bf).abs() < 1e-6);
        let mut best = f64::NEG_INFINITY;
        for l in 2..=4 {
            best = best.max(solve_l_cyclic(&inst, l, &p).unwrap().1);
        }
        assert!((best - base).abs() < 1e-6, "seed {seed}: cyclic sweep {best} vs {base}");
    }
}

#[test]
fn symmetric_pair_alternates() {
    let inst = Instance::new(
        vec![5.0, 5.0],
        vec![0.0, 0.0],
        vec![vec![-1.0], vec![-1.0]],
        2,
        ConstraintSpec { non_overlapping: true, ..Default::default() },
    )
    .unwrap();
    let (plan, v, _) = solve_mplus1_nonoverlap(&inst, false, 0, &SolveParams::exact()).unwrap();
    assert!((v - 2.5).abs() < 1e-9);
    assert_eq!(plan.offers.iter().map(|r| r.iter().sum::<u8>()).collect::<Vec<_>>(), vec![1, 1]);
    assert!(solve_mplus1_nonoverlap(&Instance { memory: 2, effect: vec![vec![-1.0; 2]; 2], ..inst }, false, 0, &SolveParams::exact()).is_err());
}
