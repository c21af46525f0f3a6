mod common;

use common::{aipw, backdoor_sample, front_door_formula, front_door_law, random_law, random_query, sample_table, saturated, shapes, Law};
use primalfix::estimators::{
    brute_force_psi, eif, estimate, estimate_many, one_step, plug_in_value, EstimatorConfig, EstimatorKind,
    FoldPlan, TmleConfig,
};
use primalfix::graph::CausalPartition;
use primalfix::learn::Basis;
use primalfix::nuisance::{NuisanceConfig, NuisanceFitter, Strategy};
use primalfix::simulation::Dgp;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn plug_in_with_exact_nuisances_equals_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let (g, p) = random_query(&mut rng, 5);
        let table = random_law(&mut rng, &g);
        let data = table.to_dataset().unwrap();
        for a0 in [0.0, 1.0] {
            let cfg = saturated(Strategy::Bayes);
            let q = NuisanceFitter::new(&data, &p, &cfg, None).unwrap().fit(a0).unwrap();
            let fitted = plug_in_value(&data, &p, &q).unwrap();
            let exact = brute_force_psi(&table, &p, a0).unwrap();
            assert!((fitted - exact).abs() < 1e-10, "{fitted} vs {exact} on {:?}", g.di_edges());
        }
    }
}

#[test]
fn influence_function_has_mean_zero_under_the_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let (g, p) = random_query(&mut rng, 5);
        let table = random_law(&mut rng, &g);
        let data = table.to_dataset().unwrap();
        let law = Law { table: &table };
        for a0 in [0.0, 1.0] {
            let psi = brute_force_psi(&table, &p, a0).unwrap();
            for s in Strategy::ALL {
                let q = law.nuisances(&p, a0, s);
                assert!((plug_in_value(&data, &p, &q).unwrap() - psi).abs() < 1e-12);
                let phi = eif(&data, &p, &q, psi).unwrap();
                let mean = data.mean(&phi.total);
                assert!(mean.abs() < 1e-12, "{s}: P Φ = {mean:e}");
                let rowsum = phi.outcome[0] + phi.mediators.iter().map(|m| m[0]).sum::<f64>() + phi.treatment[0] + phi.remainder[0];
                assert!((rowsum - phi.total[0]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn saturated_bayes_ratios_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let (g, p) = random_query(&mut rng, 5);
        let table = random_law(&mut rng, &g);
        let data = table.to_dataset().unwrap();
        let exact = Law { table: &table }.nuisances(&p, 1.0, Strategy::Bayes);
        let cfg = saturated(Strategy::Bayes);
        let q = NuisanceFitter::new(&data, &p, &cfg, None).unwrap().fit(1.0).unwrap();
        let (re, rq) = (exact.ratio_products(), q.ratio_products());
        for (a, b) in re.iter().flatten().zip(rq.iter().flatten()) {
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn back_door_reduces_to_aipw() {
    let g = shapes::backdoor();
    let p = CausalPartition::new(&g, "A", "Y").unwrap();
    for (seed, binary) in [(1, false), (2, true)] {
        let data = backdoor_sample(1500, seed, binary);
        let a = data.scalar("A").unwrap();
        let y = data.scalar("Y").unwrap();
        for s in Strategy::ALL {
            for a0 in [0.0, 1.0] {
                let cfg = NuisanceConfig::new(s);
                let q = NuisanceFitter::new(&data, &p, &cfg, None).unwrap().fit(a0).unwrap();
                let os = one_step(&data, &p, &q).unwrap();
                let reference = aipw(a, y, &q.propensity, &q.outcome, a0);
                assert!((os.psi - reference).abs() < 1e-8, "{s} {a0} {binary}: {} vs {}", os.psi, reference);

                let tcfg = EstimatorConfig {
                    nuisance: cfg.clone(),
                    tmle: TmleConfig { threshold: Some(1e-12), max_iters: 500, ..TmleConfig::default() },
                    ..EstimatorConfig::default()
                };
                let rep = estimate(&data, &p, &tcfg, EstimatorKind::Tmle, a0).unwrap();
                assert!(rep.converged);
                let t = rep.targeted.as_ref().unwrap();
                let reference = aipw(a, y, &t.propensity, &t.outcome, a0);
                assert!((rep.psi - reference).abs() < 1e-8, "{} vs {}", rep.psi, reference);
            }
        }
    }
}

#[test]
fn front_door_estimates_match_the_formula() {
    let t = front_door_law();
    let g = shapes::frontdoor();
    let p = CausalPartition::new(&g, "A", "Y").unwrap();
    for a0 in [0.0, 1.0] {
        let truth = front_door_formula(&t, a0);
        assert!((brute_force_psi(&t, &p, a0).unwrap() - truth).abs() < 1e-12);
        let data = sample_table(&t, 20_000, 5 + a0 as u64);
        for s in [Strategy::Bayes, Strategy::Densratio] {
            let cfg = EstimatorConfig { nuisance: saturated(s), ..EstimatorConfig::default() };
            for rep in estimate_many(&data, &p, &cfg, &[EstimatorKind::Onestep, EstimatorKind::Tmle], a0).unwrap() {
                let se = rep.se.unwrap();
                assert!((rep.psi - truth).abs() < 4.0 * se, "{s} {}: {} vs {truth} (se {se})", rep.estimator, rep.psi);
            }
        }
    }
}

#[test]
fn targeting_solves_every_score() {
    let mut fits = 0;
    for (i, dgp) in [Dgp::YinL, Dgp::YnotL, Dgp::WeakOverlapYinL, Dgp::BinaryYinL].into_iter().enumerate() {
        let g = dgp.graph();
        let p = dgp.partition();
        for rep_seed in 0..9u64 {
            let data = dgp.generate(400, 100 * i as u64 + rep_seed).unwrap();
            for s in Strategy::ALL {
                let cfg = EstimatorConfig {
                    nuisance: NuisanceConfig { seed: rep_seed, ..NuisanceConfig::new(s) },
                    ..EstimatorConfig::default()
                };
                let a0 = (rep_seed % 2) as f64;
                let rep = estimate(&data, &p, &cfg, EstimatorKind::Tmle, a0).unwrap();
                fits += 1;
                assert!(rep.converged, "{dgp} {s}: {:?}", rep.diagnostics);
                let trace = rep.trace.as_ref().unwrap();
                for step in &trace.steps {
                    assert!(step.score_treatment.abs() < 1e-8);
                    assert!(step.score_outcome.abs() < 1e-8);
                    assert!(step.score_mediators.iter().all(|s| s.abs() < 1e-8));
                }
                let last = trace.steps.last().unwrap();
                assert!(last.pn_phi < last.threshold);
                assert!(rep.ci_lower.unwrap() <= rep.psi && rep.psi <= rep.ci_upper.unwrap());
                // the remainder block vanishes at the plug-in with empirical P_X
                let t = rep.targeted.as_ref().unwrap();
                let phi = eif(&data, &p, t, rep.psi).unwrap();
                assert!(data.mean(&phi.remainder).abs() < 1e-10);
                let _ = &g;
            }
        }
    }
    assert!(fits >= 100);
}

#[test]
fn binary_outcome_tmle_is_bounded() {
    let dgp = Dgp::BinaryWeakOverlapYinL;
    let p = dgp.partition();
    for seed in 0..10 {
        let data = dgp.generate(300, seed).unwrap();
        let cfg = EstimatorConfig { nuisance: NuisanceConfig::new(Strategy::Dnorm), ..EstimatorConfig::default() };
        let rep = estimate(&data, &p, &cfg, EstimatorKind::Tmle, 0.0).unwrap();
        assert!((0.0..=1.0).contains(&rep.psi));
    }
}

#[test]
fn reports_are_deterministic() {
    let dgp = Dgp::YinL;
    let p = dgp.partition();
    let data = dgp.generate(600, 3).unwrap();
    for s in Strategy::ALL {
        let cfg = EstimatorConfig { nuisance: NuisanceConfig::new(s), crossfit: Some(3), ..EstimatorConfig::default() };
        let a = estimate_many(&data, &p, &cfg, &EstimatorKind::ALL, 1.0).unwrap();
        let b = estimate_many(&data, &p, &cfg, &EstimatorKind::ALL, 1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.psi.to_bits(), y.psi.to_bits());
            assert_eq!(serde_json::to_string(x).unwrap(), serde_json::to_string(y).unwrap());
        }
    }
}

#[test]
fn plug_in_has_no_standard_error() {
    let dgp = Dgp::YnotL;
    let data = dgp.generate(300, 1).unwrap();
    let rep = estimate(&data, &dgp.partition(), &EstimatorConfig::default(), EstimatorKind::Plugin, 1.0).unwrap();
    assert!(rep.se.is_none() && rep.ci_lower.is_none());
}

#[test]
fn folds_are_balanced() {
    let plan = FoldPlan::new(103, 5, 9).unwrap();
    let sizes: Vec<usize> = (0..5).map(|f| plan.test_rows(f).len()).collect();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    assert_eq!(sizes.iter().sum::<usize>(), 103);
    assert!(FoldPlan::new(3, 5, 0).is_err());
}

#[test]
fn misspecified_basis_can_be_corrected() {
    let dgp = Dgp::YinL;
    let p = dgp.partition();
    let data = dgp.generate(2000, 8).unwrap();
    let cfg = EstimatorConfig { nuisance: NuisanceConfig::new(Strategy::Dnorm).with_basis(Basis::Interactions), ..EstimatorConfig::default() };
    let rep = estimate(&data, &p, &cfg, EstimatorKind::Onestep, 1.0).unwrap();
    assert!(rep.psi.is_finite() && rep.se.unwrap() > 0.0);
}
