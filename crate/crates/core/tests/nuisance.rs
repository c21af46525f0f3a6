mod common;

use common::shapes;
use nalgebra::DMatrix;
use primalfix::data::Dataset;
use primalfix::graph::CausalPartition;
use primalfix::learn::{FitError, LearnerSpec};
use primalfix::nuisance::{evaluate_nuisances, MediatorRatio, NuisanceConfig, Strategy, Ulsif, UlsifConfig};
use primalfix::simulation::Dgp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[test]
fn caches_are_finite_and_floored() {
    for dgp in [Dgp::YinL, Dgp::YnotL, Dgp::WeakOverlapYinL, Dgp::BinaryYinL] {
        let data = dgp.generate(500, 4).unwrap();
        let p = dgp.partition();
        for s in Strategy::ALL {
            for a0 in [0.0, 1.0] {
                let q = evaluate_nuisances(&data, &p, &NuisanceConfig::new(s), a0).unwrap();
                assert_eq!(q.num_mediators(), 2);
                assert!(all_finite(&q.outcome) && all_finite(&q.propensity));
                assert!(q.sequential.iter().all(|b| all_finite(b)));
                for r in q.ratio_products() {
                    assert!(r.iter().all(|&x| x.is_finite() && x >= q.clip), "{dgp} {s}");
                }
                if dgp.binary_outcome() {
                    assert!(q.outcome.iter().all(|&m| m > 0.0 && m < 1.0));
                }
            }
        }
    }
}

#[test]
fn constant_outcome_propagates_through_the_regressions() {
    let dgp = Dgp::YinL;
    let mut data = dgp.generate(400, 2).unwrap();
    let binding = data.binding().clone();
    let mut cols = std::collections::BTreeMap::new();
    for (_, cs) in &binding {
        for c in cs {
            let v = if c == "Y" { vec![3.5; data.n()] } else { data.column(c).unwrap().to_vec() };
            cols.insert(c.clone(), v);
        }
    }
    let kinds = [("A".to_string(), primalfix::ColumnKind::Binary)].into_iter().collect();
    data = Dataset::new(binding, cols, &kinds).unwrap();
    let q = evaluate_nuisances(&data, &dgp.partition(), &NuisanceConfig::new(Strategy::Bayes), 1.0).unwrap();
    for b in q.sequential.iter().chain([&q.outcome]) {
        assert!(b.iter().all(|v| (v - 3.5).abs() < 1e-8));
    }
}

#[test]
fn first_mediator_ratio_is_the_propensity_odds() {
    // front door: Z_1 = M is outside the district, so R_{Z_1} = π(a1)/π(a0)
    let dgp = Dgp::YinL;
    let data = dgp.generate(400, 6).unwrap().rebind(vec![
        ("X".into(), vec!["X".into()]),
        ("A".into(), vec!["A".into()]),
        ("M".into(), vec!["M1".into()]),
        ("Y".into(), vec!["Y".into()]),
    ]);
    let data = data.unwrap();
    let g = shapes::frontdoor();
    let p = CausalPartition::new(&g, "A", "Y").unwrap();
    for s in Strategy::ALL {
        let q = evaluate_nuisances(&data, &p, &NuisanceConfig::new(s), 0.0).unwrap();
        let r = q.ratio_products();
        for i in 0..data.n() {
            assert!((r[0][i] - q.propensity_odds(i)).abs() < 1e-12);
        }
        if s == Strategy::Bayes {
            // g for M coincides with π(a0 | X) row for row
            let g = q.bayes_g(0).unwrap();
            for i in 0..data.n() {
                assert!((g[i] - (1.0 - q.propensity[i])).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn district_mediator_ratio_is_a_product_over_earlier_outside_mediators() {
    // outcome outside the district: Z = (M, L) with L in the district
    let g = shapes::outcome_outside_district();
    let p = CausalPartition::new(&g, "A", "Y").unwrap();
    let n = 4;
    let pi = vec![0.2, 0.4, 0.6, 0.8];
    let ones = vec![1.0; n];
    let unity = primalfix::nuisance::NuisanceSet::from_parts(
        &p,
        Strategy::Dnorm,
        1.0,
        false,
        pi.clone(),
        ones.clone(),
        vec![ones.clone(), ones.clone()],
        vec![MediatorRatio::Unity, MediatorRatio::Unity],
    )
    .unwrap();
    let r = unity.ratio_products();
    assert_eq!(r[1], ones);
    let fixed = primalfix::nuisance::NuisanceSet::from_parts(
        &p,
        Strategy::Dnorm,
        1.0,
        false,
        pi,
        ones.clone(),
        vec![ones.clone(), ones.clone()],
        vec![MediatorRatio::Fixed(vec![2.0, 3.0, 4.0, 5.0]), MediatorRatio::Fixed(vec![7.0; n])],
    )
    .unwrap();
    let r = fixed.ratio_products();
    assert_eq!(r[1], [2.0, 3.0, 4.0, 5.0]);
    // Y outside: propensity odds times the ratio of L
    for i in 0..n {
        assert!((r[2][i] - fixed.propensity_odds(i) * 7.0).abs() < 1e-12);
    }
}

#[test]
fn identical_arms_give_unit_ratios() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let draw = |rng: &mut ChaCha8Rng, n: usize| DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let num = draw(&mut rng, 2000);
    let den = draw(&mut rng, 2000);
    let fit = Ulsif::fit(&num, &den, &UlsifConfig::default(), 1e-6, 1).unwrap();
    let r = fit.predict(&den);
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    assert!((0.8..=1.2).contains(&mean), "{mean}");
}

#[test]
fn mediator_ratios_near_one_when_treatment_has_no_effect_on_them() {
    let n = 5000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let a: Vec<f64> = x.iter().map(|&x| (rng.gen::<f64>() < 1.0 / (1.0 + (-0.5 * x).exp())) as u8 as f64).collect();
    let m: Vec<f64> = x.iter().map(|&x| 0.5 * x + rng.sample::<f64, _>(StandardNormal)).collect();
    let y: Vec<f64> = (0..n).map(|i| m[i] + a[i] + rng.sample::<f64, _>(StandardNormal)).collect();
    let data = Dataset::from_scalar_columns(vec![("X", x), ("A", a), ("M", m), ("Y", y)], &["A"]).unwrap();
    let g = shapes::frontdoor();
    let p = CausalPartition::new(&g, "A", "Y").unwrap();
    for s in Strategy::ALL {
        let q = evaluate_nuisances(&data, &p, &NuisanceConfig::new(s), 1.0).unwrap();
        let ratio = q.mediator_ratio(0);
        let mean = ratio.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.1, "{s}: {mean}");
    }
}

#[test]
fn densratio_rejects_a_tiny_arm() {
    let dgp = Dgp::YinL;
    let data = dgp.generate(200, 1).unwrap();
    let a = data.column("A").unwrap();
    let mut keep: Vec<usize> = (0..data.n()).filter(|&i| a[i] == 0.0).collect();
    keep.extend((0..data.n()).filter(|&i| a[i] == 1.0).take(3));
    let small = data.select_rows(&keep);
    let err = evaluate_nuisances(&small, &dgp.partition(), &NuisanceConfig::new(Strategy::Densratio), 1.0).unwrap_err();
    assert!(matches!(err, FitError::InsufficientArm(_)), "{err}");
    assert!(err.to_string().contains("insufficient arm"));
}

#[test]
fn dnorm_needs_a_parametric_learner() {
    let dgp = Dgp::YinL;
    let data = dgp.generate(200, 1).unwrap();
    let cfg = NuisanceConfig { ratio_learner: LearnerSpec::Saturated, ..NuisanceConfig::new(Strategy::Dnorm) };
    assert!(evaluate_nuisances(&data, &dgp.partition(), &cfg, 1.0).is_err());
}

#[test]
fn sequential_regression_matches_the_closed_form() {
    let dgp = Dgp::YinL;
    let p = dgp.partition();
    let data = dgp.generate(20_000, 7).unwrap();
    let cfg = NuisanceConfig::new(Strategy::Dnorm);
    let q = evaluate_nuisances(&data, &p, &cfg, 1.0).unwrap();
    let x = data.column("X").unwrap();
    let err: f64 = (0..data.n())
        .map(|i| (q.sequential[0][i] - dgp.first_regression(&[x[i]], 1.0)).abs())
        .sum::<f64>()
        / data.n() as f64;
    assert!(err < 0.1, "mean abs error {err}");
}

#[test]
fn bayes_ratios_compose_h_and_g() {
    let dgp = Dgp::YnotL;
    let data = dgp.generate(500, 8).unwrap();
    let q = evaluate_nuisances(&data, &dgp.partition(), &NuisanceConfig::new(Strategy::Bayes), 0.0).unwrap();
    for k in 0..q.num_mediators() {
        if let MediatorRatio::Bayes { h, .. } = &q.mediator_ratios[k] {
            let g = q.bayes_g(k).unwrap();
            let r = q.mediator_ratio(k);
            for i in 0..data.n() {
                let want = (h[i] / (1.0 - h[i]) * (1.0 - g[i]) / g[i]).max(q.clip);
                assert!((r[i] - want).abs() < 1e-12 * want.max(1.0));
            }
        }
    }
}
