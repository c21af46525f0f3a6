#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use primalfix::data::Dataset;
use primalfix::estimators::JointTable;
use primalfix::learn::LearnerSpec;
use primalfix::nuisance::NuisanceConfig;
use primalfix::graph::{Admg, CausalPartition, Level};
use primalfix::nuisance::{MediatorRatio, NuisanceSet, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("V{i}")).collect()
}

/// Random ADMG on `V0..V{n-1}` whose directed edges respect the index order.
pub fn random_admg(rng: &mut ChaCha8Rng, n: usize, p_di: f64, p_bi: f64) -> Admg {
    let vs = names(n);
    let mut di = Vec::new();
    let mut bi = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p_di {
                di.push((vs[i].as_str(), vs[j].as_str()));
            }
            if rng.gen::<f64>() < p_bi {
                bi.push((vs[i].as_str(), vs[j].as_str()));
            }
        }
    }
    let refs: Vec<&str> = vs.iter().map(String::as_str).collect();
    Admg::from_edges(&refs, &di, &bi).unwrap()
}

/// ch(a) ∩ dis(a) = ∅, computed straight from the edge lists.
pub fn brute_primal_fixable(g: &Admg, a: &str) -> bool {
    let children: BTreeSet<String> = g.di_edges().into_iter().filter(|(u, _)| u == a).map(|(_, v)| v).collect();
    let bi = g.bi_edges();
    let mut district = BTreeSet::from([a.to_string()]);
    loop {
        let before = district.len();
        for (u, v) in &bi {
            if district.contains(u) || district.contains(v) {
                district.insert(u.clone());
                district.insert(v.clone());
            }
        }
        if district.len() == before {
            break;
        }
    }
    children.is_disjoint(&district)
}

/// Random primal-fixable query: treatment drawn among the first n - 1
/// vertices, outcome the last one.
pub fn random_query(rng: &mut ChaCha8Rng, max_n: usize) -> (Admg, CausalPartition) {
    loop {
        let n = rng.gen_range(2..=max_n);
        let (p_di, p_bi) = (rng.gen_range(0.2..0.8), rng.gen_range(0.0..0.5));
        let g = random_admg(rng, n, p_di, p_bi);
        let a = format!("V{}", rng.gen_range(0..n - 1));
        let y = format!("V{}", n - 1);
        if !brute_primal_fixable(&g, &a) {
            continue;
        }
        let p = CausalPartition::new(&g, &a, &y).unwrap();
        return (g, p);
    }
}

/// Joint law of binary vertices generated by a hidden-variable DAG whose
/// latent projection is `g`: one hidden binary parent per bidirected edge
/// and random conditionals bounded away from 0 and 1.
pub fn random_law(rng: &mut ChaCha8Rng, g: &Admg) -> JointTable {
    let obs: Vec<String> = g.names().map(str::to_string).collect();
    let order: Vec<String> = {
        // observed vertices in a topological order of the directed part
        let mut left: Vec<String> = obs.clone();
        let mut out = Vec::new();
        while !left.is_empty() {
            let pos = left
                .iter()
                .position(|v| g.parents(v).unwrap().iter().all(|p| out.contains(p)))
                .unwrap();
            out.push(left.remove(pos));
        }
        out
    };
    let bi = g.bi_edges();
    let h = bi.len();
    let hidden_p: Vec<f64> = (0..h).map(|_| rng.gen_range(0.2..0.8)).collect();
    // parent list (observed indices into `obs`, hidden indices) per vertex
    let idx = |v: &str| obs.iter().position(|o| o == v).unwrap();
    let mut cpts: BTreeMap<String, (Vec<usize>, Vec<usize>, Vec<f64>)> = BTreeMap::new();
    for v in &order {
        let pa: Vec<usize> = g.parents(v).unwrap().iter().map(|p| idx(p)).collect();
        let hp: Vec<usize> = (0..h).filter(|&e| bi[e].0 == *v || bi[e].1 == *v).collect();
        let cells = 1usize << (pa.len() + hp.len());
        let probs = (0..cells).map(|_| rng.gen_range(0.15..0.85)).collect();
        cpts.insert(v.clone(), (pa, hp, probs));
    }
    let d = obs.len();
    let mut mass = vec![0.0; 1 << d];
    for hcfg in 0..1usize << h {
        let hv: Vec<usize> = (0..h).map(|e| (hcfg >> e) & 1).collect();
        let ph: f64 = (0..h).map(|e| if hv[e] == 1 { hidden_p[e] } else { 1.0 - hidden_p[e] }).product();
        for ocfg in 0..1usize << d {
            let ov = |j: usize| (ocfg >> j) & 1;
            let mut p = ph;
            for (v, (pa, hp, probs)) in &cpts {
                let mut cell = 0;
                for &j in pa {
                    cell = cell << 1 | ov(j);
                }
                for &e in hp {
                    cell = cell << 1 | hv[e];
                }
                let p1 = probs[cell];
                p *= if ov(idx(v)) == 1 { p1 } else { 1.0 - p1 };
            }
            mass[ocfg] += p;
        }
    }
    let configs = (0..1usize << d).map(|c| (0..d).map(|j| ((c >> j) & 1) as f64).collect()).collect();
    let total: f64 = mass.iter().sum();
    JointTable::new(obs, configs, mass.into_iter().map(|m| m / total).collect()).unwrap()
}

/// Exact conditional expectations on a joint table.
pub struct Law<'a> {
    pub table: &'a JointTable,
}

impl<'a> Law<'a> {
    pub fn col(&self, v: &str) -> usize {
        self.table.vertices().iter().position(|x| x == v).unwrap()
    }

    /// E[f(row) | given], with `given` pairs of (column, value).
    pub fn cond<F: Fn(&[f64]) -> f64>(&self, f: F, given: &[(usize, f64)]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (c, &p) in self.table.configs().iter().zip(self.table.probs()) {
            if given.iter().all(|&(j, v)| c[j] == v) {
                num += p * f(c);
                den += p;
            }
        }
        assert!(den > 0.0, "conditioning on a null event");
        num / den
    }

    fn given(&self, set: &BTreeSet<String>, row: &[f64]) -> Vec<(usize, f64)> {
        set.iter().map(|v| (self.col(v), row[self.col(v)])).collect()
    }

    /// B_k at `row`, k = K being the outcome regression.
    pub fn regression(&self, p: &CausalPartition, a0: f64, k: usize, row: &[f64]) -> f64 {
        let kk = p.num_mediators();
        let mut given = self.given(&p.regression_set(k), row);
        if p.regression_uses_treatment(k) {
            given.push((self.col(p.treatment()), p.regression_label(k).value(a0)));
        }
        if k == kk {
            let y = self.col(p.outcome());
            return self.cond(|c| c[y], &given);
        }
        let z = self.col(&p.mediators()[k]);
        let mut total = 0.0;
        for v in [0.0, 1.0] {
            let pz = self.cond(|c| (c[z] == v) as u8 as f64, &given);
            let mut next = row.to_vec();
            next[z] = v;
            total += pz * self.regression(p, a0, k + 1, &next);
        }
        total
    }

    /// P(A = level | pillow of `v` without A, and `v` itself when `with_self`).
    pub fn treatment_prob(&self, p: &CausalPartition, v: &str, with_self: bool, level: f64, row: &[f64]) -> f64 {
        let mut set = p.pillow_without_treatment(v);
        if with_self {
            set.insert(v.to_string());
        }
        let a = self.col(p.treatment());
        self.cond(|c| (c[a] == level) as u8 as f64, &self.given(&set, row))
    }

    /// f(z | pillow, a_z) / f(z | pillow, 1 - a_z) for mediator k.
    pub fn mediator_ratio(&self, p: &CausalPartition, a0: f64, k: usize, row: &[f64]) -> f64 {
        let z = &p.mediators()[k];
        let zc = self.col(z);
        let a = self.col(p.treatment());
        let level = p.label(k).value(a0);
        let base = self.given(&p.pillow_without_treatment(z), row);
        let dens = |lv: f64| {
            let mut g = base.clone();
            g.push((a, lv));
            self.cond(|c| (c[zc] == row[zc]) as u8 as f64, &g)
        };
        dens(level) / dens(1.0 - level)
    }

    /// Every nuisance at its true value, with mediator ratios supplied the
    /// way `strategy` represents them.
    pub fn nuisances(&self, p: &CausalPartition, a0: f64, strategy: Strategy) -> NuisanceSet {
        let rows = self.table.configs();
        let kk = p.num_mediators();
        let a1 = 1.0 - a0;
        let propensity = rows.iter().map(|r| self.treatment_prob(p, p.treatment(), false, a1, r)).collect();
        let outcome = rows.iter().map(|r| self.regression(p, a0, kk, r)).collect();
        let sequential = (0..kk).map(|k| rows.iter().map(|r| self.regression(p, a0, k, r)).collect()).collect();
        let ratios = (0..kk)
            .map(|k| {
                let z = &p.mediators()[k];
                if !p.treatment_in_pillow(z) {
                    return MediatorRatio::Unity;
                }
                match strategy {
                    Strategy::Bayes => {
                        let level = p.label(k);
                        let lv = level.value(a0);
                        MediatorRatio::Bayes {
                            h: rows.iter().map(|r| self.treatment_prob(p, z, true, lv, r)).collect(),
                            g: Some(rows.iter().map(|r| self.treatment_prob(p, z, false, lv, r)).collect()),
                            level,
                        }
                    }
                    _ => MediatorRatio::Fixed(rows.iter().map(|r| self.mediator_ratio(p, a0, k, r)).collect()),
                }
            })
            .collect();
        let binary = true;
        NuisanceSet::from_parts(p, strategy, a0, binary, propensity, outcome, sequential, ratios).unwrap()
    }
}

pub fn saturated(strategy: Strategy) -> NuisanceConfig {
    NuisanceConfig {
        outcome_learner: LearnerSpec::Saturated,
        ratio_learner: LearnerSpec::Saturated,
        ..NuisanceConfig::new(strategy)
    }
}

/// Textbook augmented IPW for E[Y(a0)] from P(A = 1 - a0 | X) and an
/// outcome regression evaluated at a0.
pub fn aipw(a: &[f64], y: &[f64], p_other: &[f64], mu: &[f64], a0: f64) -> f64 {
    let n = a.len();
    (0..n)
        .map(|i| {
            let pa0 = 1.0 - p_other[i];
            let ind = (a[i] == a0) as u8 as f64;
            mu[i] + ind / pa0 * (y[i] - mu[i])
        })
        .sum::<f64>()
        / n as f64
}

pub fn backdoor_sample(n: usize, seed: u64, binary: bool) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut x, mut a, mut y) = (vec![], vec![], vec![]);
    for _ in 0..n {
        let xi: f64 = rng.gen_range(-1.0..1.0);
        let ai = (rng.gen::<f64>() < 1.0 / (1.0 + (-0.8 * xi).exp())) as u8 as f64;
        let lin = 0.5 + xi + 1.5 * ai;
        let yi = if binary {
            (rng.gen::<f64>() < 1.0 / (1.0 + (-lin).exp())) as u8 as f64
        } else {
            lin + rng.gen_range(-1.0..1.0)
        };
        x.push(xi);
        a.push(ai);
        y.push(yi);
    }
    let binary_cols: &[&str] = if binary { &["A", "Y"] } else { &["A"] };
    Dataset::from_scalar_columns(vec![("X", x), ("A", a), ("Y", y)], binary_cols).unwrap()
}

/// Binary front-door law with a hidden confounder of A and Y.
pub fn front_door_law() -> JointTable {
    let mut configs = Vec::new();
    let mut probs = Vec::new();
    let b = |p: f64, v: usize| if v == 1 { p } else { 1.0 - p };
    for c in 0..16usize {
        let (x, a, m, y) = (c >> 3 & 1, c >> 2 & 1, c >> 1 & 1, c & 1);
        let mut mass = 0.0;
        for u in 0..2usize {
            let pu = b(0.4, u);
            let pa = 0.2 + 0.3 * x as f64 + 0.35 * u as f64;
            let pm = 0.15 + 0.6 * a as f64 + 0.1 * x as f64;
            let py = 0.1 + 0.4 * m as f64 + 0.2 * u as f64 + 0.15 * x as f64;
            mass += pu * b(pa, a) * b(pm, m) * b(py, y);
        }
        configs.push(vec![x as f64, a as f64, m as f64, y as f64]);
        probs.push(b(0.5, x) * mass);
    }
    JointTable::new(["X", "A", "M", "Y"].map(String::from).to_vec(), configs, probs).unwrap()
}

/// Σ_x Σ_m Σ_a' P(x) P(m | a0, x) P(a' | x) E[Y | m, a', x].
pub fn front_door_formula(t: &JointTable, a0: f64) -> f64 {
    let law = Law { table: t };
    let mut psi = 0.0;
    for x in [0.0, 1.0] {
        let px = law.cond(|c| (c[0] == x) as u8 as f64, &[]);
        for m in [0.0, 1.0] {
            let pm = law.cond(|c| (c[2] == m) as u8 as f64, &[(0, x), (1, a0)]);
            for a in [0.0, 1.0] {
                let pa = law.cond(|c| (c[1] == a) as u8 as f64, &[(0, x)]);
                let ey = law.cond(|c| c[3], &[(0, x), (1, a), (2, m)]);
                psi += px * pm * pa * ey;
            }
        }
    }
    psi
}

pub fn sample_table(t: &JointTable, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cdf: Vec<f64> = t
        .probs()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let k = t.vertices().len();
    let mut cols = vec![Vec::with_capacity(n); k];
    for _ in 0..n {
        let u: f64 = rng.gen();
        let row = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
        for j in 0..k {
            cols[j].push(t.configs()[row][j]);
        }
    }
    let names = t.vertices().to_vec();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Dataset::from_scalar_columns(refs.iter().copied().zip(cols).collect(), &refs).unwrap()
}

pub fn level_name(l: Level) -> &'static str {
    match l {
        Level::A0 => "a0",
        Level::A1 => "a1",
    }
}

/// Graphs used across the suites.
pub mod shapes {
    use primalfix::graph::{Admg, Dag};

    pub fn backdoor() -> Admg {
        Admg::from_edges(&["X", "A", "Y"], &[("X", "A"), ("X", "Y"), ("A", "Y")], &[]).unwrap()
    }

    pub fn frontdoor_dag() -> Dag {
        Dag::from_edges(
            &["X", "A", "M", "Y", "U"],
            &[("X", "A"), ("X", "M"), ("X", "Y"), ("A", "M"), ("M", "Y"), ("U", "A"), ("U", "Y")],
            &["U"],
        )
        .unwrap()
    }

    pub fn frontdoor() -> Admg {
        Admg::from_edges(
            &["X", "A", "M", "Y"],
            &[("X", "A"), ("X", "M"), ("X", "Y"), ("A", "M"), ("M", "Y")],
            &[("A", "Y")],
        )
        .unwrap()
    }

    fn bundled(name: &str) -> Admg {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/graphs").join(name);
        primalfix::GraphSpec::read(path).unwrap().to_admg().unwrap()
    }

    /// Outcome in the treatment's district.
    pub fn outcome_in_district() -> Admg {
        bundled("outcome_in_district.json")
    }

    /// Bidirected edges chaining A, L and Y.
    pub fn two_bidirected() -> Admg {
        bundled("two_bidirected.json")
    }

    /// Outcome outside the treatment's district.
    pub fn outcome_outside_district() -> Admg {
        bundled("outcome_outside_district.json")
    }
}
