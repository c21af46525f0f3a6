use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use primalfix::simulation::Dgp;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_primalfix"));
    c.env("PF_THREADS", "1");
    c
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn graph(name: &str) -> PathBuf {
    repo().join("configs/graphs").join(name)
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().expect("binary runs");
    (
        status.code().unwrap_or(-1),
        String::from_utf8_lossy(&stdout).into_owned(),
        String::from_utf8_lossy(&stderr).into_owned(),
    )
}

fn sample_csv(dir: &Path, dgp: Dgp, n: usize) -> PathBuf {
    let path = dir.join(format!("{dgp}.csv"));
    dgp.generate(n, 17).unwrap().write_csv(&path).unwrap();
    path
}

#[test]
fn graph_prints_partition_of_two_bidirected_edges() {
    let (code, out, _) = run(bin().args(["graph", "--graph"]).arg(graph("two_bidirected.json")));
    assert_eq!(code, 0);
    assert!(out.contains("L = {A, L, Y}; M = {M}"), "{out}");
}

#[test]
fn graph_on_front_door_is_fixable() {
    let (code, out, _) = run(bin().args(["graph", "--graph"]).arg(graph("frontdoor.json")));
    assert_eq!(code, 0);
    assert!(out.contains("primal fixable: yes"));
}

#[test]
fn graph_rejects_cycles_and_flags_unfixable() {
    let (code, _, err) = run(bin().args(["graph", "--graph"]).arg(graph("cyclic.json")));
    assert_eq!(code, 2);
    assert!(err.contains("cycle"));
    let (code, out, _) = run(bin().args(["graph", "--graph"]).arg(graph("not_fixable.json")));
    assert_eq!(code, 1);
    assert!(out.contains("primal fixable: no"));
}

#[test]
fn estimate_tmle_bayes_converges() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_csv(dir.path(), Dgp::YinL, 1000);
    let out = dir.path().join("report.json");
    let (code, stdout, err) = run(bin()
        .args(["estimate", "--estimator", "tmle", "--strategy", "bayes", "--graph"])
        .arg(graph("outcome_in_district.json"))
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&out));
    assert_eq!(code, 0, "{stdout}{err}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["reports"][0]["converged"], serde_json::Value::Bool(true));
    assert!(report["reports"][0]["psi"].as_f64().unwrap().is_finite());
}

#[test]
fn estimate_ace_writes_both_levels_and_contrast() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_csv(dir.path(), Dgp::YnotL, 800);
    let out = dir.path().join("ace.json");
    let (code, _, err) = run(bin()
        .args(["estimate", "--ace", "--estimator", "onestep", "--strategy", "dnorm", "--graph"])
        .arg(graph("outcome_outside_district.json"))
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&out));
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let levels = report["reports"].as_array().unwrap();
    assert_eq!(levels.len(), 2);
    let diff = levels[0]["psi"].as_f64().unwrap() - levels[1]["psi"].as_f64().unwrap();
    assert!((report["ace"]["psi"].as_f64().unwrap() - diff).abs() < 1e-12);
}

#[test]
fn binary_outcome_tmle_stays_in_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_csv(dir.path(), Dgp::BinaryWeakOverlapYinL, 600);
    let out = dir.path().join("binary.json");
    let (code, _, err) = run(bin()
        .args(["estimate", "--estimator", "tmle", "--strategy", "dnorm", "--a0", "0", "--graph"])
        .arg(graph("outcome_in_district.json"))
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&out));
    assert!(code == 0 || code == 1, "{err}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let psi = report["reports"][0]["psi"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&psi), "{psi}");
}

#[test]
fn estimate_rejects_unknown_strategy_and_mismatched_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_csv(dir.path(), Dgp::YinL, 200);
    let (code, _, err) = run(bin()
        .args(["estimate", "--strategy", "kernel", "--graph"])
        .arg(graph("outcome_in_district.json"))
        .arg("--data")
        .arg(&data));
    assert_eq!(code, 2);
    assert!(err.contains("kernel"));
    // the front-door graph declares a scalar M, the data carry M1 and M2
    let (code, _, err) = run(bin()
        .args(["estimate", "--graph"])
        .arg(graph("frontdoor.json"))
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("x.json")));
    assert_eq!(code, 2, "{err}");
}

#[test]
fn simulate_bundled_config_writes_scaled_bias() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("sim");
    let (code, out, err) = run(bin()
        .arg("simulate")
        .arg(repo().join("configs/consistency_yinL.json"))
        .arg("--out")
        .arg(&prefix));
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("tmle"));
    let csv = std::fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.split(',').any(|h| h == "sqrt_n_bias"), "{header}");
    // 2 sizes x 2 arms x 2 estimators
    assert_eq!(csv.lines().count(), 1 + 8);
}

#[test]
fn simulate_is_byte_reproducible_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let config = repo().join("configs/consistency_yinL.json");
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let prefix = dir.path().join(format!("run{run_id}"));
        let (code, _, err) = run(bin()
            .arg("simulate")
            .arg(&config)
            .args(["--replications", "3", "--seed", "9", "--out"])
            .arg(&prefix));
        assert_eq!(code, 0, "{err}");
        outputs.push(std::fs::read(dir.path().join(format!("run{run_id}.csv"))).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let (code, _, _) = run(bin().arg("simulate").arg(&config).args(["--replications", "0"]));
    assert_eq!(code, 2);
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"dgp\": \"yinL\", ").unwrap();
    let (code, _, _) = run(bin().arg("simulate").arg(&broken));
    assert_eq!(code, 2);
}

const FOUR_VERTEX_BACKDOOR: &str = r#"{
  "vertices": [{"name": "X", "arity": 1}, {"name": "W", "arity": 1}, {"name": "A", "arity": 1}, {"name": "Y", "arity": 1}],
  "di_edges": [["X", "A"], ["W", "A"], ["X", "Y"], ["W", "Y"], ["A", "Y"]]
}"#;

fn write_table(path: &Path, header: &str, rows: &[(Vec<u8>, f64)]) {
    let mut s = format!("{header},p\n");
    for (cfg, p) in rows {
        let cells: Vec<String> = cfg.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("{},{p}\n", cells.join(",")));
    }
    std::fs::write(path, s).unwrap();
}

fn all_configs(k: usize) -> Vec<Vec<u8>> {
    (0..1usize << k).map(|m| (0..k).map(|j| ((m >> (k - 1 - j)) & 1) as u8).collect()).collect()
}

fn oracle_psi(out: &str) -> f64 {
    out.trim().rsplit(' ').next().unwrap().parse().unwrap()
}

#[test]
fn oracle_matches_hand_g_formula() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    std::fs::write(&g, FOUR_VERTEX_BACKDOOR).unwrap();
    // uniform law: Y independent of everything
    let t = dir.path().join("uniform.csv");
    write_table(&t, "X,W,A,Y", &all_configs(4).into_iter().map(|c| (c, 1.0 / 16.0)).collect::<Vec<_>>());
    let (code, out, err) = run(bin().args(["oracle", "--a0", "1", "--graph"]).arg(&g).arg("--table").arg(&t));
    assert_eq!(code, 0, "{err}");
    assert!((oracle_psi(&out) - 0.5).abs() < 1e-12);

    // P(y=1 | a, x, w) = 0.1 + 0.2a + 0.3x + 0.2w, confounded treatment
    let pa = |x: u8, w: u8| 0.2 + 0.5 * f64::from(x) + 0.2 * f64::from(w);
    let py = |a: u8, x: u8, w: u8| 0.1 + 0.2 * f64::from(a) + 0.3 * f64::from(x) + 0.2 * f64::from(w);
    let rows: Vec<(Vec<u8>, f64)> = all_configs(4)
        .into_iter()
        .map(|c| {
            let (x, w, a, y) = (c[0], c[1], c[2], c[3]);
            let p_a = if a == 1 { pa(x, w) } else { 1.0 - pa(x, w) };
            let p_y = if y == 1 { py(a, x, w) } else { 1.0 - py(a, x, w) };
            (c, 0.25 * p_a * p_y)
        })
        .collect();
    let t = dir.path().join("confounded.csv");
    write_table(&t, "X,W,A,Y", &rows);
    let hand: f64 = [(0, 0), (0, 1), (1, 0), (1, 1)].iter().map(|&(x, w)| 0.25 * py(1, x, w)).sum();
    let (code, out, _) = run(bin().args(["oracle", "--a0", "1", "--graph"]).arg(&g).arg("--table").arg(&t));
    assert_eq!(code, 0);
    assert!((oracle_psi(&out) - hand).abs() < 1e-10, "{out} vs {hand}");
}

#[test]
fn oracle_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    std::fs::write(&g, FOUR_VERTEX_BACKDOOR).unwrap();
    let t = dir.path().join("short.csv");
    write_table(&t, "X,W,A,Y", &all_configs(4).into_iter().map(|c| (c, 0.9 / 16.0)).collect::<Vec<_>>());
    let (code, _, _) = run(bin().args(["oracle", "--graph"]).arg(&g).arg("--table").arg(&t));
    assert_eq!(code, 2);

    // Y constant at 1
    let rows: Vec<(Vec<u8>, f64)> = all_configs(3)
        .into_iter()
        .map(|mut c| {
            c.push(1);
            (c, 1.0 / 8.0)
        })
        .collect();
    let t = dir.path().join("constant.csv");
    write_table(&t, "X,W,A,Y", &rows);
    let (code, out, _) = run(bin().args(["oracle", "--graph"]).arg(&g).arg("--table").arg(&t));
    assert_eq!(code, 0);
    assert!((oracle_psi(&out) - 1.0).abs() < 1e-12);

    // nobody treated when X = 1
    let rows: Vec<(Vec<u8>, f64)> = all_configs(4)
        .into_iter()
        .map(|c| {
            let p = if c[0] == 1 && c[2] == 1 { 0.0 } else { 1.0 / 12.0 };
            (c, p)
        })
        .collect();
    let t = dir.path().join("positivity.csv");
    write_table(&t, "X,W,A,Y", &rows);
    let (code, _, err) = run(bin().args(["oracle", "--graph"]).arg(&g).arg("--table").arg(&t));
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("positivity"));
}
