use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_advreg"));
    c.env_remove("ADVREG_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&o.stderr));
    })
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ols_on_two_points_matches_hand_solution() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "x,y\n1,2\n3,5\n");
    let o = run(&["-q", "train", "--data", s(&data), "--algorithm", "ols", "--no-standardize", "--no-center"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // θ = Σxy / Σx² = 17 / 10
    let theta = json(&o)["theta"][0].as_f64().unwrap();
    assert!((theta - 1.7).abs() < 1e-12);
}

#[test]
fn mlsg_without_attack_weight_is_ols() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "a,b,y\n1,0,1\n0,1,2\n1,1,2.5\n2,1,4\n");
    let theta = |alg: &str| -> Vec<f64> {
        let o = run(&["-q", "train", "--data", s(&data), "--algorithm", alg, "--beta", "0"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_value(json(&o)["theta"].clone()).unwrap()
    };
    let (m, o) = (theta("mlsg"), theta("ols"));
    for (a, b) in m.iter().zip(&o) {
        assert!((a - b).abs() < 1e-10, "{m:?} vs {o:?}");
    }
}

#[test]
fn scalar_attack_moves_feature_to_closed_form() {
    let dir = TempDir::new().unwrap();
    let train = write(&dir, "train.csv", "x,y\n1,1\n2,2\n");
    let test = write(&dir, "test.csv", "x,y\n1,0\n");
    let model = dir.path().join("m.json");
    let o = run(&[
        "-q", "--out", s(&model), "train", "--data", s(&train), "--algorithm", "ols",
        "--no-standardize", "--no-center",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // θ = 1, σ_y = 0.5, z = 0 + 4·0.5 = 2, x' = (λx + zθ)/(λ + θ²) = 1.5
    let o = run(&[
        "-q", "attack", "--model", s(&model), "--data", s(&test), "--delta-scale", "4", "--lambda", "1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    let row: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row[0] - 1.5).abs() < 1e-12, "{out}");
    assert_eq!(row[1], 0.0);
}

#[test]
fn zero_model_leaves_data_byte_identical() {
    let dir = TempDir::new().unwrap();
    let body = "a,b,y\n0.1,2.5,1.0\n-3.25,4.0,2.0\n7.0,0.3333333333333333,-1.5\n";
    let data = write(&dir, "d.csv", body);
    let model = dir.path().join("m.json");
    assert_eq!(code(&run(&["-q", "--out", s(&model), "train", "--data", s(&data), "--algorithm", "ols"])), 0);
    let mut m: Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    m["theta"] = serde_json::json!([0.0, 0.0]);
    std::fs::write(&model, serde_json::to_string(&m).unwrap()).unwrap();
    let o = run(&["-q", "attack", "--model", s(&model), "--data", s(&data)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), body);
}

#[test]
fn expensive_attacker_barely_moves_data() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    let model = dir.path().join("m.json");
    let summary = dir.path().join("s.json");
    let gen = synthetic_csv(&dir, "redwine");
    std::fs::copy(&gen, &data).unwrap();
    assert_eq!(code(&run(&["-q", "--out", s(&model), "train", "--data", s(&data), "--algorithm", "ridge"])), 0);
    let o = run(&[
        "-q", "--out", s(&dir.path().join("x.csv")), "attack", "--model", s(&model), "--data", s(&data),
        "--lambda", "1e9", "--summary", s(&summary),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sm: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    let shift = sm["frobenius_shift"].as_f64().unwrap();
    let norm = sm["feature_norm"].as_f64().unwrap();
    assert!(shift < 1e-3 * norm, "{shift} vs {norm}");
}

fn synthetic_csv(dir: &TempDir, name: &str) -> PathBuf {
    let ds = advreg::data::synthetic_dataset(&advreg::data::SyntheticSpec::by_name(name).unwrap()).unwrap();
    let mut header = ds.feature_names.clone();
    header.push(ds.label_name.clone());
    let mut table = advreg::Matrix::zeros(ds.rows(), header.len());
    for i in 0..ds.rows() {
        let row = table.row_mut(i);
        row[..ds.x.cols()].copy_from_slice(ds.x.row(i));
        row[ds.x.cols()] = ds.y[i];
    }
    let p = dir.path().join(format!("{name}.csv"));
    let mut f = std::fs::File::create(&p).unwrap();
    advreg::data::write_matrix_csv(&mut f, &header, &table).unwrap();
    p
}

#[test]
fn evaluate_without_attack_weight_reports_clean_error() {
    let o = run(&["-q", "evaluate", "--data", "synthetic:boston", "--beta", "0", "--beta-hat", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    for a in v["report"]["algorithms"].as_array().unwrap() {
        assert_eq!(a["rmse_expected"], a["rmse_clean"]);
    }
}

#[test]
fn replaying_the_echoed_config_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let first = run(&["-q", "--seed", "11", "evaluate", "--data", "synthetic:redwine", "--n", "3"]);
    assert_eq!(code(&first), 0);
    let cfg = write(&dir, "c.json", std::str::from_utf8(&first.stdout).unwrap());
    let again = run(&["-q", "--config", s(&cfg), "evaluate"]);
    assert_eq!(code(&again), 0, "{}", String::from_utf8_lossy(&again.stderr));
    assert_eq!(first.stdout, again.stdout);
}

#[test]
fn seed_comes_from_environment_when_not_given() {
    let o = bin()
        .args(["-q", "evaluate", "--data", "synthetic:boston", "--algorithms", "ols"])
        .env("ADVREG_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["config"]["seed"], 42);
    let flag = bin()
        .args(["-q", "--seed", "7", "evaluate", "--data", "synthetic:boston", "--algorithms", "ols"])
        .env("ADVREG_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(json(&flag)["config"]["seed"], 7);
    let bad = bin()
        .args(["-q", "evaluate", "--data", "synthetic:boston"])
        .env("ADVREG_SEED", "many")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn sweep_output_is_independent_of_thread_count() {
    let args = |jobs: &str| {
        run(&[
            "-q", "--jobs", jobs, "sweep", "--data", "synthetic:boston", "--lambdas", "0.5,1",
            "--betas", "0,0.5", "--repeats", "3",
        ])
    };
    let (a, b) = (args("1"), args("3"));
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), advreg::eval::SWEEP_CSV_HEADER);
    assert_eq!(text.lines().count(), 1 + 4 * 4);
}

#[test]
fn verify_single_check_passes() {
    let o = run(&["-q", "verify", "--checks", "sherman_morrison,rosen_pd", "--trials", "20"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["passed"], true);
    assert_eq!(v["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn verify_with_zero_tolerance_reports_failure() {
    let o = run(&["-q", "verify", "--checks", "sherman_morrison", "--trials", "50", "--tolerance", "0"]);
    assert_eq!(code(&o), 5);
    assert_eq!(json(&o)["passed"], false);
}

#[test]
fn full_verify_suite_flags_only_the_first_bound() {
    let o = run(&["-q", "verify", "--trials", "200"]);
    assert_eq!(code(&o), 5);
    let v = json(&o);
    let failing: Vec<&str> = v["reports"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["failures"].as_u64().unwrap() > 0)
        .map(|r| r["check_name"].as_str().unwrap())
        .collect();
    assert_eq!(failing, ["first_bound"]);
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", "{\"unknown_key\": 1}");
    assert_eq!(code(&run(&["-q", "--config", s(&cfg), "evaluate"])), 2);
    assert_eq!(code(&run(&["-q", "evaluate", "--data", "synthetic:boston", "--train-fraction", "1.5"])), 2);
    assert_eq!(code(&run(&["-q", "evaluate", "--data", "synthetic:boston", "--lambda", "-1"])), 2);
    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&run(&["-q", "train", "--data", s(&missing)])), 3);
    let bad = write(&dir, "bad.csv", "a,y\n1,2\nx,3\n");
    let o = run(&["-q", "train", "--data", s(&bad)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));
    let tiny = write(&dir, "tiny.csv", "a,y\n1,2\n");
    assert_eq!(code(&run(&["-q", "evaluate", "--data", s(&tiny)])), 3);
    let nolabel = write(&dir, "nl.csv", "a,b\n1,2\n");
    assert_eq!(code(&run(&["-q", "train", "--data", s(&nolabel), "--label", "y"])), 3);
}
