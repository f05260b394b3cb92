use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use peripheral::qsd::{AbsorbedModel, LazyChain, ModelVariant};
use peripheral_cli::{load_model, parse_model, serialize_model, GeneratorModel, ModelFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peripheral"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, value.to_string()).unwrap();
    path.display().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn lazy_model(n: usize) -> Value {
    json!({
        "variant": "lazy_chain",
        "r": vec![vec![1.0 / n as f64; n]; n],
        "rho_r": vec![0.5; n],
        "rho_delta": vec![0.3; n],
        "rho_absorb": vec![0.2; n],
    })
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(out.stderr.trim_ascii()).expect("stderr is one JSON object")
}

#[test]
fn decompose_two_cycle_has_period_two() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        dir.path(),
        "cycle.json",
        &json!({"variant": "explicit", "rows": [[0, 1], [1, 0]]}),
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "decompose",
        "--model",
        &model,
        "--out",
        out_dir.to_str().unwrap(),
        "--horizon",
        "10",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read_json(&out_dir.join("decomposition.json"));
    assert_eq!(report["decomposition"]["d"], 2);
    assert_eq!(report["alpha_at_horizon"], 0.0);
    let csv = fs::read_to_string(out_dir.join("alpha.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n,k,m,alpha"));
    assert_eq!(csv.lines().count(), 1 + 10 * 2);
}

#[test]
fn lazy_certificate_has_margin_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "lazy.json", &lazy_model(50));
    let out_dir = dir.path().join("out");
    let out = run(&[
        "certify",
        "--model",
        &model,
        "--kind",
        "lazy",
        "--strict",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let cert = read_json(&out_dir.join("certificate.json"));
    assert_eq!(cert["valid"], true);
    assert!((cert["margin"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!(String::from_utf8_lossy(&out.stdout).contains("strict       true"));
}

#[test]
fn non_strict_certificate_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        dir.path(),
        "cycle.json",
        &json!({"variant": "explicit", "rows": [[0, 1], [1, 0]]}),
    );
    let out_dir = dir.path().join("out");
    let base = [
        "certify",
        "--model",
        &model,
        "--kind",
        "lyapunov",
        "--ek",
        "0",
        "--out",
        out_dir.to_str().unwrap(),
    ];
    assert_eq!(run(&base).status.code(), Some(0));
    let strict = run(&[&base[..], &["--strict"]].concat());
    assert_eq!(strict.status.code(), Some(1));
    assert_eq!(stderr_json(&strict)["error"], "not_strict");
    assert!(out_dir.join("certificate.json").exists());
}

#[test]
fn input_errors_exit_with_two_and_structured_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let bad_sum = write(
        dir.path(),
        "bad.json",
        &json!({"variant": "lazy_chain", "r": [[1.0]], "rho_r": [0.5], "rho_delta": [0.6], "rho_absorb": [0.5]}),
    );
    let out = run(&["qsd", "--model", &bad_sum]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "invariant");
    assert!(err["message"].as_str().unwrap().contains("state 0"));

    let bad_type = write(
        dir.path(),
        "type.json",
        &json!({"variant": "explicit", "rows": [[1.0, "a"]]}),
    );
    let err = stderr_json(&run(&["decompose", "--model", &bad_type]));
    assert_eq!(err["error"], "schema");
    assert_eq!(err["path"], "rows[0][1]");

    let out = run(&["simulate", "--model", &bad_type, "--paths", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["decompose", "--model", "/nonexistent/model.json"]);
    assert_eq!(stderr_json(&out)["error"], "usage");
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");
}

#[test]
fn out_of_range_options_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "lazy.json", &lazy_model(4));
    let generator = write(
        dir.path(),
        "gen.json",
        &json!({"variant": "generator", "rates": [[-1.0, 1.0], [0.5, -0.5]]}),
    );
    for args in [
        vec!["qsd", "--model", &model, "--start", "4"],
        vec!["qsd", "--model", &model, "--horizon", "0"],
        vec!["simulate", "--model", &model, "--paths", "0"],
        vec!["certify", "--model", &model, "--kind", "lyapunov"],
        vec![
            "certify", "--model", &model, "--kind", "lyapunov", "--ek", "0,9",
        ],
        vec!["semigroup", "--model", &generator, "--tol", "0.5"],
        vec!["semigroup", "--model", &generator, "--time", "-1"],
        vec!["semigroup", "--model", &model],
        vec!["decompose", "--model", &generator],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(stderr_json(&out)["error"], "usage", "{args:?}");
    }
}

#[test]
fn qsd_and_simulation_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "lazy.json", &lazy_model(10));
    let out_dir = dir.path().join("out");
    let out_str = out_dir.to_str().unwrap();
    assert!(
        run(&["qsd", "--model", &model, "--horizon", "8", "--out", out_str])
            .status
            .success()
    );
    let report = read_json(&out_dir.join("qsd.json"));
    let masses = report["qsds"][0]["masses"].as_array().unwrap();
    assert!(masses
        .iter()
        .all(|m| (m.as_f64().unwrap() - 0.1).abs() < 1e-12));
    assert!(report["qsds"][0]["residual"].as_f64().unwrap() < 1e-12);
    let rows = fs::read_to_string(out_dir.join("conditioned.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 9 * 10);

    assert!(run(&[
        "simulate",
        "--model",
        &model,
        "--horizon",
        "5",
        "--paths",
        "1000",
        "--out",
        out_str
    ])
    .status
    .success());
    let sim = read_json(&out_dir.join("simulation.json"));
    assert_eq!(sim["paths"], 1000);
    let survival = fs::read_to_string(out_dir.join("simulation.csv")).unwrap();
    assert_eq!(survival.lines().nth(1), Some("0,1.0000000000000000e0"));
}

#[test]
fn simulate_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "lazy.json", &lazy_model(20));
    let outputs: Vec<Vec<u8>> = ["a", "b"]
        .iter()
        .map(|sub| {
            let out_dir = dir.path().join(sub);
            let args = [
                "simulate",
                "--model",
                &model,
                "--paths",
                "5000",
                "--seed",
                "3",
                "--out",
                out_dir.to_str().unwrap(),
            ];
            assert!(run(&args).status.success());
            ["simulation.csv", "simulation_law.csv", "simulation.json"]
                .iter()
                .flat_map(|f| fs::read(out_dir.join(f)).unwrap())
                .collect()
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn semigroup_command_reports_flow_and_propagation() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(
        dir.path(),
        "gen.json",
        &json!({"variant": "generator", "rates": [[-1.0, 1.0], [1.0, -1.0]], "weights": [1.0, 2.0]}),
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "semigroup",
        "--model",
        &model,
        "--propagate",
        "0.5,1.0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read_json(&out_dir.join("semigroup.json"));
    assert_eq!(report["report"]["decomposition"]["d"], 1);
    assert_eq!(report["propagation"]["consistent"], true);
    assert!(report["report"]["max_flow_residual"].as_f64().unwrap() <= 1e-8);
    let flow = fs::read_to_string(out_dir.join("flow.csv")).unwrap();
    assert_eq!(flow.lines().next(), Some("h,residual"));
    assert!(out_dir.join("alpha_t.csv").exists());
}

#[test]
fn birth_death_file_gives_tridiagonal_kernel() {
    let n = 400;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let up: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.4)).collect();
    let down: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.4)).collect();
    let kill: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.1)).collect();
    let doc = json!({"variant": "birth_death", "up": up, "down": down, "kill": kill});
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bd.json");
    fs::write(&path, doc.to_string()).unwrap();
    let p = load_model(&path).unwrap().kernel().unwrap();
    assert_eq!(p.dim(), n);
    for x in 0..n {
        for y in 0..n {
            let v = p.get(x, y);
            if x.abs_diff(y) > 1 {
                assert_eq!(v, 0.0);
            }
        }
        if x + 1 < n {
            assert_eq!(p.get(x, x + 1), up[x]);
        }
        if x > 0 {
            assert_eq!(p.get(x, x - 1), down[x]);
        }
        // Stay mass is whatever remains after moves and killing.
        let stay = 1.0 - up[x] - down[x] - kill[x];
        assert!((p.get(x, x) - stay).abs() < 1e-15);
    }
}

#[test]
fn serialized_models_round_trip_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let n = rng.random_range(1..6);
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..4.0)).collect();
        let rho_absorb: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.3)).collect();
        let rho_delta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.3)).collect();
        let rho_r: Vec<f64> = (0..n).map(|x| 1.0 - rho_absorb[x] - rho_delta[x]).collect();
        let r: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0 / n as f64; n]).collect();
        let lazy = ModelFile::Absorbed(
            AbsorbedModel::new(ModelVariant::LazyChain(LazyChain {
                r,
                rho_r,
                rho_delta,
                rho_absorb,
            }))
            .with_weights(weights.clone()),
        );
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(0.0..0.2)).collect())
            .collect();
        let explicit = ModelFile::Absorbed(AbsorbedModel::new(ModelVariant::Explicit { rows }));
        let mut rates: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(0.0..2.0)).collect())
            .collect();
        for (x, row) in rates.iter_mut().enumerate() {
            row[x] = 0.0;
            row[x] = -row.iter().sum::<f64>() - rng.random_range(0.0..1.0);
        }
        let generator = ModelFile::generator(GeneratorModel {
            rates,
            weights: Some(weights),
        });
        for m in [lazy, explicit, generator] {
            if m.validate().is_err() {
                continue;
            }
            assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
        }
    }
}
