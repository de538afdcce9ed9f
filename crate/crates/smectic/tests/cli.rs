use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_smectic");

// cheap numerical settings shared by the table commands
const COARSE_ZETA: &[&str] = &["--zeta-h", "0.25", "--zeta-r", "6"];
const COARSE_E: &[&str] = &["--ell", "4,5", "--gl-h", "0.25", "--depth", "8", "--max-iter", "2000"];

fn smectic(cache: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .env("SMECTIC_CACHE_DIR", cache)
        .args(args)
        .output()
        .expect("spawn smectic")
}

fn ok(out: Output) -> Vec<u8> {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

const CUBE: &str = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 1 5 8 4\n";

#[test]
fn mesh_info_reports_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("cube.obj");
    std::fs::write(&obj, CUBE).unwrap();
    let csv = String::from_utf8(ok(smectic(dir.path(), &["mesh-info", "--in", obj.to_str().unwrap()]))).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "faces,vertices,area,volume,euler_characteristic");
    let f: Vec<f64> = lines.next().unwrap().split(',').map(|t| t.parse().unwrap()).collect();
    assert_eq!(f[..2], [12.0, 8.0]);
    assert!((f[2] - 6.0).abs() < 1e-12 && (f[3] - 1.0).abs() < 1e-12);
    assert_eq!(f[4], 2.0);
    let json = ok(smectic(dir.path(), &["--format", "json", "mesh-info", "--in", "sphere"]));
    let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(v["faces"], 5120);
    assert_eq!(v["euler_characteristic"], 2);
    let area = v["area"].as_f64().unwrap();
    assert!((area - 4.0 * std::f64::consts::PI).abs() < 0.01 * area);
}

#[test]
fn malformed_mesh_fails_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.obj");
    std::fs::write(&bad, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
    let out_path = dir.path().join("out").join("info.csv");
    let out = smectic(
        dir.path(),
        &["mesh-info", "--in", bad.to_str().unwrap(), "--out", out_path.to_str().unwrap()],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("mesh"));
    assert!(!out_path.exists());
    let out = smectic(
        dir.path(),
        &["smectic-map", "--mesh", bad.to_str().unwrap(), "--b", "1.2", "--no-density", "--out", out_path.to_str().unwrap()],
    );
    assert!(!out.status.success());
    assert!(!out_path.exists());
}

#[test]
fn invalid_arguments_exit_nonzero_with_field_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = smectic(dir.path(), &["e-table", "--b-frak", "1.5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("b_frak"));
    let out = smectic(dir.path(), &["smectic-map", "--mesh", "sphere:1", "--b", "0.9"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--b"));
    let out = smectic(dir.path(), &["zeta-table", "--nu", "100deg"]);
    assert!(!out.status.success());
}

const LDG_CONFIG: &str = r#"
schema_version = 1
seed = 4
kappa = 4.0
b = 1.2
tau = 2.0
K1 = 1.0
K2 = 1.0
K3 = 1.0

[domain]
kind = "ball"
radius = 1.0

[grid]
cells = 8

[stop]
max_steps = 40
window = 5
"#;

#[test]
fn ldg_flow_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, LDG_CONFIG).unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        ok(smectic(dir.path(), &["ldg-flow", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
        let files: Vec<Vec<u8>> = ["energy_trace.csv", "diagnostics.json", "fields.bin"]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);

    let trace = String::from_utf8(outputs[0][0].clone()).unwrap();
    assert!(trace.starts_with("step,total,g,f_plus,l_null\n0,"));
    let totals: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(totals.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));

    let diag: serde_json::Value = serde_json::from_slice(&outputs[0][1]).unwrap();
    assert_eq!(diag["monotone"], true);
    assert!((diag["b"].as_f64().unwrap() - 1.2).abs() < 1e-12);

    let f = smectic::fields::FieldFile::read(&mut outputs[0][2].as_slice()).unwrap();
    assert_eq!(f.dims, [9, 9, 9]);
    assert_eq!(f.psi.len(), 729);
    assert!((f.dx - 0.25).abs() < 1e-15);
    let max_psi = f.psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert_eq!(max_psi, diag["max_psi"].as_f64().unwrap());

    // a different seed changes the result
    let out = dir.path().join("c");
    ok(smectic(
        dir.path(),
        &["--seed", "9", "ldg-flow", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
    ));
    assert_ne!(std::fs::read(out.join("fields.bin")).unwrap(), outputs[0][2]);
}

#[test]
fn ldg_flow_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("typo", LDG_CONFIG.replace("kappa = 4.0", "kapa = 4.0")),
        ("version", LDG_CONFIG.replace("schema_version = 1", "schema_version = 7")),
        ("negative", LDG_CONFIG.replace("K1 = 1.0", "K1 = -1.0")),
        ("unknown-section", format!("{LDG_CONFIG}\n[extra]\nx = 1\n")),
    ] {
        let cfg = dir.path().join(format!("{name}.toml"));
        std::fs::write(&cfg, text).unwrap();
        let out_dir = dir.path().join(name);
        let out = smectic(dir.path(), &["ldg-flow", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert!(!out.status.success(), "{name}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("config") || err.contains('`'), "{name}: {err}");
        assert!(!out_dir.exists(), "{name}");
    }
}

#[test]
fn zeta_table_cache_is_transparent() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let mut args = vec!["zeta-table", "--nu", "0,30deg,1.5707963267948966"];
    args.extend_from_slice(COARSE_ZETA);
    let cold = ok(smectic(&cache, &args));
    let warm = ok(smectic(&cache, &args));
    let mut fresh_args = vec!["--no-cache"];
    fresh_args.extend_from_slice(&args);
    let fresh = ok(smectic(&cache, &fresh_args));
    assert_eq!(cold, warm);
    assert_eq!(cold, fresh);
    let text = String::from_utf8(cold).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "nu_rad,zeta,residual,truncation_err");
    let zetas: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(zetas.len(), 3);
    assert!(zetas.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(std::fs::read_dir(cache.join("zeta")).unwrap().count(), 3);

    // corrupt one entry: rebuilt with identical output
    let entry = std::fs::read_dir(cache.join("zeta")).unwrap().next().unwrap().unwrap().path();
    std::fs::write(&entry, b"garbage").unwrap();
    let out = smectic(&cache, &args);
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt"));
    assert_eq!(ok(out), text.as_bytes());
}

#[test]
fn e_table_and_predict_cache_semantics() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let e_out = dir.path().join("e.csv");
    let mut args = vec!["e-table", "--b-frak", "0.8", "--nu-count", "3", "--out", e_out.to_str().unwrap()];
    args.extend_from_slice(COARSE_E);
    args.extend_from_slice(COARSE_ZETA);
    ok(smectic(&cache, &args));
    let first = std::fs::read(&e_out).unwrap();
    ok(smectic(&cache, &args));
    assert_eq!(std::fs::read(&e_out).unwrap(), first);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("b_frak,nu_rad,ell,d_value,E_estimate,err_bar,converged\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 2);

    // predict: cold cache-only fails, a normal run warms the cache, then
    // cache-only reproduces it exactly
    let mut p = vec!["--format", "json", "predict", "--kappa", "10", "--b", "1.25", "--mesh", "sphere:1", "--budget", "100", "--e-nu-count", "3"];
    p.extend_from_slice(COARSE_E);
    p.extend_from_slice(COARSE_ZETA);
    let mut cached = p.clone();
    cached.push("--cached");
    let cold = smectic(&cache, &cached);
    assert!(!cold.status.success());
    assert!(String::from_utf8_lossy(&cold.stderr).contains("no cached"));
    let computed = ok(smectic(&cache, &p));
    let hit = ok(smectic(&cache, &cached));
    assert_eq!(computed, hit);
    let v: serde_json::Value = serde_json::from_slice(&hit).unwrap();
    let e0 = v["e0"].as_f64().unwrap();
    assert!(e0 <= 0.0);
    assert_eq!(v["energy"].as_f64().unwrap(), 1.25f64.sqrt() * 10.0 * e0);

    // optimize-director from the CSV written above
    let mut o = vec!["--format", "json", "optimize-director", "--mesh", "sphere:1", "--b-frak", "0.8", "--budget", "100", "--e-table", e_out.to_str().unwrap()];
    o.extend_from_slice(COARSE_ZETA);
    let a = ok(smectic(&cache, &o));
    let b = ok(smectic(&cache, &o));
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["quat_star"].as_array().unwrap().len(), 4);
    assert!(v["samples"].as_array().unwrap().len() >= 50);
    let e0 = v["e0"].as_f64().unwrap();
    assert!(v["samples"].as_array().unwrap().iter().all(|s| s[4].as_f64().unwrap() >= e0));
}

#[test]
fn smectic_map_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["smectic-map", "--mesh", "sphere:1", "--b", "1.2", "--quat", "1,0,0,0", "--no-density", "--nu-count", "5"];
    args.extend_from_slice(COARSE_ZETA);
    let text = String::from_utf8(ok(smectic(dir.path(), &args))).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "face_id,nu,zeta,in_region,density");
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 80);
    for r in &rows {
        let zeta: f64 = r[2].parse().unwrap();
        assert_eq!(r[3] == "true", zeta < 1.0 / 1.2);
        assert_eq!(r[4], "");
    }
}
