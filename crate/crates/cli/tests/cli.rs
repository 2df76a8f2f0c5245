use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fracdg::fractional::{cache_file_name, write_operator, FractionalOperator, DEFAULT_ASSEMBLY_TOLERANCE};
use fracdg::mesh::Mesh;
use serde_json::Value;
use sha2::{Digest, Sha256};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fracdg-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn fracdg(args: &[&str], cache: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fracdg"));
    cmd.args(args).env_remove("FRACDG_CACHE_DIR");
    if let Some(c) = cache {
        cmd.env("FRACDG_CACHE_DIR", c);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn summary(out: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Checks the `required` keys of every object schema reachable through `properties` and `$ref`.
fn conforms(value: &Value, schema: &Value, root: &Value) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r.trim_start_matches("#/$defs/");
        return conforms(value, &root["$defs"][name], root);
    }
    if let Some(options) = schema.get("anyOf").or_else(|| schema.get("oneOf")).and_then(Value::as_array) {
        let errors: Vec<String> = options.iter().filter_map(|s| conforms(value, s, root).err()).collect();
        return if errors.len() < options.len() { Ok(()) } else { Err(errors.join("; ")) };
    }
    if schema.get("type").and_then(Value::as_str) == Some("null") {
        return if value.is_null() { Ok(()) } else { Err("expected null".into()) };
    }
    if let Some(req) = schema.get("required").and_then(Value::as_array) {
        let obj = value.as_object().ok_or("expected an object")?;
        for key in req.iter().filter_map(Value::as_str) {
            if !obj.contains_key(key) {
                return Err(format!("missing key `{key}`"));
            }
        }
    }
    if let (Some(props), Some(obj)) = (schema.get("properties").and_then(Value::as_object), value.as_object()) {
        if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
            if let Some(extra) = obj.keys().find(|k| !props.contains_key(*k)) {
                return Err(format!("unexpected key `{extra}`"));
            }
        }
        for (k, sub) in props {
            if let Some(v) = obj.get(k) {
                conforms(v, sub, root).map_err(|e| format!("{k}: {e}"))?;
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for v in arr {
            conforms(v, items, root)?;
        }
    }
    Ok(())
}

fn assert_schema(out: &Path) {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/summary.schema.json")).unwrap();
    conforms(&summary(out), &schema, &schema).unwrap();
}

#[test]
fn minimal_config_echoes_defaults() {
    let dir = scratch("minimal");
    let cfg = write(&dir, "run.toml", "[problem]\nflux = \"linear\"\nlambda = 0.5\nT = 0.5\n\n[discretization]\nk = 1\nN = 64\n");
    let out = dir.join("out");
    let o = fracdg(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&out);
    assert_eq!(s["config"]["discretization"]["cfl"], 0.1);
    assert_eq!(s["config"]["discretization"]["N"], 64);
    let defaults: Vec<&str> = s["defaults"].as_array().unwrap().iter().filter_map(Value::as_str).collect();
    assert!(defaults.contains(&"discretization.cfl") && !defaults.contains(&"problem.lambda"));
    assert!(s["result"]["errors"]["l2_error"].as_f64().unwrap() < 1e-2);
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n,t,mass,l2,seminorm"));
    assert_schema(&out);
}

#[test]
fn out_of_range_lambda_is_rejected() {
    let dir = scratch("lambda");
    let out = dir.join("out");
    let o = fracdg(&["solve", "--lambda", "1.5", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("problem.lambda") && e.contains("(0,1)"), "{e}");
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_named() {
    let dir = scratch("unknown");
    let cfg = write(&dir, "run.toml", "[discretization]\nk = 1\nmesh_size = 3\n");
    let o = fracdg(&["solve", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mesh_size"), "{}", stderr(&o));
}

#[test]
fn flags_take_precedence_over_the_file() {
    let dir = scratch("precedence");
    let cfg = write(&dir, "run.toml", "[discretization]\nk = 1\nN = 16\n[problem]\nT = 0.1\n");
    let out = dir.join("out");
    let o = fracdg(&["solve", "--config", &cfg, "--k", "2", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&out);
    assert_eq!(s["config"]["discretization"]["k"], 2);
    assert_eq!(s["result"]["errors"]["k"], 2);
}

#[test]
fn reruns_are_byte_identical() {
    // First run fills the operator cache, the second reads it.
    let dir = scratch("determinism");
    let cache = scratch("determinism-cache");
    let out = dir.join("out");
    let args = ["convergence", "--grids", "8,16,32", "--T", "0.2", "--out", out.to_str().unwrap(), "--seed", "7"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = fracdg(&args, Some(&cache));
        assert!(o.status.success(), "{}", stderr(&o));
        let m: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
        let files: Vec<(String, Vec<u8>)> = m["files"]
            .as_array()
            .unwrap()
            .iter()
            .map(|f| {
                let name = f["path"].as_str().unwrap().to_string();
                let bytes = std::fs::read(out.join(&name)).unwrap();
                assert_eq!(f["sha256"].as_str().unwrap(), format!("{:x}", Sha256::digest(&bytes)));
                assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
                (name, bytes)
            })
            .collect();
        runs.push(files);
    }
    assert_eq!(runs[0], runs[1]);
    let csv = std::fs::read_to_string(out.join("errors.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(fracdg::analysis::ERROR_CSV_HEADER));
    assert_schema(&out);
}

#[test]
fn single_grid_has_null_eoc() {
    let dir = scratch("single");
    let out = dir.join("out");
    let o = fracdg(&["convergence", "--grids", "16", "--T", "0.1", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&out);
    assert!(s["result"]["energy_eoc"]["rows"][0]["eoc"].is_null());
    assert!(s["result"]["l2_eoc"]["rows"][0]["eoc"].is_null());
    let csv = std::fs::read_to_string(out.join("errors.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(','));
}

#[test]
fn default_diagnostics_pass_for_burgers() {
    let dir = scratch("diag");
    let cfg = write(&dir, "run.toml", "[problem]\nflux = \"burgers\"\nu0 = \"bump\"\nlambda = 0.5\n[discretization]\nN = 32\nk = 1\n");
    let out = dir.join("out");
    let o = fracdg(&["diagnostics", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&out);
    let checks = s["result"]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 4);
    assert!(checks.iter().all(|c| c["status"] != "fail"), "{checks:?}");
    assert_schema(&out);
}

#[test]
fn empty_check_list_succeeds() {
    let dir = scratch("empty");
    let cfg = write(&dir, "run.toml", "[diagnostics]\nchecks = []\n");
    let out = dir.join("out");
    let o = fracdg(&["diagnostics", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(summary(&out)["result"]["checks"].as_array().unwrap().len(), 0);
}

#[test]
fn corrupted_cached_operator_fails_diagnostics() {
    let dir = scratch("fault");
    let cache = scratch("fault-cache");
    let mesh = Mesh::shared(2.0 * std::f64::consts::PI, 32, 1).unwrap();
    let mut op = FractionalOperator::assemble(&mesh, 0.5, DEFAULT_ASSEMBLY_TOLERANCE).unwrap();
    op.perturb_block(0, 0, 0, op.norm_bound());
    write_operator(&op, &cache.join(cache_file_name(&mesh, 0.5, DEFAULT_ASSEMBLY_TOLERANCE))).unwrap();

    let out = dir.join("out");
    let o = fracdg(&["diagnostics", "--grids", "32", "--out", out.to_str().unwrap()], Some(&cache));
    assert_eq!(o.status.code(), Some(1));
    let s = summary(&out);
    assert_eq!(s["pass"], false);
    for c in s["result"]["checks"].as_array().unwrap() {
        // Every check that evolves or samples the operator trips over it.
        match c["name"].as_str().unwrap() {
            "energy_identity" | "inverse_inequality" => assert_eq!(c["status"], "fail", "{c}"),
            "flux_inequalities" => assert_eq!(c["status"], "pass", "{c}"),
            _ => {}
        }
    }
}

#[test]
fn blow_up_names_the_grid_and_fails() {
    let dir = scratch("blowup");
    let out = dir.join("out");
    let o = fracdg(
        &["convergence", "--grids", "8,16", "--cfl", "20", "--T", "40", "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    let s = summary(&out);
    let e = s["error"].as_str().unwrap();
    assert!(e.contains("blew up") && e.contains("N = 8"), "{e}");
    assert!(s["result"].is_null());
    assert_schema(&out);
}

#[test]
fn temporal_and_operator_check_outputs() {
    let dir = scratch("temporal");
    let out = dir.join("t");
    let o = fracdg(&["temporal-order", "--k", "2", "--grids", "16", "--T", "0.2", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("temporal.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(fracdg::analysis::TEMPORAL_CSV_HEADER));
    assert_schema(&out);

    let out = dir.join("o");
    let o = fracdg(&["operator-check", "--grids", "16,32,64", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(summary(&out)["result"]["grids"].as_array().unwrap().len(), 3);
    assert_schema(&out);
}
