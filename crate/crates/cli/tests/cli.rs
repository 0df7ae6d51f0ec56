use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gkm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gkm")).args(args).env("GKM_WORKERS", "1").output().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gkm-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_group_lists_registry() {
    let o = gkm(&["compute", "--group", "Z9"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("unknown group \"Z9\""), "{e}");
    for k in ["A2", "B2", "G2", "SO3", "U2"] {
        assert!(e.contains(k), "{e}");
    }
}

#[test]
fn unknown_central_element_is_usage_error() {
    let o = gkm(&["compute", "--group", "A2", "--c", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nonsense"));
}

#[test]
fn bad_flag_is_usage_error() {
    assert_eq!(gkm(&["compute", "--group", "A2", "--g", "x"]).status.code(), Some(2));
}

#[test]
fn so3_genus_three_text_row() {
    let o = gkm(&["compute", "--group", "SO3", "--g", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("2 + 6t^3 + 6t^6 + 2t^9"), "{out}");
}

#[test]
fn json_row_has_stable_numerator() {
    let o = gkm(&["compute", "--group", "B2", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["group"], "B2");
    assert_eq!(v["stable"], true);
    assert_eq!(v["free"], "yes");
}

#[test]
fn output_flag_writes_file() {
    let p = scratch("row.json", "");
    let o = gkm(&["compute", "--group", "A2", "--format", "json", "--output", p.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["group"], "A2");
}

#[test]
fn perturbed_golden_row_names_row_and_degree() {
    let text = r#"
[[row]]
table = "regular"
type = "A2"
tier = "mandatory"
c = "regular"
expr = "1 + 4t^3 + 5t^4 + 4t^5 + t^8"
numerator-coefficients = [1, 0, 0, 4, 5, 4, 0, 0, 1]
free = true
"#;
    let o = gkm(&["verify", scratch("perturbed.toml", text).to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("regular/A2/g1"), "{out}");
    assert!(out.contains("MISMATCH"), "{out}");
    assert!(out.contains("degree 4: expected 5, computed 6"), "{out}");
}

#[test]
fn golden_json_report_is_machine_readable() {
    let text = r#"
[[row]]
table = "regular"
type = "B2"
tier = "mandatory"
c = "regular"
expr = "1"
numerator-coefficients = ["1/2"]
free = true
"#;
    let o = gkm(&["verify", scratch("half.toml", text).to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let issues = v[0]["issues"].as_array().unwrap();
    assert!(issues.iter().any(|i| i.as_str().unwrap().contains("1/2")), "{v}");
}

#[test]
fn malformed_golden_file_is_usage_error() {
    let o = gkm(&["verify", scratch("bad.toml", "[[row]]\ntable = \"regular\"\ntype = ").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("malformed golden file"));
}

#[test]
fn golden_unknown_field_is_rejected() {
    let text = "[[row]]\ntable = \"regular\"\ntype = \"A2\"\ntier = \"mandatory\"\nc = \"regular\"\nexpr = \"1\"\nnumerator-coefficients = [1]\nfree = true\ncolour = 3\n";
    assert_eq!(gkm(&["verify", scratch("field.toml", text).to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn sheaf_schema_error_reports_pointer() {
    let text = r#"{"monodromy": {"rank": 1, "vertices": ["a", "b"], "fiber_degrees": [0],
        "edges": [{"weight": [2], "source": "a", "target": 7}]}}"#;
    let o = gkm(&["sheaf", scratch("bad.json", text).to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("schema error at /monodromy/edges/0/target"), "{e}");
}

#[test]
fn sheaf_needs_exactly_one_model() {
    let o = gkm(&["sheaf", scratch("empty.json", "{}").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exactly one"));
}

#[test]
fn sheaf_fixture_text_output() {
    let o = gkm(&["sheaf", fixture("sheaves/toric_s2.json").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("numerator: 1 + t^2"), "{out}");
    assert!(out.contains("verdict: free"), "{out}");
}

#[test]
fn mandatory_golden_rows_except_weyl_g2() {
    let o = gkm(&["verify", fixture("golden_tables.toml").to_str().unwrap(), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for r in v.as_array().unwrap() {
        let name = r["row"].as_str().unwrap();
        let status = r["status"].as_str().unwrap();
        match (name, r["tier"].as_str().unwrap()) {
            ("weyl/G2/g1", _) => assert_eq!(status, "mismatch"),
            (_, "mandatory") => assert_eq!(status, "match", "{name}: {r}"),
            _ => assert_eq!(status, "skipped"),
        }
    }
}
