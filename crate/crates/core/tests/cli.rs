mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixtures;
use serde_json::Value;

fn netspec(data_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netspec"))
        .arg("--config")
        .arg(fixtures().join("netspec.json"))
        .args(args)
        .env("NETSPEC_DATA_DIR", data_dir)
        .env_remove("NETSPEC_RANGES_FILE")
        .env_remove("NETSPEC_TEMPLATE_DIR")
        .env_remove("NETSPEC_DEFAULT_GENERATOR")
        .output()
        .unwrap()
}

fn seed_path() -> String {
    fixtures().join("seed_use_cases.json").display().to_string()
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn init_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let first = netspec(dir.path(), &["--json", "init", "--seed", &seed_path()]);
    assert_eq!(first.status.code(), Some(0));
    let v = json_stdout(&first);
    assert_eq!(v["published"], 7);
    let second = netspec(dir.path(), &["--json", "init", "--seed", &seed_path()]);
    let v = json_stdout(&second);
    assert_eq!(v["published"], 0);
    assert_eq!(v["unchanged"], 7);
}

#[test]
fn init_reports_invalid_entries() {
    let dir = tempfile::tempdir().unwrap();
    let mut seed: Value = serde_json::from_str(&std::fs::read_to_string(seed_path()).unwrap()).unwrap();
    seed[1]["processes"][0]["specification"]["latency_ms"] = Value::from(0.001);
    let path = dir.path().join("seed.json");
    std::fs::write(&path, seed.to_string()).unwrap();
    let data = dir.path().join("data");
    let out = netspec(&data, &["--json", "init", "--seed", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = json_stdout(&out);
    assert_eq!(v["published"], 6);
    assert_eq!(v["invalid"], 1);
    assert_eq!(v["items"][1]["result"], "invalid");
    assert!(v["items"][1]["detail"].as_str().unwrap().contains("latency_ms"));

    let out = netspec(&data, &["init", "--seed", path.to_str().unwrap(), "--skip-invalid"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn query_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    assert!(netspec(dir.path(), &["init", "--seed", &seed_path()]).status.success());
    let args = [
        "query",
        "--name",
        "Remote mining truck",
        "--description",
        "A driverless mining truck streams video to a remote operator who can take over control.",
        "--n",
        "4",
    ];
    let a = netspec(dir.path(), &args);
    let b = netspec(dir.path(), &args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v = json_stdout(&a);
    assert_eq!(v["similar_use_cases"]["hits"].as_array().unwrap().len(), 4);
    assert_eq!(v["processes"].as_array().unwrap().len(), 3);
    assert_eq!(v["validation"]["valid"], true);
    assert!(String::from_utf8_lossy(&a.stderr).contains("Latency"));
}

#[test]
fn ingest_queues_drafts_for_moderation() {
    let dir = tempfile::tempdir().unwrap();
    let doc = fixtures().join("smart_port.txt");
    let out = netspec(dir.path(), &["--json", "ingest", doc.to_str().unwrap(), "--document-id", "port"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_stdout(&out);
    assert_eq!(v["document_id"], "port");
    assert_eq!(v["drafts"].as_array().unwrap().len(), 2);

    let export = dir.path().join("export.json");
    assert!(netspec(dir.path(), &["export", export.to_str().unwrap()]).status.success());
    let snap: Value = serde_json::from_str(&std::fs::read_to_string(&export).unwrap()).unwrap();
    assert_eq!(snap["contributions"].as_array().unwrap().len(), 2);
    assert!(snap["use_cases"]
        .as_array()
        .unwrap()
        .iter()
        .all(|u| u["status"] == "pending_review"));
}

#[test]
fn export_import_round_trip() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(netspec(a.path(), &["init", "--seed", &seed_path()]).status.success());
    let snap = a.path().join("snap.json");
    assert!(netspec(a.path(), &["export", snap.to_str().unwrap()]).status.success());
    let out = netspec(b.path(), &["--json", "import", snap.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_stdout(&out)["use_cases"], 7);
    let again = netspec(b.path(), &["--json", "init", "--seed", &seed_path()]);
    assert_eq!(json_stdout(&again)["unchanged"], 7);
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = netspec(dir.path(), &["--json", "import", "/nonexistent/snap.json"]);
    assert_eq!(missing.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&missing.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");

    let truncated = dir.path().join("bad.json");
    std::fs::write(&truncated, "{\"schema_version\": 1, \"use_cases\": [").unwrap();
    let out = netspec(dir.path(), &["import", truncated.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "  \n").unwrap();
    assert_eq!(netspec(dir.path(), &["ingest", empty.to_str().unwrap()]).status.code(), Some(1));

    let out = netspec(dir.path(), &["query", "--description", ""]);
    assert_eq!(out.status.code(), Some(1));

    let out = Command::new(env!("CARGO_BIN_EXE_netspec")).arg("bogus").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn serve_answers_health_and_stops_on_sigterm() {
    let dir = tempfile::tempdir().unwrap();
    assert!(netspec(dir.path(), &["init", "--seed", &seed_path()]).status.success());
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let listen = format!("127.0.0.1:{port}");
    let mut child = Command::new(env!("CARGO_BIN_EXE_netspec"))
        .arg("--config")
        .arg(fixtures().join("netspec.json"))
        .args(["serve", "--listen", &listen])
        .env("NETSPEC_DATA_DIR", dir.path())
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let url = format!("http://{listen}/api/v1/health");
    let mut body = None;
    for _ in 0..100 {
        if let Ok(r) = reqwest::blocking::get(&url) {
            body = Some(r.json::<Value>().unwrap());
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    let body = body.expect("server came up");
    assert_eq!(body["published"], 7);
    let _ = Command::new("kill").args(["-TERM", &child.id().to_string()]).status();
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(0));
}
