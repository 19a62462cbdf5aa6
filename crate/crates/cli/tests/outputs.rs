//! Artifact-level checks on a scenario run: deterministic re-runs and a
//! manifest that matches the directory contents.

use std::collections::BTreeSet;
use std::fs;

use qmpc_cli::config::QubitConfig;
use qmpc_cli::scenarios::{self, RunContext};

fn run_into(dir: &std::path::Path) {
    let ctx = RunContext { out_dir: dir, seed: 0 };
    scenarios::qubit::run(&QubitConfig::default(), &ctx).expect("scenario run");
}

fn file_names(dir: &std::path::Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .expect("read dir")
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect()
}

#[test]
fn reruns_are_byte_identical_except_for_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_into(&a);
    run_into(&b);
    assert_eq!(file_names(&a), file_names(&b));
    for name in file_names(&a) {
        let left = fs::read(a.join(&name)).unwrap();
        let right = fs::read(b.join(&name)).unwrap();
        if name == "manifest.json" {
            // The manifest embeds a wall-clock duration; everything else in
            // it must agree.
            let strip = |bytes: &[u8]| -> String {
                String::from_utf8(bytes.to_vec())
                    .unwrap()
                    .lines()
                    .filter(|l| !l.contains("wall_clock_ms"))
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            assert_eq!(strip(&left), strip(&right), "manifest differs");
        } else {
            assert_eq!(left, right, "{name} differs between identical runs");
        }
    }
}

#[test]
fn manifest_lists_exactly_the_emitted_files() {
    let tmp = tempfile::tempdir().unwrap();
    run_into(tmp.path());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap())
            .unwrap();
    let listed: BTreeSet<String> = manifest["files"]
        .as_array()
        .expect("files array")
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert_eq!(listed, file_names(tmp.path()));
    assert!(listed.contains("manifest.json"));
    assert!(listed.contains("summary.json"));
    assert!(listed.iter().any(|f| f.ends_with(".csv")));
    assert!(listed.iter().any(|f| f.ends_with(".svg")));
}
