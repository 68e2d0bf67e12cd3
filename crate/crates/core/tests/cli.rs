use std::path::Path;
use std::process::{Command, Output};

fn cfwalker(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfwalker"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn report_files_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for path in [&a, &b] {
        let out = cfwalker(&[
            "claims",
            "--claims",
            "weyl_zero,scalar_f2",
            "--family",
            "sim_f2",
            "--samples",
            "10",
            "--json",
            path_str(path),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    // 2 claims x n in {2,3,4}, then the summary
    assert_eq!(lines.len(), 7);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    let keys: Vec<&str> = first
        .as_object()
        .unwrap()
        .keys()
        .map(|k| k.as_str())
        .collect();
    for k in [
        "claim_id",
        "family",
        "n",
        "samples",
        "max_residual",
        "tolerance",
        "pass",
        "elapsed_ms",
        "seed",
    ] {
        assert!(keys.contains(&k), "missing {k}");
    }
    assert!(lines[6].starts_with("{\"summary\""));
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# smoke run\nfamily = gt_original\nsamples = 5\nclaims = weyl_zero\n",
    )
    .unwrap();
    let out = cfwalker(&["claims", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 0);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("gt_original") && table.contains("PASS"));

    std::fs::write(&cfg, "samples = 5\nbogus = 1\n").unwrap();
    let out = cfwalker(&["claims", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn exit_codes() {
    assert_eq!(code(&cfwalker(&["claims", "--claims", ""])), 0);
    assert_eq!(code(&cfwalker(&["claims", "--claims", "no_such_claim"])), 2);
    assert_eq!(
        code(&cfwalker(&["verify", "--family", "no_such_family"])),
        2
    );
    // product needs at least dimension 4: skipped, exit 2
    assert_eq!(
        code(&cfwalker(&[
            "verify",
            "--family",
            "product",
            "--n",
            "2",
            "--samples",
            "3"
        ])),
        2
    );
    // an impossible tolerance makes claims fail
    assert_eq!(
        code(&cfwalker(&[
            "verify",
            "--family",
            "hyp_f4",
            "--n",
            "3",
            "--samples",
            "5",
            "--tol",
            "1e-30"
        ])),
        1
    );
    assert_eq!(code(&cfwalker(&["transform", "sideways"])), 2);
    assert_ne!(code(&cfwalker(&["nonsense"])), 0);
}

#[test]
fn holonomy_and_transform_verbs() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("hol.json");
    let out = cfwalker(&[
        "holonomy",
        "--family",
        "ppwave_f1",
        "--n",
        "3",
        "--json",
        path_str(&json),
    ]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["label"], "null_translations(3)");

    for kind in ["gt", "gauge", "rotation"] {
        let out = cfwalker(&["transform", kind, "--samples", "5"]);
        assert_eq!(
            code(&out),
            0,
            "{kind}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
    }
}
