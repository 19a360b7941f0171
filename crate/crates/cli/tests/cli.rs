use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_predictability"));
    cmd.env_remove("PREDICTABILITY_DATA_DIR");
    cmd
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = run(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json_file(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1, "{text}");
    serde_json::from_str(text.trim_end()).unwrap()
}

#[test]
fn bound_for_privamov_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["bound", "--entropy", "6.63", "--locations", "2651"], dir.path());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["pi_max"].as_f64().unwrap() - 0.505).abs() < 1e-3, "{v}");
    assert_eq!(v["N"], 2651);
}

#[test]
fn synth_piped_into_entropy_recovers_rate() {
    let dir = tempfile::tempdir().unwrap();
    let mut synth = bin()
        .args(["synth", "markov", "--states", "10", "--n", "100000", "--seed", "7", "--oracle", "oracle.json"])
        .current_dir(dir.path())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let entropy = bin()
        .args(["entropy", "--mode", "kontoyiannis"])
        .current_dir(dir.path())
        .stdin(synth.stdout.take().unwrap())
        .output()
        .unwrap();
    assert!(synth.wait().unwrap().success());
    assert!(entropy.status.success(), "{}", String::from_utf8_lossy(&entropy.stderr));

    let oracle = json_file(&dir.path().join("oracle.json"));
    let rate = oracle["oracle"]["entropy_rate"].as_f64().unwrap();
    assert_eq!(oracle["oracle"]["ergodicity"], "ergodic");
    let report: Value = serde_json::from_slice(&entropy.stdout).unwrap();
    let user = &report["users"][0];
    let est = user["S_real_kontoyiannis"].as_f64().unwrap();
    assert!((est - rate).abs() < 0.15, "estimate {est} vs rate {rate}");
    assert_eq!(user["n"], 100_000);
    for key in ["N", "S_rand", "S_unc", "S_real_paper", "lambda_histogram"] {
        assert!(!user[key].is_null(), "missing {key}");
    }
}

#[test]
fn empty_sequence_file_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = run(&["entropy", "--input", "empty.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "data");
    assert!(err["file"].as_str().unwrap().contains("empty.csv"), "{err}");

    std::fs::write(dir.path().join("header.csv"), "user_id,timestamp,symbol\n").unwrap();
    let out = run(&["entropy", "--input", "header.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("header.csv"));

    let out = run(&["entropy", "--input", "missing.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_json(&out)["file"].as_str().unwrap().contains("missing.csv"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["entropy", "--bogus"],
        vec!["frobnicate"],
        vec!["predict", "--model", "lstm"],
        vec!["predict", "--warmup-frac", "1.5"],
        vec!["bound", "--entropy", "2.0"],
        vec!["mi", "--dmax", "0"],
        vec!["bound", "--entropy", "5", "--locations", "4"],
    ] {
        let out = run(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(stderr_json(&out)["error"], "usage");
    }
    assert!(run(&["--help"], dir.path()).status.success());
    assert!(run(&["mi", "--help"], dir.path()).status.success());
}

#[test]
fn outputs_are_deterministic_and_carry_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "grammar", "--depth", "13", "--seed", "3", "-o", "g.csv"], d);
    ok(&["synth", "markov", "--states", "5", "--n", "3000", "--seed", "1", "--user", "m", "-o", "m.csv"], d);
    let mut both = std::fs::read_to_string(d.join("g.csv")).unwrap();
    both.extend(std::fs::read_to_string(d.join("m.csv")).unwrap().lines().skip(1).map(|l| format!("{l}\n")));
    std::fs::write(d.join("both.csv"), both).unwrap();

    ok(&["entropy", "-i", "both.csv", "-o", "e1.json", "--jobs", "1"], d);
    ok(&["entropy", "-i", "both.csv", "-o", "e2.json", "--jobs", "4"], d);
    let strip = |p: &str| {
        let mut v = json_file(&d.join(p));
        v.as_object_mut().unwrap().remove("manifest");
        v
    };
    assert_eq!(strip("e1.json"), strip("e2.json"));
    let users: Vec<_> = strip("e1.json")["users"].as_array().unwrap().iter().map(|u| u["user"].clone()).collect();
    assert_eq!(users, ["m", "synthetic"]);

    ok(&["mi", "-i", "g.csv", "--dmax", "32", "-o", "mi1.csv", "--jobs", "1"], d);
    ok(&["mi", "-i", "g.csv", "--dmax", "32", "-o", "mi2.csv", "--jobs", "3"], d);
    assert_eq!(std::fs::read(d.join("mi1.csv")).unwrap(), std::fs::read(d.join("mi2.csv")).unwrap());

    ok(&["predict", "-i", "m.csv", "--model", "hmm:k3", "--seed", "5", "-o", "p1.json"], d);
    ok(&["predict", "-i", "m.csv", "--model", "hmm:k3", "--seed", "5", "-o", "p2.json"], d);
    assert_eq!(strip("p1.json"), strip("p2.json"));

    let e1 = json_file(&d.join("e1.json"));
    assert_eq!(e1["manifest"], "e1.json.manifest.json");
    let manifest = json_file(&d.join("e1.json.manifest.json"));
    assert_eq!(manifest["inputs"][0]["path"], "both.csv");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"][0]["path"], "e1.json");
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(manifest["command_line"].as_array().unwrap().iter().any(|a| a == "--jobs"));
    assert_eq!(json_file(&d.join("p1.json.manifest.json"))["seed"], 5);
}

fn plt(lines: &[(f64, f64, &str)]) -> String {
    let mut s = String::from("Geolife trajectory\nWGS 84\nAltitude is in Feet\nReserved 3\n0,2,255,My Track,0,0,2,8421376\n0\n");
    for (lat, lon, time) in lines {
        s.push_str(&format!("{lat},{lon},0,492,39744.1201851852,2008-10-23,{time}\n"));
    }
    s
}

#[test]
fn ingest_geolife_layout() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Home, then work 3 km north, then home again; ten minutes or more each.
    let mut fixes = Vec::new();
    for (site, start) in [((39.90, 116.30), 2), ((39.93, 116.30), 20), ((39.90, 116.30), 40)] {
        for k in 0..12 {
            fixes.push((site.0, site.1, format!("02:{:02}:00", start + k)));
        }
    }
    for user in ["000", "001"] {
        let traj = d.join("Data").join(user).join("Trajectory");
        std::fs::create_dir_all(&traj).unwrap();
        let rows: Vec<_> = fixes.iter().map(|(a, b, t)| (*a, *b, t.as_str())).collect();
        std::fs::write(traj.join("20081023020000.plt"), plt(&rows)).unwrap();
    }
    ok(&["ingest", "-i", "Data", "-o", "seq.csv"], d);
    let text = std::fs::read_to_string(d.join("seq.csv")).unwrap();
    let expected = "user_id,timestamp,symbol\n\
                    000,1224727320,0\n000,1224728400,1\n000,1224729600,0\n\
                    001,1224727320,0\n001,1224728400,1\n001,1224729600,0\n";
    assert_eq!(text, expected);
    let sidecar = json_file(&d.join("seq.csv.json"));
    assert_eq!(sidecar["N"], 2);
    assert_eq!(sidecar["n"], 6);
    assert_eq!(sidecar["sampling"], "visits");
    assert_eq!(sidecar["grid"]["cell_size"], 250.0);
    assert!(sidecar["users"][0]["radius_of_gyration_m"].as_f64().unwrap() > 1000.0);

    ok(&["ingest", "-i", "Data", "-o", "raw.csv", "--sampling", "samples"], d);
    assert_eq!(std::fs::read_to_string(d.join("raw.csv")).unwrap().lines().count(), 1 + 2 * 36);

    let out = ok(&["dwell", "-i", "Data", "--raw"], d);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("user,dwell_s"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",660")), "{text}");
}

#[test]
fn data_dir_resolves_relative_inputs() {
    let data = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    std::fs::write(data.path().join("s.csv"), "user_id,timestamp,symbol\nu,,1\nu,,2\nu,,1\nu,,2\n").unwrap();
    let out = bin()
        .args(["entropy", "-i", "s.csv"])
        .env("PREDICTABILITY_DATA_DIR", data.path())
        .current_dir(work.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(run(&["entropy", "-i", "s.csv"], work.path()).status.code(), Some(3));
}

#[test]
fn report_and_batch_bound_aggregate_users() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("user_id,timestamp,symbol\n");
    for (u, seed) in [("a", 1u64), ("b", 2)] {
        let out = ok(&["synth", "markov", "--states", "4", "--n", "2000", "--seed", &seed.to_string(), "--user", u], d);
        csv.extend(String::from_utf8(out.stdout).unwrap().lines().skip(1).map(|l| format!("{l}\n")));
    }
    csv.push_str("c,,7\n");
    std::fs::write(d.join("s.csv"), csv).unwrap();
    ok(&["entropy", "-i", "s.csv", "-o", "e.json"], d);
    let e = json_file(&d.join("e.json"));
    assert_eq!(e["users"].as_array().unwrap().len(), 2);
    assert_eq!(e["skipped_users"][0], "c");

    ok(&["predict", "-i", "s.csv", "--model", "markov:k1", "-o", "p.json"], d);
    ok(&["report", "--entropy", "e.json", "--predict", "p.json", "-o", "r.json"], d);
    let r = json_file(&d.join("r.json"));
    assert_eq!(r["summary"]["users"], 2);
    assert_eq!(r["summary"]["dataset"], "e");
    assert_eq!(r["predictors"][0]["model"], "markov:k1");
    assert_eq!(r["predictors"][0]["users"], 2);
    assert!(r["users"][1]["accuracy"]["markov:k1"].as_f64().is_some());

    let out = ok(&["bound", "-i", "e.json"], d);
    let b: Value = serde_json::from_slice(&out.stdout).unwrap();
    for (row, user) in b["users"].as_array().unwrap().iter().zip(e["users"].as_array().unwrap()) {
        assert_eq!(row["user"], user["user"]);
        assert!((row["pi_max"].as_f64().unwrap() - user["pi_max"].as_f64().unwrap()).abs() < 1e-12);
    }
}

#[test]
fn fit_reads_named_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut f = std::fs::File::create(dir.path().join("x.csv")).unwrap();
    writeln!(f, "user,dwell_s").unwrap();
    // Inverse-CDF Pareto sample with alpha 2.5 and x_min 1.
    for i in 0..4000 {
        let u = (i as f64 + 0.5) / 4000.0;
        writeln!(f, "u,{}", (1.0 - u).powf(-1.0 / 1.5)).unwrap();
    }
    drop(f);
    let out = ok(&["fit", "-i", "x.csv", "--xmin", "1"], dir.path());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["column"], "dwell_s");
    assert!((v["alpha"].as_f64().unwrap() - 2.5).abs() < 0.05, "{v}");

    let out = run(&["fit", "-i", "x.csv", "--column", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}
