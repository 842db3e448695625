use std::fs;
use std::process::{Command, Output};

fn qconsist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qconsist"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn without_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').unwrap().0)
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn bounds_example() {
    let o = qconsist(&[
        "bounds", "--mode", "grfcq", "--n", "4", "--eps0", "0.5", "--eta", "0.1", "--delta", "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "207\n");
    assert!(o.stderr.is_empty());
}

#[test]
fn decay_with_config_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(
        &cfg,
        "# small sweep\nn = 3\nm_list = 16,32\ntrials = 4\ndirections = 32\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let a = qconsist(&["decay", "--config", cfg, "--seed", "7"]);
    let b = qconsist(&["decay", "--config", cfg, "--seed", "7", "--threads", "1"]);
    assert_eq!(a.status.code(), Some(0));
    let (a, b) = (stdout(&a), stdout(&b));
    assert!(a.starts_with("mode,N,K,M,r,trial,seed,value,baseline,wall_ms\n"));
    assert_eq!(a.lines().count(), 1 + 2 * 4);
    assert!(!a.contains('\r'));
    assert_eq!(without_wall_time(&a), without_wall_time(&b));
    let c = qconsist(&["decay", "--config", cfg, "--seed", "8"]);
    assert_ne!(without_wall_time(&a), without_wall_time(&stdout(&c)));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "m_list = 16\ntrials = 2\n").unwrap();
    let o = qconsist(&["noise", "--config", cfg.to_str().unwrap(), "--trials", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1 + 3);
}

#[test]
fn invalid_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "trials = 2\nwidth = 3\n").unwrap();
    for args in [
        vec!["decay", "--config", cfg.to_str().unwrap()],
        vec!["decay", "--trials", "many"],
        vec!["decay", "--delta", "-1"],
        vec!["bounds", "--mode", "qcs"],
        vec!["frobnicate"],
        vec!["decay", "--config", "/nonexistent/c.cfg"],
    ] {
        let o = qconsist(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn help_lists_keys_with_defaults() {
    for (sub, keys) in [
        (
            "decay",
            &["--n", "--k", "--m-list", "--trials", "--directions", "--delta", "--eta"][..],
        ),
        ("relaxed", &["--r", "--m-list"][..]),
        ("bias", &["--lambda", "--m-list"][..]),
        ("buffon", &["--dims", "--alphas", "--throws"][..]),
        ("bounds", &["--mode", "--eps0", "--eta", "--rho"][..]),
        ("noise", &["--trials"][..]),
        ("sense", &["--m", "--dump"][..]),
        ("reconstruct", &["--method", "--radius"][..]),
        ("check", &["--quick", "--full"][..]),
    ] {
        let o = qconsist(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        for key in ["--seed", "--threads", "--out", "--config"].iter().chain(keys) {
            assert!(text.contains(key), "{sub} help lacks {key}");
        }
        assert!(text.contains("[default:"));
    }
}

#[test]
fn sense_dump_round_trips_through_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("e.bin");
    let o = qconsist(&[
        "sense",
        "--m",
        "60",
        "--n",
        "3",
        "--seed",
        "5",
        "--dump",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let sensed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let bytes = fs::read(&dump).unwrap();
    assert_eq!(bytes.len(), 32 + 8 * (60 * 3 + 60));
    assert_eq!(u64::from_le_bytes(bytes[..8].try_into().unwrap()), 60);
    let codes: Vec<String> = sensed["codes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.to_string())
        .collect();
    let o = qconsist(&[
        "reconstruct",
        "--ensemble",
        dump.to_str().unwrap(),
        "--codes",
        &codes.join(","),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rec: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rec["consistent"], true);
    let err: f64 = sensed["x"]
        .as_array()
        .unwrap()
        .iter()
        .zip(rec["x_star"].as_array().unwrap())
        .map(|(a, b)| (a.as_f64().unwrap() - b.as_f64().unwrap()).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(err < 0.2, "{err}");
}

#[test]
fn quick_check_exit_status_and_thread_independence() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("t1");
    let three = dir.path().join("t3");
    let a = qconsist(&["check", "--quick", "--threads", "1", "--out", one.to_str().unwrap()]);
    let b = qconsist(&["check", "--quick", "--threads", "3", "--out", three.to_str().unwrap()]);
    for o in [&a, &b] {
        assert!(matches!(o.status.code(), Some(0) | Some(2)));
        let text = stdout(o);
        assert_eq!(text.lines().count(), 13);
        assert!(text.lines().all(|l| l.starts_with("PASS") || l.starts_with("FAIL")));
    }
    let mut csvs = 0;
    for entry in fs::read_dir(&one).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_str().unwrap().ends_with(".csv") {
            let x = fs::read_to_string(one.join(&name)).unwrap();
            let y = fs::read_to_string(three.join(&name)).unwrap();
            assert_eq!(without_wall_time(&x), without_wall_time(&y), "{name:?}");
            csvs += 1;
        }
    }
    assert!(csvs >= 5);
}
