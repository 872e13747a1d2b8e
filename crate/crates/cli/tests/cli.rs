use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sail(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sail"))
        .args(args)
        .output()
        .expect("spawn sail")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a synthetic world into `dir` and returns its config path.
fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.to_str().unwrap();
    let mut args = vec![
        "synth",
        "--out",
        out,
        "--n-words",
        "150",
        "--test-size",
        "40",
        "--noise",
        "0.2",
    ];
    args.extend_from_slice(extra);
    let o = sail(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    PathBuf::from(stdout(&o).trim())
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn sail_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path(), &["--zero-shot-top", "40", "--n-f", "40"]);
    let out = tmp.path().join("run");
    let o = sail(&[
        "sail",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("de-fr"));
    for name in [
        "dictionary.de-fr.tsv",
        "predictions.de-fr.tsv",
        "predictions.fr-de.tsv",
        "report.tsv",
        "report.txt",
        "manifest.json",
        "run_stats.json",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "sail");
    assert_eq!(manifest["config"]["sail"]["n_frequent"], 40);
    let hash = manifest["config_hash"].as_str().unwrap();
    assert!(read(&out.join("report.tsv")).starts_with(&format!("# config_hash: {hash}\n")));
}

#[test]
fn sail_beats_zero_shot_and_significance_agrees() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(
        tmp.path(),
        &["--zero-shot-top", "20", "--min-shots", "3", "--n-f", "40"],
    );
    let cfg = cfg.to_str().unwrap();
    let zs = tmp.path().join("zs");
    let sl = tmp.path().join("sl");
    assert!(
        sail(&["zero-shot", "--config", cfg, "--out", zs.to_str().unwrap()])
            .status
            .success()
    );
    assert!(
        sail(&["sail", "--config", cfg, "--out", sl.to_str().unwrap()])
            .status
            .success()
    );
    assert!(!zs.join("dictionary.de-fr.tsv").exists());

    let o = sail(&[
        "significance",
        zs.join("report.tsv").to_str().unwrap(),
        sl.join("report.tsv").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let correct = |tag: &str| -> u64 {
        let line = text.lines().find(|l| l.starts_with(tag)).unwrap();
        line[tag.len()..]
            .split('/')
            .next()
            .unwrap()
            .trim()
            .parse()
            .unwrap()
    };
    // zero-shot only knows the top 20 of the 40 test words per side
    assert!(correct("A:") <= 40, "{text}");
    assert!(correct("B:") > correct("A:") + 20, "{text}");
    assert!(text.contains("chi2 = "), "{text}");
}

#[test]
fn significance_from_counts() {
    let o = sail(&["significance", "--counts", "30", "100", "50", "100"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("chi2 = 8.3333"), "{text}");
    assert!(text.contains("p = 3.892e-3"), "{text}");
}

#[test]
fn sweep_writes_curves_and_matches_single_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path(), &["--n-f", "30"]);
    let cfg = cfg.to_str().unwrap();
    let sweep = tmp.path().join("sweep");
    let o = sail(&[
        "sweep",
        "--config",
        cfg,
        "--out",
        sweep.to_str().unwrap(),
        "--n-it-values",
        "0,1,2",
        "--n-f-values",
        "10,30",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let curve = read(&sweep.join("curve_n_it.tsv"));
    let rows: Vec<&str> = curve.lines().skip(2).collect();
    // two directions plus the pooled row per value
    assert_eq!(rows.len(), 9, "{curve}");
    assert!(rows.iter().any(|r| r.starts_with("n_it\t2\tall\t")));
    assert_eq!(read(&sweep.join("curve_n_f.tsv")).lines().count(), 2 + 6);

    let single = tmp.path().join("single");
    let o = sail(&[
        "sail",
        "--config",
        cfg,
        "--n-f",
        "10",
        "--out",
        single.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    for name in [
        "dictionary.de-fr.tsv",
        "predictions.de-fr.tsv",
        "report.tsv",
        "manifest.json",
    ] {
        assert_eq!(
            read(&single.join(name)),
            read(&sweep.join("n_f_10").join(name)),
            "{name}"
        );
    }
}

#[test]
fn zero_shot_prediction_file_golden() {
    let tmp = tempfile::tempdir().unwrap();
    // noise-free world, zero-shot knows only the 10 most frequent words
    let o = sail(&[
        "synth",
        "--out",
        tmp.path().to_str().unwrap(),
        "--n-words",
        "30",
        "--test-size",
        "15",
        "--zero-shot-top",
        "10",
        "--n-f",
        "10",
    ]);
    assert!(o.status.success());
    let cfg = stdout(&o);
    let out = tmp.path().join("zs");
    let o = sail(&[
        "zero-shot",
        "--config",
        cfg.trim(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let text = read(&out.join("predictions.de-fr.tsv"));
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash: "));
    assert_eq!(lines.next(), Some("# direction: de-fr"));
    assert_eq!(lines.next(), Some("source\tpredicted\tstatus\tcorrect"));
    let mut want = Vec::new();
    for i in 0..15 {
        if i < 10 {
            want.push(format!("dew{i:04}\tfrw{i:04}\tok\t1"));
        } else {
            want.push(format!("dew{i:04}\t\tno_candidate_in_vocab\t0"));
        }
    }
    assert_eq!(lines.map(String::from).collect::<Vec<_>>(), want);
    assert!(read(&out.join("report.tsv")).contains("de-fr\t15\t10\t"));
}

#[test]
fn sail_dictionary_golden_on_clean_world() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sail(&[
        "synth",
        "--out",
        tmp.path().to_str().unwrap(),
        "--n-words",
        "25",
        "--test-size",
        "25",
        "--n-f",
        "25",
    ]);
    let cfg = stdout(&o);
    let out = tmp.path().join("run");
    let o = sail(&[
        "sail",
        "--config",
        cfg.trim(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let hash = serde_json::from_str::<serde_json::Value>(&read(&out.join("manifest.json")))
        .unwrap()["config_hash"]
        .as_str()
        .unwrap()
        .to_string();
    let mut want = format!("# pair: de-fr\n# iteration: 1\n# config_hash: {hash}\n");
    for i in 0..25 {
        want += &format!("dew{i:04}\tfrw{i:04}\tboth\t1\n");
    }
    assert_eq!(read(&out.join("dictionary.de-fr.tsv")), want);
    let stats: serde_json::Value =
        serde_json::from_str(&read(&out.join("run_stats.json"))).unwrap();
    assert_eq!(stats["config_hash"], hash.as_str());
    assert!(read(&out.join("report.tsv")).contains("de-fr\t25\t25\t1.0"));
}

#[test]
fn sweep_curves_on_a_helpful_mock() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(
        tmp.path(),
        &["--zero-shot-top", "20", "--min-shots", "3", "--n-f", "20"],
    );
    let cfg = cfg.to_str().unwrap();
    let sweep = tmp.path().join("sweep");
    let o = sail(&[
        "sweep",
        "--config",
        cfg,
        "--out",
        sweep.to_str().unwrap(),
        "--n-it-values",
        "0,1,2,3",
        "--n-f-values",
        "0,20",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pooled = |file: &str, setting: &str| -> Vec<(usize, f64)> {
        read(&sweep.join(file))
            .lines()
            .skip(2)
            .map(|l| l.split('\t').collect::<Vec<_>>())
            .filter(|f| f[0] == setting && f[2] == "all")
            .map(|f| (f[1].parse().unwrap(), f[3].parse().unwrap()))
            .collect()
    };
    let n_it = pooled("curve_n_it.tsv", "n_it");
    assert_eq!(n_it.len(), 4);
    assert!(n_it.windows(2).all(|w| w[0].1 <= w[1].1), "{n_it:?}");
    assert!(n_it[1].1 > n_it[0].1, "{n_it:?}");

    let zs = tmp.path().join("zs");
    assert!(
        sail(&["zero-shot", "--config", cfg, "--out", zs.to_str().unwrap()])
            .status
            .success()
    );
    let n_f = pooled("curve_n_f.tsv", "n_f");
    assert_eq!(n_f[0].0, 0);
    assert_eq!(n_f[0].1, n_it[0].1);
    for name in ["predictions.de-fr.tsv", "predictions.fr-de.tsv"] {
        let strip = |p: PathBuf| read(&p).lines().skip(1).collect::<Vec<_>>().join("\n");
        assert_eq!(
            strip(zs.join(name)),
            strip(sweep.join("n_f_0").join(name)),
            "{name}"
        );
    }
}

#[test]
fn inspect_dict_samples_reproducibly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path(), &["--n-f", "50"]);
    let out = tmp.path().join("run");
    assert!(sail(&[
        "sail",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap()
    ])
    .status
    .success());
    let dict = out.join("dictionary.de-fr.tsv");
    let dict = dict.to_str().unwrap();
    let a = sail(&["inspect-dict", dict, "-k", "5", "--seed", "4"]);
    let b = sail(&["inspect-dict", dict, "-k", "5", "--seed", "4"]);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().count(), 6);

    let all = sail(&["inspect-dict", dict, "-k", "100000"]);
    assert!(all.status.success());
    assert!(stderr(&all).contains("exceeds"));
}

#[test]
fn missing_config_is_a_validation_error() {
    let o = sail(&["sail", "--config", "/nonexistent/config.toml"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_config_values_are_validation_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path(), &[]);
    let cfg = cfg.to_str().unwrap();
    let o = sail(&["sail", "--config", cfg, "--beam", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = sail(&["sail", "--config", cfg, "--template-family", "gpt9"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = sail(&["sweep", "--config", cfg]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let unknown = tmp.path().join("unknown.toml");
    std::fs::write(&unknown, read(Path::new(cfg)) + "\nbogus = 1\n").unwrap();
    let o = sail(&["sail", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unreachable_backend_degrades_to_backend_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth(tmp.path(), &["--n-f", "5"]);
    let wire = read(&cfg)
        .replace(
            "kind = \"mock\"",
            "kind = \"wire\"\nendpoint = \"http://127.0.0.1:1/complete\"",
        )
        .replace("retry_limit = 3", "retry_limit = 0");
    let wire_cfg = tmp.path().join("wire.toml");
    std::fs::write(&wire_cfg, wire).unwrap();
    let out = tmp.path().join("o");
    let o = sail(&[
        "zero-shot",
        "--config",
        wire_cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let preds = read(&out.join("predictions.de-fr.tsv"));
    assert_eq!(
        preds
            .lines()
            .filter(|l| l.contains("\tbackend_error\t"))
            .count(),
        40,
        "{preds}"
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["runs"][0]["backend_failures"], 80);
    assert!(read(&out.join("report.tsv")).contains("de-fr\t40\t0\t"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(sail(&["frobnicate"]).status.code(), Some(2));
}
