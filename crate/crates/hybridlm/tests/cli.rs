use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hybridlm::manifest::sha256_hex;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn hybridlm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridlm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(&o),
        stderr(&o)
    );
    o
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn seeds() -> String {
    fixture("seeds.jsonl").display().to_string()
}

#[test]
fn gen_data_mock_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let s = seeds();
    for out in ["a.jsonl", "b.jsonl"] {
        ok(hybridlm(
            dir.path(),
            &[
                "gen-data",
                "--seeds",
                &s,
                "--mock",
                "--mock-malformed-rate",
                "0.2",
                "--target",
                "20",
                "--seed",
                "9",
                "--out",
                out,
            ],
        ));
    }
    let a = fs::read(dir.path().join("a.jsonl")).unwrap();
    let b = fs::read(dir.path().join("b.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);

    let other = ok(hybridlm(
        dir.path(),
        &[
            "gen-data", "--seeds", &s, "--mock", "--target", "20", "--seed", "10", "--out",
            "c.jsonl",
        ],
    ));
    assert!(stdout(&other).contains("emitted"));
    assert_ne!(a, fs::read(dir.path().join("c.jsonl")).unwrap());
}

#[test]
fn gen_data_stats_reconcile_and_manifest_hashes_match() {
    let dir = TempDir::new().unwrap();
    let s = seeds();
    ok(hybridlm(
        dir.path(),
        &[
            "gen-data",
            "--seeds",
            &s,
            "--mock",
            "--mock-malformed-rate",
            "0.3",
            "--target",
            "16",
            "--seed",
            "2",
            "--out",
            "g.jsonl",
        ],
    ));
    let stats = json(&dir.path().join("g.jsonl.stats.json"));
    let st = &stats["stats"];
    let n = |k: &str| st[k].as_u64().unwrap();
    assert_eq!(
        n("generated"),
        n("emitted") + n("dropped_parse") + n("dropped_dedup")
    );
    assert!(
        n("dropped_parse") > 0,
        "malformed rate 0.3 should drop something: {st}"
    );
    let lines = fs::read_to_string(dir.path().join("g.jsonl"))
        .unwrap()
        .lines()
        .count() as u64;
    assert_eq!(lines, n("emitted"));

    let manifest = json(&dir.path().join("g.jsonl.manifest.json"));
    let bytes = fs::read(dir.path().join("g.jsonl")).unwrap();
    assert_eq!(
        manifest["artifacts"]["g.jsonl"].as_str().unwrap(),
        sha256_hex(&bytes)
    );
    assert_eq!(manifest["seeds"][0], 2);
}

#[test]
fn gen_data_self_qa_records_carry_provenance() {
    let dir = TempDir::new().unwrap();
    let src = fixture("qa_sources.jsonl").display().to_string();
    ok(hybridlm(
        dir.path(),
        &[
            "gen-data", "--mode", "self-qa", "--seeds", &src, "--mock", "--pairs", "3", "--out",
            "q.jsonl",
        ],
    ));
    let text = fs::read_to_string(dir.path().join("q.jsonl")).unwrap();
    let provs: Vec<String> = text
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["provenance"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert!(provs.iter().any(|p| p == "f1"));
    assert!(provs.iter().any(|p| p == "Acme Holdings"));
    let stats = json(&dir.path().join("q.jsonl.stats.json"));
    assert_eq!(
        stats["stats"]["emitted"].as_u64().unwrap(),
        provs.len() as u64
    );
}

#[test]
fn gen_data_rejects_empty_seed_file() {
    let dir = TempDir::new().unwrap();
    let empty = fixture("empty.jsonl").display().to_string();
    let o = hybridlm(
        dir.path(),
        &["gen-data", "--seeds", &empty, "--mock", "--out", "x.jsonl"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no seed records"));
    assert!(!dir.path().join("x.jsonl").exists());
}

#[test]
fn gen_data_without_endpoint_or_mock_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = hybridlm(
        dir.path(),
        &["gen-data", "--seeds", &seeds(), "--out", "x.jsonl"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--endpoint"));
}

#[test]
fn gen_data_unreachable_endpoint_writes_partial_output_and_fails() {
    let dir = TempDir::new().unwrap();
    let o = hybridlm(
        dir.path(),
        &[
            "gen-data",
            "--seeds",
            &seeds(),
            "--endpoint",
            "http://127.0.0.1:9/complete",
            "--retries",
            "0",
            "--timeout-ms",
            "500",
            "--target",
            "4",
            "--out",
            "x.jsonl",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let stats = json(&dir.path().join("x.jsonl.stats.json"));
    assert!(!stats["errors"].as_array().unwrap().is_empty());
    assert_eq!(stats["stats"]["emitted"], 0);
}

#[test]
fn malformed_seed_line_reports_path_and_line() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(
        &bad,
        "{\"instruction\":\"ok\",\"output\":\"fine\"}\n{\"instruction\": 3}\n",
    )
    .unwrap();
    let o = hybridlm(
        dir.path(),
        &[
            "gen-data",
            "--seeds",
            bad.to_str().unwrap(),
            "--mock",
            "--out",
            "x.jsonl",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.jsonl:2:"), "{}", stderr(&o));
}

#[test]
fn mix_is_reproducible_per_seed() {
    let dir = TempDir::new().unwrap();
    let corpus = fixture("corpus").display().to_string();
    for (out, seed) in [("a.jsonl", "3"), ("b.jsonl", "3"), ("c.jsonl", "4")] {
        let o = ok(hybridlm(
            dir.path(),
            &["mix", "--corpus", &corpus, "--seed", seed, "--out", out],
        ));
        assert!(stdout(&o).contains("financial_instruction"));
    }
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(sha256_hex(&read("a.jsonl")), sha256_hex(&read("b.jsonl")));
    assert_ne!(read("a.jsonl"), read("c.jsonl"));
    assert_eq!(
        String::from_utf8(read("a.jsonl")).unwrap().lines().count(),
        40
    );
}

#[test]
fn mix_repetition_factors_scale_streams() {
    let dir = TempDir::new().unwrap();
    let corpus = fixture("corpus").display().to_string();
    ok(hybridlm(
        dir.path(),
        &[
            "mix",
            "--corpus",
            &corpus,
            "--seed",
            "1",
            "--repetition",
            "1,1,2,3",
            "--out",
            "m.jsonl",
        ],
    ));
    let text = fs::read_to_string(dir.path().join("m.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 12 + 12 + 16 + 24);

    let bad = hybridlm(
        dir.path(),
        &[
            "mix",
            "--corpus",
            &corpus,
            "--seed",
            "1",
            "--repetition",
            "1,1",
            "--out",
            "n.jsonl",
        ],
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn plan_176b_matches_reference_figures() {
    let dir = TempDir::new().unwrap();
    let o = ok(hybridlm(
        dir.path(),
        &[
            "plan",
            "--preset",
            "hybrid-176b",
            "--dp-ranks",
            "8",
            "--stages",
            "5",
            "--out",
            "p",
        ],
    ));
    let s = stdout(&o);
    assert!(s.contains("176,247"), "{s}");
    assert!(s.contains("5.5P"), "{s}");
    let plan = json(&dir.path().join("p/plan.json"));
    assert_eq!(
        plan["plan"]["stages"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .sum::<u64>(),
        70
    );
    assert!(dir.path().join("p/manifest.json").exists());
}

#[test]
fn plan_rejects_bad_inputs() {
    let dir = TempDir::new().unwrap();
    let o = hybridlm(dir.path(), &["plan", "--preset", "hybrid-9b"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("hybrid-7b"));
    let o = hybridlm(
        dir.path(),
        &["plan", "--preset", "hybrid-7b", "--stages", "31"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_flag_and_subcommand_exit_2() {
    let dir = TempDir::new().unwrap();
    for args in [&["train", "--bogus"][..], &["frobnicate"][..], &[][..]] {
        let o = hybridlm(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).contains("Usage"));
    }
    let o = ok(hybridlm(dir.path(), &["--version"]));
    assert!(stdout(&o).contains(env!("CARGO_PKG_VERSION")));
}

fn copy_run_config(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let text = fs::read_to_string(fixture("run.toml")).unwrap();
    let text = text.replace(
        "corpus = \"corpus\"",
        &format!("corpus = {:?}", fixture("corpus").display().to_string()),
    );
    let path = dir.join("run.toml");
    fs::write(&path, edit(text)).unwrap();
    path
}

#[test]
fn malformed_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (
            "\"Hidden dim.\" = 16",
            "\"Hidden dim.\" = \"wide\"",
            "Hidden dim.",
        ),
        (
            "\"Attention heads\" = 2",
            "\"Attention heads\" = 3",
            "Attention heads",
        ),
        (
            "\"Gradient clipping\" = 1.0",
            "\"Gradient clipping\" = 1.0\n\"Clipping\" = 2",
            "Clipping",
        ),
        (
            "\"Total tokens\" = \"100K\"",
            "\"Total tokens\" = \"lots\"",
            "Total tokens",
        ),
    ];
    for (from, to, field) in cases {
        let cfg = copy_run_config(dir.path(), |t| t.replace(from, to));
        let o = hybridlm(
            dir.path(),
            &["train", "--config", cfg.to_str().unwrap(), "--out", "t"],
        );
        assert_eq!(o.status.code(), Some(2), "{to}: {}", stderr(&o));
        assert!(stderr(&o).contains(field), "{to}: {}", stderr(&o));
    }
}

#[test]
fn interrupted_and_resumed_training_is_bit_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = copy_run_config(dir.path(), |t| t);
    let cfg = cfg.to_str().unwrap();

    ok(hybridlm(
        dir.path(),
        &[
            "train",
            "--config",
            cfg,
            "--out",
            "full",
            "--max-steps",
            "50",
        ],
    ));
    ok(hybridlm(
        dir.path(),
        &[
            "train",
            "--config",
            cfg,
            "--out",
            "part",
            "--max-steps",
            "20",
        ],
    ));
    ok(hybridlm(
        dir.path(),
        &[
            "train",
            "--config",
            cfg,
            "--out",
            "part",
            "--resume",
            "part/checkpoint.bin",
            "--max-steps",
            "30",
        ],
    ));

    let full = fs::read(dir.path().join("full/checkpoint.bin")).unwrap();
    let part = fs::read(dir.path().join("part/checkpoint.bin")).unwrap();
    assert_eq!(full, part);

    let report = json(&dir.path().join("full/train_report.json"));
    assert_eq!(report["steps"], 50);
    let manifest = json(&dir.path().join("full/manifest.json"));
    assert_eq!(
        manifest["artifacts"]["checkpoint.bin"].as_str().unwrap(),
        sha256_hex(&full)
    );
}

#[test]
fn resume_refuses_a_checkpoint_from_another_config() {
    let dir = TempDir::new().unwrap();
    let cfg = copy_run_config(dir.path(), |t| t);
    ok(hybridlm(
        dir.path(),
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "a",
            "--max-steps",
            "3",
        ],
    ));
    let other = copy_run_config(dir.path(), |t| t.replace("seed = 11", "seed = 12"));
    let o = hybridlm(
        dir.path(),
        &[
            "train",
            "--config",
            other.to_str().unwrap(),
            "--out",
            "b",
            "--resume",
            "a/checkpoint.bin",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    fs::write(dir.path().join("junk.bin"), b"not a checkpoint").unwrap();
    let o = hybridlm(
        dir.path(),
        &[
            "eval",
            "--checkpoint",
            "junk.bin",
            "--eval-set",
            fixture("corpus/general_pretrain.jsonl").to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn eval_reports_lower_perplexity_after_training() {
    let dir = TempDir::new().unwrap();
    let cfg = copy_run_config(dir.path(), |t| t);
    let cfg = cfg.to_str().unwrap();
    let set = fixture("corpus/general_pretrain.jsonl")
        .display()
        .to_string();
    let ppl = |ckpt: &str| -> f64 {
        let o = ok(hybridlm(
            dir.path(),
            &["eval", "--checkpoint", ckpt, "--eval-set", &set],
        ));
        let s = stdout(&o);
        s.split_whitespace()
            .nth(1)
            .and_then(|w| w.parse().ok())
            .unwrap_or_else(|| panic!("{s}"))
    };
    ok(hybridlm(
        dir.path(),
        &[
            "train",
            "--config",
            cfg,
            "--out",
            "early",
            "--max-steps",
            "1",
        ],
    ));
    ok(hybridlm(
        dir.path(),
        &[
            "train",
            "--config",
            cfg,
            "--out",
            "late",
            "--max-steps",
            "60",
        ],
    ));
    let (early, late) = (ppl("early/checkpoint.bin"), ppl("late/checkpoint.bin"));
    assert!(late < early, "early {early} late {late}");
    assert!(early < 300.0);
}

#[test]
fn compare_regimes_writes_report() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture("regimes.toml").display().to_string();
    let o = ok(hybridlm(
        dir.path(),
        &["compare-regimes", "--config", &cfg, "--out", "cr"],
    ));
    let s = stdout(&o);
    assert!(s.contains("sequential") && s.contains("hybrid"));
    assert!(s.contains("/2 seeds"));
    let report = json(&dir.path().join("cr/forgetting_report.json"));
    assert_eq!(report["seeds"].as_array().unwrap().len(), 2);
    assert_eq!(
        fs::read_to_string(dir.path().join("cr/forgetting_report.txt")).unwrap(),
        s
    );

    let o = hybridlm(
        dir.path(),
        &[
            "compare-regimes",
            "--config",
            fixture("run.toml").to_str().unwrap(),
            "--out",
            "x",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("regimes"));
}

#[test]
fn compare_regimes_reports_both_loss_policies() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture("regimes.toml").display().to_string();
    let o = ok(hybridlm(
        dir.path(),
        &[
            "compare-regimes",
            "--config",
            &cfg,
            "--out",
            "cr",
            "--seeds",
            "1",
            "--both-loss-policies",
        ],
    ));
    let s = stdout(&o);
    assert!(
        s.contains("loss policy full") && s.contains("loss policy response_only"),
        "{s}"
    );
    let other = json(&dir.path().join("cr/forgetting_report.response_only.json"));
    assert_eq!(other["loss_policy"], "response_only");
    assert_eq!(
        json(&dir.path().join("cr/forgetting_report.json"))["loss_policy"],
        "full"
    );
}
