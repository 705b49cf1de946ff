use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn toy(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data/toy")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn oprank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oprank"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout_of(args: &[&str]) -> String {
    let out = oprank(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let out = oprank(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_exits_1() {
    assert_eq!(oprank(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn version_flag() {
    let out = stdout_of(&["--version"]);
    assert!(out.starts_with("oprank "));
}

#[test]
fn missing_input_fails_validation() {
    let out = oprank(&[
        "eval-ranking",
        "--posts",
        "/no/such/posts.jsonl",
        "--spec",
        "base-1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing file"));
    // A missing resource is caught even though the posts file exists.
    let out = oprank(&[
        "score",
        "--posts",
        &toy("posts.jsonl"),
        "--lm",
        "/no/such/lm.tsv",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_spec_fails_validation() {
    let out = oprank(&[
        "eval-ranking",
        "--posts",
        &toy("posts.jsonl"),
        "--spec",
        "base-9",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn estimation_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("docs.jsonl");
    std::fs::write(
        &docs,
        "{\"id\":\"a\",\"text_primary\":\"\"}\n{\"id\":\"b\",\"text_primary\":\"\"}\n",
    )
    .unwrap();
    let out = oprank(&[
        "fit",
        "--docs",
        &path_str(&docs),
        "--seed",
        &toy("lm_seed.tsv"),
        "--field",
        "primary",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "posts = {:?}\nspec = \"base-1\"\nfraction = 0.5\ntags = {:?}\n",
            toy("posts.jsonl"),
            toy("tags.tsv")
        ),
    )
    .unwrap();
    let cfg = path_str(&cfg);
    let from_config: serde_json::Value =
        serde_json::from_str(&stdout_of(&["eval-ranking", "--config", &cfg])).unwrap();
    assert_eq!(from_config["selected_ids"].as_array().unwrap().len(), 10);
    let overridden: serde_json::Value = serde_json::from_str(&stdout_of(&[
        "eval-ranking",
        "--config",
        &cfg,
        "--fraction",
        "0.1",
    ]))
    .unwrap();
    assert_eq!(overridden["selected_ids"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_config_key_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "postz = \"x\"\n").unwrap();
    assert_eq!(
        oprank(&["eval-ranking", "--config", &path_str(&cfg)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn subcommands_are_deterministic_and_leave_inputs_alone() {
    let inputs: Vec<PathBuf> =
        std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
    let before: Vec<Vec<u8>> = inputs.iter().map(|p| std::fs::read(p).unwrap()).collect();
    let runs: Vec<Vec<String>> = vec![
        vec![
            "induce",
            "--docs",
            &toy("expertise_docs.jsonl"),
            "--class-field",
            "author",
            "--pos",
            "analyst",
            "--neg",
            "amateur",
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        [
            "fit",
            "--docs",
            &toy("sentiment_docs.jsonl"),
            "--seed",
            &toy("lm_seed.tsv"),
            "--vocab",
            "full",
        ]
        .map(String::from)
        .to_vec(),
        [
            "score",
            "--posts",
            &toy("posts.jsonl"),
            "--fls-scores",
            &toy("fls_scores.jsonl"),
            "--tags",
            &toy("tags.tsv"),
        ]
        .map(String::from)
        .to_vec(),
        [
            "eval-pairwise",
            "--pairs",
            &toy("pairs.jsonl"),
            "--spec",
            "multinomial-3",
            "--split-ratio",
            "0.3",
            "--seed",
            "4",
        ]
        .map(String::from)
        .to_vec(),
        [
            "eval-ranking",
            "--pairs",
            &toy("pairs.jsonl"),
            "--spec",
            "base-1",
            "--fraction",
            "0.2",
        ]
        .map(String::from)
        .to_vec(),
        [
            "build-prompts",
            "--pairs",
            &toy("pairs.jsonl"),
            "--shots",
            &toy("shots.jsonl"),
            "--budget",
            "500",
            "--seed",
            "9",
        ]
        .map(String::from)
        .to_vec(),
        ["export-t5", "--pairs", &toy("pairs.jsonl")]
            .map(String::from)
            .to_vec(),
    ];
    for args in &runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(stdout_of(&args), stdout_of(&args), "{args:?}");
    }
    let after: Vec<Vec<u8>> = inputs.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn rank_lists_best_first() {
    let dir = tempfile::tempdir().unwrap();
    let features = path_str(&dir.path().join("features.jsonl"));
    stdout_of(&[
        "score",
        "--posts",
        &toy("posts.jsonl"),
        "--tags",
        &toy("tags.tsv"),
        "--out",
        &features,
    ]);
    let rows: Vec<serde_json::Value> = stdout_of(&[
        "rank",
        "--features",
        &features,
        "--spec",
        "bayesdcm-2",
        "--target",
        "ml",
    ])
    .lines()
    .map(|l| serde_json::from_str(l).unwrap())
    .collect();
    assert_eq!(rows.len(), 20);
    assert!(rows
        .windows(2)
        .all(|w| w[0]["score"].as_f64() >= w[1]["score"].as_f64()));
}

#[test]
fn prompt_files_line_up_with_pairs() {
    let n_pairs = std::fs::read_to_string(toy("pairs.jsonl"))
        .unwrap()
        .lines()
        .count();
    let prompts = stdout_of(&[
        "build-prompts",
        "--pairs",
        &toy("pairs.jsonl"),
        "--shots",
        &toy("shots.jsonl"),
        "--seed",
        "1",
    ]);
    assert_eq!(prompts.lines().count(), n_pairs);
    for line in prompts.lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(row["prompt"].as_str().unwrap().ends_with('>'));
        assert!(row["total_token_estimate"].as_u64().unwrap() <= 4000);
    }
    let t5 = stdout_of(&["export-t5", "--pairs", &toy("pairs.jsonl")]);
    assert_eq!(t5.lines().count(), n_pairs);
    let tight = oprank(&[
        "build-prompts",
        "--pairs",
        &toy("pairs.jsonl"),
        "--shots",
        &toy("shots.jsonl"),
        "--budget",
        "5",
    ]);
    assert_eq!(tight.status.code(), Some(2));
}

#[test]
fn custom_vocabulary_file() {
    let dir = tempfile::tempdir().unwrap();
    let vocab = dir.path().join("vocab.json");
    std::fs::write(&vocab, r#"{"1": "higher", "0": "lower"}"#).unwrap();
    let vocab = path_str(&vocab);
    let t5 = stdout_of(&[
        "export-t5",
        "--pairs",
        &toy("pairs.jsonl"),
        "--vocab",
        &vocab,
    ]);
    assert!(t5.contains("higher") || t5.contains("lower"));
    assert!(!t5.contains(": more "));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"1": "same", "0": "same"}"#).unwrap();
    assert_eq!(
        oprank(&[
            "export-t5",
            "--pairs",
            &toy("pairs.jsonl"),
            "--vocab",
            &path_str(&bad)
        ])
        .status
        .code(),
        Some(1)
    );
}

/// Answers every request with the same completion and records the bodies.
fn mock_endpoint(n: usize, reply: &'static str) -> (String, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/completions", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut bodies = Vec::new();
        for _ in 0..n {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            bodies.push(String::from_utf8(body).unwrap());
            let payload = format!(
                "{{\"choices\":[{{\"text\":{}}}]}}",
                serde_json::to_string(reply).unwrap()
            );
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            )
            .unwrap();
        }
        bodies
    });
    (url, handle)
}

#[test]
fn complete_then_parse() {
    let dir = tempfile::tempdir().unwrap();
    let prompts = path_str(&dir.path().join("prompts.jsonl"));
    let completions = path_str(&dir.path().join("completions.jsonl"));
    stdout_of(&[
        "build-prompts",
        "--pairs",
        &toy("pairs.jsonl"),
        "--shots",
        &toy("shots.jsonl"),
        "--budget",
        "600",
        "--out",
        &prompts,
    ]);
    let n = std::fs::read_to_string(&prompts).unwrap().lines().count();
    let (url, server) = mock_endpoint(
        n,
        " maximal potential profit (MPP)| more# maximal loss (ML)| less.",
    );
    let out = Command::new(env!("CARGO_BIN_EXE_oprank"))
        .args([
            "complete",
            "--in",
            &prompts,
            "--model",
            "test-model",
            "--max-in-flight",
            "1",
            "--out",
            &completions,
        ])
        .env("COMPLETION_API_URL", &url)
        .env("COMPLETION_API_KEY", "k")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let bodies = server.join().unwrap();
    assert_eq!(bodies.len(), n);
    let first: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(first["model"], "test-model");
    assert!(first["prompt"].as_str().unwrap().ends_with('>'));

    let report: serde_json::Value = serde_json::from_str(&stdout_of(&[
        "parse-completions",
        "--in",
        &completions,
        "--pairs",
        &toy("pairs.jsonl"),
    ]))
    .unwrap();
    assert_eq!(report["n_pairs"], n);
    assert_eq!(report["unparseable"], 0);
    // Every answer is (1, 0), so accuracy is the share of pairs with those labels.
    let labels: Vec<serde_json::Value> = std::fs::read_to_string(toy("pairs.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let ones = labels.iter().filter(|p| p["mpp_label"] == 1).count();
    assert_eq!(
        report["mpp_accuracy"].as_f64().unwrap(),
        ones as f64 / n as f64
    );
}

#[test]
fn complete_requires_endpoint_url() {
    let out = Command::new(env!("CARGO_BIN_EXE_oprank"))
        .args(["complete", "--in", &toy("pairs.jsonl"), "--model", "m"])
        .env_remove("COMPLETION_API_URL")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
