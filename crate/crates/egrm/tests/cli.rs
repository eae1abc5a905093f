//! Command-layer tests: file outputs, exit codes, and the binary surface.

use std::path::{Path, PathBuf};
use std::process::Command;

use egrm::cli::{self, CliError, EXIT_BACKEND, EXIT_INPUT, EXIT_TRAINING};
use egrm::config::EngineConfig;
use egrm::rewards::GrpoVariant;
use egrm::synthetic::unanimity_corpus;

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: EngineConfig,
    config_path: PathBuf,
    prompts: PathBuf,
}

fn workspace(n: usize, unanimous: usize) -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();

    let (prompts, script) = unanimity_corpus(n, unanimous, 5, 8);
    std::fs::write(root.join("script.json"), script.to_json()).unwrap();

    let mut lines = String::new();
    for p in &prompts {
        lines.push_str(&serde_json::json!({"id": p.id(), "text": p.text()}).to_string());
        lines.push('\n');
    }
    let prompts_path = root.join("prompts.jsonl");
    std::fs::write(&prompts_path, lines).unwrap();

    let config_path = root.join("egrm.toml");
    std::fs::write(
        &config_path,
        format!("[backend]\nscript = \"script.json\"\n\n[paths]\nout_dir = \"{}\"\n", root.join("out").display()),
    )
    .unwrap();
    let config = EngineConfig::load(&config_path).unwrap();

    Workspace { _dir: dir, root, config, config_path, prompts: prompts_path }
}

#[test]
fn route_emits_one_line_per_prompt() {
    let ws = workspace(3, 2);
    let out_path = ws.root.join("routes.jsonl");
    let out = cli::cmd_route(&ws.config, &ws.prompts, Some(&out_path)).unwrap();
    assert_eq!(out.lines.len(), 3);
    assert_eq!(out.failures, 0);

    let written = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = written.lines().collect();
    assert_eq!(lines.len(), 3);
    for line in lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["prompt_id"].is_string());
        assert!(v["consensus"].is_number());
        assert!(v["route"].is_string());
        assert_eq!(v["counts"].as_object().unwrap().values().map(|c| c.as_u64().unwrap()).sum::<u64>(), 5);
    }
}

#[test]
fn missing_input_is_exit_2() {
    let ws = workspace(1, 1);
    let err = cli::cmd_route(&ws.config, Path::new("/nonexistent/prompts.jsonl"), None).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_INPUT);
}

#[test]
fn malformed_line_is_named() {
    let ws = workspace(1, 1);
    let bad = ws.root.join("bad.jsonl");
    std::fs::write(&bad, "{\"id\":\"p\",\"text\":\"ok\"}\n{oops\n").unwrap();
    let err = cli::cmd_route(&ws.config, &bad, None).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_INPUT);
    assert!(err.message().contains("line 2"), "message: {}", err.message());
}

#[test]
fn infer_writes_report_with_expected_accounting() {
    let ws = workspace(10, 6);
    let report_path = ws.root.join("report.json");
    let (report, path) = cli::cmd_infer(&ws.config, &ws.prompts, Some(&report_path), false).unwrap();
    assert_eq!(path, report_path);
    assert_eq!(report.summary.n, 10);
    assert_eq!(report.summary.short_fraction, 0.6);
    assert_eq!(report.summary.calls, 10 * 5 + 4 * 8);

    let (forced, _) = cli::cmd_infer(&ws.config, &ws.prompts, Some(&report_path), true).unwrap();
    assert_eq!(forced.summary.short_fraction, 0.0);
    assert_eq!(forced.summary.calls, 10 * 13);

    // The written file is valid JSON mirroring the returned report.
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(parsed["summary"]["n"], 10);
}

#[test]
fn partition_writes_three_files() {
    let ws = workspace(8, 5);
    let out = cli::cmd_partition(&ws.config, &ws.prompts, None).unwrap();
    assert_eq!(out.short, 5);
    assert_eq!(out.long, 3);
    assert_eq!(out.failures, 0);
    for name in ["short.jsonl", "long.jsonl", "errors.jsonl"] {
        assert!(out.dir.join(name).exists(), "missing {name}");
    }
    let long = std::fs::read_to_string(out.dir.join("long.jsonl")).unwrap();
    assert_eq!(long.lines().count(), 3);
    let first: serde_json::Value = serde_json::from_str(long.lines().next().unwrap()).unwrap();
    assert!(first["chain"].is_string());
    assert!(first["answer"].is_string());
}

#[test]
fn train_scorer_validates_and_trains() {
    let ws = workspace(1, 1);

    // Invalid dataset: quality out of range is reported with its index.
    let invalid = ws.root.join("scored-bad.jsonl");
    std::fs::write(&invalid, "{\"id\":\"p\",\"response\":\"r\",\"q\":1.2}\n").unwrap();
    let err = cli::cmd_train_scorer(&ws.config, &invalid, None, None).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_INPUT);
    assert!(err.message().contains("quality out of range"));
    assert!(err.message().contains("record 0"));

    // A small valid dataset trains deterministically.
    let valid = ws.root.join("scored.jsonl");
    let mut lines = String::new();
    for i in 0..6 {
        for (j, q) in [0.9, 0.55, 0.15].iter().enumerate() {
            lines.push_str(
                &serde_json::json!({
                    "id": format!("p{i}"),
                    "response": format!("{} Answer: {j}", "step ".repeat(j + 1)),
                    "q": q,
                })
                .to_string(),
            );
            lines.push('\n');
        }
    }
    std::fs::write(&valid, lines).unwrap();

    let fast_config: EngineConfig = {
        let path = ws.root.join("fast.toml");
        std::fs::write(
            &path,
            format!(
                "[backend]\nscript = \"script.json\"\n\n[scorer]\nsteps = 50\n\n[paths]\nout_dir = \"{}\"\n",
                ws.root.join("out").display()
            ),
        )
        .unwrap();
        EngineConfig::load(&path).unwrap()
    };
    let (model_path, curve_path) = cli::cmd_train_scorer(&fast_config, &valid, None, None).unwrap();
    assert!(model_path.exists());
    assert!(curve_path.exists());
    let model = egrm::scorer::ScorerModel::load(&model_path).unwrap();
    assert_eq!(model.d(), egrm::scorer::FEATURE_DIM);
    let curve = std::fs::read_to_string(&curve_path).unwrap();
    assert!(curve.starts_with("step,loss\n"));
    assert_eq!(curve.lines().count(), 51);
}

#[test]
fn grpo_writes_curves_and_policy_for_both_variants() {
    let ws = workspace(1, 1);
    let pairs = ws.root.join("pairs.jsonl");
    let mut lines = String::new();
    for i in 0..10 {
        lines.push_str(
            &serde_json::json!({
                "id": format!("pr{i}"),
                "prompt": "pick the better sequence",
                "chosen": "3 1 4 2",
                "rejected": "5 0 6 7",
            })
            .to_string(),
        );
        lines.push('\n');
    }
    std::fs::write(&pairs, lines).unwrap();

    let fast_config: EngineConfig = {
        let path = ws.root.join("fast.toml");
        std::fs::write(
            &path,
            format!(
                "[backend]\nscript = \"script.json\"\n\n[grpo]\nsteps = 40\n\n[paths]\nout_dir = \"{}\"\n",
                ws.root.join("out").display()
            ),
        )
        .unwrap();
        EngineConfig::load(&path).unwrap()
    };

    for variant in [GrpoVariant::Standard, GrpoVariant::Extended] {
        let (curve, policy) = cli::cmd_grpo(&fast_config, &pairs, variant, None, None).unwrap();
        assert!(curve.to_string_lossy().contains(variant.label()));
        let body = std::fs::read_to_string(&curve).unwrap();
        assert!(body.starts_with("step,variant,objective,mean_preferred_prob,kl\n"));
        assert_eq!(body.lines().count(), 41);
        assert!(body.lines().nth(1).unwrap().contains(variant.label()));
        assert!(policy.exists());
    }

    // Degenerate pair: exit 2 with the violation named.
    let bad = ws.root.join("pairs-bad.jsonl");
    std::fs::write(
        &bad,
        "{\"id\":\"x\",\"prompt\":\"q\",\"chosen\":\"same\",\"rejected\":\"same\"}\n",
    )
    .unwrap();
    let err = cli::cmd_grpo(&fast_config, &bad, GrpoVariant::Extended, None, None).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_INPUT);
    assert!(err.message().contains("degenerate pair"));
}

#[test]
fn error_classes_map_to_stable_exit_codes() {
    assert_eq!(CliError::Input("x".into()).exit_code(), 2);
    assert_eq!(CliError::Backend("x".into()).exit_code(), 3);
    assert_eq!(CliError::Training("x".into()).exit_code(), 4);
    let diverged: CliError =
        egrm::scorer::TrainError::Diverged { step: 7 }.into();
    assert_eq!(diverged.exit_code(), EXIT_TRAINING);
    assert!(diverged.message().contains("step 7"));
    let non_finite: CliError =
        egrm::rewards::GrpoError::NonFiniteObjective { step: Some(3) }.into();
    assert_eq!(non_finite.exit_code(), EXIT_TRAINING);
    let backend: CliError = egrm::pipeline::PipelineError::Backend(
        egrm::backend::BackendError::EmptySchedule,
    )
    .into();
    assert_eq!(backend.exit_code(), EXIT_BACKEND);
}

#[test]
fn binary_round_trips_route_infer_report() {
    let ws = workspace(4, 3);
    let bin = env!("CARGO_BIN_EXE_egrm");

    let status = Command::new(bin)
        .args(["route", "--config"])
        .arg(&ws.config_path)
        .arg("--input")
        .arg(&ws.prompts)
        .arg("--output")
        .arg(ws.root.join("routes.jsonl"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let report_path = ws.root.join("report.json");
    let status = Command::new(bin)
        .args(["infer", "--config"])
        .arg(&ws.config_path)
        .arg("--input")
        .arg(&ws.prompts)
        .arg("--output")
        .arg(&report_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let output = Command::new(bin)
        .args(["report", "--input"])
        .arg(&report_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("prompts:        4"), "stdout: {stdout}");
    assert!(stdout.contains("short fraction: 0.75"), "stdout: {stdout}");

    // Missing input through the real binary: exit 2.
    let status = Command::new(bin)
        .args(["infer", "--input", "/nonexistent.jsonl"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Unknown flags are usage errors: exit 2.
    let status = Command::new(bin).args(["route", "--nope"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}
