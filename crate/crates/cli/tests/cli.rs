//! End-to-end checks of the `trivote` binary: exit codes, output files,
//! and the stats -> train -> predict -> evaluate flow on a synthetic corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use trivote::corpus::save_dataset;
use trivote::synth;

fn trivote(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trivote"))
        .args(args)
        .output()
        .expect("run trivote")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process exited normally")
}

/// A workspace with a small labeled corpus and a fast-training config.
struct Fixture {
    dir: TempDir,
    config: PathBuf,
}

const CONFIG: &str = r#"
seed = 42

[paths]
train = "train.tsv"
test = "test.tsv"
out = "run"

[encoders.hash-mid]
type = "hash"
dim = 48

[encoders.hash-small]
type = "hash"
dim = 32

[model_one]
encoder_a = "hash-test"
encoder_b = "hash-mid"
hidden_sizes = [16]
dropout = 0.0

[model_two]
encoder_a = "hash-test"
encoder_b = "hash-small"
hidden_sizes = [16]
dropout = 0.0

[model_three]
encoder = "hash-test"
hidden_size = 8
dropout = 0.0

[training]
epochs = 25
batch_size = 16
learning_rate = 0.3
validation_fraction = 0.25
"#;

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().expect("temp dir");
        let train = synth::generate("synthetic", 240, 5);
        let test = synth::generate("synthetic-test", 80, 55);
        save_dataset(&train, dir.path().join("train.tsv")).expect("write train");
        save_dataset(&test, dir.path().join("test.tsv")).expect("write test");
        let config = dir.path().join("run.toml");
        fs::write(&config, CONFIG).expect("write config");
        Fixture { dir, config }
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut full = vec!["--config", self.config.to_str().expect("utf-8 path")];
        full.extend_from_slice(args);
        trivote(&full)
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("run")
    }

    fn patch_config(&self, from: &str, to: &str) {
        let body = fs::read_to_string(&self.config).expect("read config");
        assert!(body.contains(from), "{from:?} not in config");
        fs::write(&self.config, body.replace(from, to)).expect("write config");
    }
}

fn assert_file(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("missing {}: {e}", path.display()))
}

#[test]
fn help_and_version_exit_zero() {
    let help = trivote(&["--help"]);
    assert_eq!(exit_code(&help), 0);
    assert!(stdout(&help).contains("majority vote"));

    let version = trivote(&["--version"]);
    assert_eq!(exit_code(&version), 0);
}

#[test]
fn usage_errors_exit_one() {
    // No subcommand.
    assert_eq!(exit_code(&trivote(&[])), 1);
    // Unknown flag.
    assert_eq!(exit_code(&trivote(&["stats", "--frobnicate"])), 1);
    // Missing --config.
    let missing = trivote(&["stats"]);
    assert_eq!(exit_code(&missing), 1);
    assert!(stderr(&missing).contains("--config"));
}

#[test]
fn unreadable_or_invalid_config_exits_one() {
    let gone = trivote(&["--config", "/no/such/config.toml", "stats"]);
    assert_eq!(exit_code(&gone), 1);
    assert!(stderr(&gone).contains("/no/such/config.toml"));

    let dir = TempDir::new().expect("temp dir");
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "this is not toml [").expect("write");
    let output = trivote(&["--config", bad.to_str().expect("utf-8"), "stats"]);
    assert_eq!(exit_code(&output), 1);
}

#[test]
fn missing_train_file_exits_two_and_names_the_path() {
    let fixture = Fixture::new();
    fs::remove_file(fixture.dir.path().join("train.tsv")).expect("remove");
    let output = fixture.run(&["stats"]);
    assert_eq!(exit_code(&output), 2);
    assert!(stderr(&output).contains("train.tsv"), "{}", stderr(&output));
}

#[test]
fn unknown_encoder_name_fails_before_training_starts() {
    let fixture = Fixture::new();
    fixture.patch_config("encoder_b = \"hash-mid\"", "encoder_b = \"no-such-encoder\"");
    let output = fixture.run(&["train"]);
    assert_eq!(exit_code(&output), 1);
    assert!(stderr(&output).contains("no-such-encoder"), "{}", stderr(&output));
    // Fails during wiring: no model directory may exist afterwards.
    assert!(!fixture.out().join("model-one").exists());
}

#[test]
fn predict_without_trained_models_exits_one() {
    let fixture = Fixture::new();
    let output = fixture.run(&["predict"]);
    assert_eq!(exit_code(&output), 1);
    assert!(stderr(&output).contains("model-one"), "{}", stderr(&output));
}

#[test]
fn stats_reports_both_configured_datasets() {
    let fixture = Fixture::new();
    let output = fixture.run(&["stats"]);
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));

    let text = assert_file(&fixture.out().join("stats.txt"));
    assert_eq!(stdout(&output), text);
    // Loaded datasets are named after their file stem.
    assert!(text.contains("Dataset: train"), "{text}");
    assert!(text.contains("Dataset: test"), "{text}");

    let json: serde_json::Value =
        serde_json::from_str(&assert_file(&fixture.out().join("stats.json"))).expect("json");
    assert_eq!(json["train"]["total"], 240);
    assert_eq!(json["test"]["total"], 80);

    // The config snapshot makes the run reproducible from the out dir alone.
    assert_eq!(assert_file(&fixture.out().join("config.toml")), CONFIG);
}

#[test]
fn train_predict_evaluate_round_trip() {
    let fixture = Fixture::new();

    let train = fixture.run(&["train"]);
    assert_eq!(exit_code(&train), 0, "{}", stderr(&train));
    for name in ["model-one", "model-two", "model-three"] {
        assert!(fixture.out().join(name).join("manifest.json").exists(), "{name}");
        assert!(stdout(&train).contains(name), "{}", stdout(&train));
    }

    let predict = fixture.run(&["predict"]);
    assert_eq!(exit_code(&predict), 0, "{}", stderr(&predict));
    let predictions = assert_file(&fixture.out().join("predictions.tsv"));
    let mut lines = predictions.lines();
    assert_eq!(lines.next(), Some("id\ti1\ti2\ti3\tfinal"));
    assert_eq!(lines.count(), 80);
    let submission = assert_file(&fixture.out().join("submission.tsv"));
    assert_eq!(submission.lines().next(), Some("id\tlabel"));
    assert!(
        submission.lines().skip(1).all(|l| {
            let label = l.split('\t').nth(1).unwrap_or("");
            label == "sexist" || label == "non-sexist"
        }),
        "{submission}"
    );
    for name in ["model-one", "model-two", "model-three"] {
        let per_model = assert_file(&fixture.out().join(format!("{name}.tsv")));
        assert_eq!(per_model.lines().next(), Some("id\tprobability\tlabel"));
        assert_eq!(per_model.lines().count(), 81);
    }

    let evaluate = fixture.run(&["evaluate"]);
    assert_eq!(exit_code(&evaluate), 0, "{}", stderr(&evaluate));
    let text = assert_file(&fixture.out().join("evaluation.txt"));
    assert_eq!(stdout(&evaluate), text);
    let json: serde_json::Value =
        serde_json::from_str(&assert_file(&fixture.out().join("evaluation.json"))).expect("json");
    let accuracy = json["models"]["final"]["overall"]["accuracy"]
        .as_f64()
        .expect("accuracy");
    // Disjoint class vocabularies make the synthetic task easy; anything
    // near chance means the pipeline wired the wrong labels through.
    assert!(accuracy > 0.8, "final accuracy {accuracy}");

    let meta: serde_json::Value =
        serde_json::from_str(&assert_file(&fixture.out().join("run_meta.json"))).expect("meta");
    assert_eq!(meta["command"], "evaluate");
    assert_eq!(meta["seed"], 42);
}

#[test]
fn evaluate_rejects_prediction_ids_without_gold_rows() {
    let fixture = Fixture::new();
    fs::create_dir_all(fixture.out()).expect("out dir");
    fs::write(
        fixture.out().join("predictions.tsv"),
        "id\ti1\ti2\ti3\tfinal\nghost-1\t1\t1\t0\t1\nghost-2\t0\t0\t0\t0\n",
    )
    .expect("write predictions");
    let output = fixture.run(&["evaluate"]);
    assert_eq!(exit_code(&output), 2);
    let err = stderr(&output);
    assert!(err.contains("ghost-1") && err.contains("ghost-2"), "{err}");
}

#[test]
fn evaluate_rejects_tampered_final_column() {
    let fixture = Fixture::new();
    fs::create_dir_all(fixture.out()).expect("out dir");
    fs::write(
        fixture.out().join("predictions.tsv"),
        "id\ti1\ti2\ti3\tfinal\ns00000\t1\t1\t0\t0\n",
    )
    .expect("write predictions");
    let output = fixture.run(&["evaluate"]);
    assert_eq!(exit_code(&output), 2);
    assert!(stderr(&output).contains("disagrees"), "{}", stderr(&output));
}

#[test]
fn out_flag_overrides_the_configured_directory() {
    let fixture = Fixture::new();
    let alt = fixture.dir.path().join("elsewhere");
    let output = fixture.run(&["--out", alt.to_str().expect("utf-8"), "stats"]);
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    assert!(alt.join("stats.txt").exists());
    assert!(!fixture.out().exists());
}
