//! Release gate for the pipeline's core guarantees, one test per
//! guarantee so the harness prints one pass/fail line each:
//!
//! - the majority vote equals a brute-force oracle and its voting laws
//! - corpus statistics reproduce the reference corpus distribution
//! - metrics equal an independently coded confusion-count oracle
//! - overall accuracy decomposes into count-weighted breakdown cells
//! - analytic gradients match central finite differences
//! - the full pipeline separates a synthetic corpus at high accuracy
//! - reruns with one config and seed are byte-identical
//! - the baseline column carries the published numbers in place

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use trivote::corpus::{
    dataset_stats, load_dataset, save_dataset, split, ColumnMapping, Dataset, Label, Language,
    Sample, Source,
};
use trivote::encoders::{EncoderRegistry, HashEncoder};
use trivote::evaluation::{
    accuracy, breakdown, f_measure, metrics_report, records_from_ensemble, Averaging, Axis,
    PredictionRecord,
};
use trivote::models::{
    build_bilstm, build_concat_pair, check, train, BiLstmConfig, ConcatPairConfig, TrainConfig,
    TrainedModel, UntrainedModel,
};
use trivote::synth;
use trivote::voting::{majority_label, majority_vote, EnsemblePrediction, VoteInput};

// ---------------------------------------------------------------- voting

#[test]
fn majority_vote_equals_the_brute_force_oracle_on_all_triples() {
    let started = Instant::now();

    // Independent oracle: pick the most frequent label among the three.
    let oracle = |bits: [u8; 3]| -> u8 {
        let ones = bits.iter().filter(|b| **b == 1).count();
        u8::from(ones > bits.len() - ones)
    };
    let vote = |bits: [u8; 3]| {
        majority_vote(VoteInput::new(bits[0], bits[1], bits[2]).expect("binary votes"))
    };

    let all: Vec<[u8; 3]> = (0u8..8)
        .map(|m| [(m >> 2) & 1, (m >> 1) & 1, m & 1])
        .collect();
    for bits in &all {
        assert_eq!(vote(*bits), oracle(*bits), "{bits:?}");

        // Permutation invariance: the vote ignores model order.
        for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let permuted = [bits[perm[0]], bits[perm[1]], bits[perm[2]]];
            assert_eq!(vote(permuted), vote(*bits), "{bits:?} as {permuted:?}");
        }

        // Monotonicity: raising one vote never lowers the outcome.
        for i in 0..3 {
            if bits[i] == 0 {
                let mut raised = *bits;
                raised[i] = 1;
                assert!(vote(raised) >= vote(*bits), "{bits:?} raising slot {i}");
            }
        }
    }

    // Unanimity: agreement is returned unchanged.
    assert_eq!(vote([0, 0, 0]), 0);
    assert_eq!(vote([1, 1, 1]), 1);

    assert!(
        started.elapsed() < Duration::from_secs(1),
        "exhaustive vote check took {:?}",
        started.elapsed()
    );
}

// ---------------------------------------------------------------- corpus

/// (language, label, sentences) cells of the reference training corpus.
const TRAIN_CELLS: [(Language, Label, u64); 4] = [
    (Language::En, Label::NonSexist, 1800),
    (Language::En, Label::Sexist, 1636),
    (Language::Es, Label::NonSexist, 1800),
    (Language::Es, Label::Sexist, 1741),
];

/// Same cells for the reference test corpus.
const TEST_CELLS: [(Language, Label, u64); 4] = [
    (Language::En, Label::NonSexist, 1050),
    (Language::En, Label::Sexist, 1158),
    (Language::Es, Label::NonSexist, 1037),
    (Language::Es, Label::Sexist, 1123),
];

fn fixture_dataset(name: &str, cells: &[(Language, Label, u64); 4], sources: &[Source]) -> Dataset {
    let mut samples = Vec::new();
    for (language, label, n) in cells {
        for _ in 0..*n {
            let idx = samples.len();
            samples.push(Sample {
                id: format!("{name}-{idx:05}"),
                source: Some(sources[idx % sources.len()]),
                language: *language,
                text: format!("fixture sentence number {idx}"),
                label: Some(*label),
            });
        }
    }
    Dataset::new(name, samples, true).expect("fixture rows satisfy the dataset invariants")
}

#[test]
fn corpus_statistics_reproduce_the_reference_distribution_exactly() {
    let dir = TempDir::new().expect("temp dir");
    // The reference training data is all twitter; gab appears only in test.
    let train = fixture_dataset("train-fixture", &TRAIN_CELLS, &[Source::Twitter]);
    let test = fixture_dataset(
        "test-fixture",
        &TEST_CELLS,
        &[Source::Twitter, Source::Gab],
    );

    for (ds, cells, total) in [(&train, &TRAIN_CELLS, 6977), (&test, &TEST_CELLS, 4368)] {
        let path = dir.path().join(format!("{}.tsv", ds.name));
        save_dataset(ds, &path).expect("save fixture");
        let loaded = load_dataset(&path, &ColumnMapping::default(), true).expect("load fixture");
        let stats = dataset_stats(&loaded).expect("stats");
        for (language, label, n) in cells {
            assert_eq!(
                stats.count(*language, *label),
                *n,
                "{} {language:?} {label:?}",
                ds.name
            );
        }
        assert_eq!(stats.total, total, "{}", ds.name);
    }
}

// ---------------------------------------------------------------- metrics

/// Confusion counts accumulated independently of the evaluation module.
struct OracleCounts {
    tp: u64,
    fp: u64,
    fn_: u64,
    tn: u64,
}

fn oracle_counts(pairs: &[(u8, u8)]) -> OracleCounts {
    let mut c = OracleCounts {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for &(gold, predicted) in pairs {
        match (gold, predicted) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (1, 0) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    c
}

fn oracle_accuracy(c: &OracleCounts) -> f64 {
    (c.tp + c.tn) as f64 / (c.tp + c.fp + c.fn_ + c.tn) as f64
}

/// F1 from integer counts; zero whenever precision and recall are both
/// unattainable. Swapping the arguments scores the negative class.
fn oracle_f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Random gold/prediction pairs with per-set class and error rates, so
/// some sets are tiny, some one-class, and some all-wrong.
fn random_records(rng: &mut ChaCha8Rng, n: usize) -> (Vec<PredictionRecord>, Vec<(u8, u8)>) {
    let p_sexist = rng.random_range(0.0..=1.0);
    let p_correct = rng.random_range(0.0..=1.0);
    let mut pairs = Vec::with_capacity(n);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let gold = u8::from(rng.random_bool(p_sexist));
        let predicted = if rng.random_bool(p_correct) { gold } else { 1 - gold };
        pairs.push((gold, predicted));
        records.push(PredictionRecord {
            id: format!("r{i}"),
            gold: Label::from_u8(gold).expect("binary"),
            predicted: Label::from_u8(predicted).expect("binary"),
            source: Some(if rng.random_bool(0.5) { Source::Gab } else { Source::Twitter }),
            language: if rng.random_bool(0.5) { Language::En } else { Language::Es },
            model_tag: "model-one".to_owned(),
        });
    }
    (records, pairs)
}

#[test]
fn metrics_equal_the_independent_count_oracle_with_zero_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for round in 0..100 {
        // Rounds 0 and 1 pin the size extremes; the rest are random.
        let n = match round {
            0 => 1,
            1 => 500,
            _ => rng.random_range(1..=500),
        };
        let (records, pairs) = random_records(&mut rng, n);
        let c = oracle_counts(&pairs);

        assert_eq!(
            accuracy(&records).expect("accuracy"),
            oracle_accuracy(&c),
            "round {round} accuracy"
        );
        assert_eq!(
            f_measure(&records, Averaging::PositiveClass).expect("positive F1"),
            oracle_f1(c.tp, c.fp, c.fn_),
            "round {round} positive-class F1"
        );
        assert_eq!(
            f_measure(&records, Averaging::Macro).expect("macro F1"),
            (oracle_f1(c.tp, c.fp, c.fn_) + oracle_f1(c.tn, c.fn_, c.fp)) / 2.0,
            "round {round} macro F1"
        );

        let report = metrics_report(&records, Averaging::Macro).expect("report");
        assert_eq!(report.n as usize, n, "round {round} n");
        let counts = report.confusion;
        assert_eq!(
            (counts.true_positive, counts.false_positive, counts.false_negative, counts.true_negative),
            (c.tp, c.fp, c.fn_, c.tn),
            "round {round} confusion"
        );
    }
}

#[test]
fn overall_accuracy_is_the_count_weighted_mean_of_breakdown_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for round in 0..25 {
        let n = rng.random_range(2..=500);
        let (records, _) = random_records(&mut rng, n);
        let overall = accuracy(&records).expect("accuracy");
        for axis in [Axis::Source, Axis::Language] {
            let cells = breakdown(&records, axis, Averaging::Macro)
                .expect("breakdown")
                .cells;
            let weighted: f64 = cells.values().map(|m| m.n as f64 * m.accuracy).sum();
            let count: f64 = cells.values().map(|m| m.n as f64).sum();
            let recomposed = weighted / count;
            assert!(
                (overall - recomposed).abs() <= 1e-12,
                "round {round} {axis:?}: overall {overall} vs recomposed {recomposed}"
            );
        }
    }
}

// ---------------------------------------------------------------- models

#[test]
fn analytic_gradients_match_central_finite_differences_at_toy_sizes() {
    let head = check::concat_head(8, &[8], 6, 21);
    assert!(head.max_rel_error < 1e-4, "feed-forward head: {}", head.max_rel_error);

    let deep = check::concat_head(6, &[5, 4], 5, 22);
    assert!(deep.max_rel_error < 1e-4, "two hidden layers: {}", deep.max_rel_error);

    let cell = check::bilstm_cell(8, 8, 1, 5, 4, 23);
    assert!(cell.max_rel_error < 1e-4, "recurrent cell: {}", cell.max_rel_error);

    let stacked = check::bilstm_cell(4, 3, 2, 4, 3, 24);
    assert!(stacked.max_rel_error < 1e-4, "stacked recurrent: {}", stacked.max_rel_error);
}

fn synthetic_registry() -> EncoderRegistry {
    let mut registry = EncoderRegistry::with_builtins();
    registry
        .register(Arc::new(HashEncoder::new("hash-mid", 48, 128)))
        .expect("register");
    registry
        .register(Arc::new(HashEncoder::new("hash-small", 32, 128)))
        .expect("register");
    registry
}

fn synthetic_plans(registry: &EncoderRegistry) -> [UntrainedModel; 3] {
    let mut one = ConcatPairConfig::new("hash-test", "hash-mid");
    one.hidden_sizes = vec![16];
    one.dropout = 0.0;
    let mut two = ConcatPairConfig::new("hash-test", "hash-small");
    two.hidden_sizes = vec![16];
    two.dropout = 0.0;
    let mut three = BiLstmConfig::new("hash-test");
    three.hidden_size = 8;
    three.dropout = 0.0;
    [
        build_concat_pair(&one, registry).expect("plan one"),
        build_concat_pair(&two, registry).expect("plan two"),
        build_bilstm(&three, registry).expect("plan three"),
    ]
}

#[test]
fn every_model_and_the_ensemble_separate_the_synthetic_corpus() {
    let started = Instant::now();
    let corpus = synth::generate("synthetic", 480, 11);
    let (train_ds, val_ds) = split(&corpus, 0.25, 11).expect("split");
    let registry = synthetic_registry();
    let plans = synthetic_plans(&registry);

    let feed_forward = TrainConfig {
        epochs: 80,
        batch_size: 16,
        learning_rate: 0.3,
        early_stop_patience: 20,
        ..TrainConfig::default()
    };
    let recurrent = TrainConfig {
        epochs: 80,
        learning_rate: 0.2,
        ..feed_forward.clone()
    };
    let configs = [
        TrainConfig { seed: 42, ..feed_forward.clone() },
        TrainConfig { seed: 43, ..feed_forward },
        TrainConfig { seed: 44, ..recurrent },
    ];

    // Trained one after another so the wall-clock bound is single-threaded.
    let models: Vec<TrainedModel> = plans
        .iter()
        .zip(&configs)
        .map(|(plan, tc)| train(plan, &train_ds, &val_ds, tc).expect("training"))
        .collect();

    for (model, name) in models.iter().zip(["first pair", "second pair", "recurrent"]) {
        let history = model.history();
        assert!(history.epochs.len() <= 200, "{name} ran {} epochs", history.epochs.len());
        assert!(
            history.best_val_accuracy >= 0.95,
            "{name} reached only {:.4}",
            history.best_val_accuracy
        );
    }

    let batches: Vec<_> = models
        .iter()
        .map(|m| m.predict_batch(&val_ds).expect("predict"))
        .collect();
    let mut hits = 0usize;
    for (i, sample) in val_ds.samples().iter().enumerate() {
        let votes = VoteInput::new(batches[0][i].1.label, batches[1][i].1.label, batches[2][i].1.label)
            .expect("binary votes");
        if majority_label(votes) == sample.label.expect("labeled") {
            hits += 1;
        }
    }
    let ensemble_accuracy = hits as f64 / val_ds.len() as f64;
    assert!(ensemble_accuracy >= 0.95, "ensemble reached only {ensemble_accuracy:.4}");

    // Unanimous members pass their exact accuracy through the vote.
    let agreeing: Vec<EnsemblePrediction> = val_ds
        .samples()
        .iter()
        .enumerate()
        .map(|(i, sample)| {
            let vote = batches[0][i].1.label;
            EnsemblePrediction::new(
                sample.id.clone(),
                sample.source,
                sample.language,
                sample.label,
                VoteInput::new(vote, vote, vote).expect("binary votes"),
            )
        })
        .collect();
    let records = records_from_ensemble(&agreeing).expect("records");
    let member: Vec<PredictionRecord> = records
        .iter()
        .filter(|r| r.model_tag == "model-one")
        .cloned()
        .collect();
    let ensemble: Vec<PredictionRecord> = records
        .iter()
        .filter(|r| r.model_tag == "final")
        .cloned()
        .collect();
    assert_eq!(
        accuracy(&ensemble).expect("ensemble accuracy"),
        accuracy(&member).expect("member accuracy"),
        "unanimous ensemble accuracy must equal the member accuracy exactly"
    );

    assert!(
        started.elapsed() < Duration::from_secs(60),
        "end-to-end run took {:?}",
        started.elapsed()
    );
}

// ---------------------------------------------------------------- pipeline

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

struct PipelineFixture {
    dir: TempDir,
    config: PathBuf,
}

impl PipelineFixture {
    fn new() -> Self {
        let dir = TempDir::new().expect("temp dir");
        let train = synth::generate("synthetic", 240, 5);
        let test = synth::generate("synthetic-test", 80, 55);
        save_dataset(&train, dir.path().join("train.tsv")).expect("write train");
        save_dataset(&test, dir.path().join("test.tsv")).expect("write test");
        let config = dir.path().join("run.toml");
        fs::write(&config, CONFIG).expect("write config");
        PipelineFixture { dir, config }
    }

    fn run(&self, args: &[&str]) -> Output {
        let mut full = vec!["--config", self.config.to_str().expect("utf-8 path")];
        full.extend_from_slice(args);
        let output = Command::new(env!("CARGO_BIN_EXE_trivote"))
            .args(&full)
            .output()
            .expect("run trivote");
        assert_eq!(
            output.status.code(),
            Some(0),
            "trivote {args:?}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        output
    }
}

#[test]
fn rerunning_train_and_predict_writes_byte_identical_predictions() {
    let fixture = PipelineFixture::new();
    let dirs = [
        fixture.dir.path().join("run-a"),
        fixture.dir.path().join("run-b"),
    ];
    for out in &dirs {
        let out = out.to_str().expect("utf-8 path");
        fixture.run(&["--out", out, "train"]);
        fixture.run(&["--out", out, "predict"]);
    }
    for file in [
        "predictions.tsv",
        "submission.tsv",
        "model-one.tsv",
        "model-two.tsv",
        "model-three.tsv",
    ] {
        let a = fs::read(dirs[0].join(file)).expect("first run file");
        let b = fs::read(dirs[1].join(file)).expect("second run file");
        assert_eq!(a, b, "{file} differs between reruns");
    }
}

#[test]
fn baseline_flag_renders_the_published_numbers_in_their_cells() {
    let fixture = PipelineFixture::new();
    let out = fixture.dir.path().join("run");
    fs::create_dir_all(&out).expect("out dir");

    // Handcrafted predictions covering the 80 test ids; the exact votes
    // are irrelevant to the baseline column.
    let mut predictions = String::from("id\ti1\ti2\ti3\tfinal\n");
    for i in 0..80u32 {
        let bits = [i % 2, (i / 2) % 2, (i / 4) % 2].map(|b| b as u8);
        let votes = VoteInput::new(bits[0], bits[1], bits[2]).expect("binary votes");
        predictions.push_str(&format!(
            "s{i:05}\t{}\t{}\t{}\t{}\n",
            bits[0],
            bits[1],
            bits[2],
            majority_vote(votes)
        ));
    }
    fs::write(out.join("predictions.tsv"), predictions).expect("write predictions");

    fixture.run(&["evaluate", "--baseline"]);

    let raw = fs::read_to_string(out.join("evaluation.json")).expect("evaluation.json");
    let json: serde_json::Value = serde_json::from_str(&raw).expect("json");
    for (pointer, value) in [
        ("/baseline/overall/final/accuracy", 0.7553),
        ("/baseline/overall/final/f1", 0.7551),
        ("/baseline/by_source/gab/final", 0.7719),
        ("/baseline/by_source/twitter/final", 0.7504),
        ("/baseline/by_language/en/final", 0.7559),
        ("/baseline/by_language/es/final", 0.7546),
    ] {
        assert_eq!(
            json.pointer(pointer).and_then(serde_json::Value::as_f64),
            Some(value),
            "{pointer}"
        );
    }
    for text in ["0.7553", "0.7551", "0.7719", "0.7504", "0.7559", "0.7546"] {
        assert!(raw.contains(text), "{text} missing from evaluation.json");
    }

    // The text table styles the same values with comma decimals.
    let table = fs::read_to_string(out.join("evaluation.txt")).expect("evaluation.txt");
    for text in ["0,7553", "0,7551", "0,7719", "0,7504", "0,7559", "0,7546"] {
        assert!(table.contains(text), "{text} missing from evaluation.txt");
    }
}
