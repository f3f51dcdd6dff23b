//! The four pipeline commands: stats, train, predict, evaluate.
//!
//! Every command reads one TOML config, writes its machine-readable
//! outputs into the configured output directory, and snapshots the config
//! there for provenance. Outputs are byte-identical across reruns with the
//! same config and seed; the only timestamp lives in `run_meta.json`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};

use trivote::corpus::{dataset_stats, load_dataset, split, Dataset, Label};
use trivote::evaluation::{records_from_ensemble, EvaluationDoc};
use trivote::models::{
    build_bilstm, build_concat_pair, train, ModelError, TrainedModel, UntrainedModel,
};
use trivote::voting::{majority_vote, EnsemblePrediction, VoteInput};

use crate::config::RunConfig;

/// Failure category, mapped one-to-one onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Usage or configuration problem (exit 1).
    Config,
    /// Input data problem (exit 2).
    Data,
    /// Training failure (exit 3).
    Training,
}

#[derive(Debug)]
pub struct CliError {
    pub stage: Stage,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        CliError {
            stage: Stage::Config,
            error: error.into(),
        }
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        CliError {
            stage: Stage::Data,
            error: error.into(),
        }
    }

    pub fn training(error: impl Into<anyhow::Error>) -> Self {
        CliError {
            stage: Stage::Training,
            error: error.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.stage {
            Stage::Config => 1,
            Stage::Data => 2,
            Stage::Training => 3,
        }
    }
}

/// A loaded config plus the path it came from, for the provenance copy.
pub struct RunContext {
    pub config: RunConfig,
    pub config_path: PathBuf,
}

const MODEL_DIRS: [&str; 3] = ["model-one", "model-two", "model-three"];

impl RunContext {
    fn out(&self) -> &Path {
        &self.config.paths.out
    }

    /// Creates the output directory and snapshots the config into it.
    fn prepare_out(&self) -> Result<(), CliError> {
        let out = self.out();
        fs::create_dir_all(out)
            .with_context(|| format!("cannot create output directory {}", out.display()))
            .map_err(CliError::config)?;
        let dest = out.join("config.toml");
        let same_file = match (self.config_path.canonicalize(), dest.canonicalize()) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        };
        if !same_file {
            fs::copy(&self.config_path, &dest)
                .with_context(|| format!("cannot snapshot config into {}", dest.display()))
                .map_err(CliError::config)?;
        }
        Ok(())
    }

    fn write_out(&self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.out().join(name);
        fs::write(&path, content)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(CliError::config)
    }

    /// Rewrites the timestamp side file. All other outputs are
    /// timestamp-free so reruns stay byte-identical.
    fn write_run_meta(&self, command: &str) -> Result<(), CliError> {
        let finished_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let doc = serde_json::json!({
            "command": command,
            "seed": self.config.seed,
            "finished_unix": finished_unix,
        });
        let body = serde_json::to_string_pretty(&doc).expect("serialize run meta") + "\n";
        self.write_out("run_meta.json", &body)
    }

    fn load_train(&self) -> Result<Dataset, CliError> {
        load_dataset(&self.config.paths.train, &self.config.columns, true).map_err(CliError::data)
    }

    fn test_path(&self) -> Result<&Path, CliError> {
        self.config
            .paths
            .test
            .as_deref()
            .ok_or_else(|| CliError::config(anyhow!("config has no paths.test")))
    }
}

/// Emits sentence counts for the configured datasets.
pub fn cmd_stats(ctx: &RunContext) -> Result<(), CliError> {
    ctx.prepare_out()?;
    let train = ctx.load_train()?;
    let train_stats = dataset_stats(&train).map_err(CliError::data)?;

    let mut text = train_stats.render_text();
    let mut doc = serde_json::Map::new();
    doc.insert("train".to_owned(), train_stats.to_json());

    if let Some(test_path) = &ctx.config.paths.test {
        let test = load_dataset(test_path, &ctx.config.columns, true).map_err(CliError::data)?;
        let test_stats = dataset_stats(&test).map_err(CliError::data)?;
        text.push('\n');
        text.push_str(&test_stats.render_text());
        doc.insert("test".to_owned(), test_stats.to_json());
    }

    let json = serde_json::to_string_pretty(&serde_json::Value::Object(doc))
        .expect("serialize stats")
        + "\n";
    ctx.write_out("stats.txt", &text)?;
    ctx.write_out("stats.json", &json)?;
    ctx.write_run_meta("stats")?;
    print!("{text}");
    Ok(())
}

fn build_plans(ctx: &RunContext) -> Result<[UntrainedModel; 3], CliError> {
    let registry = ctx.config.registry().map_err(CliError::config)?;
    let wrap =
        |name: &'static str| move |e: ModelError| CliError::config(anyhow!(e).context(name));
    let one = build_concat_pair(&ctx.config.model_one, &registry).map_err(wrap("model-one"))?;
    let two = build_concat_pair(&ctx.config.model_two, &registry).map_err(wrap("model-two"))?;
    let three = build_bilstm(&ctx.config.model_three, &registry).map_err(wrap("model-three"))?;
    Ok([one, two, three])
}

/// Trains the three basic models concurrently and saves each into its own
/// directory. A failing model does not stop the other two; any failure
/// still fails the command.
pub fn cmd_train(ctx: &RunContext) -> Result<(), CliError> {
    ctx.prepare_out()?;
    // Encoder wiring and config validation happen before any data load or
    // training so a typo fails fast.
    let plans = build_plans(ctx)?;

    let full = ctx.load_train()?;
    let (train_ds, val_ds) = split(
        &full,
        ctx.config.training.validation_fraction,
        ctx.config.seed,
    )
    .map_err(CliError::data)?;
    log::info!(
        "split {} samples into {} train / {} validation",
        full.len(),
        train_ds.len(),
        val_ds.len()
    );

    let seeds = ctx.config.model_seeds();
    let configs = seeds.map(|seed| ctx.config.training.train_config(seed));
    let results: Vec<Result<TrainedModel, ModelError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = plans
            .iter()
            .zip(&configs)
            .map(|(plan, tc)| scope.spawn(|| train(plan, &train_ds, &val_ds, tc)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    });

    let mut failures: Vec<(&str, ModelError)> = Vec::new();
    for (name, result) in MODEL_DIRS.iter().zip(results) {
        match result {
            Ok(model) => {
                let dir = ctx.out().join(name);
                model
                    .save(&dir)
                    .map_err(|e| CliError::training(anyhow!(e).context(format!("{name}: save"))))?;
                let h = model.history();
                println!(
                    "{name}: {} epochs, best validation accuracy {:.4} at epoch {}",
                    h.epochs.len(),
                    h.best_val_accuracy,
                    h.best_epoch
                );
            }
            Err(e) => {
                log::error!("{name} failed: {e}");
                failures.push((name, e));
            }
        }
    }
    ctx.write_run_meta("train")?;

    if failures.is_empty() {
        return Ok(());
    }
    // Configuration mistakes surface as exit 1 even when caught inside the
    // training call; genuine training aborts are exit 3.
    let config_class = |e: &ModelError| {
        matches!(
            e,
            ModelError::BadConfig { .. } | ModelError::FineTuneUnsupported { .. }
        )
    };
    let stage = if failures.iter().all(|(_, e)| config_class(e)) {
        Stage::Config
    } else {
        Stage::Training
    };
    let summary = failures
        .iter()
        .map(|(name, e)| format!("{name}: {e}"))
        .collect::<Vec<_>>()
        .join("; ");
    Err(CliError {
        stage,
        error: anyhow!("{} of 3 models failed: {summary}", failures.len()),
    })
}

fn load_models(ctx: &RunContext) -> Result<Vec<TrainedModel>, CliError> {
    let registry = ctx.config.registry().map_err(CliError::config)?;
    MODEL_DIRS
        .iter()
        .map(|name| {
            let dir = ctx.out().join(name);
            TrainedModel::load(&dir, &registry)
                .map_err(|e| CliError::config(anyhow!(e).context(format!("cannot load {name}"))))
        })
        .collect()
}

/// Predicts the test file with all three models and the majority vote.
pub fn cmd_predict(ctx: &RunContext) -> Result<(), CliError> {
    ctx.prepare_out()?;
    let models = load_models(ctx)?;
    let input_path = ctx.test_path()?;
    // Gold labels are not required here; they are picked up when present.
    let input = load_dataset(input_path, &ctx.config.columns, false).map_err(CliError::data)?;
    if input.is_empty() {
        return Err(CliError::data(anyhow!(
            "{} has no data rows",
            input_path.display()
        )));
    }

    let batches: Vec<Vec<(String, trivote::models::InferenceResult)>> = models
        .iter()
        .map(|m| m.predict_batch(&input).map_err(CliError::data))
        .collect::<Result<_, _>>()?;

    let mut predictions = String::from("id\ti1\ti2\ti3\tfinal\n");
    let mut submission = String::from("id\tlabel\n");
    let mut per_model = [
        String::from("id\tprobability\tlabel\n"),
        String::from("id\tprobability\tlabel\n"),
        String::from("id\tprobability\tlabel\n"),
    ];
    for (i, sample) in input.samples().iter().enumerate() {
        let votes = VoteInput::new(batches[0][i].1.label, batches[1][i].1.label, batches[2][i].1.label)
            .expect("model labels are 0 or 1");
        let final_vote = majority_vote(votes);
        let final_label = Label::from_u8(final_vote).expect("vote is 0 or 1");
        writeln!(
            predictions,
            "{}\t{}\t{}\t{}\t{}",
            sample.id, votes.i1, votes.i2, votes.i3, final_vote
        )
        .expect("write to string");
        writeln!(submission, "{}\t{}", sample.id, final_label).expect("write to string");
        for (file, batch) in per_model.iter_mut().zip(&batches) {
            let result = &batch[i].1;
            writeln!(file, "{}\t{}\t{}", sample.id, result.probability, result.label)
                .expect("write to string");
        }
    }

    ctx.write_out("predictions.tsv", &predictions)?;
    ctx.write_out("submission.tsv", &submission)?;
    for (name, file) in MODEL_DIRS.iter().zip(&per_model) {
        ctx.write_out(&format!("{name}.tsv"), file)?;
    }
    ctx.write_run_meta("predict")?;
    println!(
        "wrote predictions for {} samples to {}",
        input.len(),
        ctx.out().display()
    );
    Ok(())
}

/// One parsed row of `predictions.tsv`.
struct PredictionRow {
    id: String,
    votes: VoteInput,
}

fn parse_predictions(path: &Path) -> anyhow::Result<Vec<PredictionRow>> {
    let content = fs::read_to_string(path)
        .with_context(|| format!("cannot read predictions {}", path.display()))?;
    let mut lines = content.lines();
    let header = lines.next().unwrap_or("");
    if header != "id\ti1\ti2\ti3\tfinal" {
        anyhow::bail!(
            "{}: unexpected header {header:?}; expected id/i1/i2/i3/final",
            path.display()
        );
    }
    let mut rows = Vec::new();
    for (offset, line) in lines.enumerate() {
        let row = offset + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            anyhow::bail!("{}:{row}: expected 5 columns, found {}", path.display(), fields.len());
        }
        let bit = |s: &str, col: &str| -> anyhow::Result<u8> {
            s.parse::<u8>()
                .ok()
                .filter(|v| *v <= 1)
                .ok_or_else(|| anyhow!("{}:{row}: {col} must be 0 or 1, found {s:?}", path.display()))
        };
        let votes = VoteInput::new(
            bit(fields[1], "i1")?,
            bit(fields[2], "i2")?,
            bit(fields[3], "i3")?,
        )
        .expect("validated bits");
        let declared = bit(fields[4], "final")?;
        if declared != majority_vote(votes) {
            anyhow::bail!(
                "{}:{row}: final column {declared} disagrees with the majority of ({}, {}, {})",
                path.display(),
                votes.i1,
                votes.i2,
                votes.i3
            );
        }
        rows.push(PredictionRow {
            id: fields[0].to_owned(),
            votes,
        });
    }
    Ok(rows)
}

/// Scores the prediction file against gold labels and renders reports.
pub fn cmd_evaluate(ctx: &RunContext, baseline_flag: bool) -> Result<(), CliError> {
    ctx.prepare_out()?;
    let gold_path = ctx.test_path()?;
    let gold = load_dataset(gold_path, &ctx.config.columns, true).map_err(CliError::data)?;
    let rows = parse_predictions(&ctx.out().join("predictions.tsv")).map_err(CliError::data)?;

    let by_id: HashMap<&str, &trivote::corpus::Sample> =
        gold.samples().iter().map(|s| (s.id.as_str(), s)).collect();
    let mut missing = Vec::new();
    let mut predictions = Vec::with_capacity(rows.len());
    for row in &rows {
        match by_id.get(row.id.as_str()) {
            Some(sample) => predictions.push(EnsemblePrediction::new(
                row.id.clone(),
                sample.source,
                sample.language,
                sample.label,
                row.votes,
            )),
            None => missing.push(row.id.as_str()),
        }
    }
    if !missing.is_empty() {
        let shown = missing.iter().take(10).copied().collect::<Vec<_>>().join(", ");
        let suffix = if missing.len() > 10 {
            format!(" (and {} more)", missing.len() - 10)
        } else {
            String::new()
        };
        return Err(CliError::data(anyhow!(
            "{} prediction ids have no gold row in {}: {shown}{suffix}",
            missing.len(),
            gold_path.display()
        )));
    }

    let records = records_from_ensemble(&predictions).map_err(CliError::data)?;
    let with_baseline = baseline_flag || ctx.config.evaluation.baseline;
    let doc = EvaluationDoc::build(&records, ctx.config.evaluation.averaging, with_baseline)
        .map_err(CliError::data)?;

    let text = doc.render_text();
    ctx.write_out("evaluation.txt", &text)?;
    ctx.write_out("evaluation.json", &doc.to_json())?;
    ctx.write_run_meta("evaluate")?;
    print!("{text}");
    Ok(())
}
