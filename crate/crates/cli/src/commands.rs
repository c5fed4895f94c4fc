use std::fmt::Display;
use std::path::{Path, PathBuf};

use serde::Serialize;
use toml::Table;
use tracing::info;

use triage_classifier::encoder::DEFAULT_ENCODER_HOME;
use triage_classifier::{
    fine_tune, pretrain_encoder, ClassifierArtifact, PretrainConfig, ProgressSink, TrainingConfig,
};
use triage_core::archive::read_archive;
use triage_core::baseline::{train_baseline, BaselineArtifact, BaselineConfig};
use triage_core::corpus::store::{read_split, write_corpus, Split};
use triage_core::corpus::{prepare_corpus, PrepareOptions, WhatlangDetector};
use triage_core::metrics::{compare_reports, EvaluationReport};
use triage_core::{evaluate_predictor, IssueRecord, Predictor};
use triage_ingest::{run_fetch, ClientConfig, FetchOptions, GitHubClient};
use triage_service::ServiceConfig;

use crate::args::{Command, Format, ModelArgs, SplitArg};
use crate::config::{FetchSection, Flags, PrepareSection, RunConfig};
use crate::error::CliError;

pub struct Context {
    pub config: RunConfig,
    pub format: Format,
}

impl Context {
    /// Resolves a config section and echoes it to stderr.
    fn section<T>(&self, name: &str, defaults: T, flags: Flags) -> Result<T, CliError>
    where
        T: Serialize + serde::de::DeserializeOwned,
    {
        let value = self.config.section(name, defaults, flags.into_table())?;
        let mut wrapper = Table::new();
        if let Ok(v) = toml::Value::try_from(&value) {
            wrapper.insert(name.to_string(), v);
        }
        eprint!("{}", toml::to_string(&wrapper).unwrap_or_default());
        Ok(value)
    }

    fn emit<T: Serialize>(&self, value: &T, text: impl Display) -> Result<(), CliError> {
        match self.format {
            Format::Json => println!("{}", to_json(value)?),
            Format::Text => println!("{text}"),
        }
        Ok(())
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, to_json(value)? + "\n").map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_report(path: &Path) -> Result<EvaluationReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Model(format!("cannot start async runtime: {e}")))
}

struct LogProgress {
    every: usize,
}

impl ProgressSink for LogProgress {
    fn step(&mut self, epoch: u32, step: usize, loss: f64) {
        if step % self.every == 0 {
            info!(epoch, step, loss = format!("{loss:.4}"), "step");
        }
    }

    fn epoch(&mut self, epoch: u32, mean_loss: f64) {
        info!(epoch, mean_loss = format!("{mean_loss:.4}"), "epoch done");
    }
}

fn load_model(args: &ModelArgs) -> Result<(Box<dyn Predictor>, PathBuf), CliError> {
    match (&args.artifact, &args.baseline) {
        (Some(dir), _) => Ok((Box::new(ClassifierArtifact::load(dir)?), dir.clone())),
        (_, Some(dir)) => Ok((Box::new(BaselineArtifact::load(dir)?), dir.clone())),
        _ => Err(CliError::Usage("give --artifact or --baseline".into())),
    }
}

fn parse_languages(spec: &str) -> Result<Vec<String>, CliError> {
    let path = Path::new(spec);
    let raw = if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{spec}: {e}")))?
    } else {
        spec.replace(',', "\n")
    };
    Ok(raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

pub fn run(ctx: &Context, command: Command) -> Result<(), CliError> {
    match command {
        Command::Fetch { languages, repos_per_language, page_size, workers, out, api_url } => {
            let languages = languages.as_deref().map(parse_languages).transpose()?;
            let section: FetchSection = ctx.section(
                "fetch",
                FetchSection::default(),
                Flags::default()
                    .set("languages", languages)
                    .set("repos_per_language", repos_per_language)
                    .set("page_size", page_size)
                    .set("workers", workers),
            )?;
            let mut client_config = ClientConfig::from_env();
            if let Some(url) = api_url {
                client_config.base_url = url;
            }
            let client = GitHubClient::new(client_config);
            let options = FetchOptions {
                languages: section.languages,
                repos_per_language: section.repos_per_language,
                page_size: section.page_size,
                workers: section.workers,
            };
            let manifest = runtime()?.block_on(run_fetch(&client, &options, &out))?;
            ctx.emit(
                &manifest,
                format!(
                    "wrote {} records ({} duplicates skipped, {} pull requests) from {} repositories to {}",
                    manifest.records_written,
                    manifest.duplicates_skipped,
                    manifest.pull_requests,
                    manifest.fetched_counts.len(),
                    out.display()
                ),
            )
        }

        Command::Prepare { input, out, ratio, seed, no_oversample, sample } => {
            let section: PrepareSection = ctx.section(
                "prepare",
                PrepareSection::default(),
                Flags::default()
                    .set("ratio", ratio)
                    .set("seed", seed)
                    .set("oversample", no_oversample.then_some(false))
                    .set("sample", sample),
            )?;
            let records: Vec<IssueRecord> = read_archive(&input)?.collect::<Result<_, _>>()?;
            info!(records = records.len(), "archive read");
            let options = PrepareOptions {
                ratio: section.ratio,
                seed: section.seed,
                oversample: section.oversample,
                sample: section.sample,
            };
            let prepared = prepare_corpus(records, &WhatlangDetector, &options)?;
            let manifest = write_corpus(&out, &prepared.split, Some(&prepared.stats))?;
            let s = &prepared.stats;
            ctx.emit(
                &manifest,
                format!(
                    "{} records: {} pull requests, {} unlabeled, {} non-English, {} labeled English kept\n\
                     train {} / test {} written to {}",
                    s.records,
                    s.pull_requests,
                    s.unlabeled,
                    s.non_english,
                    s.sampled,
                    manifest.train_examples,
                    manifest.test_examples,
                    out.display()
                ),
            )
        }

        Command::Pretrain { corpus, out, name, steps, vocab_size, max_len, seed } => {
            let cfg: PretrainConfig = ctx.section(
                "pretrain",
                PretrainConfig::default(),
                Flags::default()
                    .set("name", name)
                    .set("steps", steps)
                    .set("vocab_size", vocab_size)
                    .set("max_sequence_length", max_len)
                    .set("seed", seed),
            )?;
            let texts: Vec<String> = read_split(&corpus, Split::Train)?
                .into_iter()
                .filter(|e| !e.is_duplicate())
                .map(|e| e.text)
                .collect();
            info!(texts = texts.len(), steps = cfg.steps, "pretraining");
            let every = (cfg.steps / 20).max(1);
            let (encoder, report) = pretrain_encoder(&texts, &cfg, &mut LogProgress { every })?;
            let out = out.unwrap_or_else(|| {
                std::env::var_os("TRIAGE_ENCODER_HOME")
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from(DEFAULT_ENCODER_HOME))
                    .join(&cfg.name)
            });
            encoder.save(&out)?;
            write_json(&out.join("pretrain-report.json"), &report)?;
            let (first, last) = report.first_and_last();
            ctx.emit(
                &report,
                format!(
                    "encoder `{}` saved to {}; masked-token loss {first:.3} -> {last:.3} over {} steps",
                    cfg.name,
                    out.display(),
                    report.steps
                ),
            )
        }

        Command::Train {
            corpus,
            out,
            epochs,
            learning_rate,
            batch_size,
            max_len,
            base_encoder,
            seed,
            threshold,
            weight_decay,
        } => {
            let cfg: TrainingConfig = ctx.section(
                "training",
                TrainingConfig::default(),
                Flags::default()
                    .set("epochs", epochs)
                    .set("learning_rate", learning_rate)
                    .set("batch_size", batch_size)
                    .set("max_sequence_length", max_len)
                    .set("base_encoder", base_encoder)
                    .set("seed", seed)
                    .set("decision_threshold", threshold)
                    .set("weight_decay", weight_decay),
            )?;
            cfg.validate()?;
            let train = read_split(&corpus, Split::Train)?;
            info!(examples = train.len(), base = %cfg.base_encoder, "fine-tuning");
            let every = (train.len() / cfg.batch_size / 5).max(1);
            let artifact = fine_tune(&train, &cfg, &mut LogProgress { every })?;
            artifact.save(&out)?;
            let meta = artifact.meta();
            ctx.emit(
                meta,
                format!(
                    "model {} saved to {}; epoch losses {:?}",
                    artifact.version(),
                    out.display(),
                    meta.epoch_losses.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>()
                ),
            )
        }

        Command::TrainBaseline { corpus, out, min_token_freq, seed } => {
            let cfg: BaselineConfig = ctx.section(
                "baseline",
                BaselineConfig::default(),
                Flags::default().set("min_token_freq", min_token_freq).set("seed", seed),
            )?;
            let train = read_split(&corpus, Split::Train)?;
            let artifact = train_baseline(&train, &cfg)?;
            let path = artifact.save(&out)?;
            let summary = serde_json::json!({
                "model": artifact.model_id(),
                "path": path,
                "train_examples": train.len(),
            });
            ctx.emit(&summary, format!("{} saved to {}", artifact.model_id(), path.display()))
        }

        Command::Evaluate { model, corpus, split, out } => {
            let (predictor, dir) = load_model(&model)?;
            let (split, name) = match split {
                SplitArg::Train => (Split::Train, "train"),
                SplitArg::Test => (Split::Test, "test"),
            };
            let examples = read_split(&corpus, split)?;
            info!(examples = examples.len(), model = %predictor.model_id(), "evaluating");
            let report = evaluate_predictor(predictor.as_ref(), &examples)?;
            let out = out.unwrap_or_else(|| dir.join(format!("evaluation-{name}.json")));
            write_json(&out, &report)?;
            info!(path = %out.display(), "report written");
            ctx.emit(&report, &report)
        }

        Command::Compare { reports, out } => {
            let [left, right] = reports.as_slice() else {
                return Err(CliError::Usage(format!(
                    "--report must be given exactly twice, got {}",
                    reports.len()
                )));
            };
            let table = compare_reports(&read_report(left)?, &read_report(right)?)?;
            if let Some(out) = out {
                write_json(&out, &table)?;
            }
            ctx.emit(&table, &table)
        }

        Command::Predict { model, text } => {
            let (predictor, _) = load_model(&model)?;
            let prediction = predictor
                .predict(&text.to_lowercase())
                .map_err(|e| match e {
                    triage_core::PredictError::EmptyText => CliError::Usage(e.to_string()),
                    other => CliError::Model(other.to_string()),
                })?;
            let labels: Vec<&str> = prediction.labels.labels().into_iter().map(|l| l.name()).collect();
            let result = serde_json::json!({
                "model": predictor.model_id(),
                "labels": labels,
                "probabilities": prediction.probabilities,
            });
            let shown = if labels.is_empty() { "(none)".to_string() } else { labels.join(", ") };
            ctx.emit(&result, shown)
        }

        Command::Serve { artifact, bind, delivery_log } => {
            let mut config = ServiceConfig::from_env();
            if let Some(a) = artifact {
                config.artifact_dir = a;
            }
            if let Some(b) = bind {
                config.bind_addr = b;
            }
            if let Some(d) = delivery_log {
                config.delivery_log = d;
            }
            config.validate()?;
            runtime()?.block_on(triage_service::serve(&config))?;
            Ok(())
        }

        Command::Rq1 { corpus, artifact, baseline, out } => {
            let test = read_split(&corpus, Split::Test)?;
            let baseline = BaselineArtifact::load(&baseline)?;
            let transformer = ClassifierArtifact::load(&artifact)?;
            info!(examples = test.len(), "evaluating both models on the test split");
            let left = evaluate_predictor(&transformer, &test)?;
            let right = evaluate_predictor(&baseline, &test)?;
            let table = compare_reports(&left, &right)?;
            write_json(&out.join("transformer-report.json"), &left)?;
            write_json(&out.join("baseline-report.json"), &right)?;
            write_json(&out.join("comparison.json"), &table)?;
            let text = format!("{left}\n{right}\n{table}");
            std::fs::write(out.join("comparison.txt"), &text)
                .map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
            ctx.emit(&table, text)
        }
    }
}
