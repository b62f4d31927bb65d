use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use asag_core::corpus::{
    dedupe, parse_mohler, parse_seb, read_pairs_csv, write_pairs_to, write_scored_to, Corpus,
};
use asag_core::embed::{EmbeddingProvider, ProviderKind, ProviderSpec};
use asag_core::evalmetrics::evaluate;
use asag_core::features::{featurize, FeatureSet};
use asag_core::model::HeadConfig;
use asag_core::pipeline::{
    score_corpus, train_pipeline, Checkpoint, PipelineKind, PipelineOptions, RunInfo,
};
use asag_core::splitter::{stratified_split, SplitSpec, DEFAULT_SPLIT_SEED};
use asag_core::trainer::{AttemptRecord, Control, EpochRecord, TrainObserver};
use serde::Deserialize;

use crate::args::{
    EvalArgs, FeaturizeArgs, Ingest, PipelineArg, ScoreArgs, ServeArgs, SplitArgs, TrainArgs,
};
use crate::settings::{service_config, Settings};
use crate::Cli;

/// Write to `path`, or standard output when absent.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn build_provider(spec: &str) -> Result<Box<dyn EmbeddingProvider>> {
    let spec: ProviderSpec = spec.parse()?;
    spec.build()
        .with_context(|| format!("starting provider {spec}"))
}

pub fn ingest(cmd: &Ingest) -> Result<()> {
    let (corpus, out, dd) = match cmd {
        Ingest::Mohler(a) => (parse_mohler(&a.root)?, a.output.as_deref(), a.dedupe),
        Ingest::Seb(a) => (parse_seb(&a.root, a.split)?, a.output.as_deref(), a.dedupe),
    };
    let corpus = if dd { dedupe(&corpus) } else { corpus };
    let mut w = sink(out)?;
    write_pairs_to(&corpus, &mut w, true)?;
    w.flush()?;
    eprintln!("{} pairs", corpus.len());
    Ok(())
}

pub fn split(args: &SplitArgs, settings: &Settings) -> Result<()> {
    let corpus = read_pairs_csv(&args.input, true, args.score_max)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut spec = SplitSpec::new(
        args.fractions.clone(),
        settings.seed.unwrap_or(DEFAULT_SPLIT_SEED),
    )?;
    if args.unstratified {
        spec = spec.unstratified();
    }
    let parts = stratified_split(&corpus, &spec)?;
    let names: &[&str] = match parts.len() {
        1 => &["all"],
        2 => &["train", "val"],
        _ => &["train", "val", "test"],
    };
    fs::create_dir_all(&args.out_dir)?;
    for (part, name) in parts.iter().zip(names) {
        let path = args.out_dir.join(format!("{name}.csv"));
        let mut w = BufWriter::new(File::create(&path)?);
        write_pairs_to(part, &mut w, true)?;
        w.flush()?;
        eprintln!("{}: {} pairs", path.display(), part.len());
    }
    Ok(())
}

pub fn featurize_cmd(args: &FeaturizeArgs, settings: &Settings) -> Result<()> {
    let corpus = read_pairs_csv(&args.input, false, args.score_max)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let set: FeatureSet = args.set.into();
    let provider = if set.needs_embeddings() {
        Some(build_provider(&settings.provider_or_default())?)
    } else {
        None
    };
    let m = featurize(&corpus, set, provider.as_deref())?;
    let mut w = sink(args.output.as_deref())?;
    m.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Epoch lines on the error stream, optionally mirrored to an NDJSON file.
struct Progress {
    curve: Option<BufWriter<File>>,
}

impl TrainObserver for Progress {
    fn on_attempt_start(&mut self, attempt: usize, seed: u64) {
        eprintln!("attempt {attempt} (seed {seed})");
    }

    fn on_epoch(&mut self, r: &EpochRecord) -> Control {
        let pearson = r
            .val_pearson
            .map_or("n/a".to_string(), |p| format!("{p:.4}"));
        eprintln!(
            "  epoch {:>2}  train {:.5}  val {:.5}  rmse {:.4}  pearson {pearson}",
            r.epoch, r.train_loss, r.val_loss, r.val_rmse_scaled
        );
        if let Some(w) = &mut self.curve {
            let line = serde_json::to_string(r).expect("epoch record serializes");
            if let Err(e) = writeln!(w, "{line}") {
                eprintln!("warning: curve file: {e}");
                self.curve = None;
            }
        }
        Control::Continue
    }

    fn on_attempt_end(&mut self, r: &AttemptRecord) {
        if r.aborted {
            eprintln!("  aborted");
        }
        if let Some(f) = &r.failure {
            eprintln!("  failed: {f}");
        }
    }
}

/// The pipeline options a `train` invocation resolves to.
pub fn train_options(args: &TrainArgs, settings: &Settings) -> PipelineOptions {
    let head = settings.head_settings();
    let mut options = PipelineOptions {
        head: HeadConfig::new(1)
            .with_hidden(head.hidden_dims)
            .with_dropout(head.dropout_p)
            .with_seed(head.seed),
        train: settings.train_config(),
        split: SplitSpec::train_val(0),
        forest: settings.forest_config(),
        feature_set: settings.feature_set(),
    };
    if let Some(v) = args.lr {
        options.train.lr_peak = v;
    }
    if let Some(v) = args.weight_decay {
        options.train.weight_decay = v;
    }
    if let Some(v) = args.epochs {
        options.train.max_epochs = v;
    }
    if let Some(v) = args.max_restarts {
        options.train.max_restarts = v;
    }
    if let Some(v) = &args.hidden {
        options.head.hidden_dims = v.clone();
    }
    if let Some(v) = args.dropout {
        options.head.dropout_p = v;
    }
    if let Some(v) = args.trees {
        options.forest.n_trees = v;
    }
    if let Some(v) = args.set {
        options.feature_set = v.into();
    }
    options
}

pub fn train(args: &TrainArgs, settings: &Settings) -> Result<()> {
    let corpus = read_pairs_csv(&args.input, true, args.score_max)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let kind = match args.pipeline {
        PipelineArg::Head => PipelineKind::Head,
        PipelineArg::Forest => PipelineKind::FeaturesForest,
    };
    let options = train_options(args, settings);
    options.train.validate()?;
    let provider = build_provider(&settings.provider_or_default())?;
    let run = RunInfo {
        dataset: args.dataset.clone().unwrap_or_else(|| {
            args.input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        }),
        created_at: args.created_at.clone().unwrap_or_else(|| {
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
        }),
    };
    let curve = match &args.curve {
        Some(p) => Some(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => None,
    };
    let mut observer = Progress { curve };
    let outcome = train_pipeline(
        &corpus,
        kind,
        provider.as_ref(),
        &options,
        &run,
        &mut observer,
    )?;
    if let Some(mut w) = observer.curve.take() {
        w.flush()?;
    }
    outcome.checkpoint.save(&args.output)?;
    let summary = match &outcome.report {
        Some(r) => serde_json::json!({
            "pipeline": kind,
            "checkpoint": args.output,
            "chosen_attempt": r.chosen_attempt,
            "chosen_epoch": r.chosen_epoch,
            "accepted": r.accepted,
            "attempts": r.attempts.len(),
            "val_pearson": r.final_val.pearson,
            "val_rmse_scaled": r.final_val.rmse_scaled,
        }),
        None => serde_json::json!({
            "pipeline": kind,
            "checkpoint": args.output,
        }),
    };
    println!("{summary}");
    if outcome.report.as_ref().is_some_and(|r| !r.accepted) {
        eprintln!("warning: no attempt reached the acceptance threshold; kept the best one");
    }
    Ok(())
}

pub fn score(args: &ScoreArgs, settings: &Settings) -> Result<()> {
    let checkpoint = Checkpoint::load(&args.model)
        .with_context(|| format!("loading {}", args.model.display()))?;
    let corpus = read_pairs_csv(&args.input, false, checkpoint.meta.score_max)
        .with_context(|| format!("reading {}", args.input.display()))?;
    // A hash checkpoint carries everything needed to rebuild its provider.
    let spec = match (&settings.provider, checkpoint.meta.provider.kind) {
        (Some(s), _) => s.clone(),
        (None, ProviderKind::Hash) => format!("hash:{}", checkpoint.meta.provider.dim),
        (None, kind) => bail!("checkpoint was trained with a {kind} provider; pass --provider"),
    };
    let provider = build_provider(&spec)?;
    let scores = score_corpus(&checkpoint, &corpus, provider.as_ref())?;
    let mut w = sink(args.output.as_deref())?;
    write_scored_to(&corpus, &scores, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct PredRow {
    id: String,
    score: f64,
}

fn read_predictions(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    rdr.deserialize::<PredRow>()
        .enumerate()
        .map(|(i, r)| {
            r.map(|r| (r.id, r.score))
                .with_context(|| format!("{} row {}", path.display(), i + 1))
        })
        .collect()
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let gold: Corpus = read_pairs_csv(&args.gold, true, args.score_max)
        .with_context(|| format!("reading {}", args.gold.display()))?;
    let gold: Vec<(String, Option<f64>)> = gold
        .pairs()
        .iter()
        .map(|p| (p.id.clone(), p.gold_score))
        .collect();
    let pred = read_predictions(&args.pred)?;
    let r = evaluate(&gold, &pred, args.score_max)?;
    println!("{}", serde_json::to_string(&r)?);
    print!("{}", r.table());
    Ok(())
}

pub fn serve(args: &ServeArgs, cli: &Cli, settings: &Settings) -> Result<()> {
    let config = service_config(cli, settings, args.bind.as_deref());
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    rt.block_on(asag_service::serve(config, |addr| {
        eprintln!("listening on http://{addr}");
    }))?;
    Ok(())
}
