use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use helprank::classifiers::TrainedModel;
use helprank::corpus::{
    assign_label, corpus_stats, read_jsonl, read_reviews, Category, CorpusEntry, DecisionTallies, PrepareConfig,
    PreparedData, SplitSpec, UNLABELED_FILE,
};
use helprank::embeddings::EmbeddingTable;
use helprank::numerics::checkpoint::write_atomic;
use helprank::text::{Tokenizer, Vocabulary};
use helprank::train::{
    compare_reports, evaluate_model, pretrain_embeddings, run_experiment_t1, run_experiment_t2, tokenize_entries,
    ExperimentReport, Pretrained, Provenance, Task, Timing, TrainConfig,
};
use helprank::Error;
use log::{info, warn};
use serde_json::{json, Value};

use crate::config::{flag_layer, label_config, read_layer, Layer};
use crate::manifest::{beside, Recorder, RUN_MANIFEST};
use crate::{Cli, Command, CompareArgs, ConfigArgs, EmbedArgs, EvalArgs, PredictArgs, PrepareArgs, StatsArgs, TrainArgs};

pub const MODEL_FILE: &str = "model.bin";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const TABLE_FILE: &str = "table.bin";
pub const REPORT_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";

pub fn run(cli: &Cli) -> Result<()> {
    let out = Output { json: cli.json };
    match &cli.command {
        Command::Prepare(a) => prepare(a, &out),
        Command::Stats(a) => stats(a, &out),
        Command::Embed(a) => embed(a, &out),
        Command::Train(a) => train(a, &out),
        Command::Eval(a) => eval(a, &out),
        Command::Predict(a) => predict(a),
        Command::Compare(a) => compare(a, &out),
    }
}

/// `{"error": kind, "message": ...}` for the innermost library error.
pub fn error_json(e: &anyhow::Error) -> Value {
    let kind = e
        .chain()
        .find_map(|c| c.downcast_ref::<Error>().map(Error::kind))
        .or_else(|| e.chain().any(|c| c.is::<std::io::Error>()).then_some("IoError"))
        .unwrap_or("Error");
    json!({ "error": kind, "message": format!("{e:#}") })
}

struct Output {
    json: bool,
}

impl Output {
    fn emit(&self, value: &Value, text: impl FnOnce() -> String) {
        if self.json {
            println!("{value}");
        } else {
            print!("{}", text());
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn category_for(name: &Option<String>, input: &Path) -> Result<Category> {
    let name = match name {
        Some(n) => n.clone(),
        None => input
            .file_stem()
            .and_then(|s| s.to_str())
            .map(|s| s.split('.').next().unwrap_or(s).to_string())
            .ok_or_else(|| Error::Config("cannot infer a category from the input name; pass --category".into()))?,
    };
    Ok(name.parse()?)
}

fn read_input(path: &Path, category: &Category) -> Result<Vec<helprank::corpus::ReviewRecord>> {
    read_reviews(path, category).with_context(|| format!("reading {}", path.display()))
}

fn prepare(a: &PrepareArgs, out: &Output) -> Result<()> {
    let mut rec = Recorder::start("prepare");
    let mut layers: Vec<Layer> = Vec::new();
    if let Some(path) = &a.config {
        layers.push(read_layer(path)?);
        rec.input(path)?;
    }
    layers.push(flag_layer(&[
        ("max_len", a.max_len.map(Value::from)),
        ("min_votes", a.min_votes.map(Value::from)),
    ]));
    let label = label_config(&layers)?;
    let seed = a.seed.unwrap_or(0);
    let category = category_for(&a.category, &a.input)?;
    let records = read_input(&a.input, &category)?;
    rec.input(&a.input)?;
    info!("{} records read from {}", records.len(), a.input.display());

    let cfg = PrepareConfig {
        category,
        label,
        per_class: a.per_class,
        unlabeled: a.unlabeled,
        split: SplitSpec::with_seed(seed),
    };
    let (data, mut manifest) = PreparedData::prepare(&records, &cfg, &Tokenizer::default())?;
    for s in &manifest.shortfalls {
        warn!("{}: requested {}, only {} available", s.what, s.requested, s.available);
    }
    data.write(&a.out, &mut manifest)?;
    rec.output(&a.out);
    rec.finish(&a.out.join(RUN_MANIFEST), serde_json::to_value(&cfg)?, Some(seed))?;

    let c = &manifest.counts;
    out.emit(&serde_json::to_value(&manifest)?, || {
        format!(
            "train {} (helpful {}, unhelpful {})\nvalidation {}\ntest {}\nunlabeled {}\nwritten to {}\n",
            c.train.total(),
            c.train.helpful,
            c.train.unhelpful,
            c.validation.total(),
            c.test.total(),
            c.unlabeled,
            a.out.display()
        )
    });
    Ok(())
}

fn stats(a: &StatsArgs, out: &Output) -> Result<()> {
    let category = category_for(&a.category, &a.input)?;
    let records = read_input(&a.input, &category)?;
    let report = corpus_stats(&records);
    let (label, tok) = (Default::default(), Tokenizer::default());
    let mut tallies = DecisionTallies::default();
    for r in &records {
        tallies.record(assign_label(r, &label, &tok));
    }
    let value = json!({ "category": category, "votes": report, "decisions": tallies });
    out.emit(&value, || {
        let mut s = format!("{} reviews ({})\n", report.total, category.display_name());
        for b in &report.bins {
            s += &format!("  {:>8} votes  {:>10}  {:>6.2}%\n", b.label, b.count, b.percent);
        }
        for (k, v) in &tallies.0 {
            s += &format!("  {k:<28} {v:>10}\n");
        }
        s
    });
    Ok(())
}

/// The config layers common to `embed` and `train`: file, `--set`, then
/// the named flags.
fn config_layers(common: &ConfigArgs, rec: &mut Recorder, named: &[(&str, Option<Value>)]) -> Result<Vec<Layer>> {
    let mut layers = Vec::new();
    if let Some(path) = &common.config {
        layers.push(read_layer(path)?);
        rec.input(path)?;
    }
    layers.push(common.set.clone());
    let mut flags = named.to_vec();
    flags.push(("seed", common.seed.map(Value::from)));
    flags.push(("min_count", common.min_count.map(Value::from)));
    layers.push(flag_layer(&flags));
    Ok(layers)
}

fn embed(a: &EmbedArgs, out: &Output) -> Result<()> {
    let mut rec = Recorder::start("embed");
    let mut data = PreparedData::load(&a.labeled).with_context(|| format!("loading {}", a.labeled.display()))?;
    rec.input(&a.labeled)?;
    if let Some(dir) = &a.unlabeled {
        data.unlabeled = read_jsonl::<CorpusEntry>(&dir.join(UNLABELED_FILE))
            .with_context(|| format!("loading the unlabeled pool in {}", dir.display()))?;
        rec.input(dir)?;
    }
    let mut layers = vec![vec![("task".to_string(), Value::from("t2"))]];
    layers.extend(config_layers(
        &a.common,
        &mut rec,
        &[
            ("embed_dim", a.dim.map(Value::from)),
            ("pretrain.epochs", a.epochs.map(Value::from)),
            ("pretrain.window", a.window.map(Value::from)),
            ("pretrain.negatives", a.negatives.map(Value::from)),
        ],
    )?);
    let cfg = TrainConfig::resolve(&layers)?;
    if cfg.task != Task::T2 {
        return Err(Error::Config("embed trains the t2 table; drop `task` from the config".into()).into());
    }
    let pre = pretrain_embeddings(&data, &cfg)?;
    for (i, l) in pre.epoch_losses.iter().enumerate() {
        info!("epoch {}: mean loss {l:.4}", i + 1);
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(Error::Io)?;
    }
    pre.table.save(&a.out)?;
    pre.vocab.save(&sibling(&a.out, ".vocab"))?;
    pre.provenance.save(&sibling(&a.out, ".provenance.json"))?;
    for p in [a.out.clone(), sibling(&a.out, ".json"), sibling(&a.out, ".vocab"), sibling(&a.out, ".provenance.json")] {
        rec.output(&p);
    }
    if let Some(path) = &a.text {
        pre.table.export_text(path, &pre.vocab)?;
        rec.output(path);
    }
    rec.finish(&beside(&a.out), serde_json::to_value(&cfg)?, Some(cfg.seed))?;

    let value = json!({
        "table": a.out,
        "vocab_size": pre.vocab.len(),
        "dim": pre.table.dim(),
        "documents": pre.provenance.documents.len(),
        "epoch_losses": pre.epoch_losses,
    });
    out.emit(&value, || {
        format!(
            "{} words x {} dims from {} documents, written to {}\n",
            pre.vocab.len(),
            pre.table.dim(),
            pre.provenance.documents.len(),
            a.out.display()
        )
    });
    Ok(())
}

fn load_pretrained(path: &Path) -> Result<Pretrained> {
    let ctx = || format!("loading embeddings {}", path.display());
    Ok(Pretrained {
        table: EmbeddingTable::load(path).with_context(ctx)?,
        vocab: Vocabulary::load(&sibling(path, ".vocab")).with_context(ctx)?,
        provenance: Provenance::load(&sibling(path, ".provenance.json")).with_context(ctx)?,
        epoch_losses: Vec::new(),
    })
}

fn train(a: &TrainArgs, out: &Output) -> Result<()> {
    let started = (SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0), Instant::now());
    let mut rec = Recorder::start("train");
    let data = PreparedData::load(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    rec.input(&a.data)?;
    let pretrained = match &a.embeddings {
        Some(p) => {
            for f in [p.clone(), sibling(p, ".json"), sibling(p, ".vocab"), sibling(p, ".provenance.json")] {
                rec.input(&f)?;
            }
            Some(load_pretrained(p)?)
        }
        None => None,
    };
    let mut layers = Vec::new();
    if let Some(p) = &pretrained {
        // a supplied table fixes the dimension unless the config says otherwise
        layers.push(vec![("embed_dim".to_string(), Value::from(p.table.dim()))]);
    }
    layers.extend(config_layers(
        &a.common,
        &mut rec,
        &[
            ("task", a.task.map(|t| Value::from(t.as_str()))),
            ("model", a.model.map(|m| Value::from(m.as_str()))),
            ("epochs", a.epochs.map(Value::from)),
            ("batch_size", a.batch_size.map(Value::from)),
            ("learning_rate", a.learning_rate.map(Value::from)),
            ("embed_dim", a.embed_dim.map(Value::from)),
            ("max_len", a.max_len.map(Value::from)),
            ("dropout", a.dropout.map(Value::from)),
        ],
    )?);
    let cfg = TrainConfig::resolve(&layers)?;
    if pretrained.is_some() && cfg.task == Task::T1 {
        return Err(Error::Config("--embeddings needs --task t2".into()).into());
    }
    info!("task {} / model {} on {}", cfg.task, cfg.model, data.category.display_name());
    let mut outcome = match cfg.task {
        Task::T1 => run_experiment_t1(&data, &cfg)?,
        Task::T2 => run_experiment_t2(&data, pretrained.as_ref(), &cfg)?,
    };
    outcome.report.timing = Some(Timing { started_unix: started.0, wall_clock_secs: started.1.elapsed().as_secs_f64() });

    fs::create_dir_all(&a.out).map_err(Error::Io)?;
    let meta = json!({ "task": cfg.task, "use_summary": cfg.use_summary, "category": data.category });
    outcome.model.save(&a.out.join(MODEL_FILE), meta)?;
    outcome.vocab.save(&a.out.join(VOCAB_FILE))?;
    if let Some(t) = &outcome.table {
        t.save(&a.out.join(TABLE_FILE))?;
    }
    let report = &outcome.report;
    write_atomic(&a.out.join(REPORT_FILE), report.to_json()?.as_bytes())?;
    write_atomic(&a.out.join(REPORT_TEXT_FILE), report.render_text().as_bytes())?;
    rec.output(&a.out);
    rec.finish(&a.out.join(RUN_MANIFEST), serde_json::to_value(&cfg)?, Some(cfg.seed))?;

    out.emit(&serde_json::to_value(report)?, || report.render_text());
    Ok(())
}

fn eval(a: &EvalArgs, out: &Output) -> Result<()> {
    let (model, meta) = TrainedModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let dir = a.model.parent().unwrap_or(Path::new("."));
    let vocab_path = a.vocab.clone().unwrap_or_else(|| dir.join(VOCAB_FILE));
    let vocab = Vocabulary::load(&vocab_path).with_context(|| format!("loading {}", vocab_path.display()))?;
    let table_path = a.embeddings.clone().or_else(|| Some(dir.join(TABLE_FILE)).filter(|p| p.exists()));
    let table = table_path.as_deref().map(EmbeddingTable::load).transpose()?;

    let data = PreparedData::load(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let entries = match a.split.as_str() {
        "train" => &data.train,
        "validation" => &data.validation,
        "test" => &data.test,
        other => return Err(Error::Config(format!("unknown split `{other}` (train, validation or test)")).into()),
    };
    let labels = entries
        .iter()
        .map(|e| e.label.ok_or_else(|| Error::Config(format!("split `{}` has unlabeled entries", a.split))))
        .collect::<Result<Vec<_>, _>>()?;
    let use_summary = meta["use_summary"].as_bool().unwrap_or(false);
    let docs = tokenize_entries(entries, use_summary);
    let ev = evaluate_model(&model, &vocab, table.as_ref(), &docs, &labels, &a.split)?;

    let value = json!({
        "split": a.split,
        "category": data.category,
        "accuracy": ev.accuracy,
        "accuracy_points": ev.confusion.accuracy_points(),
        "confusion": ev.confusion,
    });
    out.emit(&value, || {
        let c = &ev.confusion;
        format!(
            "{} {}: accuracy {:.2}% ({} of {})\n  tp {} fp {} tn {} fn {}\n",
            data.category.display_name(),
            a.split,
            c.accuracy_points(),
            c.correct(),
            c.total(),
            c.tp,
            c.fp,
            c.tn,
            c.fn_
        )
    });
    Ok(())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let (mut model, _) = TrainedModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let mut vocab = Vocabulary::load(&a.vocab).with_context(|| format!("loading {}", a.vocab.display()))?;
    let tokens = Tokenizer::default().tokenize(&a.text);
    if let Some(path) = &a.embeddings {
        let table = EmbeddingTable::load(path)?;
        model.extend_vocab(&mut vocab, &table, [tokens.as_slice()])?;
    }
    let p = model.predict_tokens(&tokens, &vocab)?;
    println!("{}", json!({ "label": p.label, "confidence": p.confidence, "low_confidence": p.low_confidence }));
    Ok(())
}

fn load_report(path: &Path) -> Result<ExperimentReport> {
    let file = if path.is_dir() { path.join(REPORT_FILE) } else { path.to_path_buf() };
    let bytes = fs::read(&file).map_err(Error::Io).with_context(|| format!("reading {}", file.display()))?;
    serde_json::from_slice(&bytes).map_err(Error::Json).with_context(|| format!("parsing {}", file.display()))
}

fn compare(a: &CompareArgs, out: &Output) -> Result<()> {
    let ra = load_report(&a.report_a)?;
    let rb = load_report(&a.report_b)?;
    let cmp = compare_reports(&ra, &rb)?;
    for row in cmp.rows.iter().filter(|r| !r.same_test_split) {
        warn!("{}: the two reports were scored on different test splits", row.category.display_name());
    }
    out.emit(&serde_json::to_value(&cmp)?, || cmp.render_text());
    Ok(())
}
