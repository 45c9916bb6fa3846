use std::borrow::Cow;
use std::collections::{BTreeSet, HashSet};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    evaluate, evaluate_svm, train_model, CategoryReport, DataHashes, EpochRecord, Evaluation, ExperimentReport,
    Task, Timing, TrainConfig, TrainOutcome,
};
use crate::classifiers::{svm_objective, svm_train, ModelSpec, SvmWeights, TrainedModel};
use crate::corpus::{CorpusEntry, HelpfulnessLabel, PreparedData};
use crate::embeddings::{init_random_uniform, train_skipgram, EmbeddingMode, EmbeddingTable};
use crate::error::{Error, Result};
use crate::numerics::checkpoint::write_atomic;
use crate::text::{encode, tfidf_vector, EncodedSequence, IdfTable, SparseVector, Tokenizer, Vocabulary};
use crate::util::sha256_hex;

/// Identities of the documents a look-up table was trained on, used to prove
/// that no test review reached pre-training.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub documents: BTreeSet<String>,
}

impl Provenance {
    /// SHA-256 of reviewer id, item id and text.
    pub fn identity(e: &CorpusEntry) -> String {
        sha256_hex(format!("{}\u{0}{}\u{0}{}", e.reviewer_id, e.item_id, e.text).as_bytes())
    }

    pub fn of<'a>(entries: impl IntoIterator<Item = &'a CorpusEntry>) -> Self {
        Provenance { documents: entries.into_iter().map(Self::identity).collect() }
    }

    /// Fails with a hygiene error if any of `test` was pre-trained on.
    pub fn check_excludes(&self, test: &[CorpusEntry]) -> Result<()> {
        let leaked: Vec<usize> =
            (0..test.len()).filter(|&i| self.documents.contains(&Self::identity(&test[i]))).collect();
        if let Some(&first) = leaked.first() {
            return Err(Error::Hygiene(format!(
                "{} test review(s) appear in the pre-training corpus (first: test line {})",
                leaked.len(),
                first + 1
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_slice(&std::fs::read(path)?)
            .map_err(|e| Error::Corrupt(format!("{}: {e}", path.display())))
    }
}

/// Labeled train and validation plus the unlabeled pool, deduplicated by
/// `(reviewer, item)`. Test reviews are never included.
pub fn pretraining_corpus(data: &PreparedData) -> Vec<&CorpusEntry> {
    let mut seen = HashSet::new();
    data.train
        .iter()
        .chain(&data.validation)
        .chain(&data.unlabeled)
        .filter(|e| match e.review_key() {
            Some(k) => seen.insert(k),
            None => true,
        })
        .collect()
}

pub fn tokenize_entries<'a, I>(entries: I, use_summary: bool) -> Vec<Vec<String>>
where
    I: IntoParallelIterator<Item = &'a CorpusEntry>,
    I::Iter: IndexedParallelIterator,
{
    let tok = Tokenizer::default();
    entries.into_par_iter().map(|e| tok.tokenize(&e.model_text(use_summary))).collect()
}

fn labels_of(entries: &[CorpusEntry], split: &str) -> Result<Vec<HelpfulnessLabel>> {
    entries
        .iter()
        .map(|e| e.label.ok_or_else(|| Error::MissingField(format!("label ({split} split)"))))
        .collect()
}

fn split_hash(entries: &[CorpusEntry]) -> Result<String> {
    let mut buf = Vec::new();
    for e in entries {
        serde_json::to_writer(&mut buf, e)?;
        buf.push(b'\n');
    }
    Ok(sha256_hex(&buf))
}

fn truncated(docs: &[Vec<String>], max_len: usize) -> impl Iterator<Item = &[String]> {
    docs.iter().map(move |d| &d[..d.len().min(max_len)])
}

/// A skip-gram look-up table with its vocabulary and provenance.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub table: EmbeddingTable,
    pub vocab: Vocabulary,
    pub provenance: Provenance,
    pub epoch_losses: Vec<f64>,
}

/// Trains the T2 look-up table on [`pretraining_corpus`]. The test split is
/// checked against the corpus first.
pub fn pretrain_embeddings(data: &PreparedData, cfg: &TrainConfig) -> Result<Pretrained> {
    let corpus = pretraining_corpus(data);
    let provenance = Provenance::of(corpus.iter().copied());
    provenance.check_excludes(&data.test)?;
    let docs = tokenize_entries(corpus, cfg.use_summary);
    let vocab = Vocabulary::build(docs.iter().map(Vec::as_slice), cfg.min_count)?;
    let sg = cfg.skipgram()?;
    log::info!("skip-gram over {} documents, {} words", docs.len(), vocab.len());
    let out = train_skipgram(&docs, &vocab, &sg, cfg.seed)?;
    Ok(Pretrained { table: out.table, vocab, provenance, epoch_losses: out.epoch_losses })
}

/// SHA-256 of a table's vectors.
pub fn table_digest(table: &EmbeddingTable) -> String {
    let mut bytes: Vec<u8> = table.word_vectors().data().iter().flat_map(|x| x.to_le_bytes()).collect();
    if let Some(s) = table.subword_vectors() {
        bytes.extend(s.data().iter().flat_map(|x| x.to_le_bytes()));
    }
    sha256_hex(&bytes)
}

/// Scores tokenized documents with a trained model. When `table` carries
/// subword vectors, unseen words get composed rows on a private copy of the
/// model and vocabulary first; otherwise they map to UNK.
pub fn evaluate_model(
    model: &TrainedModel,
    vocab: &Vocabulary,
    table: Option<&EmbeddingTable>,
    docs: &[Vec<String>],
    labels: &[HelpfulnessLabel],
    split: &str,
) -> Result<Evaluation> {
    if docs.len() != labels.len() {
        return Err(Error::Shape(format!("{} documents, {} labels", docs.len(), labels.len())));
    }
    model.check_vocab(vocab)?;
    let (model, vocab) = match table {
        Some(t) if t.mode() == EmbeddingMode::SkipgramSubword && !matches!(model.spec, ModelSpec::Svm(_)) => {
            let (mut m, mut v) = (model.clone(), vocab.clone());
            m.extend_vocab(&mut v, t, docs.iter().map(Vec::as_slice))?;
            (Cow::Owned(m), Cow::Owned(v))
        }
        _ => (Cow::Borrowed(model), Cow::Borrowed(vocab)),
    };
    match &model.spec {
        ModelSpec::Svm(_) => {
            let (w, idf) = (model.svm_weights()?, model.svm_idf()?);
            evaluate_svm(&w, &svm_features(docs, labels, &vocab, &idf, model.max_len), split)
        }
        spec => {
            let seqs = encode_all(docs, labels, &vocab, model.max_len);
            evaluate(spec, &model.params, &seqs, split)
        }
    }
}

fn encode_all(docs: &[Vec<String>], labels: &[HelpfulnessLabel], vocab: &Vocabulary, max_len: usize) -> Vec<EncodedSequence> {
    docs.par_iter().zip(labels).map(|(d, &y)| encode(d, vocab, max_len, Some(y))).collect()
}

fn svm_features(
    docs: &[Vec<String>],
    labels: &[HelpfulnessLabel],
    vocab: &Vocabulary,
    idf: &IdfTable,
    max_len: usize,
) -> Vec<(SparseVector, HelpfulnessLabel)> {
    truncated(docs, max_len).zip(labels).map(|(d, &y)| (tfidf_vector(d, vocab, idf), y)).collect()
}

/// Everything a finished experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    /// The selected (best-validation) checkpoint.
    pub model: TrainedModel,
    pub vocab: Vocabulary,
    /// The T2 table, needed to compose vectors for unseen words later.
    pub table: Option<EmbeddingTable>,
}

struct Tokenized {
    train: Vec<Vec<String>>,
    validation: Vec<Vec<String>>,
    test: Vec<Vec<String>>,
    labels: [Vec<HelpfulnessLabel>; 3],
}

fn tokenize_splits(data: &PreparedData, cfg: &TrainConfig) -> Result<Tokenized> {
    Ok(Tokenized {
        train: tokenize_entries(&data.train, cfg.use_summary),
        validation: tokenize_entries(&data.validation, cfg.use_summary),
        test: tokenize_entries(&data.test, cfg.use_summary),
        labels: [
            labels_of(&data.train, "train")?,
            labels_of(&data.validation, "validation")?,
            labels_of(&data.test, "test")?,
        ],
    })
}

struct Fitted {
    best: TrainedModel,
    last: TrainedModel,
    outcome: TrainOutcome,
}

fn fit_neural(init: TrainedModel, vocab: &Vocabulary, cfg: &TrainConfig, t: &Tokenized) -> Result<Fitted> {
    let train = encode_all(&t.train, &t.labels[0], vocab, cfg.max_len);
    let validation = encode_all(&t.validation, &t.labels[1], vocab, cfg.max_len);
    let outcome = train_model(&init.spec, init.params.clone(), cfg, &train, &validation)?;
    let best = TrainedModel { params: outcome.best.clone(), ..init.clone() };
    let last = TrainedModel { params: outcome.last.clone(), ..init };
    Ok(Fitted { best, last, outcome })
}

fn fit_svm(vocab: &Vocabulary, cfg: &TrainConfig, t: &Tokenized) -> Result<Fitted> {
    let ModelSpec::Svm(svm) = cfg.model_spec(vocab.len()) else { unreachable!() };
    let idf = IdfTable::fit(truncated(&t.train, cfg.max_len), vocab);
    let train = svm_features(&t.train, &t.labels[0], vocab, &idf, cfg.max_len);
    let validation = svm_features(&t.validation, &t.labels[1], vocab, &idf, cfg.max_len);
    let zero = SvmWeights { w: vec![0.0; vocab.len()], b: 0.0 };
    let initial_validation_accuracy = evaluate_svm(&zero, &validation, "validation")?.accuracy;
    let w = svm_train(&train, &svm, cfg.seed)?;
    let mut curve = Vec::new();
    if cfg.epochs > 0 {
        curve.push(EpochRecord {
            epoch: cfg.epochs,
            train_loss: svm_objective(&w, &train, svm.lambda),
            validation_accuracy: evaluate_svm(&w, &validation, "validation")?.accuracy,
        });
    }
    let model = TrainedModel::from_svm(svm, &w, &idf, vocab, cfg.max_len)?;
    let outcome = TrainOutcome {
        best: model.params.clone(),
        last: model.params.clone(),
        selected_epoch: cfg.epochs,
        initial_validation_accuracy,
        curve,
        skipped_empty: 0,
    };
    Ok(Fitted { best: model.clone(), last: model, outcome })
}

struct Context<'a> {
    data: &'a PreparedData,
    cfg: &'a TrainConfig,
    tokens: &'a Tokenized,
    hashes: DataHashes,
    training_size: usize,
    pretraining_documents: usize,
    extended_words: usize,
}

fn finish(
    ctx: Context<'_>,
    fitted: Fitted,
    vocab: Vocabulary,
    table: Option<EmbeddingTable>,
    started: (u64, Instant),
) -> Result<ExperimentOutcome> {
    let t = ctx.tokens;
    let test = evaluate_model(&fitted.best, &vocab, table.as_ref(), &t.test, &t.labels[2], "test")?;
    let final_test = evaluate_model(&fitted.last, &vocab, table.as_ref(), &t.test, &t.labels[2], "test")?;
    let o = fitted.outcome;
    let category = CategoryReport {
        category: ctx.data.category.clone(),
        data: ctx.hashes,
        training_size: ctx.training_size,
        train_size: ctx.data.train.len(),
        validation_size: ctx.data.validation.len(),
        test_size: ctx.data.test.len(),
        pretraining_documents: ctx.pretraining_documents,
        vocab_size: vocab.len(),
        extended_words: ctx.extended_words,
        skipped_empty: o.skipped_empty,
        initial_validation_accuracy: o.initial_validation_accuracy,
        validation_curve: o.curve,
        selected_epoch: o.selected_epoch,
        per_class: CategoryReport::per_class_counts(&test),
        test,
        final_test,
        reference_accuracy: None,
    };
    let mut report = ExperimentReport::new(ctx.cfg.clone(), vec![category]);
    report.timing = Some(Timing { started_unix: started.0, wall_clock_secs: started.1.elapsed().as_secs_f64() });
    log::info!(
        "{} {} {}: test accuracy {:.4} (final epoch {:.4})",
        ctx.cfg.task,
        ctx.cfg.model,
        ctx.data.category,
        report.overall_accuracy,
        report.overall_final_accuracy
    );
    Ok(ExperimentOutcome { report, model: fitted.best, vocab, table })
}

fn start() -> (u64, Instant) {
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    (unix, Instant::now())
}

fn labeled_hashes(data: &PreparedData) -> Result<DataHashes> {
    let mut h = DataHashes::default();
    for (name, split) in [("train", &data.train), ("validation", &data.validation), ("test", &data.test)] {
        h.splits.insert(name.into(), split_hash(split)?);
    }
    Ok(h)
}

/// Supervised run: vocabulary from the training split, random-uniform
/// look-up table.
pub fn run_experiment_t1(data: &PreparedData, cfg: &TrainConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if cfg.task != Task::T1 {
        return Err(Error::Config(format!("run_experiment_t1 got a {} config", cfg.task)));
    }
    let started = start();
    let tokens = tokenize_splits(data, cfg)?;
    let vocab = Vocabulary::build(truncated(&tokens.train, cfg.max_len), cfg.min_count)?;
    let fitted = match cfg.model_spec(vocab.len()) {
        ModelSpec::Svm(_) => fit_svm(&vocab, cfg, &tokens)?,
        spec => {
            let table = init_random_uniform(&vocab, cfg.embed_dim, cfg.seed, cfg.init_range);
            let params = spec.init(table.word_vectors().clone(), cfg.seed)?;
            let init = TrainedModel { spec, params, vocab_checksum: vocab.checksum(), max_len: cfg.max_len };
            fit_neural(init, &vocab, cfg, &tokens)?
        }
    };
    let ctx = Context {
        data,
        cfg,
        tokens: &tokens,
        hashes: labeled_hashes(data)?,
        training_size: data.train.len() + data.validation.len(),
        pretraining_documents: 0,
        extended_words: 0,
    };
    finish(ctx, fitted, vocab, None, started)
}

/// Semi-supervised run. With `pretrained = None` the table is trained here
/// on [`pretraining_corpus`]; a supplied table must carry provenance that
/// excludes every test review.
pub fn run_experiment_t2(
    data: &PreparedData,
    pretrained: Option<&Pretrained>,
    cfg: &TrainConfig,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if cfg.task != Task::T2 {
        return Err(Error::Config(format!("run_experiment_t2 got a {} config", cfg.task)));
    }
    let started = start();
    let mut hashes = labeled_hashes(data)?;
    hashes.splits.insert("unlabeled".into(), split_hash(&data.unlabeled)?);
    let owned;
    let pre = match pretrained {
        Some(p) => {
            p.provenance.check_excludes(&data.test)?;
            hashes.embeddings = Some(table_digest(&p.table));
            p
        }
        None => {
            owned = pretrain_embeddings(data, cfg)?;
            &owned
        }
    };
    pre.table.check_vocab(&pre.vocab)?;
    if pre.table.mode() != EmbeddingMode::SkipgramSubword {
        return Err(Error::Config("task t2 needs a skip-gram subword table".into()));
    }
    if pre.table.dim() != cfg.embed_dim {
        return Err(Error::Alignment(format!(
            "table has dimension {}, config embed_dim is {}",
            pre.table.dim(),
            cfg.embed_dim
        )));
    }

    let tokens = tokenize_splits(data, cfg)?;
    let spec = cfg.model_spec(pre.vocab.len());
    let params = spec.init(pre.table.materialize(&pre.vocab)?, cfg.seed)?;
    let mut vocab = pre.vocab.clone();
    let mut init = TrainedModel { spec, params, vocab_checksum: vocab.checksum(), max_len: cfg.max_len };
    let extended_words = init.extend_vocab(
        &mut vocab,
        &pre.table,
        tokens.train.iter().chain(&tokens.validation).map(Vec::as_slice),
    )?;
    let fitted = fit_neural(init, &vocab, cfg, &tokens)?;
    let ctx = Context {
        data,
        cfg,
        tokens: &tokens,
        hashes,
        training_size: pre.provenance.documents.len(),
        pretraining_documents: pre.provenance.documents.len(),
        extended_words,
    };
    finish(ctx, fitted, vocab, Some(pre.table.clone()), started)
}
