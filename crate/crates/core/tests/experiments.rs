mod common;

use helprank::classifiers::ModelKind;
use helprank::corpus::{Category, HelpfulnessLabel};
use helprank::text::SubwordHasher;
use helprank::train::{
    compare_reports, evaluate_model, pretrain_embeddings, run_experiment_t1, run_experiment_t2, tokenize_entries,
    ExperimentReport, Task, TrainConfig,
};
use helprank::Error;

fn small(task: Task, model: ModelKind) -> TrainConfig {
    let mut cfg = TrainConfig::for_task(task);
    cfg.model = model;
    cfg.embed_dim = 24;
    cfg.rnn_hidden = 24;
    cfg.fc_hidden = 24;
    cfg.cnn_maps = 16;
    cfg.epochs = 3;
    cfg.seed = 3;
    cfg.pretrain.epochs = 2;
    cfg.pretrain.hasher = SubwordHasher::new(3, 6, 1 << 14).unwrap();
    cfg
}

fn test_labels(entries: &[helprank::corpus::CorpusEntry]) -> Vec<HelpfulnessLabel> {
    entries.iter().map(|e| e.label.unwrap()).collect()
}

#[test]
fn t1_smoke_report_is_well_formed() {
    let data = common::prepared(2_000, 0, 11, Category::Books);
    let out = run_experiment_t1(&data, &small(Task::T1, ModelKind::Rcnn)).unwrap();
    let r = &out.report;
    assert_eq!(r.categories.len(), 1);
    let c = &r.categories[0];
    assert_eq!((c.train_size, c.validation_size, c.test_size), (1_530, 270, 200));
    assert_eq!(c.training_size, 1_800);
    assert_eq!(c.test.confusion.total(), 200);
    assert_eq!(c.validation_curve.len(), 3);
    assert!((1..=3).contains(&c.selected_epoch));
    assert!(c.test.accuracy > 0.7, "cue words make this easy: {}", c.test.accuracy);
    assert_eq!(r.overall_accuracy, c.test.accuracy);
    for split in ["train", "validation", "test"] {
        assert_eq!(c.data.splits[split].len(), 64);
    }
    assert!(r.reference.as_ref().unwrap().note.contains("not expected at desk scale"));
    assert!(r.overrides.contains(&"epochs".to_string()));

    let json = r.to_json().unwrap();
    let back: ExperimentReport = serde_json::from_str(&json).unwrap();
    assert_eq!(&back, r);
    assert!(r.render_text().contains("Books"));
}

#[test]
fn stored_model_reproduces_report_accuracy() {
    let data = common::prepared(600, 0, 12, Category::Electronics);
    let out = run_experiment_t1(&data, &small(Task::T1, ModelKind::Rcnn)).unwrap();
    let docs = tokenize_entries(&data.test, false);
    let eval = evaluate_model(&out.model, &out.vocab, None, &docs, &test_labels(&data.test), "test").unwrap();
    assert_eq!(eval, out.report.categories[0].test);
}

#[test]
fn fingerprint_tracks_config_only() {
    let data = common::prepared(300, 0, 13, Category::Books);
    let cfg = small(Task::T1, ModelKind::Linear);
    let a = run_experiment_t1(&data, &cfg).unwrap().report;
    let b = run_experiment_t1(&data, &cfg).unwrap().report;
    assert_eq!(a.fingerprint, b.fingerprint);
    let mut other = cfg.clone();
    other.learning_rate = 2e-3;
    let c = run_experiment_t1(&data, &other).unwrap().report;
    assert_ne!(a.fingerprint, c.fingerprint);
}

#[test]
fn baselines_run() {
    let data = common::prepared(600, 0, 14, Category::MoviesAndTV);
    for model in [ModelKind::Cnn, ModelKind::Linear, ModelKind::Svm] {
        let mut cfg = small(Task::T1, model);
        cfg.epochs = 10;
        cfg.batch_size = 16;
        let out = run_experiment_t1(&data, &cfg).unwrap();
        let c = &out.report.categories[0];
        assert_eq!(out.report.model, model);
        assert!(c.test.accuracy > 0.6, "{model}: {}", c.test.accuracy);
        let docs = tokenize_entries(&data.test, false);
        let eval = evaluate_model(&out.model, &out.vocab, None, &docs, &test_labels(&data.test), "test").unwrap();
        assert_eq!(eval, c.test, "{model}");
    }
}

#[test]
fn t2_shares_the_test_split_and_counts_pretraining_documents() {
    let data = common::prepared(600, 1_500, 15, Category::CDsAndVinyl);
    let t1 = run_experiment_t1(&data, &small(Task::T1, ModelKind::Rcnn)).unwrap();
    let t2 = run_experiment_t2(&data, None, &small(Task::T2, ModelKind::Rcnn)).unwrap();
    let (c1, c2) = (&t1.report.categories[0], &t2.report.categories[0]);
    assert_eq!(c1.data.splits["test"], c2.data.splits["test"]);
    assert_eq!(c2.pretraining_documents, 459 + 81 + 1_500);
    assert_eq!(c2.training_size, c2.pretraining_documents);
    assert!(c2.data.splits.contains_key("unlabeled"));
    assert!(c2.data.embeddings.is_none());

    // the same table supplied from outside adds its digest but not the scores
    let pre = pretrain_embeddings(&data, &small(Task::T2, ModelKind::Rcnn)).unwrap();
    let ext = run_experiment_t2(&data, Some(&pre), &small(Task::T2, ModelKind::Rcnn)).unwrap();
    let c3 = &ext.report.categories[0];
    assert!(c3.data.embeddings.is_some());
    assert_eq!(c3.test, c2.test);

    let cmp = compare_reports(&t1.report, &t2.report).unwrap();
    assert_eq!(cmp.rows.len(), 1);
    assert!(cmp.rows[0].same_test_split);
    assert_eq!(cmp.rows[0].delta, cmp.rows[0].accuracy_b - cmp.rows[0].accuracy_a);
}

#[test]
fn t2_rejects_svm_and_mismatched_tables() {
    let data = common::prepared(300, 600, 16, Category::Books);
    let err = run_experiment_t2(&data, None, &small(Task::T2, ModelKind::Svm)).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");

    let pre = pretrain_embeddings(&data, &small(Task::T2, ModelKind::Rcnn)).unwrap();
    let mut wider = small(Task::T2, ModelKind::Rcnn);
    wider.embed_dim = 32;
    assert!(run_experiment_t2(&data, Some(&pre), &wider).is_err());
}

#[test]
fn compare_identical_and_missing_categories() {
    let books = common::prepared(300, 0, 17, Category::Books);
    let elec = common::prepared(300, 0, 18, Category::Electronics);
    let cfg = small(Task::T1, ModelKind::Linear);
    let a = run_experiment_t1(&books, &cfg).unwrap().report;
    let b = run_experiment_t1(&elec, &cfg).unwrap().report;
    let both = ExperimentReport::merge(vec![a.clone(), b]).unwrap();

    let same = compare_reports(&both, &both).unwrap();
    assert!(same.rows.iter().all(|r| r.delta == 0.0 && r.same_test_split));
    assert_eq!(same.overall_delta, 0.0);

    for (x, y) in [(&a, &both), (&both, &a)] {
        match compare_reports(x, y) {
            Err(Error::MissingCategory(_)) => {}
            other => panic!("expected a missing category, got {other:?}"),
        }
    }
}
