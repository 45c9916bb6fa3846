use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    build_labeled_set, build_unlabeled_pool, parse_review_record, split_dataset, Category, ClassBalance,
    CorpusEntry, DecisionTallies, LabelConfig, ReviewRecord, Shortfall, SplitSpec,
};
use crate::error::{Error, Result};
use crate::numerics::checkpoint::write_atomic;
use crate::text::Tokenizer;
use crate::util::sha256_hex;

pub const TRAIN_FILE: &str = "train.jsonl";
pub const VALIDATION_FILE: &str = "validation.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const UNLABELED_FILE: &str = "unlabeled.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Reads a raw review dump. Lines are parsed in parallel; the result keeps
/// file order. Blank lines are skipped.
pub fn read_reviews(path: &Path, category: &Category) -> Result<Vec<ReviewRecord>> {
    let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?;
    lines
        .par_iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_review_record(l, i + 1, category))
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = BufWriter::new(Vec::new());
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.write_all(b"\n")?;
    }
    let bytes = buf.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareConfig {
    pub category: Category,
    pub label: LabelConfig,
    pub per_class: usize,
    pub unlabeled: usize,
    pub split: SplitSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: ClassBalance,
    pub validation: ClassBalance,
    pub test: ClassBalance,
    pub unlabeled: usize,
}

/// Sidecar describing a prepared data directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub config: PrepareConfig,
    pub counts: SplitCounts,
    pub labeled_tallies: DecisionTallies,
    pub shortfalls: Vec<Shortfall>,
    /// SHA-256 of each data file, keyed by file name.
    pub files: std::collections::BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub category: Category,
    pub train: Vec<CorpusEntry>,
    pub validation: Vec<CorpusEntry>,
    pub test: Vec<CorpusEntry>,
    pub unlabeled: Vec<CorpusEntry>,
}

impl PreparedData {
    /// Labels, balances, samples and splits one category's records.
    pub fn prepare(records: &[ReviewRecord], cfg: &PrepareConfig, tokenizer: &Tokenizer) -> Result<(Self, DatasetManifest)> {
        let labeled =
            build_labeled_set(records.iter().cloned(), cfg.per_class, &cfg.label, tokenizer, cfg.split.seed)?;
        let pool =
            build_unlabeled_pool(records.iter().cloned(), cfg.unlabeled, &cfg.label, tokenizer, cfg.split.seed)?;
        let splits = split_dataset(&labeled.data, &cfg.split)?;
        let data = PreparedData {
            category: cfg.category.clone(),
            train: splits.train,
            validation: splits.validation,
            test: splits.test,
            unlabeled: pool.data.entries,
        };
        let mut shortfalls = labeled.shortfalls;
        shortfalls.extend(pool.shortfalls);
        let manifest = DatasetManifest {
            schema_version: 1,
            config: cfg.clone(),
            counts: data.counts(),
            labeled_tallies: labeled.tallies,
            shortfalls,
            files: Default::default(),
        };
        Ok((data, manifest))
    }

    pub fn counts(&self) -> SplitCounts {
        SplitCounts {
            train: ClassBalance::of(&self.train),
            validation: ClassBalance::of(&self.validation),
            test: ClassBalance::of(&self.test),
            unlabeled: self.unlabeled.len(),
        }
    }

    /// Writes the four JSON-lines files and the manifest (with file hashes).
    pub fn write(&self, dir: &Path, manifest: &mut DatasetManifest) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, entries) in [
            (TRAIN_FILE, &self.train),
            (VALIDATION_FILE, &self.validation),
            (TEST_FILE, &self.test),
            (UNLABELED_FILE, &self.unlabeled),
        ] {
            let path = dir.join(name);
            write_jsonl(&path, entries)?;
            manifest.files.insert(name.to_string(), sha256_hex(&fs::read(&path)?));
        }
        write_atomic(&dir.join(MANIFEST_FILE), &serde_json::to_vec_pretty(manifest)?)
    }

    /// Loads a prepared directory. A missing unlabeled file is treated as an
    /// empty pool.
    pub fn load(dir: &Path) -> Result<Self> {
        let train: Vec<CorpusEntry> = read_jsonl(&dir.join(TRAIN_FILE))?;
        let validation = read_jsonl(&dir.join(VALIDATION_FILE))?;
        let test = read_jsonl(&dir.join(TEST_FILE))?;
        let unlabeled_path = dir.join(UNLABELED_FILE);
        let unlabeled = if unlabeled_path.exists() { read_jsonl(&unlabeled_path)? } else { vec![] };
        let category = train
            .first()
            .map(|e| e.category.clone())
            .or_else(|| load_manifest(dir).ok().map(|m| m.config.category))
            .ok_or(Error::EmptySplit("train".into()))?;
        Ok(PreparedData { category, train, validation, test, unlabeled })
    }
}

pub fn load_manifest(dir: &Path) -> Result<DatasetManifest> {
    Ok(serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw_line(i: usize, h: u64, t: u64) -> String {
        serde_json::json!({
            "reviewerID": format!("R{i}"),
            "asin": format!("I{}", i % 7),
            "helpful": [h, t],
            "reviewText": format!("review number {i} with words"),
            "overall": 4.0,
            "summary": "ok",
            "unixReviewTime": 1_400_000_000 + i,
        })
        .to_string()
    }

    #[test]
    fn prepare_write_load() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("raw.jsonl");
        let mut lines = Vec::new();
        for i in 0..400 {
            lines.push(match i % 4 {
                0 => raw_line(i, 12, 12),
                1 => raw_line(i, 1, 12),
                2 => raw_line(i, 0, 0),
                _ => raw_line(i, 6, 12),
            });
        }
        fs::write(&input, lines.join("\n") + "\n\n").unwrap();
        let records = read_reviews(&input, &Category::Books).unwrap();
        assert_eq!(records.len(), 400);

        let cfg = PrepareConfig {
            category: Category::Books,
            label: LabelConfig::default(),
            per_class: 50,
            unlabeled: 60,
            split: SplitSpec::with_seed(7),
        };
        let (data, mut manifest) = PreparedData::prepare(&records, &cfg, &Tokenizer::default()).unwrap();
        assert_eq!(data.unlabeled.len(), 60);
        assert_eq!(data.train.len() + data.validation.len() + data.test.len(), 100);
        assert_eq!(manifest.labeled_tallies.total(), 400);
        assert_eq!(
            manifest.labeled_tallies.get(crate::corpus::FilterDecision::RejectAmbiguousRatio),
            100
        );

        let out = dir.path().join("prepared");
        data.write(&out, &mut manifest).unwrap();
        let back = PreparedData::load(&out).unwrap();
        assert_eq!(back, data);
        let m = load_manifest(&out).unwrap();
        assert_eq!(m.files.len(), 4);
        assert_eq!(m.counts.test, ClassBalance { helpful: 5, unhelpful: 5 });

        let line = fs::read_to_string(out.join(TEST_FILE)).unwrap();
        let first: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
        assert!(first["label"] == "helpful" || first["label"] == "unhelpful");
        assert_eq!(first["category"], "books");
        assert!(first["source_votes"].is_array());
        let unl = fs::read_to_string(out.join(UNLABELED_FILE)).unwrap();
        let u: serde_json::Value = serde_json::from_str(unl.lines().next().unwrap()).unwrap();
        assert!(u.get("label").is_none());
    }

    #[test]
    fn parse_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("raw.jsonl");
        fs::write(&input, format!("{}\n{{oops\n", raw_line(0, 0, 0))).unwrap();
        assert!(matches!(read_reviews(&input, &Category::Books), Err(Error::Parse { line: 2, .. })));
    }
}
