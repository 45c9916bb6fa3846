use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{assign_label, Category, DecisionTallies, FilterDecision, HelpfulnessLabel, LabelConfig, ReviewRecord};
use crate::error::{Error, Result};
use crate::text::Tokenizer;
use crate::util::{rng_for, sha256_hex};

/// One extracted review, as written to the prepared JSON-lines files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<HelpfulnessLabel>,
    pub category: Category,
    pub source_votes: [u64; 2],
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub reviewer_id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub item_id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub summary: String,
}

impl CorpusEntry {
    pub fn from_record(r: &ReviewRecord, label: Option<HelpfulnessLabel>) -> Self {
        CorpusEntry {
            text: r.review_text.clone(),
            label,
            category: r.category.clone(),
            source_votes: [r.helpful_votes, r.total_votes],
            reviewer_id: r.reviewer_id.clone(),
            item_id: r.item_id.clone(),
            summary: r.summary.clone(),
        }
    }

    /// Model input text; the summary is prepended only when requested.
    pub fn model_text(&self, use_summary: bool) -> String {
        if use_summary && !self.summary.is_empty() {
            format!("{} {}", self.summary, self.text)
        } else {
            self.text.clone()
        }
    }

    /// Content hash of the review text, used for provenance checks.
    pub fn text_hash(&self) -> String {
        sha256_hex(self.text.as_bytes())
    }

    /// `(reviewer, item)` key, when both are known.
    pub fn review_key(&self) -> Option<(&str, &str)> {
        (!self.reviewer_id.is_empty() && !self.item_id.is_empty())
            .then_some((self.reviewer_id.as_str(), self.item_id.as_str()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassBalance {
    pub helpful: usize,
    pub unhelpful: usize,
}

impl ClassBalance {
    pub fn of<'a>(entries: impl IntoIterator<Item = &'a CorpusEntry>) -> Self {
        let mut b = ClassBalance::default();
        for e in entries {
            match e.label {
                Some(HelpfulnessLabel::Helpful) => b.helpful += 1,
                Some(HelpfulnessLabel::Unhelpful) => b.unhelpful += 1,
                None => {}
            }
        }
        b
    }

    pub fn total(&self) -> usize {
        self.helpful + self.unhelpful
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub examples: Vec<CorpusEntry>,
    pub category: Category,
}

impl LabeledDataset {
    pub fn balance(&self) -> ClassBalance {
        ClassBalance::of(&self.examples)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledPool {
    pub entries: Vec<CorpusEntry>,
    pub category: Category,
}

/// Fewer acceptable records than requested. Reported, not fatal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub requested: usize,
    pub available: usize,
    pub what: String,
}

#[derive(Debug, Clone)]
pub struct Extraction<T> {
    pub data: T,
    pub tallies: DecisionTallies,
    pub shortfalls: Vec<Shortfall>,
}

/// Algorithm R: a uniform sample of `capacity` items from a stream.
#[derive(Debug, Clone)]
pub struct Reservoir<T> {
    capacity: usize,
    seen: u64,
    items: Vec<T>,
}

impl<T> Reservoir<T> {
    pub fn new(capacity: usize) -> Self {
        Reservoir { capacity, seen: 0, items: Vec::with_capacity(capacity.min(1 << 20)) }
    }

    pub fn offer<R: Rng + ?Sized>(&mut self, item: T, rng: &mut R) {
        self.seen += 1;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else if self.capacity > 0 {
            let j = rng.gen_range(0..self.seen);
            if (j as usize) < self.capacity {
                self.items[j as usize] = item;
            }
        }
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn into_items(self) -> Vec<T> {
        self.items
    }
}

fn check_shortfall(what: &str, requested: usize, available: usize, out: &mut Vec<Shortfall>) {
    if available < requested {
        log::warn!("{what}: requested {requested}, only {available} available");
        out.push(Shortfall { requested, available, what: what.to_string() });
    }
}

/// Draws up to `target_per_class` accepted reviews of each class with
/// independent per-class reservoirs, then shuffles the union.
pub fn build_labeled_set<I>(
    stream: I,
    target_per_class: usize,
    cfg: &LabelConfig,
    tokenizer: &Tokenizer,
    seed: u64,
) -> Result<Extraction<LabeledDataset>>
where
    I: IntoIterator<Item = ReviewRecord>,
{
    let mut rng = rng_for(seed, "labeled-reservoir");
    let mut helpful = Reservoir::new(target_per_class);
    let mut unhelpful = Reservoir::new(target_per_class);
    let mut tallies = DecisionTallies::default();
    let mut category = None;
    for record in stream {
        let d = assign_label(&record, cfg, tokenizer);
        tallies.record(d);
        if let FilterDecision::Accept(label) = d {
            let entry = CorpusEntry::from_record(&record, Some(label));
            match label {
                HelpfulnessLabel::Helpful => helpful.offer(entry, &mut rng),
                HelpfulnessLabel::Unhelpful => unhelpful.offer(entry, &mut rng),
            }
        }
        category.get_or_insert(record.category);
    }
    let category = category.ok_or(Error::EmptyCorpus)?;
    let mut shortfalls = Vec::new();
    check_shortfall("helpful", target_per_class, helpful.seen() as usize, &mut shortfalls);
    check_shortfall("unhelpful", target_per_class, unhelpful.seen() as usize, &mut shortfalls);

    let mut examples = helpful.into_items();
    examples.extend(unhelpful.into_items());
    examples.shuffle(&mut rng_for(seed, "labeled-shuffle"));
    Ok(Extraction { data: LabeledDataset { examples, category }, tallies, shortfalls })
}

/// Draws up to `target` zero-vote reviews within the length cap.
pub fn build_unlabeled_pool<I>(
    stream: I,
    target: usize,
    cfg: &LabelConfig,
    tokenizer: &Tokenizer,
    seed: u64,
) -> Result<Extraction<UnlabeledPool>>
where
    I: IntoIterator<Item = ReviewRecord>,
{
    let mut rng = rng_for(seed, "unlabeled-reservoir");
    let mut pool = Reservoir::new(target);
    let mut tallies = DecisionTallies::default();
    let mut category = None;
    for record in stream {
        let d = assign_label(&record, cfg, tokenizer);
        tallies.record(d);
        if d == FilterDecision::AcceptUnlabeledZeroVote {
            pool.offer(CorpusEntry::from_record(&record, None), &mut rng);
        }
        category.get_or_insert(record.category);
    }
    let category = category.ok_or(Error::EmptyCorpus)?;
    let mut shortfalls = Vec::new();
    check_shortfall("unlabeled", target, pool.seen() as usize, &mut shortfalls);
    let mut entries = pool.into_items();
    entries.shuffle(&mut rng_for(seed, "unlabeled-shuffle"));
    Ok(Extraction { data: UnlabeledPool { entries, category }, tallies, shortfalls })
}
