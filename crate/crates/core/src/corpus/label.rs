use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{HelpfulnessLabel, ReviewRecord};
use crate::error::{Error, Result};
use crate::text::Tokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    /// A review is helpful when its ratio is strictly above this.
    pub helpful_min: f64,
    /// A review is unhelpful when its ratio is strictly below this.
    pub unhelpful_max: f64,
    pub min_votes: u64,
    /// Maximum review length in tokens.
    pub max_len: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig { helpful_min: 0.75, unhelpful_max: 0.35, min_votes: 10, max_len: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FilterDecision {
    Accept(HelpfulnessLabel),
    RejectTooFewVotes,
    RejectAmbiguousRatio,
    RejectTooLong,
    AcceptUnlabeledZeroVote,
}

impl FilterDecision {
    pub fn name(self) -> &'static str {
        match self {
            FilterDecision::Accept(HelpfulnessLabel::Helpful) => "accept_helpful",
            FilterDecision::Accept(HelpfulnessLabel::Unhelpful) => "accept_unhelpful",
            FilterDecision::RejectTooFewVotes => "reject_too_few_votes",
            FilterDecision::RejectAmbiguousRatio => "reject_ambiguous_ratio",
            FilterDecision::RejectTooLong => "reject_too_long",
            FilterDecision::AcceptUnlabeledZeroVote => "accept_unlabeled_zero_vote",
        }
    }
}

pub fn helpfulness_ratio(helpful_votes: u64, total_votes: u64) -> Result<f64> {
    if total_votes == 0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(helpful_votes as f64 / total_votes as f64)
}

/// Labeling rule on raw numbers. Length is checked first, then the zero-vote
/// route, then the vote minimum, then the ratio thresholds.
pub fn decide(helpful_votes: u64, total_votes: u64, token_len: usize, cfg: &LabelConfig) -> FilterDecision {
    if token_len > cfg.max_len {
        return FilterDecision::RejectTooLong;
    }
    if total_votes == 0 {
        return FilterDecision::AcceptUnlabeledZeroVote;
    }
    if total_votes < cfg.min_votes {
        return FilterDecision::RejectTooFewVotes;
    }
    let ratio = helpful_votes as f64 / total_votes as f64;
    if ratio > cfg.helpful_min {
        FilterDecision::Accept(HelpfulnessLabel::Helpful)
    } else if ratio < cfg.unhelpful_max {
        FilterDecision::Accept(HelpfulnessLabel::Unhelpful)
    } else {
        FilterDecision::RejectAmbiguousRatio
    }
}

pub fn assign_label(record: &ReviewRecord, cfg: &LabelConfig, tokenizer: &Tokenizer) -> FilterDecision {
    decide(
        record.helpful_votes,
        record.total_votes,
        tokenizer.count(&record.review_text),
        cfg,
    )
}

/// Per-outcome counts, keyed by [`FilterDecision::name`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTallies(pub BTreeMap<String, u64>);

impl DecisionTallies {
    pub fn record(&mut self, d: FilterDecision) {
        *self.0.entry(d.name().to_string()).or_default() += 1;
    }

    pub fn get(&self, d: FilterDecision) -> u64 {
        self.0.get(d.name()).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }
}
