use serde::{Deserialize, Serialize};

use super::Vocabulary;
use crate::corpus::HelpfulnessLabel;

/// Token ids for one document, truncated to `max_len`. No padding is stored;
/// `length == ids.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSequence {
    pub ids: Vec<u32>,
    pub length: usize,
    pub label: Option<HelpfulnessLabel>,
}

impl EncodedSequence {
    pub fn new(ids: Vec<u32>, label: Option<HelpfulnessLabel>) -> Self {
        EncodedSequence { length: ids.len(), ids, label }
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }
}

/// Maps tokens to ids (out-of-vocabulary → UNK) and keeps the first
/// `max_len` of them.
pub fn encode<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    max_len: usize,
    label: Option<HelpfulnessLabel>,
) -> EncodedSequence {
    let ids = tokens.iter().take(max_len).map(|t| vocab.id(t.as_ref())).collect();
    EncodedSequence::new(ids, label)
}
