use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{CorpusEntry, HelpfulnessLabel, LabeledDataset};
use crate::error::{Error, Result};
use crate::util::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub test_frac: f64,
    /// Share of the non-test part held out for validation.
    pub val_frac_of_train: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec { train_frac: 0.90, test_frac: 0.10, val_frac_of_train: 0.15, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| x > 0.0 && x < 1.0;
        if !in_unit(self.train_frac)
            || !in_unit(self.test_frac)
            || !(0.0..1.0).contains(&self.val_frac_of_train)
            || (self.train_frac + self.test_frac - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!("invalid split fractions {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Vec<CorpusEntry>,
    pub validation: Vec<CorpusEntry>,
    pub test: Vec<CorpusEntry>,
}

/// Nearest integer, halves rounded up. The slack absorbs representation
/// error in products like `45 * 0.15`.
fn round_count(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor() as usize
}

/// Per-class sizes `(train, validation, test)` for a class of `n` examples.
pub fn class_split_sizes(n: usize, spec: &SplitSpec) -> (usize, usize, usize) {
    let test = round_count(n as f64 * spec.test_frac).min(n);
    let rest = n - test;
    let validation = round_count(rest as f64 * spec.val_frac_of_train).min(rest);
    (rest - validation, validation, test)
}

/// Stratified three-way split: each class is shuffled and cut separately, so
/// per-class proportions match in every split. Deterministic in `spec.seed`.
pub fn split_dataset(ds: &LabeledDataset, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let balance = ds.balance();
    if balance.helpful < 10 || balance.unhelpful < 10 {
        return Err(Error::TooSmallToSplit { helpful: balance.helpful, unhelpful: balance.unhelpful });
    }
    let mut rng = rng_for(spec.seed, "split");
    let mut out = Splits { train: vec![], validation: vec![], test: vec![] };
    for label in HelpfulnessLabel::ALL {
        let mut members: Vec<&CorpusEntry> =
            ds.examples.iter().filter(|e| e.label == Some(label)).collect();
        members.shuffle(&mut rng);
        let (_, n_val, n_test) = class_split_sizes(members.len(), spec);
        out.test.extend(members[..n_test].iter().map(|&e| e.clone()));
        out.validation.extend(members[n_test..n_test + n_val].iter().map(|&e| e.clone()));
        out.train.extend(members[n_test + n_val..].iter().map(|&e| e.clone()));
    }
    out.train.shuffle(&mut rng);
    out.validation.shuffle(&mut rng);
    out.test.shuffle(&mut rng);
    Ok(out)
}
