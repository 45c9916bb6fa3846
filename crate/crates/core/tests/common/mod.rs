#![allow(dead_code)]

use helprank::corpus::{split_dataset, Category, CorpusEntry, HelpfulnessLabel, LabeledDataset, PreparedData, SplitSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HELPFUL_CUES: [&str; 12] = [
    "detailed", "measured", "battery", "compared", "specifically", "pros", "cons", "lasted", "tested", "warranty",
    "manual", "version",
];
pub const UNHELPFUL_CUES: [&str; 12] = [
    "terrible", "hate", "lol", "whatever", "boring", "meh", "awful", "scam", "ugh", "worst", "nope", "garbage",
];
pub const FILLER: [&str; 40] = [
    "the", "a", "it", "this", "was", "is", "and", "but", "for", "with", "i", "my", "of", "to", "in", "on", "book",
    "item", "product", "really", "very", "just", "so", "after", "before", "one", "two", "use", "used", "got",
    "bought", "time", "days", "week", "would", "could", "some", "more", "than", "that",
];

/// Review text whose label is carried by a few cue words, with `noise` of
/// the cues drawn from the other class.
pub fn review_text<R: Rng>(label: HelpfulnessLabel, noise: f64, rng: &mut R) -> String {
    let len = rng.gen_range(8..24);
    let mut words: Vec<&str> = (0..len).map(|_| *FILLER.choose(rng).unwrap()).collect();
    for _ in 0..2 {
        let own = matches!(label, HelpfulnessLabel::Helpful) != (rng.gen::<f64>() < noise);
        let cues = if own { &HELPFUL_CUES } else { &UNHELPFUL_CUES };
        let at = rng.gen_range(0..words.len());
        words[at] = cues.choose(rng).unwrap();
    }
    words.join(" ")
}

pub fn entry(text: String, label: Option<HelpfulnessLabel>, category: &Category, id: usize) -> CorpusEntry {
    let votes = match label {
        Some(HelpfulnessLabel::Helpful) => [18, 20],
        Some(HelpfulnessLabel::Unhelpful) => [2, 20],
        None => [0, 0],
    };
    CorpusEntry {
        text,
        label,
        category: category.clone(),
        source_votes: votes,
        reviewer_id: format!("R{id:07}"),
        item_id: format!("I{:05}", id % 9973),
        summary: String::new(),
    }
}

/// Balanced labeled reviews, alternating classes.
pub fn labeled_entries(n: usize, noise: f64, seed: u64, category: &Category) -> Vec<CorpusEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = HelpfulnessLabel::from_class_index(i % 2);
            entry(review_text(label, noise, &mut rng), Some(label), category, i)
        })
        .collect()
}

/// A prepared category: `n_labeled` reviews split 90/10 with 15% of the
/// training part held out, plus an unlabeled pool of the same style.
pub fn prepared(n_labeled: usize, n_unlabeled: usize, seed: u64, category: Category) -> PreparedData {
    let labeled = labeled_entries(n_labeled, 0.1, seed, &category);
    let splits = split_dataset(
        &LabeledDataset { examples: labeled, category: category.clone() },
        &SplitSpec::with_seed(seed),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let unlabeled = (0..n_unlabeled)
        .map(|i| {
            let label = HelpfulnessLabel::from_class_index(i % 2);
            entry(review_text(label, 0.1, &mut rng), None, &category, 1_000_000 + i)
        })
        .collect();
    PreparedData { category, train: splits.train, validation: splits.validation, test: splits.test, unlabeled }
}
