//! Word look-up tables: random-uniform initialization and subword skip-gram
//! pre-training.

mod skipgram;
mod table;

pub use skipgram::{
    discard_probability, sgns_gradients, train_skipgram, NegativeSampler, SgnsGradients, SkipgramConfig,
    SkipgramOutcome,
};
pub use table::{init_random_uniform, EmbeddingMode, EmbeddingTable};
