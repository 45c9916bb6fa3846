//! Tokenization, vocabularies, subword hashing, sequence encoding and TF-IDF
//! features.

mod encode;
mod subword;
mod tfidf;
mod tokenize;
mod vocab;

pub use encode::{encode, EncodedSequence};
pub use subword::{fnv1a, SubwordHasher};
pub use tfidf::{tfidf_vector, IdfTable, SparseVector};
pub use tokenize::Tokenizer;
pub use vocab::{count_tokens, count_tokens_par, Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};
