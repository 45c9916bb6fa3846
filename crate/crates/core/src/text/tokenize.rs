use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

static HTML_TAG: Lazy<Regex> = Lazy::new(|| Regex::new(r"<[^<>]*>").unwrap());
static HTML_ENTITY: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"&(?:[A-Za-z][A-Za-z0-9]{1,31}|#[0-9]{1,7}|#[xX][0-9A-Fa-f]{1,6});").unwrap());

/// Splits text into runs of Unicode letters and digits.
///
/// Everything else (whitespace, punctuation, symbols) separates tokens and is
/// dropped. HTML tags and character entities are removed first when
/// `strip_html` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub strip_html: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer { lowercase: true, strip_html: true }
    }
}

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        self.for_each_token(text, |t| tokens.push(t));
        tokens
    }

    /// Token count without materializing the token list.
    pub fn count(&self, text: &str) -> usize {
        let mut n = 0;
        self.for_each_token(text, |_| n += 1);
        n
    }

    fn for_each_token(&self, text: &str, mut emit: impl FnMut(String)) {
        let cleaned;
        let text = if self.strip_html && (text.contains('<') || text.contains('&')) {
            let no_tags = HTML_TAG.replace_all(text, " ");
            cleaned = HTML_ENTITY.replace_all(&no_tags, " ").into_owned();
            cleaned.as_str()
        } else {
            text
        };
        let mut current = String::new();
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                if self.lowercase {
                    // 'İ' lowercases to 'i' + U+0307, which is not alphanumeric
                    current.extend(ch.to_lowercase().filter(|c| c.is_alphanumeric()));
                } else {
                    current.push(ch);
                }
            } else if !current.is_empty() {
                emit(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            emit(current);
        }
    }
}
