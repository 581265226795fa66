//! Tokenisation, stopwords and stemming.

pub mod porter;

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Version tag of the bundled stopword list; bump when the file changes.
pub const STOPWORDS_VERSION: &str = "en-v1";

const STOPWORDS_EN: &str = include_str!("../../data/stopwords_en_v1.txt");

/// The bundled 127-entry English stopword list.
pub fn english_stopwords() -> BTreeSet<String> {
    STOPWORDS_EN
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(ToString::to_string)
        .collect()
}

/// Splits on every character that is not alphanumeric. Apostrophes split too,
/// so "don't" yields "don" and "t".
pub fn tokenize(raw: &str) -> Vec<&str> {
    raw.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).collect()
}
