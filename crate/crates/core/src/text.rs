//! Tokenization, token budgeting and stable hashing shared by every module.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Lowercased tokens, split on Unicode whitespace and ASCII punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Default token estimator: `ceil(bytes / 4)`.
pub fn token_count(text: &str) -> usize {
    text.len().div_ceil(4)
}

/// Pluggable token counter for budget logic.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ByteEstimator;

impl TokenCounter for ByteEstimator {
    fn count(&self, text: &str) -> usize {
        token_count(text)
    }
}

impl<F> TokenCounter for F
where
    F: Fn(&str) -> usize + Send + Sync,
{
    fn count(&self, text: &str) -> usize {
        self(text)
    }
}

/// Longest prefix of `text` (on a char boundary) whose count fits `budget`.
pub(crate) fn truncate_to_budget(text: &str, budget: usize, counter: &dyn TokenCounter) -> String {
    if counter.count(text) <= budget {
        return text.to_string();
    }
    let bounds: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(core::iter::once(text.len()))
        .collect();
    // bounds[0] == 0 always fits unless the counter charges for empty text
    let (mut lo, mut hi) = (0usize, bounds.len() - 1);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if counter.count(&text[..bounds[mid]]) <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    text[..bounds[lo]].to_string()
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seeded 64-bit hash: FNV-1a over the bytes followed by a SplitMix64 finalizer.
/// Stable across platforms and releases.
pub fn stable_hash(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ mix64(seed);
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    mix64(h)
}

pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn tokenizer_lowercases_and_splits_punctuation() {
        assert_eq!(
            tokenize("Team: 5, RRU-timeout\tX"),
            vec!["team", "5", "rru", "timeout", "x"]
        );
        assert!(tokenize("  ,.; ").is_empty());
    }

    #[test]
    fn token_count_rounds_up() {
        assert_eq!(token_count(""), 0);
        assert_eq!(token_count("abcd"), 1);
        assert_eq!(token_count("abcdefghi"), 3);
    }

    #[test]
    fn truncation_respects_char_boundaries() {
        let t = truncate_to_budget("héllo wörld", 2, &ByteEstimator);
        assert!(token_count(&t) <= 2);
        assert!("héllo wörld".starts_with(&t));
        assert_eq!(truncate_to_budget("abc", 5, &ByteEstimator), "abc");
    }

    #[test]
    fn stable_hash_depends_on_seed() {
        assert_eq!(stable_hash(1, b"abc"), stable_hash(1, b"abc"));
        assert_ne!(stable_hash(1, b"abc"), stable_hash(2, b"abc"));
    }
}
