//! Indel-based similarity ratios in the style of the classic fuzzy
//! matching family: plain, partial (best window), token-sort and
//! token-set.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::tokenize;
use crate::text::normalize;

/// Longest common subsequence length over characters.
pub fn lcs_len(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for ca in a {
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn ratio_chars(a: &[char], b: &[char]) -> u8 {
    let total = a.len() + b.len();
    if total == 0 {
        return 100;
    }
    // 100 * (1 - d / total) with d = total - 2 * lcs, i.e. 200 * lcs / total,
    // rounded half-up in integer arithmetic.
    let lcs = lcs_len(a, b);
    ((400 * lcs + total) / (2 * total)) as u8
}

/// `round_half_up(100 * (1 - indel(a, b) / (|a| + |b|)))`, 100 for two
/// empty strings. Lengths are in Unicode scalar values.
pub fn base_ratio(a: &str, b: &str) -> u8 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    ratio_chars(&a, &b)
}

/// Best [`base_ratio`] of the shorter string against every window of the
/// longer one with the same length.
pub fn partial_ratio(a: &str, b: &str) -> u8 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if short.len() == long.len() {
        return ratio_chars(&short, &long);
    }
    if short.is_empty() {
        // the only window is the empty string
        return 100;
    }
    let mut best = 0;
    for w in long.windows(short.len()) {
        best = best.max(ratio_chars(&short, w));
        if best == 100 {
            break;
        }
    }
    best
}

fn sorted_join(tokens: impl IntoIterator<Item = String>) -> String {
    let mut v: Vec<String> = tokens.into_iter().collect();
    v.sort();
    v.join(" ")
}

pub fn token_sort_ratio(a: &str, b: &str) -> u8 {
    base_ratio(&sorted_join(tokenize(a)), &sorted_join(tokenize(b)))
}

fn join_nonempty(head: &str, tail: &str) -> String {
    match (head.is_empty(), tail.is_empty()) {
        (true, _) => tail.to_string(),
        (_, true) => head.to_string(),
        _ => format!("{head} {tail}"),
    }
}

pub fn token_set_ratio(a: &str, b: &str) -> u8 {
    let ta: BTreeSet<String> = tokenize(a).into_iter().collect();
    let tb: BTreeSet<String> = tokenize(b).into_iter().collect();
    let common = sorted_join(ta.intersection(&tb).cloned());
    let only_a = sorted_join(ta.difference(&tb).cloned());
    let only_b = sorted_join(tb.difference(&ta).cloned());
    let t1 = join_nonempty(&common, &only_a);
    let t2 = join_nonempty(&common, &only_b);
    base_ratio(&common, &t1)
        .max(base_ratio(&common, &t2))
        .max(base_ratio(&t1, &t2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzyRatios {
    pub fuzz_ratio: u8,
    pub fuzz_partial_ratio: u8,
    pub token_sort_ratio: u8,
    pub token_set_ratio: u8,
}

/// The four ratios between two answers. The plain and partial ratios see
/// the whitespace-normalised text; the token ratios see [`tokenize`] output.
pub fn fuzzy_ratios(reference: &str, student: &str) -> FuzzyRatios {
    let r = normalize(reference);
    let s = normalize(student);
    FuzzyRatios {
        fuzz_ratio: base_ratio(&r, &s),
        fuzz_partial_ratio: partial_ratio(&r, &s),
        token_sort_ratio: token_sort_ratio(&r, &s),
        token_set_ratio: token_set_ratio(&r, &s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_examples() {
        assert_eq!(base_ratio("abc", "abc"), 100);
        assert_eq!(base_ratio("abc", "xyz"), 0);
        assert_eq!(base_ratio("abcd", "bc"), 67);
        assert_eq!(base_ratio("", ""), 100);
        assert_eq!(base_ratio("a", ""), 0);
        // 200 * 1 / 8 = 25 exactly; 200 * 1 / 3 = 66.67
        assert_eq!(base_ratio("abcd", "aefg"), 25);
        assert_eq!(base_ratio("ab", "a"), 67);
    }

    #[test]
    fn half_up_rounding() {
        // lcs 1 over 16 chars: 12.5 rounds up
        let a = "a".to_string() + &"x".repeat(7);
        let b = "a".to_string() + &"y".repeat(7);
        assert_eq!(base_ratio(&a, &b), 13);
    }

    #[test]
    fn partial_examples() {
        assert_eq!(partial_ratio("fuzzy was a bear", "fuzzy"), 100);
        assert_eq!(partial_ratio("fuzzy", "fuzzy was a bear"), 100);
        assert_eq!(partial_ratio("abc", "abc"), 100);
        assert_eq!(partial_ratio("", "abc"), 100);
    }

    #[test]
    fn token_examples() {
        assert_eq!(token_sort_ratio("world hello", "hello world"), 100);
        assert_eq!(token_sort_ratio("Hello, world!", "world hello"), 100);
        assert_eq!(
            token_set_ratio("fuzzy was a bear", "fuzzy fuzzy was a bear"),
            100
        );
        assert_eq!(
            token_set_ratio("a b", "a c"),
            base_ratio("a", "a b").max(base_ratio("a b", "a c"))
        );
        assert_eq!(token_set_ratio("", ""), 100);
    }

    #[test]
    fn identity_gives_hundred() {
        for s in ["x", "The cat sat.", "Stacks are LIFO, queues FIFO"] {
            let r = fuzzy_ratios(s, s);
            assert_eq!(
                (
                    r.fuzz_ratio,
                    r.fuzz_partial_ratio,
                    r.token_sort_ratio,
                    r.token_set_ratio
                ),
                (100, 100, 100, 100)
            );
        }
    }
}
