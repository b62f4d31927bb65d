//! Text normalisation shared by the parsers, the embedders and the
//! lexical features.

use unicode_normalization::UnicodeNormalization;

/// NFC, trim, and collapse internal whitespace runs to one space.
pub fn normalize(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_whitespace() {
        assert_eq!(normalize("  a \t b\n\nc  "), "a b c");
        assert_eq!(normalize(""), "");
    }

    #[test]
    fn composes_combining_marks() {
        assert_eq!(normalize("e\u{301}"), "\u{e9}");
    }
}
