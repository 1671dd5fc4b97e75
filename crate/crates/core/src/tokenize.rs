//! Token splitting shared by the validator, the oracle curator, and the
//! answer-key writer.
//!
//! A token is a maximal run of ASCII alphanumerics. A `.` joins two digits
//! so UIDs, decimals and dotted addresses stay whole. Every other character
//! separates. Tokens compare upper-cased.

use std::ops::Range;

/// Byte ranges of each token in `s`.
pub fn token_spans(s: &str) -> Vec<Range<usize>> {
    let b = s.as_bytes();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..b.len() {
        let c = b[i];
        let joins = c == b'.'
            && i > 0
            && b[i - 1].is_ascii_digit()
            && b.get(i + 1).is_some_and(u8::is_ascii_digit)
            && start.is_some();
        if c.is_ascii_alphanumeric() || joins {
            start.get_or_insert(i);
        } else if let Some(st) = start.take() {
            spans.push(st..i);
        }
    }
    if let Some(st) = start {
        spans.push(st..b.len());
    }
    spans
}

pub fn tokenize(s: &str) -> Vec<String> {
    token_spans(s).into_iter().map(|r| s[r].to_ascii_uppercase()).collect()
}

/// Removes every token of `s` that appears in `remove` (case-insensitive),
/// collapsing the separators left behind. Returns the new value.
pub fn remove_tokens(s: &str, remove: &[String]) -> String {
    let mut out = String::with_capacity(s.len());
    let mut cursor = 0;
    // Separator preceding the current run of dropped tokens.
    let mut pending: Option<&str> = None;
    let mut last_kept = false;
    for span in token_spans(s) {
        let sep = pending.take().unwrap_or(&s[cursor..span.start]);
        let tok = &s[span.clone()];
        cursor = span.end;
        last_kept = !remove.iter().any(|r| r.eq_ignore_ascii_case(tok));
        if last_kept {
            if !out.is_empty() {
                out.push_str(sep);
            }
            out.push_str(tok);
        } else {
            pending = Some(sep);
        }
    }
    if last_kept {
        out.push_str(&s[cursor..]);
    }
    out.trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<&'static str> {
        tokenize(s).into_iter().map(|t| &*Box::leak(t.into_boxed_str())).collect()
    }

    #[test]
    fn basic_splitting() {
        assert_eq!(toks("SANCHEZ^TIMOTHY"), ["SANCHEZ", "TIMOTHY"]);
        assert_eq!(toks("ct chest w/o, DR jones"), ["CT", "CHEST", "W", "O", "DR", "JONES"]);
        assert_eq!(toks("1.2.840.113619.2.55"), ["1.2.840.113619.2.55"]);
        assert_eq!(toks("10.0.0.1:8080"), ["10.0.0.1", "8080"]);
        assert_eq!(toks("v1.2a end."), ["V1.2A", "END"]);
        assert_eq!(toks("a.b"), ["A", "B"]);
        assert_eq!(toks("http://x-y.org/p_q"), ["HTTP", "X", "Y", "ORG", "P", "Q"]);
        assert!(tokenize("").is_empty());
        assert!(tokenize("  ^^ - ").is_empty());
    }

    #[test]
    fn removal() {
        let rm = |s: &str, r: &[&str]| remove_tokens(s, &r.iter().map(|x| x.to_string()).collect::<Vec<_>>());
        assert_eq!(rm("CHEST CT DR SMITH", &["DR", "SMITH"]), "CHEST CT");
        assert_eq!(rm("DR SMITH CHEST", &["dr", "smith"]), "CHEST");
        assert_eq!(rm("A B C", &["B"]), "A C");
        assert_eq!(rm("ONLY", &["ONLY"]), "");
        assert_eq!(rm("A^B^C", &["A"]), "B^C");
    }

    proptest! {
        #[test]
        fn tokens_are_upper_and_nonempty(s in "\\PC{0,40}") {
            for t in tokenize(&s) {
                prop_assert!(!t.is_empty());
                prop_assert!(t.bytes().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == b'.'));
                prop_assert!(!t.starts_with('.') && !t.ends_with('.'));
            }
        }

        #[test]
        fn removal_drops_exactly_the_named_tokens(words in proptest::collection::vec("[A-Z0-9]{1,6}", 1..8), pick in 0usize..8) {
            let s = words.join(" ");
            let target = words[pick % words.len()].clone();
            let out = remove_tokens(&s, std::slice::from_ref(&target));
            let expected: Vec<String> = words.iter().filter(|w| **w != target).cloned().collect();
            prop_assert_eq!(tokenize(&out), expected);
        }
    }
}
