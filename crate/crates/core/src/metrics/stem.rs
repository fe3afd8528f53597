//! A small suffix-stripping stemmer for the stem stage of METEOR matching.
//!
//! It is deliberately simpler than Porter's algorithm. Applied to a
//! lowercase token:
//!
//! 1. The first matching suffix from [`SUFFIXES`] (longest first) is
//!    replaced, provided at least three characters remain before it.
//!    A plain `s` is never stripped after `s`, `u` or `i` (`bass`, `chorus`,
//!    `hi-fi's` style tokens stay intact).
//! 2. If an `-ing`/`-ed` style suffix was removed and the stem ends in a
//!    doubled consonant other than `l`, `s` or `z`, one is dropped
//!    (`running` → `run`).
//! 3. A final silent `e` is dropped from stems longer than three
//!    characters, so `dance` and `dancing` both become `danc`.
//!
//! Tokens with non-ASCII letters are returned unchanged.

/// `(suffix, replacement, undouble)` in matching order.
const SUFFIXES: &[(&str, &str, bool)] = &[
    ("ational", "ate", false),
    ("fulness", "ful", false),
    ("ousness", "ous", false),
    ("iveness", "ive", false),
    ("ization", "ize", false),
    ("ations", "ate", false),
    ("ation", "ate", false),
    ("ments", "", false),
    ("ment", "", false),
    ("ness", "", false),
    ("ings", "", true),
    ("edly", "", true),
    ("ingly", "", true),
    ("ing", "", true),
    ("ies", "y", false),
    ("ied", "y", false),
    ("ed", "", true),
    ("ly", "", false),
    ("es", "", false),
    ("s", "", false),
];

const MIN_STEM: usize = 3;

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

pub fn stem(word: &str) -> String {
    if !word.is_ascii() {
        return word.to_string();
    }
    let mut out = word.to_string();
    let mut undouble = false;
    // Longest suffix first so e.g. `ingly` wins over `ly`.
    let mut order: Vec<&(&str, &str, bool)> = SUFFIXES.iter().collect();
    order.sort_by_key(|(s, _, _)| std::cmp::Reverse(s.len()));
    for (suffix, replacement, und) in order {
        if let Some(base) = out.strip_suffix(suffix) {
            if base.len() < MIN_STEM {
                continue;
            }
            if *suffix == "s" && base.ends_with(['s', 'u', 'i']) {
                continue;
            }
            if *suffix == "es" && !base.ends_with(['s', 'x', 'z', 'h', 'o']) {
                // `tunes` → `tune` (via plain `s`), `boxes` → `box`.
                continue;
            }
            out = format!("{base}{replacement}");
            undouble = *und;
            break;
        }
    }
    let bytes = out.as_bytes();
    let n = bytes.len();
    if undouble
        && n >= 2
        && bytes[n - 1] == bytes[n - 2]
        && !is_vowel(bytes[n - 1])
        && !matches!(bytes[n - 1], b'l' | b's' | b'z')
    {
        out.pop();
    }
    if out.len() > MIN_STEM && out.ends_with('e') {
        out.pop();
    }
    out
}
