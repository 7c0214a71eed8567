use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::AlignError;

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

pub(crate) fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - lev(a, b) / max(|a|, |b|)`, computed as `(max - lev) / max` so the
/// result is the correctly rounded ratio.
pub fn similarity(a: &str, b: &str) -> Result<f64, AlignError> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let m = a.len().max(b.len());
    if m == 0 {
        return Err(AlignError::BothEmpty);
    }
    let d = levenshtein_chars(&a, &b);
    Ok((m - d) as f64 / m as f64)
}

/// Normalized distance `lev / max`, with two empty strings at distance 0.
pub fn text_distance(a: &str, b: &str) -> f64 {
    similarity(a, b).map(|s| 1.0 - s).unwrap_or(0.0)
}

const PREFIXES: [&str; 6] = ["compound", "cpd", "example", "no", "化合物", "実施例"];

fn half_width(c: char) -> char {
    match c {
        '\u{ff01}'..='\u{ff5e}' => char::from_u32(c as u32 - 0xfee0).unwrap_or(c),
        '\u{3000}' => ' ',
        _ => c,
    }
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace()
        || matches!(
            c,
            '-' | '_' | '.' | ',' | '(' | ')' | '[' | ']' | '\u{2010}'..='\u{2015}' | '\u{2212}'
        )
}

fn widen_lower(s: &str) -> String {
    s.chars().map(half_width).flat_map(char::to_lowercase).collect()
}

/// Case-folded, half-width identifier with delimiters removed. Word prefixes are kept.
pub fn fold_id(s: &str) -> String {
    widen_lower(s).chars().filter(|c| !is_delimiter(*c)).collect()
}

/// [`fold_id`] plus removal of leading identifier words ("Compound", "No.", "化合物", ...).
/// A prefix is only removed when a digit or delimiter follows it and something remains.
pub fn normalize_id(s: &str) -> String {
    let wide = widen_lower(s);
    let mut rest = wide.as_str();
    loop {
        let trimmed = rest.trim_start_matches(is_delimiter);
        let mut stripped = None;
        for p in PREFIXES {
            if let Some(after) = trimmed.strip_prefix(p) {
                let next = after.chars().next();
                if next.is_some_and(|c| c.is_ascii_digit() || is_delimiter(c)) {
                    stripped = Some(after);
                    break;
                }
            }
        }
        match stripped {
            Some(after) if after.chars().any(|c| !is_delimiter(c)) => rest = after,
            _ => break,
        }
    }
    rest.chars().filter(|c| !is_delimiter(*c)).collect()
}

/// Identifier shapes used for naming consistency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum FormatClass {
    /// `12`
    Digits,
    /// `1a`, `12b`
    DigitsSuffix,
    /// `A35`, `ab7`
    LetterDigits,
    /// `compound5`, `example12`
    WordNumber,
}

/// Shape of a folded identifier, or `None` for anything else.
pub fn format_class(id: &str) -> Option<FormatClass> {
    let f = fold_id(id);
    if f.is_empty() {
        return None;
    }
    let lead_digits = f.chars().take_while(|c| c.is_ascii_digit()).count();
    let total = f.chars().count();
    if lead_digits == total {
        return Some(FormatClass::Digits);
    }
    if lead_digits > 0 {
        let tail_alpha = f.chars().skip(lead_digits).all(|c| c.is_alphabetic());
        return tail_alpha.then_some(FormatClass::DigitsSuffix);
    }
    let letters = f.chars().take_while(|c| c.is_alphabetic()).count();
    let digits = f.chars().skip(letters).take_while(|c| c.is_ascii_digit()).count();
    let suffix_ok = f
        .chars()
        .skip(letters + digits)
        .all(|c| c.is_alphabetic())
        && total - letters - digits <= 1;
    if letters == 0 || digits == 0 || !suffix_ok {
        return None;
    }
    Some(if letters <= 2 {
        FormatClass::LetterDigits
    } else {
        FormatClass::WordNumber
    })
}
