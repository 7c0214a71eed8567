use crate::domain::{Attribute, Unit};

/// Keyword spellings, lowercase, with the attribute they denote.
const KEYWORDS: [(&str, Attribute); 8] = [
    ("ec50", Attribute::EC50),
    ("ic50", Attribute::IC50),
    ("pkd", Attribute::PKd),
    ("td50", Attribute::TD50),
    ("tc50", Attribute::TC50),
    ("ki", Attribute::Ki),
    ("kd", Attribute::Kd),
    ("ti", Attribute::Ti),
];

/// Lowercases, maps subscript digits and letters to plain ones, and replaces
/// markup tags with a space.
pub(crate) fn fold_text(text: &str) -> Vec<char> {
    let mut out = Vec::with_capacity(text.len());
    let mut in_tag = false;
    for c in text.chars() {
        if in_tag {
            if c == '>' {
                in_tag = false;
                out.push(' ');
            }
            continue;
        }
        if c == '<' {
            in_tag = true;
            continue;
        }
        let c = match c {
            '\u{2080}'..='\u{2089}' => char::from(b'0' + (c as u32 - 0x2080) as u8),
            '\u{1d62}' => 'i',
            '\u{2091}' => 'e',
            '\u{2092}' => 'o',
            _ => c,
        };
        out.extend(c.to_lowercase());
    }
    out
}

/// Matches `kw` at `start`, allowing whitespace between keyword characters.
/// Returns the index one past the last matched character.
fn match_at(chars: &[char], start: usize, kw: &str) -> Option<usize> {
    let mut i = start;
    for (k, want) in kw.chars().enumerate() {
        if k > 0 {
            while i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
        }
        if chars.get(i) != Some(&want) {
            return None;
        }
        i += 1;
    }
    Some(i)
}

fn left_boundary(chars: &[char], i: usize) -> bool {
    i == 0 || !chars[i - 1].is_alphanumeric()
}

/// Every attribute keyword occurrence as `(attribute, start, end)` in folded text.
/// With `strict`, a keyword must also not run into a following letter ("Kinase").
fn find_keywords(chars: &[char], strict: bool) -> Vec<(Attribute, usize, usize)> {
    let mut hits = Vec::new();
    for i in 0..chars.len() {
        if !left_boundary(chars, i) {
            continue;
        }
        for (kw, attr) in KEYWORDS {
            if let Some(end) = match_at(chars, i, kw) {
                if strict && chars.get(end).is_some_and(|c| c.is_alphabetic()) {
                    continue;
                }
                hits.push((attr, i, end));
                break;
            }
        }
    }
    hits
}

/// Bioactivity keyword pre-screen. Case-insensitive; subscripts, markup and
/// whitespace inside a keyword are tolerated. Unit words alone never qualify.
pub fn screen_keywords(text: &str) -> bool {
    !find_keywords(&fold_text(text), false).is_empty()
}

/// First attribute named in a header cell, requiring a word boundary on both sides.
pub fn header_attribute(text: &str) -> Option<Attribute> {
    find_keywords(&fold_text(text), true)
        .first()
        .map(|(a, _, _)| *a)
}

/// Unit named anywhere in `text`, if exactly one kind is present.
pub fn find_unit(text: &str) -> Option<Unit> {
    let s: String = fold_text(text)
        .into_iter()
        .map(|c| if c == 'µ' || c == 'μ' { 'u' } else { c })
        .collect();
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let mut found = Vec::new();
    if compact.contains("kcal/mol") || compact.contains("kcalmol") || compact.contains("kcal·mol") {
        found.push(Unit::KcalPerMol);
    }
    if s.contains('%') {
        found.push(Unit::Percent);
    }
    for (needle, unit) in [("nm", Unit::Nanomolar), ("um", Unit::Micromolar)] {
        let mut from = 0;
        while let Some(pos) = s[from..].find(needle) {
            let at = from + pos;
            let before = s[..at].chars().next_back();
            let after = s[at + needle.len()..].chars().next();
            let bounded = |c: Option<char>| c.is_none_or(|c| !c.is_alphabetic());
            if bounded(before) && bounded(after) {
                found.push(unit);
                break;
            }
            from = at + needle.len();
        }
    }
    found.dedup();
    match found.as_slice() {
        [one] => Some(*one),
        _ => None,
    }
}
