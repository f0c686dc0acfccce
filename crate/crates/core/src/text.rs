//! Small text utilities shared across modules.

/// Number of whitespace-separated tokens after trimming. Punctuation glued
/// to a word counts with the word.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Trim and collapse internal whitespace runs to a single space; case is kept.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercase, replace punctuation with spaces and collapse whitespace.
///
/// Used for duplicate detection, where "Calcule 7 + 5." and "calcule 7+5"
/// should compare equal.
pub fn normalize_for_dedupe(text: &str) -> String {
    let mapped: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();
    collapse_whitespace(&mapped.to_lowercase())
}

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
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

/// Re-apply the capitalisation of `model` to `replacement`: if the first
/// character of `model` is uppercase, the replacement is capitalised.
pub fn match_case(model: &str, replacement: &str) -> String {
    let upper = model.chars().next().is_some_and(char::is_uppercase);
    if !upper {
        return replacement.to_string();
    }
    let mut chars = replacement.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
