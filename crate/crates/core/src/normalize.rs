//! Value normalization shared by extraction, filtering and evaluation.

use crate::schema::SlotSpec;

const NUMBER_WORDS: [&str; 11] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
];

const EDGE_PUNCTUATION: &[char] = &[
    '.', ',', '!', '?', ';', '"', '\'', '(', ')', '[', ']', '{', '}', '`',
];

/// Slot-independent normalization: lowercase, trimmed, single-spaced,
/// standalone number-words zero to ten mapped to digits.
pub fn normalize_text(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let words: Vec<String> = lowered
        .split_whitespace()
        .map(|w| w.trim_matches(EDGE_PUNCTUATION))
        .filter(|w| !w.is_empty())
        .map(|w| match number_word(w) {
            Some(d) => d.to_string(),
            None => w.to_string(),
        })
        .collect();
    words.join(" ")
}

fn number_word(word: &str) -> Option<usize> {
    NUMBER_WORDS.iter().position(|n| *n == word)
}

/// Normalizes a raw value for a slot. Idempotent.
///
/// On top of [`normalize_text`], strips the slot's caption and affixes when
/// they occur as a leading or trailing phrase ("french food" -> "french")
/// and maps known aliases onto their canonical configuration.
pub fn normalize_value(raw: &str, slot: &SlotSpec) -> String {
    let mut current = normalize_text(raw);
    // Every pass either shrinks the string or leaves it unchanged.
    loop {
        let next = normalize_pass(&current, slot);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn normalize_pass(value: &str, slot: &SlotSpec) -> String {
    let mut value = normalize_text(value);
    let mut affixes: Vec<String> = slot
        .affixes
        .iter()
        .map(|a| normalize_text(a))
        .chain(std::iter::once(normalize_text(&slot.caption)))
        .filter(|a| !a.is_empty())
        .collect();
    affixes.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    affixes.dedup();

    for affix in &affixes {
        if let Some(rest) = value.strip_prefix(&format!("{affix} ")) {
            if !rest.trim().is_empty() {
                value = rest.trim().to_string();
                break;
            }
        }
    }
    for affix in &affixes {
        if let Some(rest) = value.strip_suffix(&format!(" {affix}")) {
            if !rest.trim().is_empty() {
                value = rest.trim().to_string();
                break;
            }
        }
    }
    if let Some(canonical) = slot
        .aliases
        .iter()
        .find(|(alias, _)| normalize_text(alias) == value)
        .map(|(_, canonical)| normalize_text(canonical))
    {
        value = canonical;
    }
    value
}

/// Tokens used for lexical matching: normalized words with inner punctuation
/// other than `:` `'` `&` turned into separators.
pub fn tokenize(text: &str) -> Vec<String> {
    let spaced: String = text
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == ':' || c == '\'' || c == '&' {
                c
            } else {
                ' '
            }
        })
        .collect();
    normalize_text(&spaced)
        .split(' ')
        .filter(|t| !t.is_empty())
        .map(|t| t.trim_matches(|c| c == ':' || c == '\'').to_string())
        .filter(|t| !t.is_empty())
        .collect()
}
