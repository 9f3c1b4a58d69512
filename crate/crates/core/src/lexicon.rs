//! Shipped word lists: per-caption slot lexicon (affixes, aliases, cue words)
//! and the fixed stop-word list.

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use serde::Deserialize;

const SLOT_LEXICON: &str = include_str!("../resources/slot_lexicon.json");
const STOPWORDS: &str = include_str!("../resources/stopwords.txt");

/// Lexical knowledge about one slot caption, shared across domains.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct SlotLexicon {
    #[serde(default)]
    pub affixes: Vec<String>,
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
    /// Cue phrases that appear before a value ("serves X", "from X").
    #[serde(default)]
    pub before_cues: Vec<String>,
    /// Cue phrases that appear after a value ("X food", "X stars").
    #[serde(default)]
    pub after_cues: Vec<String>,
    /// Subset of cues whose unmatched neighbour is reported as a wrong value.
    #[serde(default)]
    pub wrong_before: Vec<String>,
    #[serde(default)]
    pub wrong_after: Vec<String>,
}

#[derive(Deserialize)]
struct LexiconFile {
    #[allow(dead_code)]
    version: u32,
    slots: BTreeMap<String, SlotLexicon>,
}

fn lexicon() -> &'static BTreeMap<String, SlotLexicon> {
    static LEXICON: OnceLock<BTreeMap<String, SlotLexicon>> = OnceLock::new();
    LEXICON.get_or_init(|| {
        let file: LexiconFile =
            serde_json::from_str(SLOT_LEXICON).expect("bundled slot lexicon is valid JSON");
        file.slots
    })
}

/// Lexicon entry for a caption, or an empty entry for captions we know nothing about.
pub fn slot_lexicon(caption: &str) -> SlotLexicon {
    lexicon().get(caption).cloned().unwrap_or_default()
}

/// The fixed 50-word function-word list.
pub fn stopwords() -> &'static HashSet<String> {
    static WORDS: OnceLock<HashSet<String>> = OnceLock::new();
    WORDS.get_or_init(|| {
        STOPWORDS
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .map(str::to_owned)
            .collect()
    })
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}
