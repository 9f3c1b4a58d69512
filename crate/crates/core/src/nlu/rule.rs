//! Deterministic rule-based extraction.
//!
//! Longest-match scan of the tokenized utterance against each slot's
//! permitted configurations (and aliases). Values that fit several slots, or
//! that are bare numbers or yes/no answers, are attributed through nearby cue
//! words ("from X", "X stars"). An unmatched word right next to a
//! wrong-value cue ("serves X", "X area") is reported as wrong or out of domain.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock};

use super::{AuditLog, ExtractionOutcome, Extractor, NluError};
use crate::lexicon::{is_stopword, slot_lexicon, SlotLexicon};
use crate::normalize::tokenize;
use crate::schema::{DomainSchema, SlotSpec};

/// How far (in tokens) a cue may sit from the value it attributes.
const CUE_WINDOW: usize = 3;

const TIME_SLOTS: &[&str] = &["leaveat", "arriveby", "booktime"];

/// Words that never carry a preference on their own.
#[rustfmt::skip]
const FILLER: &[&str] = &[
    "hello", "hi", "hey", "thanks", "thank", "please", "yes", "yeah", "no", "not", "ok", "okay",
    "sure", "great", "good", "fine", "looking", "look", "find", "want", "wants", "need", "needs",
    "like", "i'd", "i'm", "i'll", "help", "suggest", "recommend", "get", "book", "stay", "place",
    "something", "somewhere", "also", "just", "actually", "what", "which", "how", "where", "when",
    "who", "one", "ones", "all", "go", "going", "visit", "see", "info", "information", "tell",
    "give", "know", "let", "am", "us", "them", "they", "their", "it's", "that's", "there's", "same",
    "other", "else", "anything", "interested", "include", "included", "includes", "should", "must",
    "have", "has", "make", "sure", "well", "then", "so", "too", "very", "really", "much", "more",
    "any", "some", "is", "be", "do", "does", "did", "can", "could", "would", "will", "may", "might",
    "now", "today", "tonight", "currently", "hoping", "trying", "try", "prefer", "preference",
    "either", "rather", "way", "as", "than", "up", "out", "off", "over", "out", "around", "near",
    "between", "after", "before", "during", "while", "where's", "sorry", "meant", "mean", "instead",
    "works", "work", "alright", "perfect",
];

/// Single-token names that are ordinary words; a cue is required for them.
const COMMON_NAME_WORDS: &[&str] = &["ask", "place", "junction", "hotpot", "graffiti", "nusha"];

/// Rule-based extractor. Optional extra vocabularies cover unconstrained
/// slots (e.g. values collected from fixture goals).
#[derive(Debug, Clone, Default)]
pub struct RuleExtractor {
    vocabulary: BTreeMap<String, Vec<String>>,
}

impl RuleExtractor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vocabulary(mut self, caption: &str, values: Vec<String>) -> Self {
        self.vocabulary
            .entry(caption.to_string())
            .or_default()
            .extend(values);
        self
    }

    pub fn extract_outcome(&self, schema: &DomainSchema, utterance: &str) -> ExtractionOutcome {
        Scanner::new(schema, &self.vocabulary, utterance).run()
    }
}

impl Extractor for RuleExtractor {
    fn extract(
        &self,
        schema: &DomainSchema,
        utterance: &str,
        _audit: &AuditLog,
    ) -> Result<ExtractionOutcome, NluError> {
        Ok(self.extract_outcome(schema, utterance))
    }
}

/// Rule-based extraction with no extra vocabulary. Total and deterministic.
pub fn rule_based_extract(schema: &DomainSchema, utterance: &str) -> ExtractionOutcome {
    RuleExtractor::new().extract_outcome(schema, utterance)
}

#[derive(Debug, Clone)]
struct Surface {
    tokens: Vec<String>,
    slot: usize,
    /// The raw configuration this surface stands for.
    raw: String,
    needs_cue: bool,
}

#[derive(Debug, Clone)]
struct Span {
    start: usize,
    end: usize,
    slot: usize,
    raw: String,
}

/// Tokenized cue phrases of one slot.
#[derive(Debug, Default)]
struct Cues {
    before: Vec<Vec<String>>,
    after: Vec<Vec<String>>,
    wrong_before: Vec<Vec<String>>,
    wrong_after: Vec<Vec<String>>,
}

/// Everything derived from the schema and vocabulary alone; built once per
/// distinct (schema, vocabulary) pair and shared.
#[derive(Debug)]
struct Prepared {
    cues: Vec<Cues>,
    surfaces: Vec<Surface>,
    all_cues: BTreeSet<String>,
    captions: BTreeSet<String>,
}

struct Scanner<'a> {
    schema: &'a DomainSchema,
    slots: Vec<&'a SlotSpec>,
    prepared: Arc<Prepared>,
    tokens: Vec<String>,
}

fn cue_tokens(cues: &[String]) -> Vec<Vec<String>> {
    cues.iter()
        .map(|c| tokenize(c))
        .filter(|c| !c.is_empty())
        .collect()
}

fn is_numeric(tokens: &[String]) -> bool {
    tokens.iter().all(|t| {
        t.chars()
            .all(|c| c.is_ascii_digit() || c == ':' || c == '.')
    })
}

fn is_time(token: &str) -> bool {
    let mut parts = token.split(':');
    matches!(
        (parts.next(), parts.next(), parts.next()),
        (Some(h), Some(m), None)
            if (1..=2).contains(&h.len()) && m.len() == 2
                && h.chars().all(|c| c.is_ascii_digit()) && m.chars().all(|c| c.is_ascii_digit())
    )
}

fn fingerprint(schema: &DomainSchema, vocabulary: &BTreeMap<String, Vec<String>>) -> u64 {
    let mut h = DefaultHasher::new();
    schema.domain.hash(&mut h);
    for spec in schema.extraction_slots() {
        spec.caption.hash(&mut h);
        spec.permitted.hash(&mut h);
        spec.affixes.hash(&mut h);
        spec.aliases.hash(&mut h);
    }
    for slot in &schema.slots {
        slot.caption.hash(&mut h);
    }
    vocabulary.hash(&mut h);
    h.finish()
}

fn prepared(schema: &DomainSchema, vocabulary: &BTreeMap<String, Vec<String>>) -> Arc<Prepared> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<Prepared>>>> = OnceLock::new();
    let key = fingerprint(schema, vocabulary);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().expect("rule cache").get(&key) {
        return Arc::clone(hit);
    }
    let built = Arc::new(Prepared::build(schema, vocabulary));
    let mut guard = cache.lock().expect("rule cache");
    if guard.len() >= 256 {
        guard.clear();
    }
    Arc::clone(guard.entry(key).or_insert(built))
}

impl Prepared {
    fn build(schema: &DomainSchema, vocabulary: &BTreeMap<String, Vec<String>>) -> Self {
        let slots: Vec<&SlotSpec> = schema.extraction_slots().collect();
        let lexicons: Vec<SlotLexicon> = slots.iter().map(|s| slot_lexicon(&s.caption)).collect();

        let mut surfaces = Vec::new();
        let mut owners: BTreeMap<Vec<String>, BTreeSet<usize>> = BTreeMap::new();
        for (i, spec) in slots.iter().enumerate() {
            let permitted: HashSet<String> = spec.normalized_permitted().into_iter().collect();
            let mut raws: Vec<String> = spec.permitted.clone();
            raws.extend(spec.aliases.keys().cloned());
            if let Some(extra) = vocabulary.get(&spec.caption) {
                raws.extend(extra.iter().cloned());
            }
            let mut seen = BTreeSet::new();
            for raw in raws {
                let tokens = tokenize(&raw);
                if tokens.is_empty() || !seen.insert(tokens.clone()) {
                    continue;
                }
                // Aliases map onto a permitted configuration through normalization.
                if spec.is_constrained() && !permitted.contains(&spec.normalize(&raw)) {
                    continue;
                }
                let common_name = spec.caption == "name"
                    && tokens.len() == 1
                    && (COMMON_NAME_WORDS.contains(&tokens[0].as_str())
                        || is_stopword(&tokens[0])
                        || FILLER.contains(&tokens[0].as_str()));
                owners.entry(tokens.clone()).or_default().insert(i);
                surfaces.push(Surface {
                    needs_cue: is_numeric(&tokens)
                        || common_name
                        || tokens
                            .iter()
                            .all(|t| is_stopword(t) || FILLER.contains(&t.as_str())),
                    tokens,
                    slot: i,
                    raw,
                });
            }
        }
        for surface in &mut surfaces {
            if owners[&surface.tokens].len() > 1 {
                surface.needs_cue = true;
            }
        }

        let all_cues = lexicons
            .iter()
            .flat_map(|l| l.before_cues.iter().chain(&l.after_cues))
            .flat_map(|c| tokenize(c))
            .collect();
        let captions = schema
            .slots
            .iter()
            .flat_map(|s| tokenize(&s.caption))
            .chain(tokenize(&schema.domain))
            .collect();
        let cues = lexicons
            .iter()
            .map(|l| Cues {
                before: cue_tokens(&l.before_cues),
                after: cue_tokens(&l.after_cues),
                wrong_before: cue_tokens(&l.wrong_before),
                wrong_after: cue_tokens(&l.wrong_after),
            })
            .collect();
        Self {
            cues,
            surfaces,
            all_cues,
            captions,
        }
    }
}

impl<'a> Scanner<'a> {
    fn new(
        schema: &'a DomainSchema,
        vocabulary: &BTreeMap<String, Vec<String>>,
        utterance: &str,
    ) -> Self {
        Self {
            schema,
            slots: schema.extraction_slots().collect(),
            prepared: prepared(schema, vocabulary),
            tokens: tokenize(utterance),
        }
    }

    /// Distance from a span to the nearest cue of a slot, if within the window.
    fn cue_distance(&self, slot: usize, start: usize, end: usize) -> Option<usize> {
        let cues = &self.prepared.cues[slot];
        let mut best: Option<usize> = None;
        for cue in &cues.before {
            for cue_end in start.saturating_sub(CUE_WINDOW)..=start {
                if cue_end < cue.len() {
                    continue;
                }
                let cue_start = cue_end - cue.len();
                if self.tokens[cue_start..cue_end] == cue[..] {
                    let d = start - cue_end + 1;
                    best = Some(best.map_or(d, |b| b.min(d)));
                }
            }
        }
        for cue in &cues.after {
            for cue_start in end..=(end + CUE_WINDOW - 1) {
                let cue_end = cue_start + cue.len();
                if cue_end > self.tokens.len() {
                    break;
                }
                if self.tokens[cue_start..cue_end] == cue[..] {
                    let d = cue_start - end + 1;
                    best = Some(best.map_or(d, |b| b.min(d)));
                }
            }
        }
        best
    }

    fn candidates(&self) -> Vec<(usize, usize, Vec<&Surface>)> {
        let mut by_span: BTreeMap<(usize, usize), Vec<&Surface>> = BTreeMap::new();
        for surface in &self.prepared.surfaces {
            let n = surface.tokens.len();
            if n > self.tokens.len() {
                continue;
            }
            for start in 0..=(self.tokens.len() - n) {
                if self.tokens[start..start + n] == surface.tokens[..] {
                    by_span.entry((start, start + n)).or_default().push(surface);
                }
            }
        }
        // Bare times for unconstrained time slots.
        for (i, token) in self.tokens.iter().enumerate() {
            if !is_time(token) {
                continue;
            }
            for (slot, spec) in self.slots.iter().enumerate() {
                if TIME_SLOTS.contains(&spec.caption.as_str()) && !spec.is_constrained() {
                    by_span.entry((i, i + 1)).or_default();
                    let _ = slot;
                }
            }
        }
        by_span
            .into_iter()
            .map(|((s, e), surfaces)| (s, e, surfaces))
            .collect()
    }

    fn resolve(&self, start: usize, end: usize, surfaces: &[&Surface]) -> Option<Span> {
        let mut options: Vec<(usize, String, bool)> = surfaces
            .iter()
            .map(|s| (s.slot, s.raw.clone(), s.needs_cue))
            .collect();
        if options.is_empty() {
            // Bare time token.
            let token = &self.tokens[start];
            for (slot, spec) in self.slots.iter().enumerate() {
                if TIME_SLOTS.contains(&spec.caption.as_str()) && !spec.is_constrained() {
                    options.push((slot, token.clone(), true));
                }
            }
        }
        if let [(slot, raw, false)] = options.as_slice() {
            return Some(Span {
                start,
                end,
                slot: *slot,
                raw: raw.clone(),
            });
        }
        options
            .iter()
            .filter_map(|(slot, raw, _)| {
                self.cue_distance(*slot, start, end)
                    .map(|d| (d, *slot, raw.clone()))
            })
            .min_by_key(|(d, slot, _)| (*d, *slot))
            .map(|(_, slot, raw)| Span {
                start,
                end,
                slot,
                raw,
            })
    }

    fn run(self) -> ExtractionOutcome {
        let mut outcome = ExtractionOutcome::empty(self.schema);

        let mut candidates = self.candidates();
        // Longest first, then leftmost.
        candidates.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
        let mut covered = vec![false; self.tokens.len()];
        let mut spans: Vec<Span> = Vec::new();
        for (start, end, surfaces) in &candidates {
            if covered[*start..*end].iter().any(|c| *c) {
                continue;
            }
            if let Some(span) = self.resolve(*start, *end, surfaces) {
                covered[*start..*end].iter_mut().for_each(|c| *c = true);
                spans.push(span);
            }
        }
        spans.sort_by_key(|s| s.start);

        let mut used = vec![false; self.tokens.len()];
        for span in &spans {
            let caption = &self.slots[span.slot].caption;
            let entry = outcome.slots.get_mut(caption).expect("extraction slot");
            if entry.value.is_none() {
                entry.value = Some(span.raw.clone());
            }
            used[span.start..span.end]
                .iter_mut()
                .for_each(|u| *u = true);
            self.mark_cues(span, &mut used);
        }

        self.find_wrong_values(&mut outcome, &covered, &mut used);

        let captions = &self.prepared.captions;
        let rest: Vec<&str> = self
            .tokens
            .iter()
            .enumerate()
            .filter(|(i, t)| {
                !used[*i]
                    && !is_stopword(t)
                    && !FILLER.contains(&t.as_str())
                    && !captions.contains(*t)
                    && !t.chars().all(|c| c.is_ascii_digit())
            })
            .map(|(_, t)| t.as_str())
            .collect();
        outcome.text_part = rest.join(" ");
        outcome.conform(self.schema)
    }

    fn mark_cues(&self, span: &Span, used: &mut [bool]) {
        let cues = &self.prepared.cues[span.slot];
        for cue in &cues.before {
            if span.start >= cue.len() && self.tokens[span.start - cue.len()..span.start] == cue[..]
            {
                used[span.start - cue.len()..span.start]
                    .iter_mut()
                    .for_each(|u| *u = true);
            }
        }
        for cue in &cues.after {
            let cue_end = span.end + cue.len();
            if cue_end <= self.tokens.len() && self.tokens[span.end..cue_end] == cue[..] {
                used[span.end..cue_end].iter_mut().for_each(|u| *u = true);
            }
        }
    }

    fn is_wrong_candidate(&self, token: &str, all_cues: &BTreeSet<String>) -> bool {
        !is_stopword(token)
            && !FILLER.contains(&token)
            && !all_cues.contains(token)
            && !token.chars().all(|c| c.is_ascii_digit() || c == ':')
    }

    fn find_wrong_values(
        &self,
        outcome: &mut ExtractionOutcome,
        covered: &[bool],
        used: &mut [bool],
    ) {
        let all_cues = &self.prepared.all_cues;
        let n = self.tokens.len();
        // (value position, slot, value, cue span)
        let mut found: Vec<(usize, usize, String, (usize, usize))> = Vec::new();
        for (slot, cues) in self.prepared.cues.iter().enumerate() {
            if !self.slots[slot].is_constrained() {
                continue;
            }
            for cue in &cues.wrong_before {
                for start in 0..n.saturating_sub(cue.len()) {
                    if self.tokens[start..start + cue.len()] != cue[..] {
                        continue;
                    }
                    // First word after the cue, skipping articles.
                    let mut pos = start + cue.len();
                    while pos < n && is_stopword(&self.tokens[pos]) {
                        pos += 1;
                    }
                    if pos < n
                        && !covered[pos]
                        && self.is_wrong_candidate(&self.tokens[pos], all_cues)
                    {
                        found.push((pos, slot, self.tokens[pos].clone(), (start, start + cue.len())));
                    }
                }
            }
            for cue in &cues.wrong_after {
                for start in 1..n {
                    if start + cue.len() > n || self.tokens[start..start + cue.len()] != cue[..] {
                        continue;
                    }
                    let pos = start - 1;
                    if !covered[pos] && self.is_wrong_candidate(&self.tokens[pos], all_cues) {
                        found.push((pos, slot, self.tokens[pos].clone(), (start, start + cue.len())));
                    }
                }
            }
        }
        found.sort();
        for (pos, slot, raw, (cue_start, cue_end)) in found {
            let caption = &self.slots[slot].caption;
            let entry = outcome.slots.get_mut(caption).expect("extraction slot");
            if entry.value.is_none() && entry.wrong_or_out_of_domain.is_none() {
                entry.wrong_or_out_of_domain = Some(raw);
                used[pos] = true;
                used[cue_start..cue_end].iter_mut().for_each(|u| *u = true);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn extract(dict: &crate::schema::DomainDictionary, text: &str) -> ExtractionOutcome {
        rule_based_extract(&dict.schema, text)
    }

    fn filled(outcome: &ExtractionOutcome) -> Vec<(String, String)> {
        outcome
            .slots
            .iter()
            .filter_map(|(k, v)| v.value.as_ref().map(|v| (k.clone(), v.clone())))
            .collect()
    }

    fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
        items
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn french_in_the_north() {
        let out = extract(
            &fixtures::restaurant(),
            "a French restaurant in the north end",
        );
        assert_eq!(
            filled(&out),
            pairs(&[("area", "north"), ("food", "french")])
        );
        assert!(out.wrong_entries().is_empty());
    }

    #[test]
    fn canap_is_out_of_domain() {
        let out = extract(
            &fixtures::restaurant(),
            "I am looking for a restaurant that serves canap in the east.",
        );
        assert_eq!(filled(&out), pairs(&[("area", "east")]));
        assert_eq!(out.wrong_entries(), pairs(&[("food", "canap")]));
    }

    #[test]
    fn two_wrong_values_in_schema_order() {
        let out = extract(
            &fixtures::restaurant(),
            "somewhere that serves canap in the downtown area",
        );
        assert_eq!(
            out.wrong_entries(),
            pairs(&[("area", "downtown"), ("food", "canap")])
        );
    }

    #[test]
    fn cheap_in_the_west() {
        let out = extract(&fixtures::restaurant(), "cheap restaurant in the west");
        assert_eq!(
            filled(&out),
            pairs(&[("pricerange", "cheap"), ("area", "west")])
        );
    }

    #[test]
    fn no_slot_content_goes_to_text_part() {
        let out = extract(&fixtures::restaurant(), "somewhere quiet with a nice view");
        assert!(filled(&out).is_empty());
        assert_eq!(
            out.text_part,
            "somewhere quiet nice view".replace("somewhere ", "")
        );
    }

    #[test]
    fn hotel_stars_and_price_ignore_type() {
        let out = extract(
            &fixtures::hotel(),
            "I am looking for a place to stay. The hotel should have a star of 2 and should be in the moderate price range.",
        );
        assert_eq!(
            filled(&out),
            pairs(&[("pricerange", "moderate"), ("stars", "2")])
        );
    }

    #[test]
    fn free_wifi_and_free_parking_are_told_apart() {
        let hotel = fixtures::hotel();
        let out = extract(
            &hotel,
            "I am looking for a place to stay. The hotel should be in the east and should include free wifi.",
        );
        assert_eq!(
            filled(&out),
            pairs(&[("internet", "free"), ("area", "east")])
        );
        let out = extract(
            &hotel,
            "The rating should be 4 stars and I want free parking to be included.",
        );
        assert_eq!(filled(&out), pairs(&[("parking", "free"), ("stars", "4")]));
    }

    #[test]
    fn booking_details() {
        let out = extract(
            &fixtures::hotel(),
            "No, will you just book me something for Wednesday for 1 person for 5 nights?",
        );
        assert_eq!(
            filled(&out),
            pairs(&[
                ("bookday", "wednesday"),
                ("bookpeople", "1"),
                ("bookstay", "5")
            ])
        );
    }

    #[test]
    fn stray_number_word_is_not_a_slot() {
        let out = extract(
            &fixtures::restaurant(),
            "I am interested in the one in the north. Could I have their postcode and address?",
        );
        assert_eq!(filled(&out), pairs(&[("area", "north")]));
    }

    #[test]
    fn train_direction_from_cues() {
        let train = fixtures::train();
        let out = extract(
            &train,
            "Can I get a train from Cambridge to Bishops Stortford?",
        );
        assert_eq!(
            filled(&out),
            pairs(&[
                ("departure", "cambridge"),
                ("destination", "bishops stortford")
            ])
        );
        let out = extract(
            &train,
            "No. I need to depart from Bishops Stortford and go to Cambridge on Thursday after 20:15.",
        );
        assert_eq!(
            filled(&out),
            pairs(&[
                ("departure", "bishops stortford"),
                ("day", "thursday"),
                ("leaveat", "20:15"),
                ("destination", "cambridge"),
            ])
        );
    }

    #[test]
    fn deterministic_and_total() {
        let dict = fixtures::restaurant();
        for text in [
            "",
            "   ",
            "!!!",
            "serves",
            "area",
            "the the the",
            "serves the",
        ] {
            assert_eq!(extract(&dict, text), extract(&dict, text));
        }
    }

    #[test]
    fn extra_vocabulary_for_unconstrained_slot() {
        let dict = fixtures::restaurant();
        let extractor = RuleExtractor::new().with_vocabulary("ref", vec!["abc123".into()]);
        let out = extractor.extract_outcome(&dict.schema, "my reference is ABC123");
        assert_eq!(out.value("ref"), Some("abc123"));
    }
}
