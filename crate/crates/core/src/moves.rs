//! The eleven dialogue moves and the procedures bound to them.
//!
//! Each procedure mutates the information state and/or produces a TOD
//! utterance. Utterances are templates with slot interpolation so that the
//! facts they carry stay testable.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nlu::{
    complete, rule_based_extract, AuditLog, ExtractionOutcome, Extractor, LanguageModel, NluError,
};
use crate::normalize::{normalize_text, tokenize};
use crate::retrieval::{build_user_item_list, filter_entities, Ranker, RetrievalConfig};
use crate::schema::{ConfigError, DomainSchema, EntityRecord};
use crate::state::{InformationState, SlotValue, TriFlag, WrongValue};

#[derive(Debug, Error)]
pub enum MoveError {
    #[error("user utterance is empty")]
    EmptyUtterance,
    #[error("extraction failed: {0}")]
    Nlu(#[from] NluError),
    #[error("move contract violated: {0}")]
    Contract(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("reply classification failed: {0}")]
    Classifier(String),
}

/// The eleven dialogue moves. Serialized under their canonical names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DialogueMove {
    #[serde(rename = "update_user_preferences")]
    UpdateUserPreferences,
    #[serde(rename = "check_is_there_wrong_or_out_of_main_value")]
    CheckIsThereWrongOrOutOfMainValue,
    #[serde(rename = "create_clarifying_question_InputIsWrong-or-Out-of-domain")]
    ClarifyWrongInput,
    #[serde(rename = "create_clarifying_question_QueryoutputIsEmpty_OutputIsRejected")]
    ClarifyEmptyOrRejected,
    #[serde(rename = "Inform_user_there_is_no_entity_in_db")]
    InformNoEntity,
    #[serde(rename = "query_database")]
    QueryDatabase,
    #[serde(rename = "check_the_emptiness_of_query_output")]
    CheckEmptiness,
    #[serde(rename = "check_if_the_user_wants_to_enter_more_constraints")]
    CheckMoreConstraints,
    #[serde(rename = "entity_ranking")]
    EntityRanking,
    #[serde(rename = "check_if_user_rejects_output")]
    CheckRejection,
    #[serde(rename = "end_dialogue")]
    EndDialogue,
}

impl DialogueMove {
    pub const ALL: [DialogueMove; 11] = [
        DialogueMove::UpdateUserPreferences,
        DialogueMove::CheckIsThereWrongOrOutOfMainValue,
        DialogueMove::ClarifyWrongInput,
        DialogueMove::ClarifyEmptyOrRejected,
        DialogueMove::InformNoEntity,
        DialogueMove::QueryDatabase,
        DialogueMove::CheckEmptiness,
        DialogueMove::CheckMoreConstraints,
        DialogueMove::EntityRanking,
        DialogueMove::CheckRejection,
        DialogueMove::EndDialogue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DialogueMove::UpdateUserPreferences => "update_user_preferences",
            DialogueMove::CheckIsThereWrongOrOutOfMainValue => {
                "check_is_there_wrong_or_out_of_main_value"
            }
            DialogueMove::ClarifyWrongInput => {
                "create_clarifying_question_InputIsWrong-or-Out-of-domain"
            }
            DialogueMove::ClarifyEmptyOrRejected => {
                "create_clarifying_question_QueryoutputIsEmpty_OutputIsRejected"
            }
            DialogueMove::InformNoEntity => "Inform_user_there_is_no_entity_in_db",
            DialogueMove::QueryDatabase => "query_database",
            DialogueMove::CheckEmptiness => "check_the_emptiness_of_query_output",
            DialogueMove::CheckMoreConstraints => {
                "check_if_the_user_wants_to_enter_more_constraints"
            }
            DialogueMove::EntityRanking => "entity_ranking",
            DialogueMove::CheckRejection => "check_if_user_rejects_output",
            DialogueMove::EndDialogue => "end_dialogue",
        }
    }

    /// Procedure identifiers bound to the move; the first is the main one and
    /// carries the move's name.
    pub fn procedures(self) -> &'static [&'static str] {
        match self {
            DialogueMove::UpdateUserPreferences => &[
                "update_user_preferences",
                "extract_preferences",
                "accumulate_text_part",
            ],
            DialogueMove::CheckIsThereWrongOrOutOfMainValue => {
                &["check_is_there_wrong_or_out_of_main_value"]
            }
            DialogueMove::ClarifyWrongInput => &[
                "create_clarifying_question_InputIsWrong-or-Out-of-domain",
                "store_utterance_to_update_predefined_slot",
            ],
            DialogueMove::ClarifyEmptyOrRejected => &[
                "create_clarifying_question_QueryoutputIsEmpty_OutputIsRejected",
                "build_user_item_list",
                "store_utterance_to_update_predefined_slot",
            ],
            DialogueMove::InformNoEntity => &["Inform_user_there_is_no_entity_in_db"],
            DialogueMove::QueryDatabase => &["query_database", "filter_entities"],
            DialogueMove::CheckEmptiness => &["check_the_emptiness_of_query_output"],
            DialogueMove::CheckMoreConstraints => &[
                "check_if_the_user_wants_to_enter_more_constraints",
                "prompt_more_constraints",
                "classify_more_constraints",
            ],
            DialogueMove::EntityRanking => &["entity_ranking", "render_entity_table"],
            DialogueMove::CheckRejection => &["check_if_user_rejects_output"],
            DialogueMove::EndDialogue => &["end_dialogue"],
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

impl fmt::Display for DialogueMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What a procedure produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoveOutcome {
    pub tod_utterance: Option<String>,
    pub awaiting_user: bool,
    /// Changed components with their new values.
    pub state_deltas: Vec<(String, serde_json::Value)>,
}

fn snapshot_value(state: &InformationState) -> serde_json::Map<String, serde_json::Value> {
    match serde_json::to_value(state.snapshot()) {
        Ok(serde_json::Value::Object(map)) => map,
        _ => unreachable!("snapshot serializes to an object"),
    }
}

/// Runs `f` against the state and records which components changed.
fn tracked<T>(
    state: &mut InformationState,
    f: impl FnOnce(&mut InformationState) -> Result<(T, Option<String>, bool), MoveError>,
) -> Result<(T, MoveOutcome), MoveError> {
    let before = snapshot_value(state);
    let (value, tod_utterance, awaiting_user) = f(state)?;
    let after = snapshot_value(state);
    let state_deltas = after
        .into_iter()
        .filter(|(k, v)| before.get(k) != Some(v))
        .collect();
    debug_assert!(!awaiting_user || tod_utterance.is_some());
    Ok((
        value,
        MoveOutcome {
            tod_utterance,
            awaiting_user,
            state_deltas,
        },
    ))
}

fn preferences_phrase(state: &InformationState) -> String {
    let slots = state.describe_preferences();
    let text = state.text_part.trim();
    match (slots.is_empty(), text.is_empty()) {
        (true, true) => "no preferences yet".to_string(),
        (false, true) => slots,
        (true, false) => format!("other wishes: {text}"),
        (false, false) => format!("{slots}; other wishes: {text}"),
    }
}

/// Extracts preferences from `utterance` and writes them into the state.
/// In-domain values land in the slot map; a slot reported as wrong or out
/// of domain is reset to none; the residual text is prepended to text_part.
pub fn update_user_preferences(
    state: &mut InformationState,
    utterance: &str,
    extractor: &dyn Extractor,
    audit: &AuditLog,
) -> Result<(ExtractionOutcome, MoveOutcome), MoveError> {
    if utterance.trim().is_empty() {
        return Err(MoveError::EmptyUtterance);
    }
    let dictionary = state.extracted_information.clone();
    let schema = &dictionary.schema;
    // Extraction happens before any mutation: a backend failure leaves the
    // state untouched.
    let outcome = extractor.extract(schema, utterance, audit)?.conform(schema);
    tracked(state, |state| {
        for (caption, extraction) in &outcome.slots {
            let Some(spec) = schema.slot(caption) else {
                continue;
            };
            if let Some(value) = &extraction.value {
                if spec.permits(value) {
                    state
                        .predefined_slots
                        .insert(caption.clone(), Some(SlotValue::new(value, spec)));
                }
            } else if extraction.wrong_or_out_of_domain.is_some() {
                state.predefined_slots.insert(caption.clone(), None);
            }
        }
        let fresh = outcome.text_part.trim();
        if !fresh.is_empty() {
            state.text_part = format!("{fresh} {}", state.text_part).trim().to_string();
        }
        Ok((outcome.clone(), None, false))
    })
}

/// Copies the wrong/out-of-domain entries of `outcome` into the state, in
/// schema order. Returns whether there were any.
pub fn check_is_there_wrong_or_out_of_main_value(
    state: &mut InformationState,
    outcome: &ExtractionOutcome,
) -> (bool, MoveOutcome) {
    let schema = state.extracted_information.schema.clone();
    let mut entries = outcome.wrong_entries();
    entries.sort_by_key(|(caption, _)| schema.position(caption).unwrap_or(usize::MAX));
    tracked(state, |state| {
        state.wrong_or_out_of_domain_values_list = entries
            .into_iter()
            .map(|(slot, raw)| WrongValue { slot, raw })
            .collect();
        let wrong = !state.wrong_or_out_of_domain_values_list.is_empty();
        state.there_is_wrong_or_out_of_domain_value = wrong.into();
        Ok((wrong, None, false))
    })
    .expect("infallible")
}

/// Asks the user to restate the values that are wrong or out of domain.
pub fn create_clarifying_question_input_is_wrong_or_out_of_domain(
    state: &mut InformationState,
) -> Result<(String, MoveOutcome), MoveError> {
    if state.wrong_or_out_of_domain_values_list.is_empty() {
        return Err(MoveError::Contract(
            "no wrong or out-of-domain value to clarify".into(),
        ));
    }
    let schema = state.extracted_information.schema.clone();
    let mut lines = vec!["I could not use some of what you said:".to_string()];
    for wrong in &state.wrong_or_out_of_domain_values_list {
        let mut line = format!("- \"{}\" is not a known {}", wrong.raw, wrong.slot);
        if let Some(spec) = schema.slot(&wrong.slot) {
            let options = spec.normalized_permitted();
            if !options.is_empty() {
                let shown: Vec<&str> = options.iter().take(8).map(String::as_str).collect();
                let more = if options.len() > shown.len() {
                    ", ..."
                } else {
                    ""
                };
                line.push_str(&format!(" (options: {}{more})", shown.join(", ")));
            }
        }
        lines.push(line);
    }
    lines.push(
        "Unless you give a different value, these will be treated as none. What would you like instead?"
            .to_string(),
    );
    let text = lines.join("\n");
    tracked(state, |state| {
        state.utterance_to_update_predefined_slot = text.clone();
        Ok((text.clone(), Some(text.clone()), true))
    })
}

/// Replaces the query output with every entity matching the non-none
/// filterable slots.
pub fn query_database(
    state: &mut InformationState,
) -> Result<(Vec<EntityRecord>, MoveOutcome), MoveError> {
    if state.there_is_wrong_or_out_of_domain_value.is_true() {
        return Err(MoveError::Contract(
            "cannot query while wrong values are pending".into(),
        ));
    }
    let constraints = state.filterable_constraints();
    let rows = filter_entities(state.dictionary(), constraints.iter())?;
    tracked(state, |state| {
        state.db_query_output_list = rows.clone();
        Ok((rows, None, false))
    })
}

pub fn check_the_emptiness_of_query_output(state: &mut InformationState) -> (bool, MoveOutcome) {
    tracked(state, |state| {
        let empty = state.db_query_output_list.is_empty();
        state.query_output_list_is_empty = empty.into();
        Ok((empty, None, false))
    })
    .expect("infallible")
}

pub fn inform_user_there_is_no_entity_in_db(
    state: &mut InformationState,
) -> Result<(String, MoveOutcome), MoveError> {
    if !state.query_output_list_is_empty.is_true() {
        return Err(MoveError::Contract(
            "no-entity message requires an empty query output".into(),
        ));
    }
    let text = format!(
        "Sorry, there is no {} matching your preferences ({}).",
        state.domain_caption,
        preferences_phrase(state)
    );
    tracked(state, |state| {
        state.user_is_informed_there_is_no_entity_in_db = TriFlag::True;
        Ok((text.clone(), Some(text.clone()), false))
    })
}

/// Offers nearby slot configurations that the database can satisfy, or a
/// plain invitation to change preferences when there are none.
pub fn create_clarifying_question_queryoutput_is_empty_output_is_rejected(
    state: &mut InformationState,
    config: RetrievalConfig,
) -> Result<(String, MoveOutcome), MoveError> {
    if !state.query_output_list_is_empty.is_true() && !state.user_rejects_output.is_true() {
        return Err(MoveError::Contract(
            "clarification requires an empty or rejected query output".into(),
        ));
    }
    let constraints = state.filterable_constraints();
    let items = build_user_item_list(state.dictionary(), &constraints, config)?;
    let mut lines = Vec::new();
    if items.is_empty() {
        lines.push("Would you like to change any of your preferences?".to_string());
    } else {
        lines.push("These alternatives have matches:".to_string());
        for (i, item) in items.iter().enumerate() {
            let configuration = item
                .configuration
                .iter()
                .map(|(k, v)| format!("{k}: {v}"))
                .collect::<Vec<_>>()
                .join(", ");
            let plural = if item.support_count == 1 { "" } else { "es" };
            lines.push(format!(
                "{}. {configuration} ({} match{plural})",
                i + 1,
                item.support_count
            ));
        }
        lines.push(
            "Would you like one of these, or another change to your preferences?".to_string(),
        );
    }
    let text = lines.join("\n");
    tracked(state, |state| {
        state.utterance_to_update_predefined_slot = text.clone();
        Ok((text.clone(), Some(text.clone()), true))
    })
}

/// Restates the preferences and asks whether there is anything to add.
pub fn prompt_more_constraints(state: &mut InformationState) -> (String, MoveOutcome) {
    let text = format!(
        "I have {} matching your preferences ({}). Do you have any other constraints to add?",
        count_phrase(state.db_query_output_list.len(), &state.domain_caption),
        preferences_phrase(state)
    );
    tracked(state, |_| Ok((text.clone(), Some(text.clone()), true))).expect("infallible")
}

fn count_phrase(n: usize, domain: &str) -> String {
    if n == 1 {
        format!("1 {domain} option")
    } else {
        format!("{n} {domain} options")
    }
}

/// Classifies the reply to the more-constraints prompt. When the reply adds
/// constraints it is stored verbatim for the next update phase.
pub fn classify_more_constraints(
    state: &mut InformationState,
    reply: &str,
    classifier: &dyn ReplyClassifier,
    audit: &AuditLog,
) -> Result<((bool, String), MoveOutcome), MoveError> {
    let schema = state.extracted_information.schema.clone();
    let has_more = classifier.wants_more_constraints(&schema, reply, audit)?;
    tracked(state, |state| {
        if has_more {
            state.user_other_constraints = reply.trim().to_string();
            state.wrongness_within_other_constraints_checked = TriFlag::Unset;
            state.utterance_to_update_predefined_slot =
                format!("Updating your preferences with: {}", reply.trim());
            Ok(((true, reply.trim().to_string()), None, false))
        } else {
            Ok(((false, String::new()), None, false))
        }
    })
}

/// Orders the query output by the free-text part and presents every row in
/// full, then asks whether the user accepts.
pub fn entity_ranking(
    state: &mut InformationState,
    ranker: &dyn Ranker,
) -> Result<((Vec<EntityRecord>, String), MoveOutcome), MoveError> {
    if state.db_query_output_list.is_empty() {
        return Err(MoveError::Contract("nothing to rank".into()));
    }
    let input = state.db_query_output_list.clone();
    let ranked = match ranker.rank(&input, &state.text_part) {
        Ok(ranked) if is_permutation(&input, &ranked) => ranked,
        Ok(_) => {
            log::warn!("ranker output is not a permutation of its input; keeping query order");
            input.clone()
        }
        Err(e) => {
            log::warn!("ranker failed ({e}); keeping query order");
            input.clone()
        }
    };
    let table = render_entity_table(&state.dictionary().database.columns, &ranked);
    let text = format!(
        "Here {} {}:\n{table}\nPlease indicate if you would like to reject these options.",
        if ranked.len() == 1 { "is" } else { "are" },
        count_phrase(ranked.len(), &state.domain_caption),
    );
    tracked(state, |state| {
        state.db_query_output_list = ranked.clone();
        state.user_is_informed_of_db_output = TriFlag::True;
        Ok(((ranked.clone(), table.clone()), Some(text.clone()), true))
    })
}

fn is_permutation(a: &[EntityRecord], b: &[EntityRecord]) -> bool {
    let mut x: Vec<usize> = a.iter().map(|e| e.index).collect();
    let mut y: Vec<usize> = b.iter().map(|e| e.index).collect();
    x.sort_unstable();
    y.sort_unstable();
    x == y && a.len() == b.len()
}

pub fn check_if_user_rejects_output(
    state: &mut InformationState,
    reply: &str,
    classifier: &dyn ReplyClassifier,
    audit: &AuditLog,
) -> Result<(bool, MoveOutcome), MoveError> {
    if !state.user_is_informed_of_db_output.is_true() {
        return Err(MoveError::Contract(
            "rejection check before any output was presented".into(),
        ));
    }
    let rejects = classifier.rejects_output(reply, audit)?;
    tracked(state, |state| {
        state.user_rejects_output = rejects.into();
        Ok((rejects, None, false))
    })
}

/// Farewell plus the final preferences. Idempotent.
pub fn end_dialogue(state: &mut InformationState) -> Result<(String, MoveOutcome), MoveError> {
    if !state.dialogue_is_completed.is_true() && !state.user_is_informed_of_db_output.is_true() {
        return Err(MoveError::Contract(
            "cannot end the dialogue before presenting an output".into(),
        ));
    }
    let text = format!(
        "Thank you, this is the end of our conversation. Goodbye!\nFinal preferences: {}",
        preferences_phrase(state)
    );
    tracked(state, |state| {
        state.dialogue_is_completed = TriFlag::True;
        Ok((text.clone(), Some(text.clone()), false))
    })
}

const TABLE_SEPARATOR: &str = " | ";

fn cell(text: &str) -> String {
    text.replace(['|', '\n', '\r'], " ").trim().to_string()
}

/// Pipe-delimited table: one header row of column captions, one row per
/// entity, columns in database order.
pub fn render_entity_table(columns: &[String], entities: &[EntityRecord]) -> String {
    let mut lines = vec![columns
        .iter()
        .map(|c| cell(c))
        .collect::<Vec<_>>()
        .join(TABLE_SEPARATOR)];
    for entity in entities {
        lines.push(
            columns
                .iter()
                .map(|c| cell(entity.get(c).unwrap_or("")))
                .collect::<Vec<_>>()
                .join(TABLE_SEPARATOR),
        );
    }
    lines.join("\n")
}

/// Parsed form of a rendered table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Inverse of [`render_entity_table`].
pub fn parse_entity_table(text: &str) -> Option<EntityTable> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let split =
        |line: &str| -> Vec<String> { line.split('|').map(|c| c.trim().to_string()).collect() };
    let header = split(lines.next()?);
    let rows = lines.map(split).collect();
    Some(EntityTable { header, rows })
}

/// Decides the two yes/no questions the engine asks the user.
pub trait ReplyClassifier: Send + Sync {
    /// Does the reply to the more-constraints prompt carry new constraints?
    fn wants_more_constraints(
        &self,
        schema: &DomainSchema,
        reply: &str,
        audit: &AuditLog,
    ) -> Result<bool, MoveError>;

    /// Does the reply to the entity table reject the presented options?
    fn rejects_output(&self, reply: &str, audit: &AuditLog) -> Result<bool, MoveError>;
}

const CLOSING_PHRASES: &[&str] = &[
    "that's all",
    "that is all",
    "that will be all",
    "that'll be all",
    "that would be all",
    "don't have a preference",
    "do not have a preference",
    "no preference",
    "no thanks",
    "no thank you",
    "nothing else",
    "nothing more",
    "no other",
    "no more",
    "i'm good",
    "i am good",
    "that's it",
    "that is it",
    "all set",
    "i'm all set",
    "no, thanks",
    "that's everything",
    "not really",
    "none",
];

const REJECTION_PHRASES: &[&str] = &[
    "reject",
    "none of these",
    "none of them",
    "none of those",
    "don't like",
    "do not like",
    "not what i",
    "something else",
    "other options",
    "another option",
    "neither",
    "not interested",
    "no good",
    "don't want",
    "do not want",
    "not these",
    "not those",
    "different one",
];

/// Keyword and negation tables; deterministic.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleClassifier;

fn flatten(text: &str) -> String {
    // Keep apostrophes so that "don't" stays one word.
    normalize_text(&text.replace(['\u{2019}', '\u{2018}'], "'"))
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '\'' {
                c
            } else {
                ' '
            }
        })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn contains_phrase(text: &str, phrase: &str) -> bool {
    let padded = format!(" {text} ");
    padded.contains(&format!(" {} ", flatten(phrase)))
}

impl RuleClassifier {
    pub fn more_constraints(schema: &DomainSchema, reply: &str) -> bool {
        let outcome = rule_based_extract(schema, reply);
        if outcome.has_content() {
            return true;
        }
        let text = flatten(reply);
        if CLOSING_PHRASES.iter().any(|p| contains_phrase(&text, p)) {
            return false;
        }
        !outcome.text_part.trim().is_empty()
    }

    pub fn rejection(reply: &str) -> bool {
        let text = flatten(reply);
        if REJECTION_PHRASES.iter().any(|p| contains_phrase(&text, p)) {
            return true;
        }
        let tokens = tokenize(&text);
        matches!(tokens.first().map(String::as_str), Some("no" | "nope")) && tokens.len() <= 2
    }
}

impl ReplyClassifier for RuleClassifier {
    fn wants_more_constraints(
        &self,
        schema: &DomainSchema,
        reply: &str,
        _audit: &AuditLog,
    ) -> Result<bool, MoveError> {
        Ok(Self::more_constraints(schema, reply))
    }

    fn rejects_output(&self, reply: &str, _audit: &AuditLog) -> Result<bool, MoveError> {
        Ok(Self::rejection(reply))
    }
}

/// Asks a language model for a yes/no verdict.
#[derive(Clone)]
pub struct LlmClassifier {
    backend: std::sync::Arc<dyn LanguageModel>,
}

impl LlmClassifier {
    pub fn new(backend: std::sync::Arc<dyn LanguageModel>) -> Self {
        Self { backend }
    }

    fn ask(&self, prompt: &str, audit: &AuditLog) -> Result<bool, MoveError> {
        let reply = complete(self.backend.as_ref(), prompt, audit)
            .map_err(|e| MoveError::Classifier(e.to_string()))?;
        parse_yes_no(&reply)
            .ok_or_else(|| MoveError::Classifier(format!("expected yes or no, got {reply:?}")))
    }
}

/// First yes/no word of a model reply.
pub fn parse_yes_no(reply: &str) -> Option<bool> {
    reply
        .split(|c: char| !c.is_alphabetic())
        .map(str::to_lowercase)
        .find_map(|w| match w.as_str() {
            "yes" | "true" => Some(true),
            "no" | "false" => Some(false),
            _ => None,
        })
}

impl ReplyClassifier for LlmClassifier {
    fn wants_more_constraints(
        &self,
        schema: &DomainSchema,
        reply: &str,
        audit: &AuditLog,
    ) -> Result<bool, MoveError> {
        let prompt = format!(
            "A user is searching for a {domain}. The assistant asked whether the user has any other \
             constraints besides the ones already given. The user replied:\n\"{reply}\"\n\
             Does the reply state any new constraint or preference about the {domain} or the booking? \
             Answer with only yes or no.",
            domain = schema.domain
        );
        self.ask(&prompt, audit)
    }

    fn rejects_output(&self, reply: &str, audit: &AuditLog) -> Result<bool, MoveError> {
        let prompt = format!(
            "The assistant showed the user a table of options and asked whether the user would like \
             to reject them. The user replied:\n\"{reply}\"\n\
             Does the user reject the options shown? Answer with only yes or no."
        );
        self.ask(&prompt, audit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::nlu::{MockBackend, RuleExtractor};
    use crate::retrieval::LexicalRanker;
    use std::sync::Arc;

    fn restaurant_state() -> InformationState {
        InformationState::new(fixtures::restaurant())
    }

    fn set(state: &mut InformationState, caption: &str, value: &str) {
        let spec = state.dictionary().schema.slot(caption).unwrap().clone();
        state
            .predefined_slots
            .insert(caption.into(), Some(SlotValue::new(value, &spec)));
    }

    #[test]
    fn move_names_are_canonical() {
        let names: Vec<&str> = DialogueMove::ALL.iter().map(|m| m.name()).collect();
        assert_eq!(
            names,
            vec![
                "update_user_preferences",
                "check_is_there_wrong_or_out_of_main_value",
                "create_clarifying_question_InputIsWrong-or-Out-of-domain",
                "create_clarifying_question_QueryoutputIsEmpty_OutputIsRejected",
                "Inform_user_there_is_no_entity_in_db",
                "query_database",
                "check_the_emptiness_of_query_output",
                "check_if_the_user_wants_to_enter_more_constraints",
                "entity_ranking",
                "check_if_user_rejects_output",
                "end_dialogue",
            ]
        );
        for m in DialogueMove::ALL {
            assert!(!m.procedures().is_empty());
            assert_eq!(m.procedures()[0], m.name());
            assert_eq!(
                serde_json::to_string(&m).unwrap(),
                format!("\"{}\"", m.name())
            );
            assert_eq!(DialogueMove::from_name(m.name()), Some(m));
        }
    }

    #[test]
    fn update_writes_in_domain_values() {
        let mut state = restaurant_state();
        let (outcome, out) = update_user_preferences(
            &mut state,
            "Can you suggest a French restaurant in the north end?",
            &RuleExtractor::new(),
            &AuditLog::new(),
        )
        .unwrap();
        assert_eq!(outcome.wrong_entries(), vec![]);
        assert_eq!(
            state.filled_slots(),
            vec![
                ("area".into(), "north".into()),
                ("food".into(), "french".into())
            ]
        );
        assert!(out
            .state_deltas
            .iter()
            .any(|(k, _)| k == "predefined_slots"));
        assert!(out.tod_utterance.is_none());
    }

    #[test]
    fn empty_utterance_leaves_state_unchanged() {
        let mut state = restaurant_state();
        let before = state.clone();
        let err =
            update_user_preferences(&mut state, "  ", &RuleExtractor::new(), &AuditLog::new())
                .unwrap_err();
        assert!(matches!(err, MoveError::EmptyUtterance));
        assert_eq!(state, before);
    }

    #[test]
    fn backend_failure_leaves_state_unchanged() {
        let mut state = restaurant_state();
        let before = state.clone();
        let extractor = crate::nlu::LlmExtractor::new(Arc::new(MockBackend::scripted(vec![Err(
            crate::nlu::BackendError::Auth(401),
        )])));
        let err =
            update_user_preferences(&mut state, "cheap", &extractor, &AuditLog::new()).unwrap_err();
        assert!(matches!(err, MoveError::Nlu(_)));
        assert_eq!(state, before);
    }

    #[test]
    fn canap_is_recorded_as_wrong_and_never_stored() {
        let mut state = restaurant_state();
        let (outcome, _) = update_user_preferences(
            &mut state,
            "I am looking for a restaurant that serves canap in the east.",
            &RuleExtractor::new(),
            &AuditLog::new(),
        )
        .unwrap();
        assert_eq!(state.slot_value("area").unwrap().normalized, "east");
        assert!(state.slot_value("food").is_none());
        let (wrong, _) = check_is_there_wrong_or_out_of_main_value(&mut state, &outcome);
        assert!(wrong);
        assert_eq!(
            state.wrong_or_out_of_domain_values_list,
            vec![WrongValue {
                slot: "food".into(),
                raw: "canap".into()
            }]
        );
        assert_eq!(state.there_is_wrong_or_out_of_domain_value, TriFlag::True);
    }

    #[test]
    fn text_part_is_prepended() {
        let mut state = restaurant_state();
        state.text_part = "quiet".into();
        update_user_preferences(
            &mut state,
            "with outdoor seating",
            &RuleExtractor::new(),
            &AuditLog::new(),
        )
        .unwrap();
        assert_eq!(state.text_part, "outdoor seating quiet");
    }

    #[test]
    fn clean_outcome_has_no_wrong_values() {
        let mut state = restaurant_state();
        let outcome = ExtractionOutcome::empty(&state.dictionary().schema.clone());
        let (wrong, _) = check_is_there_wrong_or_out_of_main_value(&mut state, &outcome);
        assert!(!wrong);
        assert!(state.wrong_or_out_of_domain_values_list.is_empty());
        assert_eq!(state.there_is_wrong_or_out_of_domain_value, TriFlag::False);
    }

    #[test]
    fn two_wrong_entries_follow_schema_order() {
        let mut state = restaurant_state();
        let schema = state.dictionary().schema.clone();
        let mut outcome = ExtractionOutcome::empty(&schema);
        outcome
            .slots
            .get_mut("food")
            .unwrap()
            .wrong_or_out_of_domain = Some("canap".into());
        outcome
            .slots
            .get_mut("area")
            .unwrap()
            .wrong_or_out_of_domain = Some("downtown".into());
        outcome
            .slots
            .move_index(outcome.slots.get_index_of("food").unwrap(), 0);
        check_is_there_wrong_or_out_of_main_value(&mut state, &outcome);
        let slots: Vec<&str> = state
            .wrong_or_out_of_domain_values_list
            .iter()
            .map(|w| w.slot.as_str())
            .collect();
        assert_eq!(slots, vec!["area", "food"]);
        let (text, out) =
            create_clarifying_question_input_is_wrong_or_out_of_domain(&mut state).unwrap();
        assert!(text.contains("canap") && text.contains("downtown"));
        assert!(text.contains("treated as none"));
        assert!(out.awaiting_user);
        assert_eq!(state.utterance_to_update_predefined_slot, text);
    }

    #[test]
    fn clarifying_wrong_input_needs_entries() {
        let mut state = restaurant_state();
        assert!(matches!(
            create_clarifying_question_input_is_wrong_or_out_of_domain(&mut state),
            Err(MoveError::Contract(_))
        ));
    }

    #[test]
    fn query_without_constraints_returns_everything() {
        let mut state = restaurant_state();
        let (rows, _) = query_database(&mut state).unwrap();
        assert_eq!(rows.len(), state.dictionary().database.len());
    }

    #[test]
    fn moderate_italian_is_empty_and_suggestions_follow() {
        let mut state = InformationState::new(fixtures::italian_gap_restaurants());
        set(&mut state, "food", "italian");
        set(&mut state, "pricerange", "moderate");
        query_database(&mut state).unwrap();
        let (empty, _) = check_the_emptiness_of_query_output(&mut state);
        assert!(empty);
        let (inform, _) = inform_user_there_is_no_entity_in_db(&mut state).unwrap();
        assert!(inform.contains("italian") && inform.contains("moderate"));
        assert_eq!(
            state.user_is_informed_there_is_no_entity_in_db,
            TriFlag::True
        );
        let (question, out) = create_clarifying_question_queryoutput_is_empty_output_is_rejected(
            &mut state,
            RetrievalConfig::default(),
        )
        .unwrap();
        assert!(
            question.contains("1. pricerange: cheap, food: italian"),
            "{question}"
        );
        assert!(
            question.contains("2. pricerange: moderate, food: european"),
            "{question}"
        );
        assert!(out.awaiting_user);
    }

    #[test]
    fn no_suggestions_gives_plain_question() {
        let mut state = restaurant_state();
        state.query_output_list_is_empty = TriFlag::True;
        let (question, _) = create_clarifying_question_queryoutput_is_empty_output_is_rejected(
            &mut state,
            RetrievalConfig::default(),
        )
        .unwrap();
        assert_eq!(
            question,
            "Would you like to change any of your preferences?"
        );
    }

    #[test]
    fn inform_requires_empty_output() {
        let mut state = restaurant_state();
        assert!(inform_user_there_is_no_entity_in_db(&mut state).is_err());
        state.query_output_list_is_empty = TriFlag::True;
        state.text_part = "outdoor seating".into();
        let (text, _) = inform_user_there_is_no_entity_in_db(&mut state).unwrap();
        assert!(text.contains("outdoor seating"));
    }

    #[test]
    fn ranking_is_a_permutation_and_renders_full_rows() {
        let dict = fixtures::hotel();
        let mut state = InformationState::new(dict.clone());
        set(&mut state, "pricerange", "moderate");
        set(&mut state, "stars", "2");
        query_database(&mut state).unwrap();
        let ((ranked, table), out) = entity_ranking(&mut state, &LexicalRanker).unwrap();
        let names: Vec<&str> = ranked.iter().map(|e| e.get("name").unwrap()).collect();
        assert_eq!(names, vec!["ashley hotel", "lovell lodge"]);
        let parsed = parse_entity_table(&table).unwrap();
        assert_eq!(parsed.header, dict.database.columns);
        assert_eq!(parsed.rows.len(), 2);
        assert!(out.tod_utterance.unwrap().contains("reject"));
        assert_eq!(state.user_is_informed_of_db_output, TriFlag::True);
    }

    #[test]
    fn failing_ranker_falls_back_to_query_order() {
        let mut state = InformationState::new(fixtures::hotel());
        set(&mut state, "area", "east");
        query_database(&mut state).unwrap();
        let before = state.db_query_output_list.clone();
        let ranker = crate::retrieval::ScoringRanker::new(|_: &str, _: &[String]| {
            Err(crate::retrieval::RankError::Backend("down".into()))
        });
        let ((ranked, _), _) = entity_ranking(&mut state, &ranker).unwrap();
        assert_eq!(ranked, before);
    }

    #[test]
    fn end_dialogue_is_idempotent() {
        let mut state = restaurant_state();
        assert!(end_dialogue(&mut state).is_err());
        state.user_is_informed_of_db_output = TriFlag::True;
        set(&mut state, "area", "north");
        let (first, out) = end_dialogue(&mut state).unwrap();
        assert!(!out.state_deltas.is_empty());
        let (second, out) = end_dialogue(&mut state).unwrap();
        assert_eq!(first, second);
        assert!(out.state_deltas.is_empty());
        assert!(first.contains("end of our conversation"));
        assert!(first.contains("area: north"));
    }

    #[test]
    fn table_round_trips() {
        let dict = fixtures::attraction();
        let rows = &dict.database.rows[..3];
        let table = render_entity_table(&dict.database.columns, rows);
        let parsed = parse_entity_table(&table).unwrap();
        assert_eq!(parsed.header, dict.database.columns);
        for (row, entity) in parsed.rows.iter().zip(rows) {
            let expected: Vec<String> = entity.values.values().cloned().collect();
            assert_eq!(row, &expected);
        }
    }

    #[test]
    fn yes_no_parsing() {
        assert_eq!(parse_yes_no("Yes."), Some(true));
        assert_eq!(parse_yes_no("  no, the user is done"), Some(false));
        assert_eq!(parse_yes_no("maybe"), None);
    }

    #[test]
    fn llm_classifier_uses_backend_answer() {
        let backend = Arc::new(MockBackend::scripted(vec![
            Ok("Yes".into()),
            Ok("No".into()),
        ]));
        let classifier = LlmClassifier::new(backend);
        let schema = fixtures::hotel().schema.clone();
        let audit = AuditLog::new();
        assert!(classifier
            .wants_more_constraints(&schema, "also parking", &audit)
            .unwrap());
        assert!(!classifier.rejects_output("fine", &audit).unwrap());
        assert_eq!(audit.len(), 2);
        let bad = LlmClassifier::new(Arc::new(MockBackend::fixed("perhaps")));
        assert!(matches!(
            bad.rejects_output("x", &audit),
            Err(MoveError::Classifier(_))
        ));
    }
}
