//! Scripted replay of annotated conversations and the inform / success /
//! updated_combined metrics, plus re-scoring of external prediction files.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{slot_caption, RawConversation};
use crate::moves::parse_entity_table;
use crate::normalize::normalize_text;
use crate::retrieval::filter_entities;
use crate::schema::{DomainDictionary, EntityRecord};
use crate::strategy::{run_scripted, Engine, Session, TranscriptEntry};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("conversation {id}: {reason}")]
    Annotation { id: String, reason: String },
    #[error("nothing to summarize")]
    EmptyReportSet,
    #[error("malformed prediction file: {0}")]
    Predictions(String),
    #[error("{count} {what} out of {conversations} conversations")]
    Counts {
        what: &'static str,
        count: usize,
        conversations: usize,
    },
}

/// Goal value that matches anything, including an absent slot.
pub const DONTCARE: &str = "dontcare";

/// How extracted slots are compared with the labeled goal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InformMode {
    /// Slots present in both maps must agree.
    #[default]
    NoContradiction,
    /// Additionally, every goal slot the engine can extract must have been
    /// extracted.
    Strict,
}

#[derive(Debug, Clone, Default)]
pub struct ReplayOptions {
    pub mode: InformMode,
    /// Per-conversation goal overrides for known annotation defects.
    pub corrections: BTreeMap<String, IndexMap<String, String>>,
}

fn normalize_for(dict: Option<&DomainDictionary>, caption: &str, value: &str) -> String {
    match dict.and_then(|d| d.schema.slot(caption)) {
        Some(spec) => spec.normalize(value),
        None => normalize_text(value),
    }
}

fn normalize_map(
    dict: Option<&DomainDictionary>,
    map: &IndexMap<String, String>,
) -> IndexMap<String, String> {
    map.iter()
        .map(|(k, v)| (k.clone(), normalize_for(dict, k, v)))
        .collect()
}

/// The annotated state at the `consumed`-th user turn (1-based), with keys
/// turned into slot captions and values normalized.
pub fn labeled_goal(
    conversation: &RawConversation,
    consumed: usize,
    dict: Option<&DomainDictionary>,
) -> Result<IndexMap<String, String>, EvalError> {
    let fail = |reason: String| EvalError::Annotation {
        id: conversation.dialogue_id.clone(),
        reason,
    };
    let user_turns: Vec<_> = conversation.user_turns().collect();
    if consumed == 0 || consumed > user_turns.len() {
        return Err(fail(format!(
            "consumed count {consumed} outside 1..={}",
            user_turns.len()
        )));
    }
    let domain = conversation
        .single_domain()
        .ok_or_else(|| fail("not a single-domain conversation".into()))?;
    let turn = user_turns[consumed - 1];
    let frame = turn
        .frame(&domain)
        .ok_or_else(|| fail(format!("user turn {consumed} has no {domain} frame")))?;
    let mut goal = IndexMap::new();
    for (key, values) in &frame.state.slot_values {
        let caption = slot_caption(&domain, key);
        if let Some(value) = values.first() {
            goal.insert(caption.clone(), normalize_for(dict, &caption, value));
        }
    }
    Ok(goal)
}

/// True iff no slot present in both maps disagrees (dontcare goals match
/// anything). In strict mode every non-dontcare goal slot must also be
/// present in `extracted`.
pub fn no_contradiction(
    extracted: &IndexMap<String, String>,
    goal: &IndexMap<String, String>,
    mode: InformMode,
) -> bool {
    goal.iter().all(|(slot, wanted)| {
        if wanted == DONTCARE {
            return true;
        }
        match extracted.get(slot) {
            Some(got) => got == wanted,
            None => mode == InformMode::NoContradiction,
        }
    })
}

/// Inform: the extracted slots do not contradict the goal, and every
/// presented entity satisfies the extracted filterable slots.
pub fn inform_verdict(
    dict: &DomainDictionary,
    extracted: &IndexMap<String, String>,
    goal: &IndexMap<String, String>,
    presented: &[EntityRecord],
    mode: InformMode,
) -> bool {
    if presented.is_empty() {
        return false;
    }
    let extracted = normalize_map(Some(dict), extracted);
    let mut goal = normalize_map(Some(dict), goal);
    if mode == InformMode::Strict {
        // Only slots the engine could possibly extract take part.
        goal.retain(|k, _| dict.schema.slot(k).is_some() && !dict.schema.is_extraction_skipped(k));
    }
    if !no_contradiction(&extracted, &goal, mode) {
        return false;
    }
    let filterable: IndexMap<String, String> = extracted
        .into_iter()
        .filter(|(k, _)| dict.schema.slot(k).is_some_and(|s| s.filterable))
        .collect();
    let Ok(matching) = filter_entities(dict, filterable.iter()) else {
        return false;
    };
    let allowed: BTreeSet<usize> = matching.iter().map(|e| e.index).collect();
    presented.iter().all(|e| allowed.contains(&e.index))
}

/// Success: informed, and the presented table carries every database column
/// for every presented entity.
pub fn success_verdict(
    dict: &DomainDictionary,
    informed: bool,
    table: Option<&str>,
    presented: &[EntityRecord],
) -> bool {
    if !informed || presented.is_empty() {
        return false;
    }
    let Some(parsed) = table.and_then(parse_entity_table) else {
        return false;
    };
    if parsed.header != dict.database.columns || parsed.rows.len() != presented.len() {
        return false;
    }
    parsed.rows.iter().zip(presented).all(|(row, entity)| {
        row.len() == dict.database.columns.len()
            && dict
                .database
                .columns
                .iter()
                .zip(row)
                .all(|(column, cell)| entity.get(column).map(str::trim) == Some(cell.as_str()))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub conversation_id: String,
    pub domain: String,
    pub consumed_count: usize,
    pub user_turns: usize,
    pub completed: bool,
    pub extracted_slots: IndexMap<String, String>,
    pub labeled_goal: IndexMap<String, String>,
    pub informed: bool,
    pub succeeded: bool,
    pub presented: Vec<String>,
    pub transcript: Vec<TranscriptEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReplayReport {
    fn failed(conversation: &RawConversation, domain: String, error: String) -> Self {
        Self {
            conversation_id: conversation.dialogue_id.clone(),
            domain,
            consumed_count: 0,
            user_turns: conversation.user_turns().count(),
            completed: false,
            extracted_slots: IndexMap::new(),
            labeled_goal: IndexMap::new(),
            informed: false,
            succeeded: false,
            presented: Vec::new(),
            transcript: Vec::new(),
            error: Some(error),
        }
    }
}

fn entity_label(entity: &EntityRecord) -> String {
    ["name", "trainID", "id"]
        .iter()
        .find_map(|c| entity.get(c))
        .map(str::to_string)
        .unwrap_or_else(|| entity.index.to_string())
}

/// Replays the user side of one conversation against a fresh session.
pub fn replay_conversation(
    conversation: &RawConversation,
    dictionaries: &BTreeMap<String, Arc<DomainDictionary>>,
    engine: &Engine,
    options: &ReplayOptions,
) -> ReplayReport {
    let Some(domain) = conversation.single_domain() else {
        return ReplayReport::failed(
            conversation,
            String::new(),
            "not a single-domain conversation".into(),
        );
    };
    let Some(dict) = dictionaries.get(&domain) else {
        return ReplayReport::failed(
            conversation,
            domain.clone(),
            format!("no dictionary for domain {domain}"),
        );
    };
    let utterances = conversation.user_utterances();
    if utterances.is_empty() {
        return ReplayReport::failed(conversation, domain, "no user utterances".into());
    }
    let mut session = Session::new(
        conversation.dialogue_id.clone(),
        dict.clone(),
        engine.clone(),
    );
    let run = match run_scripted(&mut session, &utterances) {
        Ok(run) => run,
        Err(e) => return ReplayReport::failed(conversation, domain, format!("engine error: {e}")),
    };
    let extracted: IndexMap<String, String> = run.final_state.filled_slots().into_iter().collect();
    let mut report = ReplayReport {
        conversation_id: conversation.dialogue_id.clone(),
        domain,
        consumed_count: run.consumed,
        user_turns: utterances.len(),
        completed: run.completed,
        extracted_slots: extracted.clone(),
        labeled_goal: IndexMap::new(),
        informed: false,
        succeeded: false,
        presented: Vec::new(),
        transcript: run.transcript,
        error: None,
    };
    let mut goal = match labeled_goal(conversation, run.consumed.max(1), Some(dict)) {
        Ok(goal) => goal,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    if let Some(fix) = options.corrections.get(&conversation.dialogue_id) {
        for (k, v) in fix {
            goal.insert(k.clone(), normalize_for(Some(dict), k, v));
        }
    }
    report.labeled_goal = goal.clone();
    if let (true, Some(presentation)) = (run.completed, session.last_presentation()) {
        report.presented = presentation.entities.iter().map(entity_label).collect();
        report.informed = inform_verdict(
            dict,
            &extracted,
            &goal,
            &presentation.entities,
            options.mode,
        );
        report.succeeded = success_verdict(
            dict,
            report.informed,
            Some(&presentation.table),
            &presentation.entities,
        );
    }
    report
}

/// Replays every conversation; the result order follows the input order.
pub fn replay_all(
    conversations: &[RawConversation],
    dictionaries: &BTreeMap<String, Arc<DomainDictionary>>,
    engine: &Engine,
    options: &ReplayOptions,
) -> Vec<ReplayReport> {
    conversations
        .iter()
        .map(|c| replay_conversation(c, dictionaries, engine, options))
        .collect()
}

/// Rates in percent. `updated_combined` is the mean of the other two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub conversations: usize,
    pub informed: usize,
    pub succeeded: usize,
    pub inform_rate: f64,
    pub success_rate: f64,
    pub updated_combined: f64,
}

impl ScoreSummary {
    /// Builds a summary from counts. Rates are computed from integers so
    /// that decimal inputs such as 97.2 come out exactly as written.
    pub fn from_counts(
        conversations: usize,
        informed: usize,
        succeeded: usize,
    ) -> Result<Self, EvalError> {
        if conversations == 0 {
            return Err(EvalError::EmptyReportSet);
        }
        for (what, count) in [("informed", informed), ("succeeded", succeeded)] {
            if count > conversations {
                return Err(EvalError::Counts {
                    what,
                    count,
                    conversations,
                });
            }
        }
        let n = conversations as f64;
        Ok(Self {
            conversations,
            informed,
            succeeded,
            inform_rate: informed as f64 * 100.0 / n,
            success_rate: succeeded as f64 * 100.0 / n,
            updated_combined: (informed + succeeded) as f64 * 100.0 / (2.0 * n),
        })
    }

    /// The combined score is the mean of inform and success, checked on the
    /// underlying counts.
    pub fn is_consistent(&self) -> bool {
        let expected =
            (self.informed + self.succeeded) as f64 * 100.0 / (2 * self.conversations) as f64;
        self.updated_combined == expected
            && ((self.inform_rate + self.success_rate) / 2.0 - self.updated_combined).abs() < 1e-9
    }
}

pub fn summarize(reports: &[ReplayReport]) -> Result<ScoreSummary, EvalError> {
    ScoreSummary::from_counts(
        reports.len(),
        reports.iter().filter(|r| r.informed).count(),
        reports.iter().filter(|r| r.succeeded).count(),
    )
}

/// Verdicts of one externally predicted conversation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionVerdict {
    pub conversation_id: String,
    pub informed: bool,
    pub succeeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionScore {
    pub summary: Option<ScoreSummary>,
    pub verdicts: Vec<PredictionVerdict>,
    /// Conversations without predictions, and predictions without conversations.
    pub missing: Vec<String>,
    pub unmatched: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct PredictedTurn {
    #[serde(default)]
    response: String,
    #[serde(default)]
    state: BTreeMap<String, BTreeMap<String, serde_json::Value>>,
}

fn prediction_key(id: &str) -> String {
    id.trim()
        .to_lowercase()
        .trim_end_matches(".json")
        .to_string()
}

fn first_string(value: &serde_json::Value) -> Option<String> {
    match value {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Array(items) => items.first().and_then(first_string),
        serde_json::Value::Null => None,
        other => Some(other.to_string()),
    }
}

/// Requested attributes across all user turns, as slot captions.
fn requested_slots(conversation: &RawConversation, domain: &str) -> BTreeSet<String> {
    conversation
        .user_turns()
        .filter_map(|t| t.frame(domain))
        .flat_map(|f| {
            f.state
                .requested_slots
                .iter()
                .map(|r| slot_caption(domain, r))
        })
        .collect()
}

fn mentions_placeholder(response: &str, domain: &str, slot: &str) -> bool {
    let lower = response.to_lowercase();
    lower.contains(&format!("[value_{slot}]")) || lower.contains(&format!("[{domain}_{slot}]"))
}

fn mentions_entity(response: &str, domain: &str) -> bool {
    let id_slot = if domain == "train" { "trainid" } else { "name" };
    mentions_placeholder(response, domain, id_slot)
        || (domain == "train" && mentions_placeholder(response, domain, "id"))
}

/// Scores a prediction file in the per-turn layout used by the public
/// MultiWOZ evaluation scripts: an object mapping dialogue ids (lowercase,
/// without `.json`) to lists of turns with a delexicalized `response` and a
/// predicted `state` of `{domain: {slot: value}}`.
///
/// Inform: some response offers an entity placeholder and the predicted
/// state at that turn does not contradict the final labeled goal. Success:
/// informed, and every requested attribute appears as a placeholder.
pub fn score_predictions(
    predictions_json: &str,
    conversations: &[RawConversation],
    mode: InformMode,
) -> Result<PredictionScore, EvalError> {
    let predictions: BTreeMap<String, Vec<PredictedTurn>> = serde_json::from_str(predictions_json)
        .map_err(|e| EvalError::Predictions(e.to_string()))?;
    let predictions: BTreeMap<String, Vec<PredictedTurn>> = predictions
        .into_iter()
        .map(|(k, v)| (prediction_key(&k), v))
        .collect();
    let mut verdicts = Vec::new();
    let mut missing = Vec::new();
    let mut seen = BTreeSet::new();
    for conversation in conversations {
        let key = prediction_key(&conversation.dialogue_id);
        let Some(turns) = predictions.get(&key) else {
            missing.push(conversation.dialogue_id.clone());
            continue;
        };
        seen.insert(key);
        let Some(domain) = conversation.single_domain() else {
            missing.push(conversation.dialogue_id.clone());
            continue;
        };
        let total = conversation.user_turns().count();
        let goal = labeled_goal(conversation, total, None)?;
        let informed = turns.iter().any(|turn| {
            if !mentions_entity(&turn.response, &domain) {
                return false;
            }
            let predicted: IndexMap<String, String> = turn
                .state
                .get(&domain)
                .map(|slots| {
                    slots
                        .iter()
                        .filter_map(|(k, v)| {
                            first_string(v).map(|v| (slot_caption(&domain, k), normalize_text(&v)))
                        })
                        .filter(|(_, v)| !v.is_empty() && v != "none")
                        .collect()
                })
                .unwrap_or_default();
            no_contradiction(&predicted, &goal, mode)
        });
        let succeeded = informed
            && requested_slots(conversation, &domain).iter().all(|slot| {
                turns
                    .iter()
                    .any(|t| mentions_placeholder(&t.response, &domain, slot))
            });
        verdicts.push(PredictionVerdict {
            conversation_id: conversation.dialogue_id.clone(),
            informed,
            succeeded,
        });
    }
    let unmatched = predictions
        .keys()
        .filter(|k| !seen.contains(*k))
        .cloned()
        .collect();
    let summary = ScoreSummary::from_counts(
        verdicts.len(),
        verdicts.iter().filter(|v| v.informed).count(),
        verdicts.iter().filter(|v| v.succeeded).count(),
    )
    .ok();
    Ok(PredictionScore {
        summary,
        verdicts,
        missing,
        unmatched,
    })
}
