//! Entity search over a domain database: filtering by predefined slots,
//! ordering by the free-text part of the preferences, and suggestion of
//! nearby slot configurations that the database can satisfy.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::is_stopword;
use crate::normalize::tokenize;
use crate::schema::{ConfigError, DomainDictionary, EntityRecord};

#[derive(Debug, Error)]
pub enum RankError {
    #[error("ranker backend failed: {0}")]
    Backend(String),
    #[error("ranker returned {got} scores for {expected} entities")]
    ScoreCount { expected: usize, got: usize },
    #[error("ranker returned a non-finite score")]
    NonFinite,
}

/// Tunables for suggestion building.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    /// Alternatives considered per slot.
    pub k: usize,
    /// Cap on the total number of suggestions.
    pub max_items: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { k: 3, max_items: 6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankScore {
    pub entity_index: usize,
    pub score: f64,
}

/// A nearby slot configuration with database support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionItem {
    pub configuration: IndexMap<String, String>,
    pub support_count: usize,
}

/// Rows whose normalized column value equals the normalized slot value for
/// every given slot. Keeps the database order.
pub fn filter_entities<'a, I>(
    dict: &DomainDictionary,
    slots: I,
) -> Result<Vec<EntityRecord>, ConfigError>
where
    I: IntoIterator<Item = (&'a String, &'a String)>,
{
    let mut checks = Vec::new();
    for (caption, value) in slots {
        let spec = dict
            .schema
            .slot(caption)
            .filter(|s| s.filterable)
            .ok_or_else(|| ConfigError::NotFilterable(caption.clone()))?;
        let column = dict
            .column_for(caption)
            .ok_or_else(|| ConfigError::NotFilterable(caption.clone()))?;
        checks.push((spec, column, spec.normalize(value)));
    }
    Ok(dict
        .database
        .rows
        .iter()
        .filter(|row| {
            checks.iter().all(|(spec, column, wanted)| {
                row.get(column)
                    .is_some_and(|cell| spec.normalize(cell) == *wanted)
            })
        })
        .cloned()
        .collect())
}

/// Orders entities by congruence with the free-text part of the preferences.
pub trait Ranker: Send + Sync {
    fn rank(
        &self,
        entities: &[EntityRecord],
        text_part: &str,
    ) -> Result<Vec<EntityRecord>, RankError>;
}

/// Token-overlap baseline: share of text-part content tokens found among the
/// entity's column values.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalRanker;

impl LexicalRanker {
    pub fn scores(entities: &[EntityRecord], text_part: &str) -> Vec<RankScore> {
        let query = content_tokens(text_part);
        entities
            .iter()
            .enumerate()
            .map(|(entity_index, entity)| {
                let score = if query.is_empty() {
                    0.0
                } else {
                    let haystack: HashSet<String> =
                        entity.values.values().flat_map(|v| tokenize(v)).collect();
                    let hits = query.iter().filter(|t| haystack.contains(*t)).count();
                    hits as f64 / query.len() as f64
                };
                RankScore {
                    entity_index,
                    score,
                }
            })
            .collect()
    }
}

impl Ranker for LexicalRanker {
    fn rank(
        &self,
        entities: &[EntityRecord],
        text_part: &str,
    ) -> Result<Vec<EntityRecord>, RankError> {
        let scores = Self::scores(entities, text_part);
        Ok(order_by_scores(entities, &scores))
    }
}

/// Adapter for externally computed scores (e.g. a remote scoring service).
/// The scorer receives the text part and one document per entity.
pub struct ScoringRanker<F> {
    scorer: F,
}

impl<F> ScoringRanker<F>
where
    F: Fn(&str, &[String]) -> Result<Vec<f64>, RankError> + Send + Sync,
{
    pub fn new(scorer: F) -> Self {
        Self { scorer }
    }
}

impl<F> Ranker for ScoringRanker<F>
where
    F: Fn(&str, &[String]) -> Result<Vec<f64>, RankError> + Send + Sync,
{
    fn rank(
        &self,
        entities: &[EntityRecord],
        text_part: &str,
    ) -> Result<Vec<EntityRecord>, RankError> {
        let documents: Vec<String> = entities
            .iter()
            .map(|e| e.values.values().cloned().collect::<Vec<_>>().join(" "))
            .collect();
        let raw = (self.scorer)(text_part, &documents)?;
        if raw.len() != entities.len() {
            return Err(RankError::ScoreCount {
                expected: entities.len(),
                got: raw.len(),
            });
        }
        if raw.iter().any(|s| !s.is_finite()) {
            return Err(RankError::NonFinite);
        }
        let scores: Vec<RankScore> = raw
            .into_iter()
            .enumerate()
            .map(|(entity_index, score)| RankScore {
                entity_index,
                score,
            })
            .collect();
        Ok(order_by_scores(entities, &scores))
    }
}

fn order_by_scores(entities: &[EntityRecord], scores: &[RankScore]) -> Vec<EntityRecord> {
    let mut order: Vec<&RankScore> = scores.iter().collect();
    // sort_by is stable: equal scores keep input order.
    order.sort_by(|a, b| b.score.total_cmp(&a.score));
    order
        .into_iter()
        .map(|s| entities[s.entity_index].clone())
        .collect()
}

fn content_tokens(text: &str) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .collect()
}

/// [`LexicalRanker`] as a plain function.
pub fn lexical_rank(entities: &[EntityRecord], text_part: &str) -> Vec<EntityRecord> {
    let scores = LexicalRanker::scores(entities, text_part);
    order_by_scores(entities, &scores)
}

/// Normalized edit similarity in `[0, 1]`.
pub fn comparability(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(a, b)
}

/// Up to `k` alternative values of `slot` among rows satisfying `fixed_slots`,
/// most comparable to `current_value` first; ties go to higher row support,
/// then lexicographic order.
pub fn nearest_configurations(
    dict: &DomainDictionary,
    slot: &str,
    current_value: &str,
    fixed_slots: &IndexMap<String, String>,
    k: usize,
) -> Result<Vec<String>, ConfigError> {
    Ok(ranked_alternatives(dict, slot, current_value, fixed_slots)?
        .into_iter()
        .take(k)
        .map(|(value, _)| value)
        .collect())
}

fn ranked_alternatives(
    dict: &DomainDictionary,
    slot: &str,
    current_value: &str,
    fixed_slots: &IndexMap<String, String>,
) -> Result<Vec<(String, usize)>, ConfigError> {
    let spec = dict
        .schema
        .slot(slot)
        .filter(|s| s.filterable)
        .ok_or_else(|| ConfigError::NotFilterable(slot.to_string()))?;
    let column = dict
        .column_for(slot)
        .ok_or_else(|| ConfigError::NotFilterable(slot.to_string()))?;
    let current = spec.normalize(current_value);
    let rows = filter_entities(dict, fixed_slots.iter().filter(|(k, _)| k.as_str() != slot))?;
    let mut support: BTreeMap<String, usize> = BTreeMap::new();
    for row in &rows {
        if let Some(cell) = row.get(column) {
            let value = spec.normalize(cell);
            if !value.is_empty() && value != current {
                *support.entry(value).or_default() += 1;
            }
        }
    }
    let mut candidates: Vec<(String, usize, f64)> = support
        .into_iter()
        .map(|(value, count)| {
            let similarity = comparability(&current, &value);
            (value, count, similarity)
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then_with(|| b.1.cmp(&a.1))
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(candidates.into_iter().map(|(v, c, _)| (v, c)).collect())
}

/// Proactive suggestions: for each non-none filterable slot, substitute its
/// nearest configurations while keeping the other slots, and keep the
/// substitutions the database supports.
pub fn build_user_item_list(
    dict: &DomainDictionary,
    slots: &IndexMap<String, String>,
    config: RetrievalConfig,
) -> Result<Vec<SuggestionItem>, ConfigError> {
    let mut items: Vec<SuggestionItem> = Vec::new();
    let mut ordered: Vec<(&String, &String)> = slots
        .iter()
        .filter(|(k, _)| dict.schema.slot(k).is_some_and(|s| s.filterable))
        .collect();
    ordered.sort_by_key(|(k, _)| dict.schema.position(k));
    let constraints: IndexMap<String, String> = ordered
        .iter()
        .map(|(k, v)| ((*k).clone(), (*v).clone()))
        .collect();

    for (slot, value) in &ordered {
        for alternative in nearest_configurations(dict, slot, value, &constraints, config.k)? {
            let mut configuration = constraints.clone();
            configuration.insert((*slot).clone(), alternative);
            let support_count = filter_entities(dict, configuration.iter())?.len();
            if support_count == 0 || items.iter().any(|i| i.configuration == configuration) {
                continue;
            }
            items.push(SuggestionItem {
                configuration,
                support_count,
            });
        }
    }
    items.truncate(config.max_items);
    Ok(items)
}
