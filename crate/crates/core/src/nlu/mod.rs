//! Preference extraction from user utterances.
//!
//! Two interchangeable extractors produce the same [`ExtractionOutcome`]: a
//! deterministic rule-based scanner used offline, and a language-model
//! extractor that builds a slot-extraction prompt and parses the reply.

mod backend;
mod llm;
mod parse;
mod prompt;
mod rule;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::DomainSchema;

pub use backend::{
    complete, AuditLog, AuditRecord, BackendError, HttpBackend, HttpBackendConfig, LanguageModel,
    MockBackend,
};
pub use llm::LlmExtractor;
pub use parse::{parse_extraction_response, render_extraction};
pub use prompt::{build_extraction_prompt, FORMAT_REMINDER};
pub use rule::{rule_based_extract, RuleExtractor};

#[derive(Debug, Error)]
pub enum NluError {
    #[error("could not parse extraction response: {0}")]
    Parse(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// What the extractor found for one slot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotExtraction {
    pub value: Option<String>,
    pub wrong_or_out_of_domain: Option<String>,
}

/// Per-slot values and wrong/out-of-domain entries, plus the residual text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionOutcome {
    /// Keyed by slot caption, in schema order.
    pub slots: IndexMap<String, SlotExtraction>,
    pub text_part: String,
}

impl ExtractionOutcome {
    /// Empty outcome covering every extraction slot of the schema.
    pub fn empty(schema: &DomainSchema) -> Self {
        Self {
            slots: schema
                .extraction_slots()
                .map(|s| (s.caption.clone(), SlotExtraction::default()))
                .collect(),
            text_part: String::new(),
        }
    }

    pub fn value(&self, caption: &str) -> Option<&str> {
        self.slots.get(caption).and_then(|s| s.value.as_deref())
    }

    pub fn wrong(&self, caption: &str) -> Option<&str> {
        self.slots
            .get(caption)
            .and_then(|s| s.wrong_or_out_of_domain.as_deref())
    }

    /// Wrong/out-of-domain entries in schema order.
    pub fn wrong_entries(&self) -> Vec<(String, String)> {
        self.slots
            .iter()
            .filter_map(|(k, s)| {
                s.wrong_or_out_of_domain
                    .as_ref()
                    .map(|w| (k.clone(), w.clone()))
            })
            .collect()
    }

    pub fn has_content(&self) -> bool {
        self.slots
            .values()
            .any(|s| s.value.is_some() || s.wrong_or_out_of_domain.is_some())
    }

    /// Enforces the outcome invariants against the schema: off-list values of
    /// constrained slots become wrong entries, a present value clears the
    /// wrong entry, wrong entries on unconstrained slots become values, and
    /// skipped or unknown slots are dropped.
    pub fn conform(mut self, schema: &DomainSchema) -> Self {
        let mut slots = IndexMap::new();
        for spec in schema.extraction_slots() {
            let mut entry = self.slots.shift_remove(&spec.caption).unwrap_or_default();
            let blank = |v: &Option<String>| v.as_deref().is_none_or(|s| s.trim().is_empty());
            if blank(&entry.value) {
                entry.value = None;
            }
            if blank(&entry.wrong_or_out_of_domain) {
                entry.wrong_or_out_of_domain = None;
            }
            if let Some(value) = entry.value.clone() {
                if spec.permits(&value) {
                    entry.wrong_or_out_of_domain = None;
                } else {
                    entry.value = None;
                    entry.wrong_or_out_of_domain = Some(value);
                }
            } else if !spec.is_constrained() {
                entry.value = entry.wrong_or_out_of_domain.take();
            }
            slots.insert(spec.caption.clone(), entry);
        }
        for unknown in self.slots.keys() {
            log::warn!("ignoring extraction for unknown slot `{unknown}`");
        }
        self.slots = slots;
        self.text_part = self.text_part.trim().to_string();
        self
    }
}

/// Anything that turns an utterance into an [`ExtractionOutcome`].
pub trait Extractor: Send + Sync {
    fn extract(
        &self,
        schema: &DomainSchema,
        utterance: &str,
        audit: &AuditLog,
    ) -> Result<ExtractionOutcome, NluError>;
}
