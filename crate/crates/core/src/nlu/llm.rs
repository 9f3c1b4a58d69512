use std::sync::Arc;

use super::{
    build_extraction_prompt, complete, parse_extraction_response, AuditLog, ExtractionOutcome,
    Extractor, LanguageModel, NluError, FORMAT_REMINDER,
};
use crate::schema::DomainSchema;

/// Extraction through a language model. A reply that cannot be parsed gets
/// exactly one re-prompt with a format reminder appended.
#[derive(Clone)]
pub struct LlmExtractor {
    backend: Arc<dyn LanguageModel>,
}

impl LlmExtractor {
    pub fn new(backend: Arc<dyn LanguageModel>) -> Self {
        Self { backend }
    }
}

impl Extractor for LlmExtractor {
    fn extract(
        &self,
        schema: &DomainSchema,
        utterance: &str,
        audit: &AuditLog,
    ) -> Result<ExtractionOutcome, NluError> {
        let prompt = build_extraction_prompt(schema, utterance);
        let reply = complete(self.backend.as_ref(), &prompt, audit)?;
        let outcome = match parse_extraction_response(&reply, schema) {
            Ok(outcome) => outcome,
            Err(NluError::Parse(first)) => {
                log::warn!("unparseable extraction reply ({first}); re-prompting once");
                let retry = format!("{prompt}{FORMAT_REMINDER}");
                let reply = complete(self.backend.as_ref(), &retry, audit)?;
                parse_extraction_response(&reply, schema)?
            }
            Err(other) => return Err(other),
        };
        Ok(outcome.conform(schema))
    }
}
