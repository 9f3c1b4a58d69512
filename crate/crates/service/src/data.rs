//! Turning settings into loaded dictionaries, conversations and an engine.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use tod_core::ingest::{self, IngestError, RawConversation};
use tod_core::nlu::{BackendError, HttpBackend, HttpBackendConfig};
use tod_core::{fixtures, DomainDictionary, Engine};

use crate::config::{DataSource, ExtractorKind, Settings};

pub type Dictionaries = BTreeMap<String, Arc<DomainDictionary>>;

/// Synthetic conversations generated per domain when replaying fixtures.
pub const FIXTURE_CONVERSATIONS_PER_DOMAIN: usize = 20;
pub const FIXTURE_SEED: u64 = 2024;

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("language-model backend: {0}")]
    Backend(#[from] BackendError),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
}

pub fn load_dictionaries(settings: &Settings) -> Result<Dictionaries, DataError> {
    match &settings.source {
        DataSource::Fixtures => settings
            .domains
            .iter()
            .map(|d| {
                fixtures::by_domain(d)
                    .map(|dict| (d.clone(), dict))
                    .ok_or_else(|| DataError::UnknownDomain(d.clone()))
            })
            .collect(),
        DataSource::MultiWoz { schema, db_dir } => {
            Ok(ingest::load_dictionaries(schema, db_dir, &settings.domains)?
                .into_iter()
                .map(|(d, dict)| (d, Arc::new(dict)))
                .collect())
        }
    }
}

pub fn build_engine(kind: ExtractorKind) -> Result<Engine, DataError> {
    Ok(match kind {
        ExtractorKind::Rule => Engine::rule_based(),
        ExtractorKind::Llm => {
            let config = HttpBackendConfig::from_env()?;
            log::info!("using language model `{}` at {}", config.model, config.endpoint);
            Engine::with_model(Arc::new(HttpBackend::new(config)))
        }
    })
}

/// Single-domain conversations of `split` restricted to the loaded domains.
/// Without a dialogues directory, fixture data yields synthetic conversations.
pub fn load_conversations(
    settings: &Settings,
    dictionaries: &Dictionaries,
    split: &str,
) -> Result<Vec<RawConversation>, DataError> {
    let all = match &settings.dialogues_dir {
        Some(dir) => ingest::load_dialogues(&split_dir(dir, split))?,
        None => dictionaries
            .values()
            .flat_map(|d| {
                fixtures::synthetic_conversations(d, FIXTURE_CONVERSATIONS_PER_DOMAIN, FIXTURE_SEED)
            })
            .collect(),
    };
    Ok(ingest::filter_single_domain(all)
        .into_iter()
        .filter(|c| c.single_domain().is_some_and(|d| dictionaries.contains_key(&d)))
        .collect())
}

fn split_dir(dir: &Path, split: &str) -> std::path::PathBuf {
    let nested = dir.join(split);
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}
