//! Batch commands: dictionary dump, replay and prediction scoring.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use tod_core::eval::{self, EvalError, InformMode, PredictionScore, ReplayOptions, ReplayReport, ScoreSummary};
use tod_core::ingest::{dump_dictionary, RawConversation};
use tod_core::{fixtures, Engine};

use crate::data::{DataError, Dictionaries};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

/// Replay output: per-conversation rows followed by the summary block.
#[derive(Debug, Serialize)]
pub struct ReplayDocument {
    pub reports: Vec<ReplayReport>,
    pub summary: ScoreSummary,
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), CommandError> {
    match path {
        Some(path) => fs::write(path, text).map_err(|source| CommandError::Write {
            path: path.display().to_string(),
            source,
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Writes `<domain>.json` dumps into `dir`, or returns one combined document.
pub fn ingest(dictionaries: &Dictionaries, dir: Option<&Path>) -> Result<String, CommandError> {
    let Some(dir) = dir else {
        let all: BTreeMap<&String, serde_json::Value> = dictionaries
            .iter()
            .map(|(d, dict)| (d, serde_json::to_value(dict.as_ref()).expect("dictionary serializes")))
            .collect();
        return Ok(serde_json::to_string_pretty(&all).expect("dictionaries serialize"));
    };
    fs::create_dir_all(dir).map_err(|source| CommandError::Write {
        path: dir.display().to_string(),
        source,
    })?;
    let mut lines = Vec::new();
    for (domain, dict) in dictionaries {
        let path = dir.join(format!("{domain}.json"));
        write_output(Some(&path), &dump_dictionary(dict))?;
        lines.push(format!(
            "{domain}: {} slots, {} rows, digest {} -> {}",
            dict.schema.slots.len(),
            dict.database.len(),
            dict.digest(),
            path.display()
        ));
    }
    Ok(lines.join("\n"))
}

/// Goal corrections for the shipped fixture conversations with known
/// annotation defects.
pub fn default_options(mode: InformMode) -> ReplayOptions {
    ReplayOptions {
        mode,
        corrections: fixtures::goal_corrections(),
    }
}

pub fn replay(
    conversations: &[RawConversation],
    dictionaries: &Dictionaries,
    engine: &Engine,
    options: &ReplayOptions,
) -> Result<ReplayDocument, CommandError> {
    let reports = eval::replay_all(conversations, dictionaries, engine, options);
    let summary = eval::summarize(&reports)?;
    Ok(ReplayDocument { reports, summary })
}

pub fn score_predictions(
    predictions_json: &str,
    conversations: &[RawConversation],
    mode: InformMode,
) -> Result<PredictionScore, CommandError> {
    Ok(eval::score_predictions(predictions_json, conversations, mode)?)
}

pub fn summary_line(summary: &ScoreSummary) -> String {
    format!(
        "conversations={} inform={:.1} success={:.1} updated_combined={:.1}",
        summary.conversations, summary.inform_rate, summary.success_rate, summary.updated_combined
    )
}
