//! Loading of MultiWOZ 2.2 assets: the service schema, per-domain entity
//! databases and dialogue files, plus the single-domain filter and assembly
//! of the per-domain dictionary.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::schema::{
    ConfigError, DomainDictionary, DomainSchema, EntityDatabase, EntityRecord, SlotSpec,
};

/// Domains the engine serves. Everything else (taxi, police, hospital, ...)
/// is filtered out.
pub const SUPPORTED_DOMAINS: [&str; 4] = ["hotel", "train", "attraction", "restaurant"];

const CAPTION_MAP: &str = include_str!("../resources/caption_map.json");

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}: invalid JSON: {source}")]
    Json {
        origin: String,
        source: serde_json::Error,
    },
    #[error("{origin}: malformed record {record}: {reason}")]
    Malformed {
        origin: String,
        record: String,
        reason: String,
    },
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

fn read(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T, IngestError> {
    serde_json::from_str(text).map_err(|source| IngestError::Json {
        origin: origin.to_string(),
        source,
    })
}

/// Strips a `domain-` prefix from a MultiWOZ slot name.
pub fn slot_caption(domain: &str, name: &str) -> String {
    name.strip_prefix(domain)
        .and_then(|rest| rest.strip_prefix('-'))
        .unwrap_or(name)
        .to_string()
}

#[derive(Deserialize)]
struct RawService {
    service_name: String,
    #[serde(default)]
    slots: Vec<RawSlot>,
}

#[derive(Deserialize)]
struct RawSlot {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    possible_values: Vec<String>,
}

/// Parses a MultiWOZ 2.2 `schema.json` document.
pub fn parse_schema(text: &str, origin: &str) -> Result<Vec<DomainSchema>, IngestError> {
    let services: Vec<RawService> = parse_json(text, origin)?;
    services
        .into_iter()
        .map(|service| {
            let domain = service.service_name;
            let slots = service
                .slots
                .into_iter()
                .map(|s| {
                    SlotSpec::new(
                        slot_caption(&domain, &s.name),
                        s.description,
                        s.possible_values,
                    )
                })
                .collect();
            DomainSchema::new(domain.clone(), slots).map_err(|e| IngestError::Malformed {
                origin: origin.to_string(),
                record: format!("service `{domain}`"),
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn load_schema(path: &Path) -> Result<Vec<DomainSchema>, IngestError> {
    parse_schema(&read(path)?, &path.display().to_string())
}

/// A database plus the number of rows that had to be skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDatabase {
    pub database: EntityDatabase,
    pub skipped: usize,
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) => {
            let joined = items
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(", ");
            out.push((prefix.to_string(), joined));
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Parses a per-domain database file (a JSON array of objects). Nested
/// objects become dotted columns; arrays are joined. Non-object rows are
/// skipped and counted.
pub fn parse_database(
    text: &str,
    domain: &str,
    origin: &str,
) -> Result<LoadedDatabase, IngestError> {
    let rows: Vec<Value> = parse_json(text, origin)?;
    let mut columns: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut flat_rows = Vec::new();
    let mut skipped = 0;
    for (i, row) in rows.iter().enumerate() {
        if !row.is_object() {
            log::warn!("{origin}: skipping row {i}: not an object");
            skipped += 1;
            continue;
        }
        let mut cells = Vec::new();
        flatten("", row, &mut cells);
        for (column, _) in &cells {
            if seen.insert(column.clone()) {
                columns.push(column.clone());
            }
        }
        flat_rows.push(cells.into_iter().collect::<BTreeMap<_, _>>());
    }
    let rows = flat_rows
        .into_iter()
        .enumerate()
        .map(|(index, mut cells)| EntityRecord {
            index,
            values: columns
                .iter()
                .map(|c| (c.clone(), cells.remove(c).unwrap_or_default()))
                .collect(),
        })
        .collect();
    Ok(LoadedDatabase {
        database: EntityDatabase {
            domain: domain.to_string(),
            columns,
            rows,
        },
        skipped,
    })
}

pub fn load_database(path: &Path, domain: &str) -> Result<LoadedDatabase, IngestError> {
    if !SUPPORTED_DOMAINS.contains(&domain) {
        return Err(IngestError::UnknownDomain(domain.to_string()));
    }
    parse_database(&read(path)?, domain, &path.display().to_string())
}

#[derive(Deserialize)]
struct CaptionMapFile {
    #[allow(dead_code)]
    version: u32,
    domains: BTreeMap<String, BTreeMap<String, String>>,
}

/// The shipped slot-caption to column-name mapping of a domain.
pub fn caption_map(domain: &str) -> BTreeMap<String, String> {
    static MAPS: OnceLock<BTreeMap<String, BTreeMap<String, String>>> = OnceLock::new();
    MAPS.get_or_init(|| {
        let file: CaptionMapFile =
            serde_json::from_str(CAPTION_MAP).expect("bundled caption map is valid JSON");
        file.domains
    })
    .get(domain)
    .cloned()
    .unwrap_or_default()
}

fn is_placeholder(value: &str) -> bool {
    matches!(value, "" | "?" | "none" | "not mentioned")
}

/// Assembles the dictionary of a domain. Filterable slots the schema leaves
/// open get their permitted list from the distinct normalized column values.
pub fn build_domain_dictionary(
    schema: DomainSchema,
    database: EntityDatabase,
    mut caption_map: BTreeMap<String, String>,
) -> Result<DomainDictionary, IngestError> {
    caption_map.retain(|slot, column| {
        let present = database.columns.contains(column);
        if !present {
            log::warn!(
                "{}: column `{column}` for slot `{slot}` is absent",
                database.domain
            );
        }
        present
    });
    let dict = DomainDictionary::new(schema, database, caption_map)?;
    let DomainDictionary {
        mut schema,
        database,
        caption_map,
        ..
    } = dict;
    for slot in &mut schema.slots {
        if !slot.filterable || slot.is_constrained() {
            continue;
        }
        let column = &caption_map[&slot.caption];
        let values: BTreeSet<String> = database
            .rows
            .iter()
            .filter_map(|row| row.get(column))
            .map(|cell| slot.normalize(cell))
            .filter(|v| !is_placeholder(v))
            .collect();
        slot.permitted = values.into_iter().collect();
    }
    Ok(DomainDictionary::new(schema, database, caption_map)?)
}

/// Loads schema and databases and builds the dictionaries of the requested
/// domains. Database files are looked up as `<db_dir>/<domain>_db.json`.
pub fn load_dictionaries(
    schema_path: &Path,
    db_dir: &Path,
    domains: &[String],
) -> Result<BTreeMap<String, DomainDictionary>, IngestError> {
    let schemas = load_schema(schema_path)?;
    let mut out = BTreeMap::new();
    for domain in domains {
        let schema = schemas
            .iter()
            .find(|s| &s.domain == domain)
            .cloned()
            .ok_or_else(|| IngestError::UnknownDomain(domain.clone()))?;
        let loaded = load_database(&db_dir.join(format!("{domain}_db.json")), domain)?;
        if loaded.skipped > 0 {
            log::warn!("{domain}: skipped {} malformed rows", loaded.skipped);
        }
        let dict = build_domain_dictionary(schema, loaded.database, caption_map(domain))?;
        out.insert(domain.clone(), dict);
    }
    Ok(out)
}

/// Dictionary dump for inspection.
pub fn dump_dictionary(dict: &DomainDictionary) -> String {
    serde_json::to_string_pretty(dict).expect("dictionary serializes")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameState {
    #[serde(default)]
    pub active_intent: String,
    #[serde(default)]
    pub requested_slots: Vec<String>,
    /// Slot name (`domain-caption`) to annotated values.
    #[serde(default)]
    pub slot_values: IndexMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawFrame {
    pub service: String,
    #[serde(default)]
    pub state: FrameState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTurn {
    pub speaker: String,
    pub utterance: String,
    #[serde(default)]
    pub frames: Vec<RawFrame>,
}

impl RawTurn {
    pub fn is_user(&self) -> bool {
        self.speaker.eq_ignore_ascii_case("user")
    }

    pub fn frame(&self, service: &str) -> Option<&RawFrame> {
        self.frames.iter().find(|f| f.service == service)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawConversation {
    pub dialogue_id: String,
    #[serde(default)]
    pub services: Vec<String>,
    pub turns: Vec<RawTurn>,
}

impl RawConversation {
    pub fn user_turns(&self) -> impl Iterator<Item = &RawTurn> {
        self.turns.iter().filter(|t| t.is_user())
    }

    pub fn user_utterances(&self) -> Vec<String> {
        self.user_turns().map(|t| t.utterance.clone()).collect()
    }

    /// Domains referenced by the service list or by any non-empty annotation.
    pub fn domains(&self) -> BTreeSet<String> {
        let mut domains: BTreeSet<String> = self.services.iter().cloned().collect();
        for turn in &self.turns {
            for frame in &turn.frames {
                if !frame.state.slot_values.is_empty() || !frame.state.requested_slots.is_empty() {
                    domains.insert(frame.service.clone());
                }
            }
        }
        domains
    }

    /// The single supported domain, if the conversation has exactly one.
    pub fn single_domain(&self) -> Option<String> {
        let domains = self.domains();
        match domains.len() {
            1 => domains
                .into_iter()
                .next()
                .filter(|d| SUPPORTED_DOMAINS.contains(&d.as_str())),
            _ => None,
        }
    }
}

pub fn parse_dialogues(text: &str, origin: &str) -> Result<Vec<RawConversation>, IngestError> {
    parse_json(text, origin)
}

/// Loads a dialogue file, or every `*.json` file of a directory in name order.
pub fn load_dialogues(path: &Path) -> Result<Vec<RawConversation>, IngestError> {
    if !path.is_dir() {
        return parse_dialogues(&read(path)?, &path.display().to_string());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for file in files {
        out.extend(parse_dialogues(&read(&file)?, &file.display().to_string())?);
    }
    Ok(out)
}

/// Keeps the conversations that involve exactly one supported domain.
pub fn filter_single_domain(conversations: Vec<RawConversation>) -> Vec<RawConversation> {
    conversations
        .into_iter()
        .filter(|c| c.single_domain().is_some())
        .collect()
}
