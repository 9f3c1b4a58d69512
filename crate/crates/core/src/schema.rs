//! Domain schemas, entity databases and the per-domain dictionary that forms
//! the unchanging part of every session's information state.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lexicon::slot_lexicon;
use crate::normalize::normalize_value;

/// Slots whose values describe a booking rather than an entity. They are never
/// used to filter the database, only compared during evaluation.
pub const BOOKING_ONLY_SLOTS: &[&str] = &["bookday", "bookpeople", "bookstay", "booktime", "ref"];

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("domain mismatch: schema is `{schema}` but database is `{database}`")]
    DomainMismatch { schema: String, database: String },
    #[error("duplicate slot caption `{caption}` in domain `{domain}`")]
    DuplicateCaption { domain: String, caption: String },
    #[error("slot `{0}` is not a filterable slot of this domain")]
    NotFilterable(String),
    #[error("filterable slot `{slot}` maps to missing column `{column}`")]
    MissingColumn { slot: String, column: String },
}

/// One predefined slot of a domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub caption: String,
    pub characterization: String,
    /// Empty means unconstrained.
    pub permitted: Vec<String>,
    /// True when a database column backs this slot.
    #[serde(default)]
    pub filterable: bool,
    #[serde(default)]
    pub affixes: Vec<String>,
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
}

impl SlotSpec {
    /// Builds a slot, pulling affixes and aliases from the shipped lexicon.
    pub fn new(
        caption: impl Into<String>,
        characterization: impl Into<String>,
        permitted: Vec<impl Into<String>>,
    ) -> Self {
        let caption = caption.into();
        let lex = slot_lexicon(&caption);
        Self {
            characterization: characterization.into(),
            permitted: permitted.into_iter().map(Into::into).collect(),
            filterable: false,
            affixes: lex.affixes,
            aliases: lex.aliases,
            caption,
        }
    }

    pub fn filterable(mut self, filterable: bool) -> Self {
        self.filterable = filterable;
        self
    }

    pub fn is_constrained(&self) -> bool {
        !self.permitted.is_empty()
    }

    pub fn normalize(&self, raw: &str) -> String {
        normalize_value(raw, self)
    }

    /// Normalized permitted configurations, in declaration order, deduplicated.
    pub fn normalized_permitted(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.permitted
            .iter()
            .map(|p| self.normalize(p))
            .filter(|p| seen.insert(p.clone()))
            .collect()
    }

    /// Membership on normalized forms. Unconstrained slots accept everything.
    pub fn permits(&self, value: &str) -> bool {
        if !self.is_constrained() {
            return true;
        }
        let value = self.normalize(value);
        self.permitted.iter().any(|p| self.normalize(p) == value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub domain: String,
    pub slots: Vec<SlotSpec>,
}

impl DomainSchema {
    pub fn new(domain: impl Into<String>, slots: Vec<SlotSpec>) -> Result<Self, ConfigError> {
        let domain = domain.into();
        let mut seen = BTreeSet::new();
        for slot in &slots {
            if !seen.insert(slot.caption.clone()) {
                return Err(ConfigError::DuplicateCaption {
                    domain,
                    caption: slot.caption.clone(),
                });
            }
        }
        Ok(Self { domain, slots })
    }

    pub fn slot(&self, caption: &str) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.caption == caption)
    }

    pub fn position(&self, caption: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.caption == caption)
    }

    /// The hotel domain's `type` slot is left out of extraction: the domain
    /// caption and one of its configurations coincide.
    pub fn is_extraction_skipped(&self, caption: &str) -> bool {
        self.domain == "hotel" && caption == "type"
    }

    pub fn extraction_slots(&self) -> impl Iterator<Item = &SlotSpec> {
        self.slots
            .iter()
            .filter(|s| !self.is_extraction_skipped(&s.caption))
    }
}

/// One database row. Column order is the database's column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub index: usize,
    pub values: IndexMap<String, String>,
}

impl EntityRecord {
    pub fn get(&self, column: &str) -> Option<&str> {
        self.values.get(column).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityDatabase {
    pub domain: String,
    pub columns: Vec<String>,
    pub rows: Vec<EntityRecord>,
}

impl EntityDatabase {
    /// Builds a database from rows of cells aligned with `columns`.
    pub fn from_rows(
        domain: impl Into<String>,
        columns: Vec<impl Into<String>>,
        rows: Vec<Vec<impl Into<String>>>,
    ) -> Self {
        let columns: Vec<String> = columns.into_iter().map(Into::into).collect();
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(index, cells)| EntityRecord {
                index,
                values: columns
                    .iter()
                    .cloned()
                    .zip(cells.into_iter().map(Into::into))
                    .collect(),
            })
            .collect();
        Self {
            domain: domain.into(),
            columns,
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Schema, database and slot-to-column map of one domain. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainDictionary {
    pub schema: DomainSchema,
    pub database: EntityDatabase,
    /// Slot caption to database column, for every filterable slot.
    pub caption_map: BTreeMap<String, String>,
    #[serde(skip)]
    digest_cache: DigestCache,
}

/// Lazily computed digest; ignored by equality.
#[derive(Debug, Clone, Default)]
struct DigestCache(OnceLock<String>);

impl PartialEq for DigestCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for DigestCache {}

impl DomainDictionary {
    /// Assembles a dictionary. Slots are marked filterable when `caption_map`
    /// (or an identically named column) points at an existing column, unless
    /// they are booking-only.
    pub fn new(
        mut schema: DomainSchema,
        database: EntityDatabase,
        mut caption_map: BTreeMap<String, String>,
    ) -> Result<Self, ConfigError> {
        if schema.domain != database.domain {
            return Err(ConfigError::DomainMismatch {
                schema: schema.domain,
                database: database.domain,
            });
        }
        for slot in &mut schema.slots {
            if BOOKING_ONLY_SLOTS.contains(&slot.caption.as_str()) {
                slot.filterable = false;
                caption_map.remove(&slot.caption);
                continue;
            }
            let column = caption_map
                .get(&slot.caption)
                .cloned()
                .or_else(|| find_column(&database.columns, &slot.caption));
            match column {
                Some(column) if database.columns.contains(&column) => {
                    slot.filterable = true;
                    caption_map.insert(slot.caption.clone(), column);
                }
                Some(column) if caption_map.contains_key(&slot.caption) => {
                    return Err(ConfigError::MissingColumn {
                        slot: slot.caption.clone(),
                        column,
                    });
                }
                _ => {
                    slot.filterable = false;
                    caption_map.remove(&slot.caption);
                }
            }
        }
        caption_map.retain(|caption, _| schema.slot(caption).is_some());
        Ok(Self {
            schema,
            database,
            caption_map,
            digest_cache: DigestCache::default(),
        })
    }

    pub fn domain(&self) -> &str {
        &self.schema.domain
    }

    pub fn column_for(&self, caption: &str) -> Option<&str> {
        self.caption_map.get(caption).map(String::as_str)
    }

    pub fn filterable_slots(&self) -> impl Iterator<Item = &SlotSpec> {
        self.schema.slots.iter().filter(|s| s.filterable)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        self.digest_cache
            .0
            .get_or_init(|| {
                let json = serde_json::to_vec(self).expect("dictionary serializes");
                hex::encode(Sha256::digest(&json))
            })
            .clone()
    }
}

fn find_column(columns: &[String], caption: &str) -> Option<String> {
    let squash = |s: &str| {
        s.chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect::<String>()
    };
    let target = squash(caption);
    columns.iter().find(|c| squash(c) == target).cloned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hotel_db() -> EntityDatabase {
        EntityDatabase::from_rows(
            "hotel",
            vec!["name", "pricerange", "stars", "leaveAt"],
            vec![vec!["a", "cheap", "2", "x"]],
        )
    }

    #[test]
    fn duplicate_captions_are_rejected() {
        let err = DomainSchema::new(
            "hotel",
            vec![
                SlotSpec::new("area", "", Vec::<String>::new()),
                SlotSpec::new("area", "", Vec::<String>::new()),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateCaption { .. }));
    }

    #[test]
    fn filterable_follows_columns_and_booking_rule() {
        let schema = DomainSchema::new(
            "hotel",
            vec![
                SlotSpec::new("pricerange", "", vec!["cheap"]),
                SlotSpec::new("bookday", "", vec!["monday"]),
                SlotSpec::new("leaveat", "", Vec::<String>::new()),
                SlotSpec::new("ref", "", Vec::<String>::new()),
            ],
        )
        .unwrap();
        let dict = DomainDictionary::new(schema, hotel_db(), BTreeMap::new()).unwrap();
        let filterable: Vec<_> = dict
            .filterable_slots()
            .map(|s| s.caption.as_str())
            .collect();
        assert_eq!(filterable, vec!["pricerange", "leaveat"]);
        assert_eq!(dict.column_for("leaveat"), Some("leaveAt"));
        assert_eq!(dict.column_for("bookday"), None);
    }

    #[test]
    fn domain_mismatch_is_a_config_error() {
        let schema = DomainSchema::new("restaurant", vec![]).unwrap();
        assert!(matches!(
            DomainDictionary::new(schema, hotel_db(), BTreeMap::new()),
            Err(ConfigError::DomainMismatch { .. })
        ));
    }

    #[test]
    fn permits_compares_normalized_forms() {
        let slot = SlotSpec::new("internet", "", vec!["free", "no", "yes"]);
        assert!(slot.permits("Free WiFi"));
        assert!(slot.permits("yes"));
        assert!(!slot.permits("maybe"));
        assert_eq!(slot.normalized_permitted(), vec!["yes", "no"]);
    }
}
