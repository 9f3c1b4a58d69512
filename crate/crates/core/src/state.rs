//! The information state: user preferences, control flags and the immutable
//! domain dictionary a session runs against.

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::schema::{DomainDictionary, EntityRecord, SlotSpec};

/// Initial prompt shown before the first user utterance.
pub const INITIAL_PROMPT: &str = "enter query";

/// Three-valued flag. `Unset` is distinct from `False`: the update strategy
/// branches on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "Option<bool>", into = "Option<bool>")]
pub enum TriFlag {
    True,
    False,
    #[default]
    Unset,
}

impl TriFlag {
    pub fn is_true(self) -> bool {
        self == TriFlag::True
    }

    pub fn is_unset(self) -> bool {
        self == TriFlag::Unset
    }
}

impl From<bool> for TriFlag {
    fn from(value: bool) -> Self {
        if value {
            TriFlag::True
        } else {
            TriFlag::False
        }
    }
}

impl From<Option<bool>> for TriFlag {
    fn from(value: Option<bool>) -> Self {
        value.map_or(TriFlag::Unset, TriFlag::from)
    }
}

impl From<TriFlag> for Option<bool> {
    fn from(flag: TriFlag) -> Self {
        match flag {
            TriFlag::True => Some(true),
            TriFlag::False => Some(false),
            TriFlag::Unset => None,
        }
    }
}

impl fmt::Display for TriFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TriFlag::True => "true",
            TriFlag::False => "false",
            TriFlag::Unset => "none",
        })
    }
}

/// A slot configuration as the user wrote it and in normalized form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotValue {
    pub raw: String,
    pub normalized: String,
}

impl SlotValue {
    pub fn new(raw: &str, slot: &SlotSpec) -> Self {
        Self {
            raw: raw.trim().to_string(),
            normalized: slot.normalize(raw),
        }
    }
}

/// A value the user supplied for a constrained slot that is not among its
/// permitted configurations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrongValue {
    pub slot: String,
    pub raw: String,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot is malformed: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("snapshot refers to domain `{snapshot}` but dictionary is `{dictionary}`")]
    DomainMismatch {
        snapshot: String,
        dictionary: String,
    },
    #[error("snapshot dictionary digest {snapshot} does not match loaded dictionary {dictionary}")]
    DigestMismatch {
        snapshot: String,
        dictionary: String,
    },
}

#[derive(Debug, Clone)]
pub struct InformationState {
    pub predefined_slots: IndexMap<String, Option<SlotValue>>,
    pub text_part: String,
    pub it_is_required_to_update_predefined_slots: TriFlag,
    pub it_is_required_to_query_database: TriFlag,
    pub db_query_output_list: Vec<EntityRecord>,
    pub query_output_list_is_empty: TriFlag,
    pub dialogue_is_completed: TriFlag,
    pub utterance_to_update_predefined_slot: String,
    pub checked_there_is_no_other_constraint: TriFlag,
    pub user_rejects_output: TriFlag,
    pub there_is_wrong_or_out_of_domain_value: TriFlag,
    pub wrong_or_out_of_domain_values_list: Vec<WrongValue>,
    pub user_utterance_index: usize,
    pub user_other_constraints: String,
    pub wrongness_within_other_constraints_checked: TriFlag,
    pub user_is_informed_there_is_no_entity_in_db: TriFlag,
    pub user_is_informed_of_db_output: TriFlag,
    pub domain_caption: String,
    pub extracted_information: Arc<DomainDictionary>,
}

impl InformationState {
    pub fn new(dictionary: Arc<DomainDictionary>) -> Self {
        let predefined_slots = dictionary
            .schema
            .slots
            .iter()
            .map(|s| (s.caption.clone(), None))
            .collect();
        Self {
            predefined_slots,
            text_part: String::new(),
            it_is_required_to_update_predefined_slots: TriFlag::True,
            it_is_required_to_query_database: TriFlag::Unset,
            db_query_output_list: Vec::new(),
            query_output_list_is_empty: TriFlag::Unset,
            dialogue_is_completed: TriFlag::False,
            utterance_to_update_predefined_slot: INITIAL_PROMPT.to_string(),
            checked_there_is_no_other_constraint: TriFlag::Unset,
            user_rejects_output: TriFlag::Unset,
            there_is_wrong_or_out_of_domain_value: TriFlag::Unset,
            wrong_or_out_of_domain_values_list: Vec::new(),
            user_utterance_index: 0,
            user_other_constraints: String::new(),
            wrongness_within_other_constraints_checked: TriFlag::Unset,
            user_is_informed_there_is_no_entity_in_db: TriFlag::Unset,
            user_is_informed_of_db_output: TriFlag::Unset,
            domain_caption: dictionary.domain().to_string(),
            extracted_information: dictionary,
        }
    }

    pub fn dictionary(&self) -> &DomainDictionary {
        &self.extracted_information
    }

    pub fn slot_value(&self, caption: &str) -> Option<&SlotValue> {
        self.predefined_slots.get(caption).and_then(Option::as_ref)
    }

    /// Non-none slots as (caption, normalized value), in schema order.
    pub fn filled_slots(&self) -> Vec<(String, String)> {
        self.predefined_slots
            .iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.clone(), v.normalized.clone())))
            .collect()
    }

    /// Non-none filterable slots, in schema order.
    pub fn filterable_constraints(&self) -> IndexMap<String, String> {
        let dict = self.dictionary();
        self.filled_slots()
            .into_iter()
            .filter(|(k, _)| dict.schema.slot(k).is_some_and(|s| s.filterable))
            .collect()
    }

    /// Human-readable rendering of the current preferences, e.g.
    /// `area: north, food: french`. Enumerated slots show their canonical
    /// configuration; names and open slots keep the user's wording.
    pub fn describe_preferences(&self) -> String {
        let schema = &self.dictionary().schema;
        self.predefined_slots
            .iter()
            .filter_map(|(k, v)| {
                let v = v.as_ref()?;
                let canonical = k != "name" && schema.slot(k).is_some_and(|s| s.is_constrained());
                Some(format!("{k}: {}", if canonical { &v.normalized } else { &v.raw }))
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            predefined_slots: self.predefined_slots.clone(),
            text_part: self.text_part.clone(),
            it_is_required_to_update_predefined_slots: self
                .it_is_required_to_update_predefined_slots,
            it_is_required_to_query_database: self.it_is_required_to_query_database,
            db_query_output_list: self.db_query_output_list.clone(),
            query_output_list_is_empty: self.query_output_list_is_empty,
            dialogue_is_completed: self.dialogue_is_completed,
            utterance_to_update_predefined_slot: self.utterance_to_update_predefined_slot.clone(),
            checked_there_is_no_other_constraint: self.checked_there_is_no_other_constraint,
            user_rejects_output: self.user_rejects_output,
            there_is_wrong_or_out_of_domain_value: self.there_is_wrong_or_out_of_domain_value,
            wrong_or_out_of_domain_values_list: self.wrong_or_out_of_domain_values_list.clone(),
            user_utterance_index: self.user_utterance_index,
            user_other_constraints: self.user_other_constraints.clone(),
            wrongness_within_other_constraints_checked: self
                .wrongness_within_other_constraints_checked,
            user_is_informed_there_is_no_entity_in_db: self
                .user_is_informed_there_is_no_entity_in_db,
            user_is_informed_of_db_output: self.user_is_informed_of_db_output,
            domain_caption: self.domain_caption.clone(),
            extracted_information: DictionaryRef {
                domain_caption: self.extracted_information.domain().to_string(),
                digest: self.extracted_information.digest(),
            },
        }
    }

    /// Structured text form (pretty JSON) with stable field names.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.snapshot()).expect("state serializes")
    }

    /// Rebuilds a state from its JSON form, reattaching the dictionary it was
    /// taken against.
    pub fn from_json(json: &str, dictionary: Arc<DomainDictionary>) -> Result<Self, SnapshotError> {
        let snapshot: StateSnapshot = serde_json::from_str(json)?;
        snapshot.restore(dictionary)
    }

    /// Digest over the control flags only; used in trace lines.
    pub fn flags_digest(&self) -> String {
        let flags = format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            self.it_is_required_to_update_predefined_slots,
            self.it_is_required_to_query_database,
            self.query_output_list_is_empty,
            self.dialogue_is_completed,
            self.checked_there_is_no_other_constraint,
            self.user_rejects_output,
            self.there_is_wrong_or_out_of_domain_value,
            self.wrongness_within_other_constraints_checked,
            self.user_is_informed_there_is_no_entity_in_db,
            self.user_is_informed_of_db_output,
            self.user_utterance_index,
        );
        hex::encode(&Sha256::digest(flags.as_bytes())[..6])
    }
}

impl PartialEq for InformationState {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.extracted_information, &other.extracted_information)
            || self.extracted_information == other.extracted_information)
            && self.snapshot() == other.snapshot()
    }
}

/// Reference to the dictionary a state was built against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryRef {
    pub domain_caption: String,
    pub digest: String,
}

/// Serializable view of an [`InformationState`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub predefined_slots: IndexMap<String, Option<SlotValue>>,
    pub text_part: String,
    pub it_is_required_to_update_predefined_slots: TriFlag,
    pub it_is_required_to_query_database: TriFlag,
    pub db_query_output_list: Vec<EntityRecord>,
    pub query_output_list_is_empty: TriFlag,
    pub dialogue_is_completed: TriFlag,
    pub utterance_to_update_predefined_slot: String,
    pub checked_there_is_no_other_constraint: TriFlag,
    pub user_rejects_output: TriFlag,
    pub there_is_wrong_or_out_of_domain_value: TriFlag,
    pub wrong_or_out_of_domain_values_list: Vec<WrongValue>,
    pub user_utterance_index: usize,
    pub user_other_constraints: String,
    pub wrongness_within_other_constraints_checked: TriFlag,
    pub user_is_informed_there_is_no_entity_in_db: TriFlag,
    pub user_is_informed_of_db_output: TriFlag,
    pub domain_caption: String,
    pub extracted_information: DictionaryRef,
}

impl StateSnapshot {
    pub fn restore(
        self,
        dictionary: Arc<DomainDictionary>,
    ) -> Result<InformationState, SnapshotError> {
        if self.domain_caption != dictionary.domain() {
            return Err(SnapshotError::DomainMismatch {
                snapshot: self.domain_caption,
                dictionary: dictionary.domain().to_string(),
            });
        }
        let digest = dictionary.digest();
        if self.extracted_information.digest != digest {
            return Err(SnapshotError::DigestMismatch {
                snapshot: self.extracted_information.digest,
                dictionary: digest,
            });
        }
        Ok(InformationState {
            predefined_slots: self.predefined_slots,
            text_part: self.text_part,
            it_is_required_to_update_predefined_slots: self
                .it_is_required_to_update_predefined_slots,
            it_is_required_to_query_database: self.it_is_required_to_query_database,
            db_query_output_list: self.db_query_output_list,
            query_output_list_is_empty: self.query_output_list_is_empty,
            dialogue_is_completed: self.dialogue_is_completed,
            utterance_to_update_predefined_slot: self.utterance_to_update_predefined_slot,
            checked_there_is_no_other_constraint: self.checked_there_is_no_other_constraint,
            user_rejects_output: self.user_rejects_output,
            there_is_wrong_or_out_of_domain_value: self.there_is_wrong_or_out_of_domain_value,
            wrong_or_out_of_domain_values_list: self.wrong_or_out_of_domain_values_list,
            user_utterance_index: self.user_utterance_index,
            user_other_constraints: self.user_other_constraints,
            wrongness_within_other_constraints_checked: self
                .wrongness_within_other_constraints_checked,
            user_is_informed_there_is_no_entity_in_db: self
                .user_is_informed_there_is_no_entity_in_db,
            user_is_informed_of_db_output: self.user_is_informed_of_db_output,
            domain_caption: self.domain_caption,
            extracted_information: dictionary,
        })
    }
}

/// Builds the initial state for a schema and database pair.
pub fn new_information_state(
    schema: crate::schema::DomainSchema,
    db: crate::schema::EntityDatabase,
) -> Result<InformationState, crate::schema::ConfigError> {
    let dictionary = DomainDictionary::new(schema, db, Default::default())?;
    Ok(InformationState::new(Arc::new(dictionary)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::schema::{DomainSchema, EntityDatabase};

    #[test]
    fn restaurant_state_has_eleven_slots_and_initial_flags() {
        let dict = fixtures::restaurant();
        let state = InformationState::new(dict);
        assert_eq!(state.predefined_slots.len(), 11);
        assert!(state.predefined_slots.values().all(Option::is_none));
        assert_eq!(
            state.it_is_required_to_update_predefined_slots,
            TriFlag::True
        );
        assert_eq!(state.dialogue_is_completed, TriFlag::False);
        for flag in [
            state.it_is_required_to_query_database,
            state.query_output_list_is_empty,
            state.checked_there_is_no_other_constraint,
            state.user_rejects_output,
            state.there_is_wrong_or_out_of_domain_value,
            state.wrongness_within_other_constraints_checked,
            state.user_is_informed_there_is_no_entity_in_db,
            state.user_is_informed_of_db_output,
        ] {
            assert_eq!(flag, TriFlag::Unset);
        }
        assert!(state.text_part.is_empty());
        assert_eq!(state.user_utterance_index, 0);
    }

    #[test]
    fn degenerate_schema_is_valid() {
        let state = new_information_state(
            DomainSchema::new("empty", vec![]).unwrap(),
            EntityDatabase::from_rows("empty", Vec::<String>::new(), Vec::<Vec<String>>::new()),
        )
        .unwrap();
        assert!(state.predefined_slots.is_empty());
    }

    #[test]
    fn mismatched_domains_are_rejected() {
        let err = new_information_state(
            DomainSchema::new("hotel", vec![]).unwrap(),
            EntityDatabase::from_rows("train", Vec::<String>::new(), Vec::<Vec<String>>::new()),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            crate::schema::ConfigError::DomainMismatch { .. }
        ));
    }

    #[test]
    fn triflag_serializes_as_nullable_bool() {
        assert_eq!(serde_json::to_string(&TriFlag::Unset).unwrap(), "null");
        assert_eq!(serde_json::to_string(&TriFlag::False).unwrap(), "false");
        assert_eq!(
            serde_json::from_str::<TriFlag>("true").unwrap(),
            TriFlag::True
        );
    }

    #[test]
    fn snapshot_round_trip() {
        let dict = fixtures::hotel();
        let mut state = InformationState::new(dict.clone());
        let stars = dict.schema.slot("stars").unwrap().clone();
        state
            .predefined_slots
            .insert("stars".into(), Some(SlotValue::new("two", &stars)));
        state.text_part = "quiet".into();
        state.user_rejects_output = TriFlag::False;
        state.db_query_output_list = dict.database.rows[..2].to_vec();
        state.wrong_or_out_of_domain_values_list.push(WrongValue {
            slot: "area".into(),
            raw: "downtown".into(),
        });
        let json = state.to_json();
        let restored = InformationState::from_json(&json, dict).unwrap();
        assert_eq!(restored, state);
        assert_eq!(restored.to_json(), json);
    }

    #[test]
    fn snapshot_against_other_dictionary_is_rejected() {
        let state = InformationState::new(fixtures::hotel());
        let json = state.to_json();
        assert!(InformationState::from_json(&json, fixtures::restaurant()).is_err());
    }
}
