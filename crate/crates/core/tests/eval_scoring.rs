//! Replay verdicts, summaries and prediction re-scoring.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};

use tod_core::eval::{
    labeled_goal, replay_all, replay_conversation, score_predictions, summarize, InformMode, ReplayOptions,
    ScoreSummary,
};
use tod_core::ingest::RawConversation;
use tod_core::{fixtures, DomainDictionary, Engine};

fn dictionaries() -> BTreeMap<String, Arc<DomainDictionary>> {
    fixtures::all().into_iter().map(|d| (d.domain().to_string(), d)).collect()
}

#[test]
fn mislabeled_direction_is_judged_against_the_consumed_utterances() {
    let conv = fixtures::train_reversed_direction_transcript().conversation;
    let engine = Engine::rule_based();
    let plain = replay_conversation(&conv, &dictionaries(), &engine, &ReplayOptions::default());
    assert!(plain.completed, "{:?}", plain.transcript);
    assert_eq!(plain.extracted_slots.get("departure").map(String::as_str), Some("bishops stortford"));
    assert_eq!(plain.extracted_slots.get("destination").map(String::as_str), Some("cambridge"));
    // The annotation keeps the reversed direction, so the raw goal contradicts.
    assert!(!plain.informed);

    let options = ReplayOptions {
        corrections: fixtures::goal_corrections(),
        ..ReplayOptions::default()
    };
    let fixed = replay_conversation(&conv, &dictionaries(), &engine, &options);
    assert!(fixed.informed && fixed.succeeded, "{:?}", fixed.labeled_goal);
    assert_eq!(fixed.labeled_goal["departure"], "bishops stortford");
}

#[test]
fn one_failure_in_four_is_75() {
    let dict = fixtures::restaurant();
    let mut conversations = fixtures::synthetic_conversations(&dict, 3, 9);
    // A conversation for a domain with no loaded dictionary cannot be informed.
    let mut orphan = fixtures::synthetic_conversations(&fixtures::hotel(), 1, 9).remove(0);
    orphan.dialogue_id = "orphan".into();
    conversations.push(orphan);
    let only_restaurant: BTreeMap<_, _> = [("restaurant".to_string(), dict)].into();
    let reports = replay_all(&conversations, &only_restaurant, &Engine::rule_based(), &ReplayOptions::default());
    assert!(reports[3].error.is_some());
    let summary = summarize(&reports).unwrap();
    assert_eq!((summary.inform_rate, summary.success_rate, summary.updated_combined), (75.0, 75.0, 75.0));
    assert!(summarize(&[]).is_err());
}

#[test]
fn summary_arithmetic_from_counts() {
    let s = ScoreSummary::from_counts(1000, 972, 878).unwrap();
    assert_eq!((s.inform_rate, s.success_rate, s.updated_combined), (97.2, 87.8, 92.5));
    let s = ScoreSummary::from_counts(3, 1, 2).unwrap();
    assert!(s.is_consistent());
    assert!((s.updated_combined - 50.0).abs() < 1e-12);
    assert!(ScoreSummary::from_counts(0, 0, 0).is_err());
    assert!(ScoreSummary::from_counts(2, 3, 0).is_err());
}

fn oracle_predictions(dict: &DomainDictionary, conversations: &[RawConversation]) -> serde_json::Map<String, Value> {
    conversations
        .iter()
        .map(|conv| {
            let users = conv.user_turns().count();
            let goal = labeled_goal(conv, users, Some(dict)).unwrap();
            let turns = json!([
                { "response": "What area would you like?", "state": { dict.domain(): {} } },
                { "response": format!("[{}_name] matches.", dict.domain()), "state": { dict.domain(): goal } },
            ]);
            (format!("{}.json", conv.dialogue_id.to_uppercase()), turns)
        })
        .collect()
}

#[test]
fn oracle_predictions_score_100() {
    let dict = fixtures::hotel();
    let conversations = fixtures::synthetic_conversations(&dict, 10, 3);
    let preds = Value::Object(oracle_predictions(&dict, &conversations)).to_string();
    let score = score_predictions(&preds, &conversations, InformMode::NoContradiction).unwrap();
    let s = score.summary.unwrap();
    assert_eq!((s.conversations, s.inform_rate, s.success_rate, s.updated_combined), (10, 100.0, 100.0, 100.0));
    assert!(score.missing.is_empty() && score.unmatched.is_empty());
}

#[test]
fn one_contradicted_slot_in_ten_gives_inform_90() {
    let dict = fixtures::restaurant();
    let conversations = fixtures::synthetic_conversations(&dict, 10, 4);
    let mut preds = oracle_predictions(&dict, &conversations);
    let key = format!("{}.json", conversations[6].dialogue_id.to_uppercase());
    let state = &mut preds[&key][1]["state"]["restaurant"];
    let (slot, value) = state.as_object().unwrap().iter().next().map(|(k, v)| (k.clone(), v.clone())).unwrap();
    let other = if value == "zzz" { "yyy" } else { "zzz" };
    state[&slot] = json!(other);
    let score = score_predictions(&Value::Object(preds).to_string(), &conversations, InformMode::NoContradiction).unwrap();
    let s = score.summary.unwrap();
    assert_eq!(s.inform_rate, 90.0);
    assert_eq!(s.success_rate, 90.0);
    let failed: Vec<&str> = score.verdicts.iter().filter(|v| !v.informed).map(|v| v.conversation_id.as_str()).collect();
    assert_eq!(failed, [conversations[6].dialogue_id.as_str()]);
}

#[test]
fn id_mismatches_are_reported() {
    let dict = fixtures::attraction();
    let conversations = fixtures::synthetic_conversations(&dict, 3, 8);
    let mut preds = oracle_predictions(&dict, &conversations);
    let dropped = format!("{}.json", conversations[0].dialogue_id.to_uppercase());
    preds.remove(&dropped);
    preds.insert("mul0001.json".into(), json!([]));
    let score = score_predictions(&Value::Object(preds).to_string(), &conversations, InformMode::NoContradiction).unwrap();
    assert_eq!(score.missing, [conversations[0].dialogue_id.clone()]);
    assert_eq!(score.unmatched, ["mul0001"]);
    assert_eq!(score.summary.unwrap().conversations, 2);
    assert!(score_predictions("[1, 2]", &conversations, InformMode::NoContradiction).is_err());
}

#[test]
fn strict_mode_requires_every_goal_slot() {
    let conv = fixtures::restaurant_north_french_transcript().conversation;
    let dicts = dictionaries();
    let engine = Engine::rule_based();
    let loose = replay_conversation(&conv, &dicts, &engine, &ReplayOptions::default());
    let strict = replay_conversation(
        &conv,
        &dicts,
        &engine,
        &ReplayOptions { mode: InformMode::Strict, ..ReplayOptions::default() },
    );
    assert!(loose.informed);
    // The annotated goal names slots the user never stated in the consumed turns.
    let extra = loose.labeled_goal.keys().any(|k| !loose.extracted_slots.contains_key(k));
    assert_eq!(strict.informed, !extra);
}
