use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::{json, Value};

use tod_core::ingest::RawConversation;
use tod_core::{eval, fixtures};

fn tod(args: &[&str], stdin: &str, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tod"));
    cmd.args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for var in [
        "TOD_CONFIG", "TOD_SCHEMA", "TOD_DB_DIR", "TOD_DIALOGUES_DIR", "TOD_DOMAINS", "TOD_EXTRACTOR",
        "TOD_BIND", "TOD_IDLE_TIMEOUT_SECS",
    ] {
        cmd.env_remove(var);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().expect("tod binary runs");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn chat_north_french_prints_table_and_farewell() {
    let out = tod(
        &["chat", "--domain", "restaurant"],
        "I want french food in the north\nno\nthanks that is all\n",
        &[],
    );
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("name | food | area"), "{text}");
    assert!(text.contains("| two two | french | north |"), "{text}");
    assert!(text.contains("Goodbye!"));
    assert!(text.ends_with("final predefined_slots: {\"area\":\"north\",\"food\":\"french\"}\n"));
}

#[test]
fn chat_matches_golden_session() {
    let out = tod(&["chat", "--domain", "restaurant"], &golden("chat_restaurant.stdin"), &[]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), golden("chat_restaurant.stdout"));
}

#[test]
fn chat_with_no_input_exits_cleanly() {
    let out = tod(&["chat", "--domain", "hotel"], "", &[]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "TOD: enter query\ninput ended; the conversation is incomplete\n");
}

#[test]
fn chat_rejects_unknown_domain() {
    let out = tod(&["chat", "--domain", "taxi"], "", &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("taxi"));
}

#[test]
fn flags_override_env_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tod.toml");
    std::fs::write(&config, "domains = [\"hotel\"]\n").unwrap();
    let config = config.to_str().unwrap();
    let chat = |extra: &[&str], env: &[(&str, &str)]| {
        let mut args = vec!["--config", config, "chat", "--domain", "restaurant"];
        args.extend_from_slice(extra);
        tod(&args, "", env).status.success()
    };
    // The file alone loads only hotel.
    assert!(!chat(&[], &[]));
    // The environment beats the file.
    assert!(chat(&[], &[("TOD_DOMAINS", "restaurant")]));
    // A flag beats the environment.
    assert!(!chat(&["--domains", "hotel"], &[("TOD_DOMAINS", "restaurant")]));
    // The config path itself may come from the environment.
    let out = tod(&["chat", "--domain", "restaurant"], "", &[("TOD_CONFIG", config)]);
    assert!(!out.status.success());
}

#[test]
fn replay_fixture_conversations_scores_100() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let out = tod(&["replay", "--out", out_path.to_str().unwrap()], "", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("inform=100.0 success=100.0 updated_combined=100.0"));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert_eq!(doc["summary"]["conversations"], 80);
    assert_eq!(doc["summary"]["updated_combined"], 100.0);
    assert_eq!(doc["reports"].as_array().unwrap().len(), 80);
}

/// Writes the conversations as a MultiWOZ-style dialogue directory.
fn write_dialogues(dir: &Path, conversations: &[RawConversation]) {
    let test = dir.join("test");
    std::fs::create_dir_all(&test).unwrap();
    std::fs::write(test.join("dialogues_001.json"), serde_json::to_string(conversations).unwrap()).unwrap();
}

#[test]
fn score_predictions_from_a_file() {
    let dict = fixtures::restaurant();
    let conversations = fixtures::synthetic_conversations(&dict, 10, 5);
    let dir = tempfile::tempdir().unwrap();
    write_dialogues(dir.path(), &conversations);

    // Oracle predictions: the labeled goal at every turn and an offered name.
    let mut preds = serde_json::Map::new();
    for (i, conv) in conversations.iter().enumerate() {
        let users = conv.user_turns().count();
        let mut goal = eval::labeled_goal(conv, users, Some(&dict)).unwrap();
        if i == 3 {
            let area = goal.get("area").map(String::as_str);
            goal.insert("area".into(), if area == Some("north") { "south".into() } else { "north".into() });
        }
        let key = conv.dialogue_id.to_lowercase();
        preds.insert(
            key,
            json!([{ "response": "[restaurant_name] is a good choice.", "state": { "restaurant": goal } }]),
        );
    }
    let pred_path = dir.path().join("pred.json");
    std::fs::write(&pred_path, Value::Object(preds).to_string()).unwrap();
    let out_path = dir.path().join("summary.json");
    let out = tod(
        &[
            "--dialogues-dir",
            dir.path().to_str().unwrap(),
            "--domains",
            "restaurant",
            "score-predictions",
            "--pred",
            pred_path.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ],
        "",
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let score: Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    assert_eq!(score["summary"]["conversations"], 10);
    assert_eq!(score["summary"]["inform_rate"], 90.0);
    assert_eq!(score["missing"], json!([]));
}

#[test]
fn ingest_multiwoz_layout() {
    let dir = tempfile::tempdir().unwrap();
    let schema = json!([{
        "service_name": "restaurant",
        "slots": [
            { "name": "restaurant-pricerange", "description": "price budget for the restaurant",
              "possible_values": ["cheap", "expensive", "moderate"], "is_categorical": true },
            { "name": "restaurant-food", "description": "the cuisine of the restaurant",
              "possible_values": [], "is_categorical": false },
            { "name": "restaurant-name", "description": "name of the restaurant",
              "possible_values": [], "is_categorical": false }
        ]
    }]);
    std::fs::write(dir.path().join("schema.json"), schema.to_string()).unwrap();
    let db = json!([
        { "name": "golden wok", "food": "Chinese", "pricerange": "moderate" },
        { "name": "la margherita", "food": "italian", "pricerange": "cheap" }
    ]);
    std::fs::write(dir.path().join("restaurant_db.json"), db.to_string()).unwrap();
    let out_dir = dir.path().join("dump");
    let out = tod(
        &[
            "--schema",
            dir.path().join("schema.json").to_str().unwrap(),
            "--db-dir",
            dir.path().to_str().unwrap(),
            "--domains",
            "restaurant",
            "ingest",
            "--out",
            out_dir.to_str().unwrap(),
        ],
        "",
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("restaurant: 3 slots, 2 rows"));
    let dump: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("restaurant.json")).unwrap()).unwrap();
    let food = dump["schema"]["slots"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["caption"] == "food")
        .unwrap();
    assert_eq!(food["permitted"], json!(["chinese", "italian"]));
}
