//! Rule-based extraction against hand-labeled utterances.

use tod_core::fixtures;
use tod_core::nlu::rule_based_extract;

struct Label {
    domain: &'static str,
    utterance: &'static str,
    slots: &'static [(&'static str, &'static str)],
    wrong: &'static [(&'static str, &'static str)],
}

const fn l(
    domain: &'static str,
    utterance: &'static str,
    slots: &'static [(&'static str, &'static str)],
    wrong: &'static [(&'static str, &'static str)],
) -> Label {
    Label { domain, utterance, slots, wrong }
}

#[rustfmt::skip]
const LABELS: [Label; 40] = [
    l("restaurant", "I want french food in the north", &[("area", "north"), ("food", "french")], &[]),
    l("restaurant", "Find me a cheap place in the centre.", &[("pricerange", "cheap"), ("area", "centre")], &[]),
    l("restaurant", "Something expensive serving italian food please", &[("pricerange", "expensive"), ("food", "italian")], &[]),
    l("restaurant", "I'd like moderately priced british food", &[("pricerange", "moderate"), ("food", "british")], &[]),
    l("restaurant", "A restaurant that serves canap", &[], &[("food", "canap")]),
    l("restaurant", "Is there any chinese restaurant in the south part of town?", &[("area", "south"), ("food", "chinese")], &[]),
    l("restaurant", "I am looking for the golden wok", &[("name", "golden wok")], &[]),
    l("restaurant", "Book a table for 4 people on friday", &[("bookday", "friday"), ("bookpeople", "4")], &[]),
    l("restaurant", "Table for two on sunday at 18:30", &[("bookday", "sunday"), ("bookpeople", "2"), ("booktime", "18:30")], &[]),
    l("restaurant", "asian oriental cuisine in the east", &[("area", "east"), ("food", "asian oriental")], &[]),
    l("restaurant", "hello, can you help me", &[], &[]),
    l("restaurant", "I want somewhere with a nice view near the river", &[], &[]),
    l("restaurant", "cheap indian food in the west please", &[("pricerange", "cheap"), ("area", "west"), ("food", "indian")], &[]),
    l("restaurant", "I would like portuguese food", &[("food", "portuguese")], &[]),
    l("hotel", "a moderately priced hotel with 2 stars", &[("pricerange", "moderate"), ("stars", "2")], &[]),
    l("hotel", "I need a guesthouse in the east with four stars", &[("stars", "4"), ("area", "east")], &[]),
    l("hotel", "a cheap place with free wifi", &[("pricerange", "cheap"), ("internet", "yes")], &[]),
    l("hotel", "it should have free parking", &[("parking", "yes")], &[]),
    l("hotel", "expensive hotel in the centre with free parking and free wifi", &[("pricerange", "expensive"), ("parking", "yes"), ("internet", "yes"), ("area", "centre")], &[]),
    l("hotel", "I want to stay at the gonville hotel", &[("name", "gonville hotel")], &[]),
    l("hotel", "for 3 nights starting tuesday", &[("bookday", "tuesday"), ("bookstay", "3")], &[]),
    l("hotel", "a 5 star place in the west", &[("stars", "5"), ("area", "west")], &[]),
    l("hotel", "something in the north, 0 stars is fine", &[("stars", "0"), ("area", "north")], &[]),
    l("hotel", "Can you book it for 2 people?", &[("bookpeople", "2")], &[]),
    l("train", "I need a train from cambridge to ely", &[("departure", "cambridge"), ("destination", "ely")], &[]),
    l("train", "leaving norwich on monday", &[("departure", "norwich"), ("day", "monday")], &[]),
    l("train", "I'm travelling to london kings cross on saturday", &[("day", "saturday"), ("destination", "london kings cross")], &[]),
    l("train", "it should leave after 09:17", &[("leaveat", "09:17")], &[]),
    l("train", "I want to arrive by 10:08", &[("arriveby", "10:08")], &[]),
    l("train", "from stansted airport to cambridge on wednesday", &[("departure", "stansted airport"), ("destination", "cambridge"), ("day", "wednesday")], &[]),
    l("train", "a train going to peterborough", &[("destination", "peterborough")], &[]),
    l("train", "book 3 tickets please", &[("bookpeople", "3")], &[]),
    l("attraction", "I'd like to visit a museum in the centre", &[("area", "centre"), ("type", "museum")], &[]),
    l("attraction", "any nightclub in the south?", &[("area", "south"), ("type", "nightclub")], &[]),
    l("attraction", "Tell me about the fitzwilliam museum", &[("name", "fitzwilliam museum")], &[]),
    l("attraction", "Is there a cinema in the east?", &[("area", "east"), ("type", "cinema")], &[]),
    l("attraction", "I want to go punting on a boat", &[("type", "boat")], &[]),
    l("attraction", "a college in the west", &[("area", "west"), ("type", "college")], &[]),
    l("attraction", "somewhere fun for the kids", &[], &[]),
    l("attraction", "a theatre please", &[("type", "theatre")], &[]),
];

#[test]
fn rule_extractor_matches_hand_labels() {
    let mut failures = Vec::new();
    for label in &LABELS {
        let dict = fixtures::by_domain(label.domain).unwrap();
        let outcome = rule_based_extract(&dict.schema, label.utterance);
        let mut got: Vec<(String, String)> = outcome
            .slots
            .iter()
            .filter_map(|(k, s)| s.value.as_ref().map(|v| (k.clone(), dict.schema.slot(k).unwrap().normalize(v))))
            .collect();
        let mut want: Vec<(String, String)> =
            label.slots.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        got.sort();
        want.sort();
        let wrong: Vec<(String, String)> = outcome.wrong_entries();
        let want_wrong: Vec<(String, String)> =
            label.wrong.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        if got != want || wrong != want_wrong {
            failures.push(format!("{:?}: got {got:?} / {wrong:?}", label.utterance));
        }
    }
    assert!(failures.is_empty(), "{} of {} disagree:\n{}", failures.len(), LABELS.len(), failures.join("\n"));
}

#[test]
fn unmatched_words_land_in_text_part() {
    let dict = fixtures::restaurant();
    let outcome = rule_based_extract(&dict.schema, "I want somewhere with a nice view near the river");
    assert_eq!(outcome.text_part, "nice view river");
    let outcome = rule_based_extract(&dict.schema, "cheap food, ideally with outdoor seating");
    assert_eq!(outcome.value("pricerange"), Some("cheap"));
    assert!(outcome.text_part.contains("outdoor seating"), "{}", outcome.text_part);
}
