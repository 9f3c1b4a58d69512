//! Hand-built dictionaries, scripted conversations and generators used by the
//! test suites, the CLI demo mode and the Python smoke test.
//!
//! The databases are small, but shaped like the MultiWOZ tables: same column
//! names, same value conventions.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{
    build_domain_dictionary, caption_map, FrameState, RawConversation, RawFrame, RawTurn,
};
use crate::schema::{DomainDictionary, DomainSchema, EntityDatabase, SlotSpec};

const DAYS: [&str; 7] = [
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
];
const AREAS: [&str; 5] = ["centre", "east", "north", "south", "west"];

fn one_to_eight() -> Vec<String> {
    (1..=8).map(|n| n.to_string()).collect()
}

fn open() -> Vec<String> {
    Vec::new()
}

fn slot(caption: &str, characterization: &str, permitted: Vec<String>) -> SlotSpec {
    SlotSpec::new(caption, characterization, permitted)
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn assemble(
    schema: DomainSchema,
    columns: &[&str],
    rows: Vec<Vec<String>>,
) -> Arc<DomainDictionary> {
    let domain = schema.domain.clone();
    let db = EntityDatabase::from_rows(domain.clone(), columns.to_vec(), rows);
    Arc::new(
        build_domain_dictionary(schema, db, caption_map(&domain))
            .expect("fixture dictionary is consistent"),
    )
}

fn cached(
    cell: &'static OnceLock<Arc<DomainDictionary>>,
    build: fn() -> Arc<DomainDictionary>,
) -> Arc<DomainDictionary> {
    cell.get_or_init(build).clone()
}

fn phone(i: usize) -> String {
    format!("01223 {:06}", 300_000 + i * 7919 % 100_000)
}

fn postcode(i: usize) -> String {
    format!(
        "cb{}{}{}",
        1 + i % 5,
        i % 10,
        (b'a' + (i % 26) as u8) as char
    )
}

const STREETS: [&str; 10] = [
    "tenison road",
    "milton road",
    "newmarket road",
    "histon road",
    "mill lane",
    "regent street",
    "trumpington street",
    "hills road",
    "chesterton road",
    "station road",
];

fn address(i: usize) -> String {
    format!("{} {}", 10 + i * 3, STREETS[i % STREETS.len()])
}

fn restaurant_schema() -> DomainSchema {
    DomainSchema::new(
        "restaurant",
        vec![
            slot(
                "pricerange",
                "Price budget for the restaurant",
                strings(&["cheap", "expensive", "moderate"]),
            ),
            slot("area", "Area or place of the restaurant", strings(&AREAS)),
            slot(
                "food",
                "The cuisine of the restaurant you are looking for",
                open(),
            ),
            slot("name", "Name of the restaurant", open()),
            slot("bookday", "Day of the restaurant booking", strings(&DAYS)),
            slot(
                "bookpeople",
                "How many people for the restaurant reservation",
                one_to_eight(),
            ),
            slot("booktime", "Time of the restaurant booking", open()),
            slot("address", "Address of the restaurant", open()),
            slot("phone", "Phone number of the restaurant", open()),
            slot("postcode", "Postal code of the restaurant", open()),
            slot("ref", "Reference number of the restaurant booking", open()),
        ],
    )
    .expect("unique captions")
}

const RESTAURANT_COLUMNS: [&str; 9] = [
    "id",
    "name",
    "food",
    "area",
    "pricerange",
    "type",
    "address",
    "phone",
    "postcode",
];

fn restaurant_rows(entries: &[(&str, &str, &str, &str)]) -> Vec<Vec<String>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, (name, food, area, price))| {
            vec![
                (19_000 + i).to_string(),
                name.to_string(),
                food.to_string(),
                area.to_string(),
                price.to_string(),
                "restaurant".to_string(),
                address(i),
                phone(i),
                postcode(i),
            ]
        })
        .collect()
}

fn build_restaurant() -> Arc<DomainDictionary> {
    let rows = restaurant_rows(&[
        ("two two", "french", "north", "expensive"),
        ("cote", "french", "centre", "expensive"),
        ("pizza hut city centre", "italian", "centre", "cheap"),
        ("da vinci pizzeria", "italian", "north", "cheap"),
        ("zizzi cambridge", "italian", "centre", "cheap"),
        ("frankie and bennys", "italian", "south", "expensive"),
        (
            "stazione restaurant and coffee bar",
            "italian",
            "centre",
            "expensive",
        ),
        ("hotel du vin and bistro", "european", "centre", "moderate"),
        ("galleria", "european", "centre", "moderate"),
        (
            "cambridge lodge restaurant",
            "european",
            "west",
            "expensive",
        ),
        ("golden wok", "chinese", "north", "moderate"),
        ("charlie chan", "chinese", "centre", "cheap"),
        ("yu garden", "chinese", "east", "expensive"),
        ("the lucky star", "chinese", "south", "cheap"),
        ("the nirala", "indian", "north", "moderate"),
        ("curry garden", "indian", "centre", "expensive"),
        ("royal spice", "indian", "north", "cheap"),
        ("pipasha restaurant", "indian", "east", "expensive"),
        ("the gardenia", "mediterranean", "centre", "cheap"),
        ("la mimosa", "mediterranean", "centre", "expensive"),
        ("saigon city", "asian oriental", "north", "expensive"),
        ("the missing sock", "international", "east", "cheap"),
        ("grafton hotel restaurant", "british", "east", "expensive"),
        (
            "midsummer house restaurant",
            "british",
            "centre",
            "expensive",
        ),
        ("the copper kettle", "british", "centre", "moderate"),
        ("nandos", "portuguese", "south", "cheap"),
    ]);
    assemble(restaurant_schema(), &RESTAURANT_COLUMNS, rows)
}

/// Restaurant domain: 26 rows, no moderately priced Italian place, one
/// French place in the north.
pub fn restaurant() -> Arc<DomainDictionary> {
    static CELL: OnceLock<Arc<DomainDictionary>> = OnceLock::new();
    cached(&CELL, build_restaurant)
}

fn build_italian_gap() -> Arc<DomainDictionary> {
    let rows = restaurant_rows(&[
        ("pizza hut city centre", "italian", "centre", "cheap"),
        ("da vinci pizzeria", "italian", "north", "cheap"),
        ("hotel du vin and bistro", "european", "centre", "moderate"),
        ("grafton hotel restaurant", "british", "east", "expensive"),
        ("curry garden", "indian", "centre", "expensive"),
    ]);
    assemble(restaurant_schema(), &RESTAURANT_COLUMNS, rows)
}

/// Small restaurant table where Italian food is only cheap and the only
/// moderately priced food is European.
pub fn italian_gap_restaurants() -> Arc<DomainDictionary> {
    static CELL: OnceLock<Arc<DomainDictionary>> = OnceLock::new();
    cached(&CELL, build_italian_gap)
}

fn hotel_schema() -> DomainSchema {
    DomainSchema::new(
        "hotel",
        vec![
            slot(
                "pricerange",
                "price budget of the hotel",
                strings(&["expensive", "cheap", "moderate"]),
            ),
            slot(
                "type",
                "what is the type of the hotel",
                strings(&["guesthouse", "hotel"]),
            ),
            slot(
                "parking",
                "whether the hotel has parking",
                strings(&["free", "no", "yes"]),
            ),
            slot("bookday", "day of the hotel booking", strings(&DAYS)),
            slot(
                "bookpeople",
                "number of people for the hotel booking",
                one_to_eight(),
            ),
            slot("bookstay", "length of stay at the hotel", one_to_eight()),
            slot(
                "stars",
                "star rating of the hotel",
                strings(&["0", "1", "2", "3", "4", "5"]),
            ),
            slot(
                "internet",
                "whether the hotel has internet",
                strings(&["free", "no", "yes"]),
            ),
            slot("name", "name of the hotel", open()),
            slot("area", "area or place of the hotel", strings(&AREAS)),
            slot("address", "address of the hotel", open()),
            slot("phone", "phone number of the hotel", open()),
            slot("postcode", "postal code of the hotel", open()),
            slot("ref", "reference number of the hotel booking", open()),
        ],
    )
    .expect("unique captions")
}

const HOTEL_COLUMNS: [&str; 11] = [
    "id",
    "name",
    "type",
    "area",
    "pricerange",
    "stars",
    "internet",
    "parking",
    "address",
    "phone",
    "postcode",
];

fn build_hotel() -> Arc<DomainDictionary> {
    let entries: [(&str, &str, &str, &str, &str, &str, &str); 20] = [
        (
            "a and b guest house",
            "guesthouse",
            "east",
            "moderate",
            "4",
            "yes",
            "no",
        ),
        (
            "allenbell",
            "guesthouse",
            "east",
            "cheap",
            "4",
            "yes",
            "yes",
        ),
        (
            "alexander bed and breakfast",
            "guesthouse",
            "centre",
            "cheap",
            "4",
            "yes",
            "yes",
        ),
        (
            "ashley hotel",
            "hotel",
            "north",
            "moderate",
            "2",
            "yes",
            "yes",
        ),
        (
            "autumn house",
            "guesthouse",
            "east",
            "cheap",
            "4",
            "yes",
            "yes",
        ),
        (
            "carolina bed and breakfast",
            "guesthouse",
            "east",
            "moderate",
            "4",
            "yes",
            "yes",
        ),
        ("cityroomz", "hotel", "centre", "moderate", "0", "yes", "no"),
        (
            "express by holiday inn cambridge",
            "hotel",
            "east",
            "expensive",
            "2",
            "yes",
            "yes",
        ),
        (
            "gonville hotel",
            "hotel",
            "centre",
            "expensive",
            "3",
            "yes",
            "yes",
        ),
        (
            "hamilton lodge",
            "guesthouse",
            "north",
            "moderate",
            "3",
            "yes",
            "yes",
        ),
        (
            "huntingdon marriott hotel",
            "hotel",
            "west",
            "expensive",
            "4",
            "yes",
            "yes",
        ),
        (
            "leverton house",
            "guesthouse",
            "east",
            "cheap",
            "4",
            "yes",
            "yes",
        ),
        (
            "lovell lodge",
            "hotel",
            "north",
            "moderate",
            "2",
            "yes",
            "yes",
        ),
        (
            "university arms hotel",
            "hotel",
            "centre",
            "expensive",
            "4",
            "yes",
            "yes",
        ),
        (
            "warkworth house",
            "guesthouse",
            "east",
            "moderate",
            "4",
            "yes",
            "yes",
        ),
        (
            "worth house",
            "guesthouse",
            "north",
            "cheap",
            "4",
            "yes",
            "yes",
        ),
        (
            "the cambridge belfry",
            "hotel",
            "west",
            "cheap",
            "4",
            "yes",
            "yes",
        ),
        (
            "el shaddai",
            "guesthouse",
            "centre",
            "cheap",
            "0",
            "yes",
            "yes",
        ),
        (
            "finches bed and breakfast",
            "guesthouse",
            "west",
            "cheap",
            "4",
            "yes",
            "yes",
        ),
        (
            "acorn guest house",
            "guesthouse",
            "north",
            "moderate",
            "4",
            "no",
            "yes",
        ),
    ];
    let rows = entries
        .iter()
        .enumerate()
        .map(|(i, (name, kind, area, price, stars, internet, parking))| {
            let mut row = vec![(i).to_string()];
            row.extend(
                [name, kind, area, price, stars, internet, parking]
                    .iter()
                    .map(|s| s.to_string()),
            );
            row.extend([address(i + 40), phone(i + 40), postcode(i + 40)]);
            row
        })
        .collect();
    assemble(hotel_schema(), &HOTEL_COLUMNS, rows)
}

/// Hotel domain: 20 rows. Two moderately priced 2-star hotels, five 4-star
/// guesthouses in the east with internet and parking.
pub fn hotel() -> Arc<DomainDictionary> {
    static CELL: OnceLock<Arc<DomainDictionary>> = OnceLock::new();
    cached(&CELL, build_hotel)
}

const STATIONS: [&str; 13] = [
    "birmingham new street",
    "bishops stortford",
    "broxbourne",
    "cambridge",
    "ely",
    "kings lynn",
    "leicester",
    "london kings cross",
    "london liverpool street",
    "norwich",
    "peterborough",
    "stansted airport",
    "stevenage",
];

fn build_train() -> Arc<DomainDictionary> {
    let schema = DomainSchema::new(
        "train",
        vec![
            slot("arriveby", "arrival time of the train", open()),
            slot(
                "departure",
                "departure location of the train",
                strings(&STATIONS),
            ),
            slot("day", "day of the train", strings(&DAYS)),
            slot(
                "bookpeople",
                "how many train tickets you need",
                strings(&["0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "15"]),
            ),
            slot("leaveat", "leaving time for the train", open()),
            slot(
                "destination",
                "destination of the train",
                strings(&STATIONS),
            ),
            slot("trainid", "id of the train", open()),
            slot("ref", "reference number of the train booking", open()),
            slot("price", "price of the train", open()),
            slot("duration", "duration of the travel", open()),
        ],
    )
    .expect("unique captions");
    let columns = [
        "trainID",
        "departure",
        "destination",
        "day",
        "leaveAt",
        "arriveBy",
        "duration",
        "price",
    ];
    let entries = [
        (
            "cambridge",
            "bishops stortford",
            "thursday",
            "05:29",
            "06:07",
        ),
        (
            "cambridge",
            "bishops stortford",
            "thursday",
            "21:29",
            "22:07",
        ),
        (
            "bishops stortford",
            "cambridge",
            "thursday",
            "20:15",
            "20:53",
        ),
        (
            "bishops stortford",
            "cambridge",
            "thursday",
            "07:29",
            "08:07",
        ),
        (
            "london kings cross",
            "cambridge",
            "friday",
            "09:17",
            "10:08",
        ),
        (
            "cambridge",
            "london kings cross",
            "friday",
            "11:00",
            "11:51",
        ),
        ("ely", "cambridge", "monday", "07:35", "07:52"),
        ("norwich", "cambridge", "sunday", "10:16", "11:35"),
        (
            "cambridge",
            "stansted airport",
            "wednesday",
            "13:40",
            "14:08",
        ),
        ("peterborough", "cambridge", "tuesday", "12:34", "13:24"),
        ("stevenage", "cambridge", "saturday", "15:54", "16:43"),
        ("cambridge", "leicester", "wednesday", "08:21", "10:06"),
    ];
    let rows = entries
        .iter()
        .enumerate()
        .map(|(i, (from, to, day, leave, arrive))| {
            vec![
                format!("tr{:04}", 1000 + i * 37),
                from.to_string(),
                to.to_string(),
                day.to_string(),
                leave.to_string(),
                arrive.to_string(),
                format!("{} minutes", 38 + i * 3),
                format!("{:.2} pounds", 4.4 + i as f64 * 2.5),
            ]
        })
        .collect();
    assemble(schema, &columns, rows)
}

/// Train domain: 12 rows, including Thursday services between Cambridge and
/// Bishops Stortford in both directions.
pub fn train() -> Arc<DomainDictionary> {
    static CELL: OnceLock<Arc<DomainDictionary>> = OnceLock::new();
    cached(&CELL, build_train)
}

fn build_attraction() -> Arc<DomainDictionary> {
    let schema = DomainSchema::new(
        "attraction",
        vec![
            slot("area", "area to search for attractions", strings(&AREAS)),
            slot("name", "name of the attraction", open()),
            slot(
                "type",
                "type of the attraction",
                strings(&[
                    "architecture",
                    "boat",
                    "cinema",
                    "college",
                    "concerthall",
                    "entertainment",
                    "museum",
                    "multiple sports",
                    "nightclub",
                    "park",
                    "swimmingpool",
                    "theatre",
                ]),
            ),
            slot("entrancefee", "how much is the entrance fee", open()),
            slot("address", "address of the attraction", open()),
            slot("phone", "phone number of the attraction", open()),
            slot("postcode", "postal code of the attraction", open()),
        ],
    )
    .expect("unique captions");
    let columns = [
        "id",
        "name",
        "type",
        "area",
        "entrance fee",
        "address",
        "phone",
        "postcode",
    ];
    let entries = [
        ("all saints church", "architecture", "centre", "free"),
        (
            "great saint mary's church",
            "architecture",
            "centre",
            "2 pounds",
        ),
        ("broughton house gallery", "museum", "centre", "free"),
        (
            "cambridge and county folk museum",
            "museum",
            "west",
            "3.50 pounds",
        ),
        ("kettle's yard", "museum", "west", "free"),
        ("fitzwilliam museum", "museum", "centre", "free"),
        (
            "cambridge museum of technology",
            "museum",
            "east",
            "5 pounds",
        ),
        (
            "abbey pool and astroturf pitch",
            "swimmingpool",
            "east",
            "?",
        ),
        ("parkside pools", "swimmingpool", "centre", "?"),
        ("cherry hinton water play", "park", "east", "free"),
        ("milton country park", "park", "north", "free"),
        (
            "cambridge university botanic gardens",
            "park",
            "centre",
            "4 pounds",
        ),
        ("vue cinema", "cinema", "centre", "?"),
        ("cineworld cinema", "cinema", "south", "?"),
        ("club salsa", "nightclub", "centre", "5 pounds"),
        ("the fez club", "nightclub", "centre", "5 pounds"),
        ("christ's college", "college", "centre", "free"),
        ("churchill college", "college", "west", "free"),
        ("scudamores punting co", "boat", "centre", "?"),
        ("riverboat georgina", "boat", "north", "?"),
        ("adc theatre", "theatre", "centre", "?"),
        ("mumford theatre", "theatre", "centre", "?"),
        ("funky fun house", "entertainment", "east", "?"),
        ("whale of a time", "entertainment", "west", "?"),
    ];
    let rows = entries
        .iter()
        .enumerate()
        .map(|(i, (name, kind, area, fee))| {
            vec![
                i.to_string(),
                name.to_string(),
                kind.to_string(),
                area.to_string(),
                fee.to_string(),
                address(i + 80),
                phone(i + 80),
                postcode(i + 80),
            ]
        })
        .collect();
    assemble(schema, &columns, rows)
}

/// Attraction domain: 24 rows; the entrance fee column needs the caption map.
pub fn attraction() -> Arc<DomainDictionary> {
    static CELL: OnceLock<Arc<DomainDictionary>> = OnceLock::new();
    cached(&CELL, build_attraction)
}

/// The four domain dictionaries, in a fixed order.
pub fn all() -> Vec<Arc<DomainDictionary>> {
    vec![hotel(), train(), attraction(), restaurant()]
}

pub fn by_domain(domain: &str) -> Option<Arc<DomainDictionary>> {
    match domain {
        "hotel" => Some(hotel()),
        "train" => Some(train()),
        "attraction" => Some(attraction()),
        "restaurant" => Some(restaurant()),
        _ => None,
    }
}

/// A deterministic 50-row hotel-shaped table for filter oracles.
pub fn filter_oracle_hotels(seed: u64) -> Arc<DomainDictionary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..50)
        .map(|i| {
            vec![
                i.to_string(),
                format!("hotel {i}"),
                ["guesthouse", "hotel"]
                    .choose(&mut rng)
                    .unwrap()
                    .to_string(),
                AREAS.choose(&mut rng).unwrap().to_string(),
                ["cheap", "moderate", "expensive"]
                    .choose(&mut rng)
                    .unwrap()
                    .to_string(),
                rng.gen_range(0..=5).to_string(),
                ["yes", "no"].choose(&mut rng).unwrap().to_string(),
                ["yes", "no"].choose(&mut rng).unwrap().to_string(),
                address(i),
                phone(i),
                postcode(i),
            ]
        })
        .collect();
    assemble(hotel_schema(), &HOTEL_COLUMNS, rows)
}

/// A scripted user side of a conversation, with the annotated goal at each
/// user turn.
#[derive(Debug, Clone)]
pub struct ScriptedConversation {
    pub name: &'static str,
    pub domain: &'static str,
    pub conversation: RawConversation,
}

fn annotated(
    id: &str,
    domain: &str,
    user_turns: &[(&str, &[(&str, &str)])],
    requested: &[&str],
) -> RawConversation {
    let mut turns = Vec::new();
    for (i, (utterance, state)) in user_turns.iter().enumerate() {
        let slot_values = state
            .iter()
            .map(|(k, v)| (format!("{domain}-{k}"), vec![v.to_string()]))
            .collect();
        turns.push(RawTurn {
            speaker: "USER".into(),
            utterance: utterance.to_string(),
            frames: vec![RawFrame {
                service: domain.to_string(),
                state: FrameState {
                    active_intent: format!("find_{domain}"),
                    requested_slots: if i + 1 == user_turns.len() {
                        requested.iter().map(|r| format!("{domain}-{r}")).collect()
                    } else {
                        Vec::new()
                    },
                    slot_values,
                },
            }],
        });
        turns.push(RawTurn {
            speaker: "SYSTEM".into(),
            utterance: String::new(),
            frames: Vec::new(),
        });
    }
    RawConversation {
        dialogue_id: id.to_string(),
        services: vec![domain.to_string()],
        turns,
    }
}

/// Hotel conversation whose user keeps talking after the task is done: the
/// engine finishes after three of its four user turns.
pub fn hotel_two_star_transcript() -> ScriptedConversation {
    let goal: &[(&str, &str)] = &[
        ("pricerange", "moderate"),
        ("stars", "2"),
        ("type", "hotel"),
    ];
    let goal_named: &[(&str, &str)] = &[
        ("name", "ashley hotel"),
        ("pricerange", "moderate"),
        ("stars", "2"),
        ("type", "hotel"),
    ];
    ScriptedConversation {
        name: "hotel_two_star",
        domain: "hotel",
        conversation: annotated(
            "fixture-hotel-two-star",
            "hotel",
            &[
                (
                    "I am looking for a place to stay. The hotel should have a star of 2 and should be in the moderate price range.",
                    goal,
                ),
                ("I don't have a preference, actually. Which one do you recommend?", goal),
                ("I choose the ashley hotel. What is their address, please?", goal_named),
                ("No, I just need the address. Ok thank you that is all I needed today.", goal_named),
            ],
            &["address"],
        ),
    }
}

/// Hotel conversation that mentions "hotel" as the type while the matching
/// entities are guesthouses.
pub fn hotel_east_guesthouse_transcript() -> ScriptedConversation {
    let first: &[(&str, &str)] = &[("area", "east"), ("internet", "yes"), ("type", "hotel")];
    let second: &[(&str, &str)] = &[
        ("area", "east"),
        ("internet", "yes"),
        ("parking", "yes"),
        ("stars", "4"),
        ("type", "hotel"),
    ];
    let booked: &[(&str, &str)] = &[
        ("area", "east"),
        ("internet", "yes"),
        ("parking", "yes"),
        ("stars", "4"),
        ("type", "hotel"),
        ("bookday", "wednesday"),
        ("bookpeople", "1"),
        ("bookstay", "5"),
    ];
    ScriptedConversation {
        name: "hotel_east_guesthouse",
        domain: "hotel",
        conversation: annotated(
            "fixture-hotel-east-guesthouse",
            "hotel",
            &[
                ("I am looking for a place to stay. The hotel should be in the east and should include free wifi.", first),
                ("The rating should be 4 stars and I want free parking to be included.", second),
                ("No, will you just book me something for Wednesday for 1 person for 5 nights?", booked),
                ("That's all I need, thank you!", booked),
            ],
            &[],
        ),
    }
}

/// Restaurant conversation completed with area and food only; the annotated
/// goal also names a price range and the restaurant.
pub fn restaurant_north_french_transcript() -> ScriptedConversation {
    let first: &[(&str, &str)] = &[("area", "north"), ("food", "french")];
    let full: &[(&str, &str)] = &[
        ("area", "north"),
        ("food", "french"),
        ("name", "two two"),
        ("pricerange", "expensive"),
    ];
    ScriptedConversation {
        name: "restaurant_north_french",
        domain: "restaurant",
        conversation: annotated(
            "fixture-restaurant-north-french",
            "restaurant",
            &[
                ("Hello. Can you suggest a French restaurant in the north end?", first),
                ("I am interested in the one in the north. Could I have their postcode and address?", full),
                ("Yes, that will be all. Thanks.", full),
            ],
            &["postcode", "address"],
        ),
    }
}

/// Train conversation whose annotation keeps the original direction after
/// the user reverses it.
pub fn train_reversed_direction_transcript() -> ScriptedConversation {
    let first: &[(&str, &str)] = &[
        ("departure", "cambridge"),
        ("destination", "bishops stortford"),
    ];
    let timed: &[(&str, &str)] = &[
        ("departure", "cambridge"),
        ("destination", "bishops stortford"),
        ("day", "thursday"),
        ("leaveat", "20:15"),
    ];
    let booked: &[(&str, &str)] = &[
        ("departure", "cambridge"),
        ("destination", "bishops stortford"),
        ("day", "thursday"),
        ("leaveat", "20:15"),
        ("bookpeople", "7"),
    ];
    ScriptedConversation {
        name: "train_reversed_direction",
        domain: "train",
        conversation: annotated(
            "fixture-train-reversed",
            "train",
            &[
                ("Can I get a train from Cambridge to Bishops Stortford?", first),
                ("No. I need to depart from Bishops Stortford and go to Cambridge on Thursday after 20:15.", timed),
                ("Yes, that train would work better for me. Can you book tickets for 7 people please?", booked),
                ("Great! Thank you!", booked),
            ],
            &[],
        ),
    }
}

/// Slots a synthetic user states, per domain.
fn goal_slots(domain: &str) -> &'static [&'static str] {
    match domain {
        "restaurant" => &["pricerange", "area", "food"],
        "hotel" => &["pricerange", "area", "stars", "internet", "parking"],
        "attraction" => &["area", "type"],
        "train" => &["departure", "destination", "day"],
        _ => &[],
    }
}

/// How a synthetic user states one slot value.
pub fn slot_phrase(caption: &str, value: &str) -> String {
    match (caption, value) {
        ("area", v) => format!("in the {v}"),
        ("pricerange", v) => format!("in the {v} price range"),
        ("food", v) => format!("serving {v} food"),
        ("stars", v) => format!("with {v} stars"),
        ("internet", "yes") => "with free wifi".into(),
        ("internet", _) => "with no wifi".into(),
        ("parking", "yes") => "with free parking".into(),
        ("parking", _) => "with no parking".into(),
        ("type", v) => format!("that is a {v}"),
        ("departure", v) => format!("from {v}"),
        ("destination", v) => format!("to {v}"),
        ("day", v) => format!("on {v}"),
        (c, v) => format!("with {c} {v}"),
    }
}

fn wrong_phrase(caption: &str, rng: &mut ChaCha8Rng) -> Option<(String, String)> {
    let word = *["canap", "zorblax", "quux", "blorf"].choose(rng).unwrap();
    match caption {
        "food" => Some((format!("that serves {word}"), word.to_string())),
        "area" => {
            let place = *["downtown", "uptown", "suburb"].choose(rng).unwrap();
            Some((format!("in the {place} area"), place.to_string()))
        }
        _ => None,
    }
}

fn domain_noun(domain: &str) -> &'static str {
    match domain {
        "restaurant" => "a restaurant",
        "hotel" => "a place to stay",
        "attraction" => "an attraction",
        "train" => "a train",
        _ => "something",
    }
}

const CLOSINGS: [&str; 4] = [
    "That's all I need, thanks.",
    "No, that will be all.",
    "Nothing else, thank you.",
    "No thanks, that is all.",
];

/// Synthetic single-domain conversations generated from goals over a fixture
/// database. Every goal is satisfiable; paths vary between a direct request,
/// an added constraint, a wrong value followed by a correction, and an
/// unsatisfiable request followed by a change.
pub fn synthetic_conversations(
    dict: &DomainDictionary,
    count: usize,
    seed: u64,
) -> Vec<RawConversation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = dict.domain().to_string();
    let candidates: Vec<&str> = goal_slots(&domain)
        .iter()
        .copied()
        .filter(|c| dict.schema.slot(c).is_some_and(|s| s.filterable))
        .collect();
    let mut out = Vec::new();
    while out.len() < count {
        let row = dict
            .database
            .rows
            .choose(&mut rng)
            .expect("non-empty fixture db");
        let size = rng.gen_range(1..=candidates.len().min(3));
        let mut chosen: Vec<&str> = candidates
            .choose_multiple(&mut rng, size)
            .copied()
            .collect();
        chosen.sort_by_key(|c| dict.schema.position(c));
        let goal: IndexMap<String, String> = chosen
            .iter()
            .filter_map(|c| {
                let spec = dict.schema.slot(c)?;
                let value = spec.normalize(row.get(dict.column_for(c)?)?);
                (!value.is_empty() && value != "?").then(|| (c.to_string(), value))
            })
            .collect();
        if goal.is_empty() {
            continue;
        }
        let id = format!("synthetic-{domain}-{:03}", out.len());
        let path = out.len() % 4;
        if let Some(conversation) = build_path(dict, &goal, path, &id, &mut rng) {
            out.push(conversation);
        }
    }
    out
}

fn describe(goal: &IndexMap<String, String>) -> String {
    goal.iter()
        .map(|(k, v)| slot_phrase(k, v))
        .collect::<Vec<_>>()
        .join(" and ")
}

fn build_path(
    dict: &DomainDictionary,
    goal: &IndexMap<String, String>,
    path: usize,
    id: &str,
    rng: &mut ChaCha8Rng,
) -> Option<RawConversation> {
    let domain = dict.domain();
    let noun = domain_noun(domain);
    let closing = *CLOSINGS.choose(rng).unwrap();
    let as_pairs = |m: &IndexMap<String, String>| -> Vec<(String, String)> {
        m.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    };
    let full = as_pairs(goal);
    let direct = || {
        vec![(
            format!("I am looking for {noun} {}.", describe(goal)),
            full.clone(),
        )]
    };
    // Paths a goal cannot take (no slot with a wrong-value phrasing, no
    // unsatisfiable alternative) fall back to the direct request.
    let opening: Option<Vec<(String, Vec<(String, String)>)>> = match path {
        // Added constraint.
        1 if goal.len() >= 2 => {
            let split = rng.gen_range(1..goal.len());
            let first: IndexMap<String, String> = goal
                .iter()
                .take(split)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            let rest: IndexMap<String, String> = goal
                .iter()
                .skip(split)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            Some(vec![
                (
                    format!("I am looking for {noun} {}.", describe(&first)),
                    as_pairs(&first),
                ),
                (
                    format!("Also, it should be {}.", describe(&rest)),
                    full.clone(),
                ),
            ])
        }
        // Wrong value, then a correction.
        2 => goal
            .keys()
            .find(|c| wrong_phrase(c, rng).is_some())
            .cloned()
            .and_then(|target| {
                let (phrase, wrong) = wrong_phrase(&target, rng)?;
                let mut said: IndexMap<String, String> = goal.clone();
                said.shift_remove(&target);
                let mut first_state = as_pairs(&said);
                first_state.push((target.clone(), wrong));
                let lead = if said.is_empty() {
                    format!("I am looking for {noun} {phrase}.")
                } else {
                    format!("I am looking for {noun} {} {phrase}.", describe(&said))
                };
                Some(vec![
                    (lead, first_state),
                    (
                        format!("Sorry, I meant {}.", slot_phrase(&target, &goal[&target])),
                        full.clone(),
                    ),
                ])
            }),
        // Unsatisfiable request, then a change.
        3 => {
            let mut found = None;
            'outer: for (caption, value) in goal {
                let Some(spec) = dict.schema.slot(caption) else {
                    continue;
                };
                for alternative in spec.normalized_permitted() {
                    if &alternative == value {
                        continue;
                    }
                    let mut trial = goal.clone();
                    trial.insert(caption.clone(), alternative.clone());
                    if crate::retrieval::filter_entities(dict, trial.iter())
                        .is_ok_and(|r| r.is_empty())
                    {
                        found = Some((caption.clone(), trial));
                        break 'outer;
                    }
                }
            }
            found.map(|(caption, trial)| {
                vec![
                    (
                        format!("I am looking for {noun} {}.", describe(&trial)),
                        as_pairs(&trial),
                    ),
                    (
                        format!(
                            "Okay, then {} instead.",
                            slot_phrase(&caption, &goal[&caption])
                        ),
                        full.clone(),
                    ),
                ]
            })
        }
        _ => None,
    };
    let mut turns = opening.unwrap_or_else(direct);
    turns.push((closing.to_string(), full.clone()));
    // Some users confirm explicitly and keep talking afterwards.
    if rng.gen_bool(0.5) {
        turns.push((
            "That works for me, I will take the first one.".into(),
            full.clone(),
        ));
        if rng.gen_bool(0.5) {
            turns.push(("Thanks again, goodbye.".into(), full.clone()));
        }
    }
    let borrowed: Vec<(&str, Vec<(&str, &str)>)> = turns
        .iter()
        .map(|(u, s)| {
            (
                u.as_str(),
                s.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect(),
            )
        })
        .collect();
    let with_slices: Vec<(&str, &[(&str, &str)])> =
        borrowed.iter().map(|(u, s)| (*u, s.as_slice())).collect();
    Some(annotated(id, domain, &with_slices, &[]))
}

/// A random user script for state-machine fuzzing: preference statements
/// (sometimes with wrong values), closings, rejections, acceptances and noise.
pub fn random_user_script(
    dict: &DomainDictionary,
    rng: &mut ChaCha8Rng,
    max_len: usize,
) -> Vec<String> {
    let len = rng.gen_range(1..=max_len.max(1));
    let slots: Vec<&SlotSpec> = dict
        .schema
        .extraction_slots()
        .filter(|s| s.is_constrained())
        .collect();
    let mut script = Vec::new();
    for _ in 0..len {
        let utterance = match rng.gen_range(0..10) {
            0..=3 => {
                let n = rng.gen_range(1..=3);
                let phrases: Vec<String> = slots
                    .choose_multiple(rng, n)
                    .map(|s| {
                        let permitted = s.normalized_permitted();
                        if rng.gen_bool(0.15) {
                            wrong_phrase(&s.caption, rng)
                                .map(|(p, _)| p)
                                .unwrap_or_else(|| {
                                    slot_phrase(&s.caption, permitted.choose(rng).unwrap())
                                })
                        } else {
                            slot_phrase(&s.caption, permitted.choose(rng).unwrap())
                        }
                    })
                    .collect();
                format!(
                    "I want {} {}.",
                    domain_noun(dict.domain()),
                    phrases.join(" and ")
                )
            }
            4 | 5 => CLOSINGS.choose(rng).unwrap().to_string(),
            6 => [
                "None of these, show me something else.",
                "I reject all of these.",
                "No.",
            ]
            .choose(rng)
            .unwrap()
            .to_string(),
            7 => "I will take the first one.".to_string(),
            8 => [
                "Hmm, let me think.",
                "Something quiet with a nice view.",
                "What do you have?",
            ]
            .choose(rng)
            .unwrap()
            .to_string(),
            _ => "Yes, cheap please.".to_string(),
        };
        script.push(utterance);
    }
    script
}

/// Goal corrections for conversations whose annotation contradicts what the
/// user actually asked for, keyed by dialogue id.
pub fn goal_corrections() -> BTreeMap<String, IndexMap<String, String>> {
    let mut out = BTreeMap::new();
    out.insert(
        "fixture-train-reversed".to_string(),
        [
            ("departure", "bishops stortford"),
            ("destination", "cambridge"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect(),
    );
    out
}
