//! Template realization: dialogue acts -> surface tokens, and for user
//! turns also the aligned IOB labels and intent set.
//!
//! Surface forms are built from segments: literal template text, or a slot
//! value whose tokens get B-/I- labels. Several slot requests and offers
//! share the same wording across domains on purpose, so the domain of an
//! isolated utterance can be genuinely ambiguous without history.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{SemanticFrame, Turn};
use crate::sim::acts::{SysAct, UserAct};

enum Seg {
    Lit(String),
    Val { slot: String, value: String },
}

fn lit(s: &str) -> Seg {
    Seg::Lit(s.to_string())
}

fn val(slot: &str, value: &str) -> Seg {
    Seg::Val {
        slot: slot.to_string(),
        value: value.to_string(),
    }
}

/// Expand a template over segments: `{v}` marks where the value goes.
fn fill(template: &str, slot: &str, value: &str) -> Vec<Seg> {
    let mut out = Vec::new();
    let (before, after) = template.split_once("{v}").expect("template without {v}");
    if !before.trim().is_empty() {
        out.push(lit(before.trim()));
    }
    out.push(val(slot, value));
    if !after.trim().is_empty() {
        out.push(lit(after.trim()));
    }
    out
}

fn segs_to_turn_parts(segs: &[Seg]) -> (Vec<String>, Vec<String>) {
    let mut tokens = Vec::new();
    let mut iob = Vec::new();
    for seg in segs {
        match seg {
            Seg::Lit(s) => {
                for t in s.split_whitespace() {
                    tokens.push(t.to_string());
                    iob.push("O".to_string());
                }
            }
            Seg::Val { slot, value } => {
                for (i, t) in value.split_whitespace().enumerate() {
                    tokens.push(t.to_string());
                    iob.push(format!("{}{slot}", if i == 0 { "B-" } else { "I-" }));
                }
            }
        }
    }
    (tokens, iob)
}

/// Everyday word used when an act mentions a slot without a value.
fn slot_word(slot: &str) -> &'static str {
    match slot {
        "date" => "date",
        "time" => "time",
        "num_tickets" => "ticket count",
        "num_people" => "group size",
        "movie" => "movie",
        "theatre_name" => "theatre",
        "restaurant_name" => "restaurant",
        "category" => "cuisine",
        "location" => "area",
        "price_range" => "price",
        "rating" => "rating",
        "meal" => "meal",
        other => panic!("unknown slot {other}"),
    }
}

fn inform_templates(slot: &str) -> &'static [&'static str] {
    match slot {
        "date" => &["{v}", "on {v}", "make it {v}", "{v} works", "{v} please"],
        "time" => &["{v}", "at {v}", "around {v}", "{v} would be great", "make it {v}"],
        "num_tickets" => &[
            "{v} tickets",
            "{v} tickets please",
            "get {v} tickets",
            "make it {v}",
            "{v}",
        ],
        "num_people" => &[
            "{v} people",
            "for {v} people",
            "a table for {v}",
            "make it {v}",
            "{v}",
        ],
        "movie" => &[
            "{v}",
            "the movie is {v}",
            "{v} please",
            "i want to see {v}",
            "tickets for {v}",
        ],
        "theatre_name" => &["{v}", "at {v}", "the {v} theatre", "{v} please", "at the {v}"],
        "restaurant_name" => &[
            "{v}",
            "at {v}",
            "{v} please",
            "the restaurant is {v}",
            "book {v}",
        ],
        "category" => &["{v}", "{v} food", "something {v}", "{v} cuisine", "maybe {v}"],
        "location" => &[
            "{v}",
            "in {v}",
            "near {v}",
            "around {v}",
            "somewhere in {v}",
        ],
        "price_range" => &[
            "{v}",
            "{v} price",
            "something {v}",
            "{v} please",
            "keep it {v}",
        ],
        "rating" => &["{v}", "{v} rating", "at least {v}", "{v} or better", "rated {v}"],
        "meal" => &["{v}", "for {v}", "{v} time", "{v} please", "a {v} place"],
        other => panic!("unknown slot {other}"),
    }
}

const GREET_USER: [&str; 5] = ["hi", "hello", "hey", "good day", "hi there"];
const AFFIRM: [&str; 6] = ["yes", "sounds good", "that works", "yes please", "sure", "ok"];
const AFFIRM_SLOT: [&str; 5] = [
    "{v} sounds good",
    "{v} works for me",
    "yes , {v} is fine",
    "{v} is perfect",
    "ok , {v} then",
];
const DENY: [&str; 5] = [
    "that doesn't work",
    "no",
    "that won't do",
    "no , not that",
    "i'd rather not",
];
const DENY_SLOT: [&str; 5] = [
    "that {w} doesn't work for me",
    "none of those {w} options work",
    "a different {w} please",
    "not that {w}",
    "the {w} doesn't suit me",
];
const DONT_CARE: [&str; 5] = [
    "any {w} is fine",
    "i don't care about the {w}",
    "whatever {w} works",
    "no preference on the {w}",
    "any {w} will do",
];
const REQUEST_ALTS: [&str; 5] = [
    "are there any other options ?",
    "anything else ?",
    "what else do you have ?",
    "other options please",
    "can you suggest something else ?",
];
const THANK_YOU: [&str; 5] = [
    "thanks",
    "thank you",
    "thanks a lot",
    "thank you so much",
    "much appreciated",
];
const GOOD_BYE_USER: [&str; 5] = ["bye", "goodbye", "see you", "that's all , bye", "bye for now"];
const CANT_UNDERSTAND: [&str; 5] = [
    "what do you mean ?",
    "i don't understand",
    "could you repeat that ?",
    "what was that ?",
    "huh ?",
];
const UNKNOWN_INTENT: [&str; 5] = [
    "what's the weather like ?",
    "tell me a joke",
    "what time is it now ?",
    "play some music",
    "who won the game last night ?",
];

fn announce_base(domain: &str) -> &'static [&'static str] {
    match domain {
        "movies" => &[
            "i want to buy movie tickets",
            "i need movie tickets",
            "get me some movie tickets",
            "help me book movie tickets",
            "i would like to purchase movie tickets",
        ],
        "find-restaurants" => &[
            "i want a restaurant",
            "find me a restaurant",
            "i am looking for a restaurant",
            "search for restaurants",
            "help me find a restaurant",
        ],
        "reserve-restaurant" => &[
            "i want to reserve a table",
            "make a restaurant reservation",
            "book a table for me",
            "i need a table",
            "reserve a table",
        ],
        other => panic!("unknown domain {other}"),
    }
}

/// Announce templates that weave two slot values into one natural sentence.
/// `{a}` / `{b}` are the two slots named in the return value.
fn announce_combined(domain: &str) -> Option<(&'static str, &'static str, &'static [&'static str])> {
    match domain {
        "movies" => Some((
            "num_tickets",
            "movie",
            &[
                "get me {a} tickets to see {b}",
                "i need {a} tickets for {b}",
                "buy {a} tickets to {b}",
                "book {a} seats for {b}",
                "{a} tickets for {b} please",
            ],
        )),
        "find-restaurants" => Some((
            "category",
            "location",
            &[
                "find {a} restaurants in {b}",
                "i want a {a} restaurant in {b}",
                "search for {a} places in {b}",
                "looking for {a} food in {b}",
                "any good {a} restaurants in {b} ?",
            ],
        )),
        "reserve-restaurant" => Some((
            "restaurant_name",
            "num_people",
            &[
                "make a reservation at {a} for {b}",
                "book a table at {a} for {b} people",
                "i want a table for {b} at {a}",
                "reserve {a} for a party of {b}",
                "get me a table at {a} , {b} people",
            ],
        )),
        _ => None,
    }
}

fn fill_two(template: &str, a: (&str, &str), b: (&str, &str)) -> Vec<Seg> {
    let mut out = Vec::new();
    let mut rest = template;
    while !rest.is_empty() {
        if let Some(i) = rest.find('{') {
            if !rest[..i].trim().is_empty() {
                out.push(lit(rest[..i].trim()));
            }
            let close = rest.find('}').expect("unclosed placeholder");
            let (slot, value) = if &rest[i + 1..close] == "a" { a } else { b };
            out.push(val(slot, value));
            rest = &rest[close + 1..];
        } else {
            if !rest.trim().is_empty() {
                out.push(lit(rest.trim()));
            }
            rest = "";
        }
    }
    out
}

fn inform_segments(pairs: &[(String, String)], rng: &mut impl Rng) -> Vec<Seg> {
    let mut segs = Vec::new();
    for (i, (slot, value)) in pairs.iter().enumerate() {
        if i > 0 {
            segs.push(lit("and"));
        }
        let t = inform_templates(slot).choose(rng).unwrap();
        segs.extend(fill(t, slot, value));
    }
    segs
}

/// Realize a task announcement: intent plus any volunteered slot values.
fn announce_segments(domain: &str, informs: &[(String, String)], rng: &mut impl Rng) -> Vec<Seg> {
    if let Some((sa, sb, templates)) = announce_combined(domain) {
        let a = informs.iter().find(|(s, _)| s == sa);
        let b = informs.iter().find(|(s, _)| s == sb);
        if let (Some((_, va)), Some((_, vb))) = (a, b) {
            let t = templates.choose(rng).unwrap();
            let mut segs = fill_two(t, (sa, va), (sb, vb));
            let rest: Vec<(String, String)> = informs
                .iter()
                .filter(|(s, _)| s != sa && s != sb)
                .cloned()
                .collect();
            if !rest.is_empty() {
                segs.push(lit(","));
                segs.extend(inform_segments(&rest, rng));
            }
            return segs;
        }
    }
    let mut segs = vec![lit(announce_base(domain).choose(rng).unwrap())];
    if !informs.is_empty() {
        segs.push(lit(","));
        segs.extend(inform_segments(informs, rng));
    }
    segs
}

fn user_act_segments(act: &UserAct, rng: &mut impl Rng) -> Vec<Seg> {
    match act {
        UserAct::Greeting => vec![lit(GREET_USER.choose(rng).unwrap())],
        UserAct::TaskIntent { .. } => unreachable!("announced via announce_segments"),
        UserAct::Inform(pairs) => inform_segments(pairs, rng),
        UserAct::DontCare(slot) => {
            let t = DONT_CARE.choose(rng).unwrap();
            vec![lit(&t.replace("{w}", slot_word(slot)))]
        }
        UserAct::Affirm => vec![lit(AFFIRM.choose(rng).unwrap())],
        UserAct::AffirmSlot(slot, value) => fill(AFFIRM_SLOT.choose(rng).unwrap(), slot, value),
        UserAct::Deny => vec![lit(DENY.choose(rng).unwrap())],
        UserAct::DenySlot(slot) => {
            let t = DENY_SLOT.choose(rng).unwrap();
            vec![lit(&t.replace("{w}", slot_word(slot)))]
        }
        UserAct::RequestAlts => vec![lit(REQUEST_ALTS.choose(rng).unwrap())],
        UserAct::ThankYou => vec![lit(THANK_YOU.choose(rng).unwrap())],
        UserAct::GoodBye => vec![lit(GOOD_BYE_USER.choose(rng).unwrap())],
        UserAct::CantUnderstand => vec![lit(CANT_UNDERSTAND.choose(rng).unwrap())],
        UserAct::UnknownIntent => vec![lit(UNKNOWN_INTENT.choose(rng).unwrap())],
    }
}

/// Realize one user turn. The frame's domain is the active task's domain;
/// intents are the union of the acts' labels.
pub fn realize_user(acts: &[UserAct], domain: &str, rng: &mut impl Rng) -> Turn {
    let has_task_intent = acts.iter().any(|a| matches!(a, UserAct::TaskIntent { .. }));
    let mut segs = Vec::new();
    let mut intents = Vec::new();
    let mut first = true;
    for act in acts {
        if let Some(label) = act.intent_label(!has_task_intent) {
            if !intents.contains(&label) {
                intents.push(label);
            }
        }
        let act_segs = match act {
            UserAct::TaskIntent { domain } => {
                let informs: Vec<(String, String)> = acts
                    .iter()
                    .filter_map(|a| match a {
                        UserAct::Inform(p) => Some(p.clone()),
                        _ => None,
                    })
                    .flatten()
                    .collect();
                announce_segments(domain, &informs, rng)
            }
            // Folded into the announcement above.
            UserAct::Inform(_) if has_task_intent => continue,
            other => user_act_segments(other, rng),
        };
        if !first {
            segs.push(lit(","));
        }
        segs.extend(act_segs);
        first = false;
    }
    let (tokens, iob) = segs_to_turn_parts(&segs);
    Turn::user(tokens, SemanticFrame::new(domain, intents, iob))
}

fn request_templates(slot: &str) -> &'static [&'static str] {
    // Requests for slots shared across domains deliberately avoid naming
    // the domain, so the current utterance alone cannot disambiguate it.
    match slot {
        "date" => &[
            "when is this booking for ?",
            "what date ?",
            "which day would you like ?",
            "provide a date please",
            "when should i book it for ?",
        ],
        "time" => &[
            "what time works for you ?",
            "at what time ?",
            "which time would you prefer ?",
            "provide a time please",
            "when in the day ?",
        ],
        "num_tickets" => &[
            "how many tickets ?",
            "how many tickets do you need ?",
            "for how many seats ?",
            "number of tickets ?",
            "how many seats should i book ?",
        ],
        "num_people" => &[
            "how many people ?",
            "for how many ?",
            "how big is the party ?",
            "number of guests ?",
            "how many of you will it be ?",
        ],
        "movie" => &[
            "which movie would you like to see ?",
            "what movie ?",
            "which film ?",
            "what would you like to watch ?",
            "name the movie please",
        ],
        "theatre_name" => &[
            "do you have a theatre in mind ?",
            "which theatre ?",
            "any preferred theatre ?",
            "where would you like to watch it ?",
            "at which theatre ?",
        ],
        "restaurant_name" => &[
            "which restaurant ?",
            "where do you want to go ?",
            "what is the name of the restaurant ?",
            "which place ?",
            "name the restaurant please",
        ],
        "category" => &[
            "what kind of food ?",
            "which cuisine ?",
            "any cuisine preference ?",
            "what type of food are you after ?",
            "what should it serve ?",
        ],
        "location" => &[
            "in which city ?",
            "where should i search ?",
            "which area ?",
            "around where ?",
            "what part of town ?",
        ],
        "price_range" => &[
            "what price range are you looking for ?",
            "how expensive should it be ?",
            "any budget in mind ?",
            "cheap or upscale ?",
            "what price level ?",
        ],
        "rating" => &[
            "any rating requirement ?",
            "how well rated should it be ?",
            "minimum rating ?",
            "does the rating matter ?",
            "what rating are you after ?",
        ],
        "meal" => &[
            "which meal is this for ?",
            "breakfast , lunch or dinner ?",
            "what meal ?",
            "when will you be eating ?",
            "which meal of the day ?",
        ],
        other => panic!("unknown slot {other}"),
    }
}

const GREET_SYS: [&str; 5] = [
    "hi",
    "hello",
    "greetings",
    "hi there , how can i help ?",
    "hello , what can i do for you ?",
];
// Shared by ticket bookings and table reservations: an offer mentioning
// only date and time reads the same in either domain.
const OFFER_DATE_TIME: [&str; 5] = [
    "found the following : date is {date} and time is {time}",
    "i found an opening on {date} at {time}",
    "does {time} on {date} work for you ?",
    "how about {date} at {time} ?",
    "there is availability on {date} at {time}",
];
const OFFER_RESTAURANT: [&str; 5] = [
    "{restaurant_name} is a nice {category} restaurant in {location}",
    "how about {restaurant_name} , a {category} place in {location} ?",
    "i recommend {restaurant_name} in {location} , they serve {category}",
    "{restaurant_name} in {location} matches , it is {category}",
    "you could try {restaurant_name} , {category} food in {location}",
];
const NO_AVAILABILITY: [&str; 5] = [
    "sorry , nothing matches",
    "i could not find anything for that",
    "no availability i am afraid",
    "nothing available with those constraints",
    "no results found",
];
const DIDNT_UNDERSTAND: [&str; 5] = [
    "i didn't understand that",
    "sorry , i did not get that",
    "could you rephrase ?",
    "i am not sure i understood",
    "pardon ?",
];
const GOOD_BYE_SYS: [&str; 5] = ["bye", "good bye", "have a nice day", "see you", "bye bye"];

fn confirm_templates(domain: &str) -> &'static [&'static str] {
    match domain {
        "movies" => &[
            "your booking is complete",
            "purchase confirmed with the given details",
            "tickets booked , enjoy the movie",
            "all done , your tickets are booked",
            "the purchase is complete",
        ],
        "reserve-restaurant" => &[
            "your table is booked",
            "reservation confirmed",
            "the table reservation is complete",
            "all set , reservation made",
            "booked , enjoy your meal",
        ],
        "find-restaurants" => &[
            "great , glad i could help",
            "happy to help",
            "enjoy your meal there",
            "glad that works for you",
            "good choice",
        ],
        other => panic!("unknown domain {other}"),
    }
}

fn offer_text(domain: &str, slots: &[(String, String)], rng: &mut impl Rng) -> String {
    let get = |name: &str| {
        slots
            .iter()
            .find(|(s, _)| s == name)
            .map(|(_, v)| v.as_str())
            .unwrap_or("")
    };
    if domain == "find-restaurants" {
        OFFER_RESTAURANT
            .choose(rng)
            .unwrap()
            .replace("{restaurant_name}", get("restaurant_name"))
            .replace("{category}", get("category"))
            .replace("{location}", get("location"))
    } else {
        OFFER_DATE_TIME
            .choose(rng)
            .unwrap()
            .replace("{date}", get("date"))
            .replace("{time}", get("time"))
    }
}

/// Realize one system turn. System turns carry text only, no frame.
pub fn realize_system(acts: &[SysAct], rng: &mut impl Rng) -> Turn {
    let mut parts = Vec::new();
    for act in acts {
        let text = match act {
            SysAct::Greeting => GREET_SYS.choose(rng).unwrap().to_string(),
            SysAct::Request(slot) => request_templates(slot).choose(rng).unwrap().to_string(),
            SysAct::Offer { domain, slots } => offer_text(domain, slots, rng),
            SysAct::NoAvailability => NO_AVAILABILITY.choose(rng).unwrap().to_string(),
            SysAct::Confirm { domain } => confirm_templates(domain).choose(rng).unwrap().to_string(),
            SysAct::DidntUnderstand => DIDNT_UNDERSTAND.choose(rng).unwrap().to_string(),
            SysAct::GoodBye => GOOD_BYE_SYS.choose(rng).unwrap().to_string(),
        };
        parts.push(text);
    }
    let tokens = parts
        .join(" . ")
        .split_whitespace()
        .map(str::to_string)
        .collect();
    Turn::system(tokens)
}
