//! Corpus schema: dialogues, turns, semantic frames, and the JSONL format
//! (schema v1) shared by the simulator, the recombiner and the pipeline.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::SluError;

pub const SCHEMA_VERSION: &str = "v1";

pub const DOMAINS: [&str; 3] = ["movies", "find-restaurants", "reserve-restaurant"];

/// Unified slot inventory: union of the per-domain attribute lists, with
/// name collisions (date, time, restaurant_name) shared.
pub const SLOTS: [&str; 12] = [
    "category",
    "date",
    "location",
    "meal",
    "movie",
    "num_people",
    "num_tickets",
    "price_range",
    "rating",
    "restaurant_name",
    "theatre_name",
    "time",
];

pub fn domain_slots(domain: &str) -> &'static [&'static str] {
    match domain {
        "movies" => &["date", "movie", "num_tickets", "theatre_name", "time"],
        "find-restaurants" => &[
            "category",
            "location",
            "meal",
            "price_range",
            "rating",
            "restaurant_name",
        ],
        "reserve-restaurant" => &["date", "num_people", "restaurant_name", "time"],
        _ => &[],
    }
}

/// Non-parametrized intent/dialogue-act labels.
pub const BASE_INTENTS: [&str; 12] = [
    "affirm",
    "cant_understand",
    "deny",
    "good_bye",
    "thank_you",
    "greeting",
    "request_alts",
    "movies",
    "reserve-restaurant",
    "find-restaurants",
    "contextual",
    "unknown_intent",
];

/// Task intents mark a switch of the user's primary task.
pub const TASK_INTENTS: [&str; 3] = ["movies", "reserve-restaurant", "find-restaurants"];

/// Full intent label space: base acts plus slot-parametrized
/// affirm(s) / deny(s) / dont_care(s) over the unified inventory.
pub fn intent_labels() -> Vec<String> {
    let mut v: Vec<String> = BASE_INTENTS.iter().map(|s| s.to_string()).collect();
    for slot in SLOTS {
        v.push(format!("affirm({slot})"));
        v.push(format!("deny({slot})"));
        v.push(format!("dont_care({slot})"));
    }
    v
}

/// IOB label space: O plus B-x/I-x per slot (2N+1 labels).
pub fn slot_labels() -> Vec<String> {
    let mut v = vec!["O".to_string()];
    for slot in SLOTS {
        v.push(format!("B-{slot}"));
        v.push(format!("I-{slot}"));
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

/// Gold annotation for one user turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticFrame {
    pub domain: String,
    /// Sorted, deduplicated intent label set.
    pub intents: Vec<String>,
    /// One IOB label per token.
    pub iob: Vec<String>,
}

impl SemanticFrame {
    pub fn new(domain: &str, mut intents: Vec<String>, iob: Vec<String>) -> Self {
        intents.sort();
        intents.dedup();
        SemanticFrame {
            domain: domain.to_string(),
            intents,
            iob,
        }
    }

    /// Extract slot name -> value spans from the IOB labels. An I-x without
    /// a preceding B-x/I-x opens a new span (repair semantics).
    pub fn slot_values(&self, tokens: &[String]) -> BTreeMap<String, String> {
        extract_spans(&self.iob, tokens)
    }
}

/// Slot spans from an IOB sequence; later spans of the same slot override.
pub fn extract_spans(iob: &[String], tokens: &[String]) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut cur: Option<(String, Vec<String>)> = None;
    for (label, token) in iob.iter().zip(tokens.iter()) {
        if let Some(name) = label.strip_prefix("B-") {
            if let Some((n, toks)) = cur.take() {
                out.insert(n, toks.join(" "));
            }
            cur = Some((name.to_string(), vec![token.clone()]));
        } else if let Some(name) = label.strip_prefix("I-") {
            match &mut cur {
                Some((n, toks)) if n == name => toks.push(token.clone()),
                _ => {
                    if let Some((n, toks)) = cur.take() {
                        out.insert(n, toks.join(" "));
                    }
                    cur = Some((name.to_string(), vec![token.clone()]));
                }
            }
        } else {
            if let Some((n, toks)) = cur.take() {
                out.insert(n, toks.join(" "));
            }
        }
    }
    if let Some((n, toks)) = cur {
        out.insert(n, toks.join(" "));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    pub tokens: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<SemanticFrame>,
}

impl Turn {
    pub fn system(tokens: Vec<String>) -> Self {
        Turn {
            speaker: Speaker::System,
            text: tokens.join(" "),
            tokens,
            frame: None,
        }
    }

    pub fn user(tokens: Vec<String>, frame: SemanticFrame) -> Self {
        assert_eq!(tokens.len(), frame.iob.len(), "IOB length mismatch");
        Turn {
            speaker: Speaker::User,
            text: tokens.join(" "),
            tokens,
            frame: Some(frame),
        }
    }
}

/// Provenance of a recombined dialogue: source ids plus splice indices
/// (`k` = last kept turn of x, `l` = first spliced turn of y, 1-based).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub x_id: String,
    pub y_id: String,
    pub k: usize,
    pub l: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dialogue {
    pub schema: String,
    pub id: String,
    /// "sim" or "recombined".
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    pub turns: Vec<Turn>,
}

impl Dialogue {
    pub fn new_sim(id: String, turns: Vec<Turn>) -> Self {
        Dialogue {
            schema: SCHEMA_VERSION.to_string(),
            id,
            source: "sim".to_string(),
            provenance: None,
            turns,
        }
    }

    /// Indices (0-based) of user turns carrying a frame.
    pub fn user_turns(&self) -> impl Iterator<Item = (usize, &Turn)> {
        self.turns
            .iter()
            .enumerate()
            .filter(|(_, t)| t.speaker == Speaker::User && t.frame.is_some())
    }
}

pub fn write_jsonl(path: &Path, dialogues: &[Dialogue]) -> Result<(), SluError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    for d in dialogues {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<Dialogue>, SluError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let d: Dialogue = serde_json::from_str(&line)?;
        if d.schema != SCHEMA_VERSION {
            return Err(SluError::Schema(format!(
                "unsupported schema version '{}' in {}",
                d.schema, d.id
            )));
        }
        out.push(d);
    }
    Ok(out)
}

/// Validate a frame against the schema (domain, intents, IOB labels).
pub fn validate_frame(frame: &SemanticFrame) -> Result<(), SluError> {
    if !DOMAINS.contains(&frame.domain.as_str()) {
        return Err(SluError::Schema(format!("unknown domain '{}'", frame.domain)));
    }
    let intents = intent_labels();
    for i in &frame.intents {
        if !intents.contains(i) {
            return Err(SluError::Schema(format!("unknown intent '{i}'")));
        }
    }
    let labels = slot_labels();
    for l in &frame.iob {
        if !labels.contains(l) {
            return Err(SluError::Schema(format!("unknown IOB label '{l}'")));
        }
    }
    Ok(())
}
