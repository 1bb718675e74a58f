//! Dialogue recombination: splice the tail of one single-domain dialogue
//! onto a prefix of another, producing multi-domain-looking training data
//! whose labels carry over verbatim from the sources.

use rand::Rng;

use crate::corpus::{Dialogue, Provenance, Speaker, SCHEMA_VERSION, TASK_INTENTS};
use crate::error::SluError;
use crate::rng;

/// How many recombined dialogues to produce per ordered dataset pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecombinationSpec {
    pub per_pair: usize,
}

impl Default for RecombinationSpec {
    fn default() -> Self {
        RecombinationSpec { per_pair: 10_000 }
    }
}

/// 1-based index of the first user turn in `y` announcing a task intent.
fn first_task_intent_turn(y: &Dialogue) -> Option<usize> {
    y.turns.iter().enumerate().find_map(|(i, t)| {
        let frame = t.frame.as_ref()?;
        (t.speaker == Speaker::User
            && frame.intents.iter().any(|l| TASK_INTENTS.contains(&l.as_str())))
        .then_some(i + 1)
    })
}

/// Splice at explicit indices: keep x's turns 1..=k, then append y's turns
/// l..end. Labels are carried verbatim.
pub fn recombine_at(x: &Dialogue, y: &Dialogue, k: usize, l: usize, id: String) -> Dialogue {
    let mut turns = x.turns[..k].to_vec();
    turns.extend_from_slice(&y.turns[l - 1..]);
    Dialogue {
        schema: SCHEMA_VERSION.to_string(),
        id,
        source: "recombined".to_string(),
        provenance: Some(Provenance {
            x_id: x.id.clone(),
            y_id: y.id.clone(),
            k,
            l,
        }),
        turns,
    }
}

/// Recombine with a sampled insertion point: `k` is drawn uniformly over
/// x's system turns so the output keeps user/system alternation, and `l`
/// is y's first task-intent user turn. None when either anchor is missing.
pub fn recombine(x: &Dialogue, y: &Dialogue, rng: &mut impl Rng, id: String) -> Option<Dialogue> {
    let l = first_task_intent_turn(y)?;
    let system_turns: Vec<usize> = x
        .turns
        .iter()
        .enumerate()
        .filter(|(_, t)| t.speaker == Speaker::System)
        .map(|(i, _)| i + 1)
        .collect();
    if system_turns.is_empty() {
        return None;
    }
    let k = system_turns[rng.gen_range(0..system_turns.len())];
    Some(recombine_at(x, y, k, l, id))
}

/// Produce `spec.per_pair` recombinations for every ordered pair of the
/// given datasets, sampling sources with replacement. Deterministic under
/// the seed regardless of pair order.
pub fn build_recombined_dataset(
    spec: &RecombinationSpec,
    datasets: &[(&str, &[Dialogue])],
    seed: u64,
) -> Result<Vec<Dialogue>, SluError> {
    if spec.per_pair == 0 {
        return Err(SluError::Config("per-pair count must be positive".into()));
    }
    let mut out = Vec::new();
    for (a_name, a) in datasets {
        for (b_name, b) in datasets {
            if a_name == b_name {
                continue;
            }
            if a.is_empty() || b.is_empty() {
                return Err(SluError::Schema(format!(
                    "empty source dataset for pair {a_name}->{b_name}"
                )));
            }
            let mut r = rng::labeled(seed, &format!("recombine/{a_name}/{b_name}"));
            let mut produced = 0;
            while produced < spec.per_pair {
                let x = &a[r.gen_range(0..a.len())];
                let y = &b[r.gen_range(0..b.len())];
                let id = format!("rc-{a_name}-{b_name}-{produced:05}");
                if let Some(d) = recombine(x, y, &mut r, id) {
                    out.push(d);
                    produced += 1;
                }
            }
        }
    }
    Ok(out)
}
