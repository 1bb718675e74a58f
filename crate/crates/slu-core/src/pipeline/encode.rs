//! Turning annotated dialogues into model-ready integer examples and
//! shuffled, padded batches.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{intent_labels, slot_labels, Dialogue, Speaker, DOMAINS};
use crate::error::SluError;
use crate::pipeline::vocab::{pos_id, Vocabulary, HISTORY_LEN, PAD_ID};

/// Label inventories with stable indices, shared by the tagger and metrics.
#[derive(Debug, Clone)]
pub struct LabelSpace {
    pub intents: Vec<String>,
    pub slots: Vec<String>,
}

impl LabelSpace {
    pub fn new() -> Self {
        LabelSpace {
            intents: intent_labels(),
            slots: slot_labels(),
        }
    }

    pub fn num_domains(&self) -> usize {
        DOMAINS.len()
    }

    pub fn domain_index(&self, domain: &str) -> Option<usize> {
        DOMAINS.iter().position(|d| *d == domain)
    }

    pub fn intent_index(&self, intent: &str) -> Option<usize> {
        self.intents.iter().position(|i| i == intent)
    }

    pub fn slot_index(&self, label: &str) -> Option<usize> {
        self.slots.iter().position(|l| l == label)
    }
}

impl Default for LabelSpace {
    fn default() -> Self {
        Self::new()
    }
}

/// One user turn with its integer-encoded context and gold labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedExample {
    pub dialogue_id: String,
    /// 1-based turn index within the dialogue.
    pub turn_index: usize,
    pub current: Vec<usize>,
    /// Exactly `HISTORY_LEN` slots, oldest first; each ends with its
    /// positional token. Pad slots hold `[PAD, @pos_d]`.
    pub history: Vec<Vec<usize>>,
    /// Real (non-pad) flags per history slot.
    pub history_real: Vec<bool>,
    pub domain: usize,
    /// Sorted intent label indices.
    pub intents: Vec<usize>,
    /// One slot label index per current-utterance token.
    pub slots: Vec<usize>,
}

impl EncodedExample {
    /// History slot holding the most recent *system* utterance, if any.
    pub fn last_system_slot(&self, dialogue: &Dialogue) -> Option<usize> {
        let t = self.turn_index;
        (0..HISTORY_LEN).rev().find(|&i| {
            let d = HISTORY_LEN - i;
            t.checked_sub(d)
                .filter(|&j| j >= 1)
                .is_some_and(|j| dialogue.turns[j - 1].speaker == Speaker::System)
        })
    }
}

/// Encode the user turn at 1-based index `t`. The history window keeps the
/// most recent `HISTORY_LEN` utterances; slot `i` holds the utterance at
/// distance `HISTORY_LEN - i` from the current turn, so the previous turn
/// always sits in the last slot.
pub fn encode_example(
    dialogue: &Dialogue,
    t: usize,
    vocab: &Vocabulary,
    labels: &LabelSpace,
) -> Result<EncodedExample, SluError> {
    let turn = dialogue
        .turns
        .get(t - 1)
        .ok_or_else(|| SluError::Schema(format!("turn {t} out of range")))?;
    let frame = match (&turn.speaker, &turn.frame) {
        (Speaker::User, Some(f)) => f,
        _ => {
            return Err(SluError::Schema(format!(
                "turn {t} is not an annotated user turn"
            )))
        }
    };

    let current: Vec<usize> = turn.tokens.iter().map(|w| vocab.encode_token(w)).collect();
    if current.is_empty() {
        return Err(SluError::Schema(format!("turn {t} has no tokens")));
    }

    let mut history = Vec::with_capacity(HISTORY_LEN);
    let mut history_real = Vec::with_capacity(HISTORY_LEN);
    for i in 0..HISTORY_LEN {
        let d = HISTORY_LEN - i;
        let mut ids = match t.checked_sub(d).filter(|&j| j >= 1) {
            Some(j) => dialogue.turns[j - 1]
                .tokens
                .iter()
                .map(|w| vocab.encode_token(w))
                .collect(),
            None => vec![PAD_ID],
        };
        history_real.push(t > d);
        ids.push(pos_id(d));
        history.push(ids);
    }

    let domain = labels
        .domain_index(&frame.domain)
        .ok_or_else(|| SluError::Schema(format!("unknown domain '{}'", frame.domain)))?;
    let mut intents = Vec::new();
    for i in &frame.intents {
        let idx = labels
            .intent_index(i)
            .ok_or_else(|| SluError::Schema(format!("unknown intent '{i}'")))?;
        intents.push(idx);
    }
    intents.sort_unstable();
    let slots = frame
        .iob
        .iter()
        .map(|l| {
            labels
                .slot_index(l)
                .ok_or_else(|| SluError::Schema(format!("unknown IOB label '{l}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(EncodedExample {
        dialogue_id: dialogue.id.clone(),
        turn_index: t,
        current,
        history,
        history_real,
        domain,
        intents,
        slots,
    })
}

/// Encode every annotated user turn of every dialogue.
pub fn encode_corpus(
    dialogues: &[Dialogue],
    vocab: &Vocabulary,
    labels: &LabelSpace,
) -> Result<Vec<EncodedExample>, SluError> {
    let mut out = Vec::new();
    for d in dialogues {
        for (idx, _) in d.user_turns() {
            out.push(encode_example(d, idx + 1, vocab, labels)?);
        }
    }
    Ok(out)
}

/// A batch of examples with right-padded current utterances and the token
/// mask used by the slot loss.
#[derive(Debug, Clone)]
pub struct Batch {
    pub examples: Vec<EncodedExample>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.examples.iter().map(|e| e.current.len()).max().unwrap_or(0)
    }

    /// Current utterances padded to the batch max length, plus a mask that
    /// is true exactly on real tokens.
    pub fn padded_current(&self) -> (Vec<Vec<usize>>, Vec<Vec<bool>>) {
        let max = self.max_len();
        let mut ids = Vec::with_capacity(self.len());
        let mut mask = Vec::with_capacity(self.len());
        for e in &self.examples {
            let mut row = e.current.clone();
            let mut m = vec![true; row.len()];
            row.resize(max, PAD_ID);
            m.resize(max, false);
            ids.push(row);
            mask.push(m);
        }
        (ids, mask)
    }
}

/// Shuffle examples under `rng` and split into batches of `batch_size`
/// (last batch may be short).
pub fn make_batches(
    examples: &[EncodedExample],
    batch_size: usize,
    rng: &mut impl Rng,
) -> Vec<Batch> {
    assert!(batch_size > 0, "batch size must be positive");
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(rng);
    order
        .chunks(batch_size)
        .map(|chunk| Batch {
            examples: chunk.iter().map(|&i| examples[i].clone()).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::vocab::{pos_token, UNK_ID};
    use crate::rng;
    use crate::sim::{generate_dataset, EntityPool};

    fn small_corpus() -> (Vec<Dialogue>, Vocabulary, LabelSpace) {
        let dialogues = generate_dataset(5, "enc-test", 40, None, EntityPool::Train);
        let vocab = Vocabulary::build(&[&dialogues], 2).unwrap();
        (dialogues, vocab, LabelSpace::new())
    }

    #[test]
    fn first_turn_has_all_pad_history() {
        let (dialogues, vocab, labels) = small_corpus();
        let d = dialogues
            .iter()
            .find(|d| d.turns[0].speaker == Speaker::User)
            .unwrap();
        let e = encode_example(d, 1, &vocab, &labels).unwrap();
        assert!(e.history_real.iter().all(|r| !r));
        for (i, h) in e.history.iter().enumerate() {
            let dist = HISTORY_LEN - i;
            assert_eq!(h, &vec![PAD_ID, pos_id(dist)]);
        }
    }

    #[test]
    fn previous_turn_lands_in_last_slot() {
        let (dialogues, vocab, labels) = small_corpus();
        let d = dialogues
            .iter()
            .find(|d| d.turns[0].speaker == Speaker::System)
            .unwrap();
        let e = encode_example(d, 2, &vocab, &labels).unwrap();
        assert!(e.history_real[HISTORY_LEN - 1]);
        assert!(e.history_real[..HISTORY_LEN - 1].iter().all(|r| !r));
        let expect: Vec<usize> = d.turns[0]
            .tokens
            .iter()
            .map(|w| vocab.encode_token(w))
            .chain(std::iter::once(pos_id(1)))
            .collect();
        assert_eq!(e.history[HISTORY_LEN - 1], expect);
        assert_eq!(pos_token(1), "@pos_1");
    }

    #[test]
    fn long_history_keeps_newest_window() {
        // Build a synthetic 46-turn dialogue: the oldest turns must drop out.
        let mut turns = Vec::new();
        for i in 0..45 {
            let tok = format!("w{i}");
            if i % 2 == 0 {
                turns.push(crate::corpus::Turn::system(vec![tok]));
            } else {
                turns.push(crate::corpus::Turn::user(
                    vec![tok],
                    crate::corpus::SemanticFrame::new("movies", vec!["affirm".into()], vec!["O".into()]),
                ));
            }
        }
        turns.push(crate::corpus::Turn::user(
            vec!["now".into()],
            crate::corpus::SemanticFrame::new("movies", vec!["affirm".into()], vec!["O".into()]),
        ));
        let d = Dialogue::new_sim("long".into(), turns);
        let vocab = Vocabulary::build(&[&[d.clone()]], 0).unwrap();
        let e = encode_example(&d, 46, &vocab, &LabelSpace::new()).unwrap();
        assert!(e.history_real.iter().all(|r| *r));
        // Slot 0 is distance 40 -> turn 6 ("w5"); turns w0..w4 dropped.
        assert_eq!(vocab.token(e.history[0][0]), "w5");
        assert_eq!(vocab.token(e.history[HISTORY_LEN - 1][0]), "w44");
    }

    #[test]
    fn system_turns_are_rejected() {
        let (dialogues, vocab, labels) = small_corpus();
        let d = dialogues
            .iter()
            .find(|d| d.turns[0].speaker == Speaker::System)
            .unwrap();
        assert!(encode_example(d, 1, &vocab, &labels).is_err());
    }

    #[test]
    fn round_trip_through_vocab_is_fixed_point() {
        let (dialogues, vocab, labels) = small_corpus();
        for d in dialogues.iter().take(10) {
            for (idx, _) in d.user_turns() {
                let e = encode_example(d, idx + 1, &vocab, &labels).unwrap();
                let decoded: Vec<String> =
                    e.current.iter().map(|&i| vocab.token(i).to_string()).collect();
                let re: Vec<usize> = decoded.iter().map(|w| vocab.encode_token(w)).collect();
                assert_eq!(re, e.current);
            }
        }
    }

    #[test]
    fn unknown_tokens_map_to_unk() {
        let (_, vocab, _) = small_corpus();
        assert_eq!(vocab.encode_token("xylophone"), UNK_ID);
    }

    #[test]
    fn batching_shapes_and_masks() {
        let (dialogues, vocab, labels) = small_corpus();
        let examples = encode_corpus(&dialogues, &vocab, &labels).unwrap();
        let n = examples.len().min(250);
        let mut r = rng::labeled(1, "batch-test");
        let batches = make_batches(&examples[..n], 100, &mut r);
        let sizes: Vec<usize> = batches.iter().map(|b| b.len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), n);
        for (i, b) in batches.iter().enumerate() {
            if i + 1 < batches.len() {
                assert_eq!(b.len(), 100);
            }
            let (ids, mask) = b.padded_current();
            for ((row, m), e) in ids.iter().zip(&mask).zip(&b.examples) {
                assert_eq!(row.len(), b.max_len());
                assert_eq!(m.iter().filter(|x| **x).count(), e.current.len());
            }
        }
    }

    #[test]
    fn batch_order_is_seed_deterministic() {
        let (dialogues, vocab, labels) = small_corpus();
        let examples = encode_corpus(&dialogues, &vocab, &labels).unwrap();
        let order = |seed| {
            let mut r = rng::labeled(seed, "batch-det");
            make_batches(&examples, 7, &mut r)
                .iter()
                .flat_map(|b| b.examples.iter().map(|e| e.turn_index))
                .collect::<Vec<_>>()
        };
        assert_eq!(order(3), order(3));
        assert_ne!(order(3), order(4));
    }
}
