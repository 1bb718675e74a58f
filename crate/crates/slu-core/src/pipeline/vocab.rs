//! Vocabulary with reserved ids and a min-count admission threshold.
//!
//! Reserved layout: PAD=0, UNK=1, "#"=2, then the forty positional tokens
//! @pos_0..@pos_39. Corpus tokens are admitted only when their training
//! count exceeds the threshold, and get ids in (count desc, token asc)
//! order so the map is independent of hash iteration order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::Dialogue;
use crate::error::SluError;
use crate::pipeline::normalize::{normalize_token, DIGIT_TOKEN};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const DIGIT_ID: usize = 2;
/// Number of history slots; also the number of positional tokens.
pub const HISTORY_LEN: usize = 40;
pub const FIRST_POS_ID: usize = 3;
pub const NUM_RESERVED: usize = FIRST_POS_ID + HISTORY_LEN;

/// Tokens appearing more than this many times are admitted.
pub const DEFAULT_MIN_COUNT: usize = 10;

pub fn pos_token(distance: usize) -> String {
    // Distances beyond the history window share the farthest token.
    format!("@pos_{}", distance.min(HISTORY_LEN - 1))
}

pub fn pos_id(distance: usize) -> usize {
    FIRST_POS_ID + distance.min(HISTORY_LEN - 1)
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    id_of: HashMap<String, usize>,
    tokens: Vec<String>,
    counts: Vec<usize>,
    pub min_count: usize,
}

impl Vocabulary {
    fn with_reserved(min_count: usize) -> Self {
        let mut v = Vocabulary {
            id_of: HashMap::new(),
            tokens: Vec::new(),
            counts: Vec::new(),
            min_count,
        };
        v.push("<pad>", 0);
        v.push("<unk>", 0);
        v.push(DIGIT_TOKEN, 0);
        for d in 0..HISTORY_LEN {
            v.push(&format!("@pos_{d}"), 0);
        }
        debug_assert_eq!(v.tokens.len(), NUM_RESERVED);
        v
    }

    fn push(&mut self, token: &str, count: usize) {
        let id = self.tokens.len();
        self.id_of.insert(token.to_string(), id);
        self.tokens.push(token.to_string());
        self.counts.push(count);
    }

    /// Count normalized tokens over every turn (both speakers) of the given
    /// corpora and admit those with count > min_count.
    pub fn build(corpora: &[&[Dialogue]], min_count: usize) -> Result<Self, SluError> {
        if corpora.iter().all(|c| c.is_empty()) {
            return Err(SluError::Schema("empty training corpus".into()));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for corpus in corpora {
            for d in *corpus {
                for t in &d.turns {
                    for tok in &t.tokens {
                        *counts.entry(normalize_token(tok)).or_insert(0) += 1;
                    }
                }
            }
        }
        let mut v = Self::with_reserved(min_count);
        let mut admitted: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c > min_count && !v.id_of.contains_key(t))
            .collect();
        admitted.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));
        for (t, c) in admitted {
            v.push(&t, c);
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of a *normalized* token, UNK for unknowns.
    pub fn id(&self, token: &str) -> usize {
        self.id_of.get(token).copied().unwrap_or(UNK_ID)
    }

    /// Normalize then look up.
    pub fn encode_token(&self, token: &str) -> usize {
        self.id(&normalize_token(token))
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// TSV serialization: one `token<TAB>count` line per id, in id order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (t, c) in self.tokens.iter().zip(&self.counts) {
            writeln!(out, "{t}\t{c}").unwrap();
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), SluError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SluError> {
        let text = std::fs::read_to_string(path)?;
        let mut v = Vocabulary {
            id_of: HashMap::new(),
            tokens: Vec::new(),
            counts: Vec::new(),
            min_count: DEFAULT_MIN_COUNT,
        };
        for (i, line) in text.lines().enumerate() {
            let (tok, count) = line
                .split_once('\t')
                .ok_or_else(|| SluError::Schema(format!("vocab line {} not TSV", i + 1)))?;
            let count: usize = count
                .parse()
                .map_err(|_| SluError::Schema(format!("bad count on vocab line {}", i + 1)))?;
            v.push(tok, count);
        }
        if v.len() < NUM_RESERVED || v.token(PAD_ID) != "<pad>" || v.token(UNK_ID) != "<unk>" {
            return Err(SluError::Schema("vocab file missing reserved tokens".into()));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Turn;

    fn dialogue_with(texts: &[&str]) -> Dialogue {
        let turns = texts
            .iter()
            .map(|t| Turn::system(t.split_whitespace().map(str::to_string).collect()))
            .collect();
        Dialogue::new_sim("d".into(), turns)
    }

    #[test]
    fn reserved_layout() {
        let v = Vocabulary::with_reserved(10);
        assert_eq!(v.id("<pad>"), PAD_ID);
        assert_eq!(v.id("<unk>"), UNK_ID);
        assert_eq!(v.id(DIGIT_TOKEN), DIGIT_ID);
        assert_eq!(v.id("@pos_0"), FIRST_POS_ID);
        assert_eq!(v.id("@pos_39"), FIRST_POS_ID + 39);
        assert_eq!(v.len(), NUM_RESERVED);
        assert_eq!(pos_id(1), FIRST_POS_ID + 1);
        // Distances past the window share the last positional token.
        assert_eq!(pos_id(77), FIRST_POS_ID + 39);
        assert_eq!(pos_token(77), "@pos_39");
    }

    #[test]
    fn min_count_boundary() {
        let ten = vec![dialogue_with(&["alpha"; 10])];
        let eleven = vec![dialogue_with(&["alpha"; 11])];
        let filler = vec![dialogue_with(&["beta"; 20])];
        let v10 = Vocabulary::build(&[&ten, &filler], 10).unwrap();
        assert_eq!(v10.id("alpha"), UNK_ID);
        let v11 = Vocabulary::build(&[&eleven, &filler], 10).unwrap();
        assert_ne!(v11.id("alpha"), UNK_ID);
    }

    #[test]
    fn ids_ordered_by_count_then_token() {
        let corpus = vec![
            dialogue_with(&["zz"; 30]),
            dialogue_with(&["aa"; 20]),
            dialogue_with(&["bb"; 20]),
        ];
        let v = Vocabulary::build(&[&corpus], 10).unwrap();
        assert_eq!(v.id("zz"), NUM_RESERVED);
        assert_eq!(v.id("aa"), NUM_RESERVED + 1);
        assert_eq!(v.id("bb"), NUM_RESERVED + 2);
    }

    #[test]
    fn counts_are_normalized_first() {
        // "12" and "7" both collapse onto "#"; cased variants merge.
        let corpus = vec![dialogue_with(&["Hello hello HELLO 12 7"; 6])];
        let v = Vocabulary::build(&[&corpus], 10).unwrap();
        assert_ne!(v.id("hello"), UNK_ID);
        assert_eq!(v.encode_token("HeLLo"), v.id("hello"));
        assert_eq!(v.encode_token("12"), DIGIT_ID);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(Vocabulary::build(&[&[]], 10).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let corpus = vec![dialogue_with(&["alpha beta alpha"; 12])];
        let v = Vocabulary::build(&[&corpus], 10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        v.save(&path).unwrap();
        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(loaded.len(), v.len());
        for id in 0..v.len() {
            assert_eq!(loaded.token(id), v.token(id));
            assert_eq!(loaded.id(v.token(id)), id);
        }
    }
}
