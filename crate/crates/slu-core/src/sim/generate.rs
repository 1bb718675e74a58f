//! Corpus generation: run the simulator at scale and write the standard
//! JSONL splits. Every dialogue gets its own derived RNG stream, so a
//! dataset is reproducible from the corpus seed alone, in any order.

use std::path::Path;

use crate::corpus::Dialogue;
use crate::error::SluError;
use crate::rng;
use crate::sim::dialogue::simulate_dialogue;
use crate::sim::entities::{EntityBank, EntityPool};

/// Dialogue counts per split. Defaults match the reference corpus sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusCounts {
    pub movies_train: usize,
    pub find_train: usize,
    pub reserve_train: usize,
    pub multi_train: usize,
    pub multi_dev: usize,
    pub multi_test: usize,
}

impl Default for CorpusCounts {
    fn default() -> Self {
        CorpusCounts {
            movies_train: 1048,
            find_train: 976,
            reserve_train: 1319,
            multi_train: 467,
            multi_dev: 50,
            multi_test: 273,
        }
    }
}

impl CorpusCounts {
    /// Scaled-down corpus for quick experiments; keeps the split ratios.
    pub fn scaled(&self, divisor: usize) -> Self {
        let d = divisor.max(1);
        CorpusCounts {
            movies_train: (self.movies_train / d).max(1),
            find_train: (self.find_train / d).max(1),
            reserve_train: (self.reserve_train / d).max(1),
            multi_train: (self.multi_train / d).max(1),
            multi_dev: (self.multi_dev / d).max(1),
            multi_test: (self.multi_test / d).max(1),
        }
    }
}

/// Generate one dataset: `domain == None` means multi-domain goals.
pub fn generate_dataset(
    seed: u64,
    name: &str,
    count: usize,
    domain: Option<&str>,
    pool: EntityPool,
) -> Vec<Dialogue> {
    let bank = EntityBank::new(seed);
    (0..count)
        .map(|i| {
            let mut r = rng::stream(seed, name, i as u64);
            let sim = simulate_dialogue(&mut r, &bank, pool, domain);
            Dialogue::new_sim(format!("{name}-{i:05}"), sim.turns)
        })
        .collect()
}

/// The six standard files written into `out_dir`.
pub const SPLIT_FILES: [&str; 6] = [
    "movies_train.jsonl",
    "find_restaurants_train.jsonl",
    "reserve_restaurant_train.jsonl",
    "multi_train.jsonl",
    "multi_dev.jsonl",
    "multi_test.jsonl",
];

/// Generate and write all six splits. Train splits draw entities from the
/// 80% training pool; dev/test from the full pool, so unseen entity names
/// appear only at evaluation time.
pub fn generate_corpus(seed: u64, counts: &CorpusCounts, out_dir: &Path) -> Result<(), SluError> {
    let jobs: [(&str, usize, Option<&str>, EntityPool); 6] = [
        (
            "movies_train",
            counts.movies_train,
            Some("movies"),
            EntityPool::Train,
        ),
        (
            "find_restaurants_train",
            counts.find_train,
            Some("find-restaurants"),
            EntityPool::Train,
        ),
        (
            "reserve_restaurant_train",
            counts.reserve_train,
            Some("reserve-restaurant"),
            EntityPool::Train,
        ),
        ("multi_train", counts.multi_train, None, EntityPool::Train),
        ("multi_dev", counts.multi_dev, None, EntityPool::Full),
        ("multi_test", counts.multi_test, None, EntityPool::Full),
    ];
    for (name, count, domain, pool) in jobs {
        let dialogues = generate_dataset(seed, name, count, domain, pool);
        crate::corpus::write_jsonl(&out_dir.join(format!("{name}.jsonl")), &dialogues)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::read_jsonl;

    #[test]
    fn default_counts_match_reference_sizes() {
        let c = CorpusCounts::default();
        assert_eq!(
            (c.movies_train, c.find_train, c.reserve_train),
            (1048, 976, 1319)
        );
        assert_eq!((c.multi_train, c.multi_dev, c.multi_test), (467, 50, 273));
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let counts = CorpusCounts::default().scaled(100);
        generate_corpus(42, &counts, dir.path()).unwrap();
        let first = std::fs::read(dir.path().join("multi_train.jsonl")).unwrap();
        generate_corpus(42, &counts, dir.path()).unwrap();
        let second = std::fs::read(dir.path().join("multi_train.jsonl")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn splits_have_requested_sizes_and_ids() {
        let dir = tempfile::tempdir().unwrap();
        let counts = CorpusCounts {
            movies_train: 3,
            find_train: 2,
            reserve_train: 2,
            multi_train: 4,
            multi_dev: 2,
            multi_test: 2,
        };
        generate_corpus(7, &counts, dir.path()).unwrap();
        let multi = read_jsonl(&dir.path().join("multi_train.jsonl")).unwrap();
        assert_eq!(multi.len(), 4);
        assert_eq!(multi[0].id, "multi_train-00000");
        assert_eq!(multi[0].source, "sim");
        let movies = read_jsonl(&dir.path().join("movies_train.jsonl")).unwrap();
        assert_eq!(movies.len(), 3);
        for d in &movies {
            for (_, t) in d.user_turns() {
                assert_eq!(t.frame.as_ref().unwrap().domain, "movies");
            }
        }
    }
}
