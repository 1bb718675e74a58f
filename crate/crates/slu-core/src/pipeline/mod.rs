//! Everything between raw corpora and model-ready batches: normalization,
//! vocabulary, example encoding with the 40-slot padded history, batching,
//! and the dialogue-recombination augmenter.

pub mod encode;
pub mod normalize;
pub mod recombine;
pub mod vocab;

pub use encode::{encode_corpus, encode_example, make_batches, Batch, EncodedExample, LabelSpace};
pub use normalize::{normalize, normalize_token};
pub use recombine::{build_recombined_dataset, recombine, recombine_at, RecombinationSpec};
pub use vocab::{pos_id, pos_token, Vocabulary, HISTORY_LEN, PAD_ID, UNK_ID};
