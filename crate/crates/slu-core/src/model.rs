//! Full model assembly: shared token embeddings, one dialogue-context
//! encoder, and the joint frame tagger, plus binary checkpoint IO and the
//! per-turn attention/trace inspection used by the CLI.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Dialogue;
use crate::encoders::{
    encode_batch, AttentionScore, EncoderKind, EncoderOptions, EncoderOutput, EncoderParams,
    EMBED_DIM, ENC_HIDDEN,
};
use crate::error::SluError;
use crate::params::ParamSet;
use crate::pipeline::{encode_example, EncodedExample, LabelSpace, Vocabulary};
use crate::rng;
use crate::tagger::{decode_frames, tag, FramePrediction, TagOutput, TaggerParams, TAG_HIDDEN};
use crate::tape::{Scalar, Tape};

const CHECKPOINT_MAGIC: &[u8; 8] = b"SLUCKPT\x01";

/// Architecture description stored in checkpoints so a loaded model can be
/// rebuilt without the original configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelSpec {
    pub encoder: String,
    pub score: String,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub enc_hidden: usize,
    pub tag_hidden: usize,
    pub num_domains: usize,
    pub num_intents: usize,
    pub num_slots: usize,
}

impl ModelSpec {
    pub fn new(kind: EncoderKind, vocab_size: usize, labels: &LabelSpace) -> Self {
        ModelSpec {
            encoder: kind.name().to_string(),
            score: "cosine".to_string(),
            vocab_size,
            embed_dim: EMBED_DIM,
            enc_hidden: ENC_HIDDEN,
            tag_hidden: TAG_HIDDEN,
            num_domains: labels.num_domains(),
            num_intents: labels.intents.len(),
            num_slots: labels.slots.len(),
        }
    }

    pub fn kind(&self) -> Result<EncoderKind, SluError> {
        EncoderKind::parse(&self.encoder)
            .ok_or_else(|| SluError::Config(format!("unknown encoder '{}'", self.encoder)))
    }

    pub fn options(&self) -> Result<EncoderOptions, SluError> {
        let score = match self.score.as_str() {
            "cosine" => AttentionScore::Cosine,
            "dot" => AttentionScore::Dot,
            other => {
                return Err(SluError::Config(format!(
                    "unknown attention score '{other}'"
                )))
            }
        };
        Ok(EncoderOptions {
            score,
            mask_padding: false,
        })
    }
}

/// Trainable model: embeddings, context encoder, tagger.
pub struct Model<F: Scalar> {
    pub spec: ModelSpec,
    pub ps: ParamSet<F>,
    pub emb: usize,
    pub encoder: EncoderParams,
    pub tagger: TaggerParams,
}

impl<F: Scalar> Model<F> {
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self, SluError> {
        let kind = spec.kind()?;
        let mut rng = rng::labeled(seed, "model-init");
        let mut ps = ParamSet::new();
        let emb = ps.add_embedding("emb", spec.vocab_size, spec.embed_dim, &mut rng);
        let encoder = EncoderParams::init(kind, &mut ps, spec.embed_dim, spec.enc_hidden, &mut rng);
        let tagger = TaggerParams::init(
            &mut ps,
            spec.embed_dim,
            spec.tag_hidden,
            2 * spec.enc_hidden,
            spec.num_domains,
            spec.num_intents,
            spec.num_slots,
            &mut rng,
        );
        Ok(Model {
            spec,
            ps,
            emb,
            encoder,
            tagger,
        })
    }

    /// Encoder + tagger forward pass over a batch.
    pub fn forward(
        &self,
        tape: &mut Tape<F>,
        examples: &[EncodedExample],
        training: bool,
        dropout_rate: f64,
        rng: &mut ChaCha8Rng,
        want_trace: bool,
    ) -> Result<(EncoderOutput<F>, TagOutput), SluError> {
        let opts = self.spec.options()?;
        let emb = tape.param(&self.ps, self.emb);
        let enc = encode_batch(tape, &self.ps, &self.encoder, emb, examples, &opts, want_trace);
        let out = tag(
            tape,
            &self.ps,
            &self.tagger,
            emb,
            examples,
            enc.h,
            training,
            dropout_rate,
            rng,
        )?;
        Ok((enc, out))
    }

    /// Eval-mode frame predictions for a batch.
    pub fn predict(
        &self,
        examples: &[EncodedExample],
        labels: &LabelSpace,
    ) -> Result<Vec<FramePrediction>, SluError> {
        let mut tape = Tape::new();
        let mut rng = rng::labeled(0, "predict");
        let (_, out) = self.forward(&mut tape, examples, false, 0.0, &mut rng, false)?;
        Ok(decode_frames(&tape, &out, examples, labels))
    }

    /// Per-history-slot context scores for one user turn: MN attention
    /// weights, or SDEN session-state-change magnitudes. Unsupported for
    /// the previous-utterance encoder, which has no per-slot signal.
    pub fn attention_trace(
        &self,
        dialogue: &Dialogue,
        turn_index: usize,
        vocab: &Vocabulary,
        labels: &LabelSpace,
    ) -> Result<Vec<f64>, SluError> {
        if matches!(self.encoder, EncoderParams::Ed(_)) {
            return Err(SluError::Unsupported(
                "attention traces require a memory-network or session encoder; \
                 the previous-utterance encoder attends to nothing"
                    .to_string(),
            ));
        }
        let example = encode_example(dialogue, turn_index, vocab, labels)?;
        let mut tape = Tape::new();
        let mut rng = rng::labeled(0, "trace");
        let (enc, _) = self.forward(&mut tape, &[example], false, 0.0, &mut rng, true)?;
        let trace = enc
            .attention
            .ok_or_else(|| SluError::Unsupported("encoder produced no trace".to_string()))?;
        Ok(trace[0].iter().map(|&x| x.to_f64()).collect())
    }

    /// Write a checkpoint: magic, JSON header (architecture + parameter
    /// manifest), then all parameter values as little-endian f64.
    pub fn save(&self, path: &Path) -> Result<(), SluError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CHECKPOINT_MAGIC)?;
        let manifest: Vec<ParamEntry> = self
            .ps
            .iter()
            .map(|p| ParamEntry {
                name: p.name.clone(),
                rows: p.value.nrows(),
                cols: p.value.ncols(),
            })
            .collect();
        let header = Header {
            spec: self.spec.clone(),
            params: manifest,
        };
        let header_bytes = serde_json::to_vec(&header)?;
        w.write_u64::<LittleEndian>(header_bytes.len() as u64)?;
        w.write_all(&header_bytes)?;
        for p in self.ps.iter() {
            for &x in p.value.iter() {
                w.write_f64::<LittleEndian>(x.to_f64())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SluError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(SluError::Schema(format!(
                "{} is not a model checkpoint",
                path.display()
            )));
        }
        let header_len = r.read_u64::<LittleEndian>()? as usize;
        let mut header_bytes = vec![0u8; header_len];
        r.read_exact(&mut header_bytes)?;
        let header: Header = serde_json::from_slice(&header_bytes)?;

        let mut model = Model::init(header.spec, 0)?;
        if model.ps.len() != header.params.len() {
            return Err(SluError::Schema(format!(
                "checkpoint has {} parameters, architecture expects {}",
                header.params.len(),
                model.ps.len()
            )));
        }
        for (idx, entry) in header.params.iter().enumerate() {
            if entry.name != model.ps.name(idx)
                || (entry.rows, entry.cols) != model.ps.value(idx).dim()
            {
                return Err(SluError::Schema(format!(
                    "checkpoint parameter '{}' [{}x{}] does not match '{}' {:?}",
                    entry.name,
                    entry.rows,
                    entry.cols,
                    model.ps.name(idx),
                    model.ps.value(idx).dim()
                )));
            }
            let mut v = Array2::zeros((entry.rows, entry.cols));
            for x in v.iter_mut() {
                *x = F::from_f64(r.read_f64::<LittleEndian>()?);
            }
            *model.ps.value_mut(idx) = v;
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    params: Vec<ParamEntry>,
}

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SemanticFrame, Turn};
    use crate::pipeline::Vocabulary;

    fn tiny_spec(kind: EncoderKind) -> ModelSpec {
        let labels = LabelSpace::new();
        ModelSpec {
            encoder: kind.name().to_string(),
            score: "cosine".to_string(),
            vocab_size: 60,
            embed_dim: 8,
            enc_hidden: 4,
            tag_hidden: 6,
            num_domains: labels.num_domains(),
            num_intents: labels.intents.len(),
            num_slots: labels.slots.len(),
        }
    }

    fn tiny_dialogue() -> Dialogue {
        let frame = SemanticFrame::new(
            "reserve-restaurant",
            vec!["reserve-restaurant".into()],
            vec!["O".into(), "O".into(), "B-num_people".into()],
        );
        Dialogue::new_sim(
            "m-00000".into(),
            vec![
                Turn::system(vec!["how".into(), "many".into(), "people".into()]),
                Turn::user(vec!["table".into(), "for".into(), "2".into()], frame),
            ],
        )
    }

    fn tiny_vocab(d: &Dialogue) -> Vocabulary {
        Vocabulary::build(&[std::slice::from_ref(d)], 0).unwrap()
    }

    #[test]
    fn checkpoint_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = Model::<f64>::init(tiny_spec(EncoderKind::Sden), 7).unwrap();
        model.save(&path).unwrap();
        let loaded = Model::<f64>::load(&path).unwrap();
        assert_eq!(loaded.spec, model.spec);
        assert_eq!(loaded.ps.len(), model.ps.len());
        for idx in 0..model.ps.len() {
            assert_eq!(loaded.ps.name(idx), model.ps.name(idx));
            assert_eq!(loaded.ps.value(idx), model.ps.value(idx));
        }
    }

    #[test]
    fn loaded_model_predicts_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let d = tiny_dialogue();
        let vocab = tiny_vocab(&d);
        let labels = LabelSpace::new();
        let mut spec = tiny_spec(EncoderKind::Mn);
        spec.vocab_size = vocab.len();
        let model = Model::<f64>::init(spec, 3).unwrap();
        let ex = encode_example(&d, 2, &vocab, &labels).unwrap();
        let p1 = model.predict(std::slice::from_ref(&ex), &labels).unwrap();
        model.save(&path).unwrap();
        let loaded = Model::<f64>::load(&path).unwrap();
        let p2 = loaded.predict(std::slice::from_ref(&ex), &labels).unwrap();
        assert_eq!(p1[0].domain, p2[0].domain);
        assert_eq!(p1[0].iob, p2[0].iob);
        assert_eq!(p1[0].domain_probs, p2[0].domain_probs);
    }

    #[test]
    fn garbage_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"not a checkpoint at all").unwrap();
        match Model::<f64>::load(&path) {
            Err(SluError::Schema(_)) => {}
            Err(other) => panic!("expected schema error, got {other:?}"),
            Ok(_) => panic!("expected schema error, got a model"),
        }
    }

    #[test]
    fn trace_unsupported_for_previous_utterance_encoder() {
        let d = tiny_dialogue();
        let vocab = tiny_vocab(&d);
        let labels = LabelSpace::new();
        let mut spec = tiny_spec(EncoderKind::Ed);
        spec.vocab_size = vocab.len();
        let model = Model::<f64>::init(spec, 1).unwrap();
        match model.attention_trace(&d, 2, &vocab, &labels) {
            Err(SluError::Unsupported(_)) => {}
            Err(other) => panic!("expected unsupported-operation error, got {other:?}"),
            Ok(_) => panic!("expected unsupported-operation error, got a trace"),
        }
    }

    #[test]
    fn trace_is_normalized_for_attention_encoders() {
        let d = tiny_dialogue();
        let vocab = tiny_vocab(&d);
        let labels = LabelSpace::new();
        for kind in [EncoderKind::Mn, EncoderKind::Sden] {
            let mut spec = tiny_spec(kind);
            spec.vocab_size = vocab.len();
            let model = Model::<f64>::init(spec, 2).unwrap();
            let trace = model.attention_trace(&d, 2, &vocab, &labels).unwrap();
            assert_eq!(trace.len(), crate::pipeline::HISTORY_LEN);
            assert!(trace.iter().all(|&x| x >= 0.0));
            let s: f64 = trace.iter().sum();
            assert!((s - 1.0).abs() < 1e-6, "{kind:?} trace sums to {s}");
        }
    }
}
