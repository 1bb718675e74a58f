//! Training loop: shuffled mini-batches through the encoder and tagger,
//! RMSProp with a decayed learning rate and global-norm gradient clipping,
//! a CSV step log, and periodic checkpoints with best-on-dev retention.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rand::seq::SliceRandom;

use crate::config::ExperimentConfig;
use crate::corpus::Dialogue;
use crate::error::SluError;
use crate::eval::evaluate_model;
use crate::model::{Model, ModelSpec};
use crate::optim::{clip_global_norm, global_grad_norm, learning_rate_with, rmsprop_step, RmsPropState};
use crate::pipeline::{encode_corpus, EncodedExample, LabelSpace, Vocabulary};
use crate::rng;
use crate::tagger::joint_loss;
use crate::tape::{Scalar, Tape};

pub struct TrainResult {
    pub steps_run: u64,
    pub final_loss: f64,
    pub best_dev_fer: Option<f64>,
    /// Best-on-dev checkpoint when a dev set was given, otherwise the
    /// final checkpoint.
    pub checkpoint: PathBuf,
    pub log_path: PathBuf,
}

/// Train a model from scratch on `train_dialogues`; if `dev` is given,
/// frame error rate on it drives best-checkpoint retention.
pub fn train<F: Scalar>(
    cfg: &ExperimentConfig,
    train_dialogues: &[Dialogue],
    dev: Option<&[Dialogue]>,
    vocab: &Vocabulary,
    labels: &LabelSpace,
) -> Result<(Model<F>, TrainResult), SluError> {
    cfg.validate()?;
    let examples = encode_corpus(train_dialogues, vocab, labels)?;
    if examples.is_empty() {
        return Err(SluError::Config("training set has no user turns".to_string()));
    }

    let spec = ModelSpec {
        encoder: cfg.encoder.name().to_string(),
        score: "cosine".to_string(),
        vocab_size: vocab.len(),
        embed_dim: cfg.embed_dim,
        enc_hidden: cfg.enc_hidden,
        tag_hidden: cfg.tag_hidden,
        num_domains: labels.num_domains(),
        num_intents: labels.intents.len(),
        num_slots: labels.slots.len(),
    };
    let mut model = Model::<F>::init(spec, cfg.seed)?;
    let mut opt = RmsPropState::new(&model.ps);

    std::fs::create_dir_all(&cfg.out_dir)?;
    let log_path = cfg.out_dir.join("train_log.csv");
    let mut log = BufWriter::new(File::create(&log_path)?);
    writeln!(log, "step,loss,lr,grad_norm,dev_fer")?;

    let latest_path = cfg.out_dir.join("checkpoint-latest.ckpt");
    let best_path = cfg.out_dir.join("checkpoint-best.ckpt");
    let mut best_dev_fer: Option<f64> = None;

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch = 0u64;
    let mut cursor = examples.len(); // force a shuffle before the first batch
    let mut dropout_rng = rng::labeled(cfg.seed, "train/dropout");
    let mut final_loss = f64::NAN;
    let mut steps_run = 0;

    for step in 0..cfg.steps {
        if cursor + cfg.batch > examples.len() {
            order.shuffle(&mut rng::stream(cfg.seed, "train/epoch", epoch));
            epoch += 1;
            cursor = 0;
        }
        let batch: Vec<EncodedExample> = order[cursor..cursor + cfg.batch.min(examples.len())]
            .iter()
            .map(|&i| examples[i].clone())
            .collect();
        cursor += cfg.batch;

        let mut tape = Tape::<F>::new();
        let (_, out) = model.forward(&mut tape, &batch, true, cfg.dropout, &mut dropout_rng, false)?;
        let loss_var = joint_loss(&mut tape, &out, &batch, labels.intents.len(), (1.0, 1.0, 1.0));
        let loss = tape.scalar(loss_var).to_f64();
        if !loss.is_finite() {
            let ids: Vec<String> = batch
                .iter()
                .map(|e| format!("{}:{}", e.dialogue_id, e.turn_index))
                .collect();
            return Err(SluError::NonFinite(format!(
                "loss at step {step} (batch {})",
                ids.join(",")
            )));
        }
        final_loss = loss;

        model.ps.zero_grads();
        tape.backward(loss_var, &mut model.ps)?;
        let grad_norm = global_grad_norm(&model.ps);
        clip_global_norm(&mut model.ps, cfg.clip);
        let lr = learning_rate_with(step, cfg.lr0, cfg.decay, cfg.decay_interval);
        rmsprop_step(&mut model.ps, &mut opt, lr)?;

        let at_checkpoint = (step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps;
        let mut dev_fer_cell = String::new();
        let mut stop_early = false;
        if at_checkpoint {
            model.save(&latest_path)?;
            if let Some(dev) = dev {
                let (report, _) = evaluate_model(&model, dev, vocab, labels, cfg.batch)?;
                dev_fer_cell = format!("{:.4}", report.frame_error_rate);
                if best_dev_fer.is_none_or(|b| report.frame_error_rate < b) {
                    best_dev_fer = Some(report.frame_error_rate);
                    model.save(&best_path)?;
                }
                if cfg.early_stop_fer >= 0.0 && report.frame_error_rate <= cfg.early_stop_fer {
                    stop_early = true;
                }
            }
        }
        if step % cfg.log_every == 0 || at_checkpoint {
            writeln!(
                log,
                "{step},{loss:.6},{lr:.8},{grad_norm:.6},{dev_fer_cell}"
            )?;
        }
        steps_run = step + 1;
        if stop_early {
            break;
        }
    }
    log.flush()?;

    let checkpoint = if dev.is_some() && best_path.exists() {
        best_path
    } else {
        latest_path
    };
    Ok((
        model,
        TrainResult {
            steps_run,
            final_loss,
            best_dev_fer,
            checkpoint,
            log_path,
        },
    ))
}

/// Frame accuracy (percent) of a model on a corpus; the overfit-sanity
/// complement of the frame error rate.
pub fn frame_accuracy<F: Scalar>(
    model: &Model<F>,
    dialogues: &[Dialogue],
    vocab: &Vocabulary,
    labels: &LabelSpace,
    batch: usize,
) -> Result<f64, SluError> {
    let (report, _) = evaluate_model(model, dialogues, vocab, labels, batch)?;
    Ok(100.0 - report.frame_error_rate)
}
