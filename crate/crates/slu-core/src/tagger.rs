//! Joint frame tagger: a two-layer stacked Bi-RNN over the current
//! utterance whose second layer is initialized from the dialogue-context
//! vector, with three heads — domain softmax, multi-label intent sigmoid,
//! and a per-token IOB slot softmax over the unified slot schema.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::cells::{run_birnn, BiRnnInit, CellVars, LstmCellParams};
use crate::encoders::{BiGruParams, PackedBatch};
use crate::error::SluError;
use crate::optim::dropout;
use crate::params::ParamSet;
use crate::pipeline::{EncodedExample, LabelSpace};
use crate::tape::{Scalar, Tape, Var};

/// Per-direction hidden size of both tagger layers; equals the context
/// width so the init projections are square.
pub const TAG_HIDDEN: usize = 128;

#[derive(Debug, Clone)]
pub struct TaggerParams {
    pub layer1: BiGruParams,
    pub layer2_fwd: LstmCellParams,
    pub layer2_bwd: LstmCellParams,
    /// Bias-free projections taking h_t to the four layer-2 initial states.
    pub proj_fwd_h: usize,
    pub proj_bwd_h: usize,
    pub proj_fwd_c: usize,
    pub proj_bwd_c: usize,
    pub domain_w: usize,
    pub domain_b: usize,
    pub intent_w: usize,
    pub intent_b: usize,
    pub slot_w: usize,
    pub slot_b: usize,
    pub hidden: usize,
}

impl TaggerParams {
    pub fn init<F: Scalar>(
        ps: &mut ParamSet<F>,
        embed_dim: usize,
        hidden: usize,
        context_dim: usize,
        num_domains: usize,
        num_intents: usize,
        num_slots: usize,
        rng: &mut impl Rng,
    ) -> Self {
        TaggerParams {
            layer1: BiGruParams::init(ps, "tag.l1", embed_dim, hidden, rng),
            layer2_fwd: LstmCellParams::init(ps, "tag.l2.fwd", 2 * hidden, hidden, rng),
            layer2_bwd: LstmCellParams::init(ps, "tag.l2.bwd", 2 * hidden, hidden, rng),
            proj_fwd_h: ps.add_glorot("tag.proj.fwd_h", context_dim, hidden, rng),
            proj_bwd_h: ps.add_glorot("tag.proj.bwd_h", context_dim, hidden, rng),
            proj_fwd_c: ps.add_glorot("tag.proj.fwd_c", context_dim, hidden, rng),
            proj_bwd_c: ps.add_glorot("tag.proj.bwd_c", context_dim, hidden, rng),
            domain_w: ps.add_glorot("tag.head.domain.W", 2 * hidden, num_domains, rng),
            domain_b: ps.add_zero_bias("tag.head.domain.b", num_domains),
            intent_w: ps.add_glorot("tag.head.intent.W", 2 * hidden, num_intents, rng),
            intent_b: ps.add_zero_bias("tag.head.intent.b", num_intents),
            slot_w: ps.add_glorot("tag.head.slot.W", 2 * hidden, num_slots, rng),
            slot_b: ps.add_zero_bias("tag.head.slot.b", num_slots),
            hidden,
        }
    }
}

/// Head outputs for one batch. Rows of `slot_logits` are packed t-major;
/// `slot_rows` maps each row back to (example index, token position).
pub struct TagOutput {
    /// `[B, num_domains]`, original example order.
    pub domain_logits: Var,
    /// `[B, num_intents]`.
    pub intent_logits: Var,
    /// `[total_tokens, num_slots]`.
    pub slot_logits: Var,
    pub slot_rows: Vec<(usize, usize)>,
}

/// Run the tagger over a batch. `h` is the `[B, context_dim]` dialogue
/// encoding; dropout is active only when `training`.
#[allow(clippy::too_many_arguments)]
pub fn tag<F: Scalar>(
    tape: &mut Tape<F>,
    ps: &ParamSet<F>,
    p: &TaggerParams,
    emb: Var,
    examples: &[EncodedExample],
    h: Var,
    training: bool,
    dropout_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TagOutput, SluError> {
    let seqs: Vec<&[usize]> = examples.iter().map(|e| e.current.as_slice()).collect();
    let packed = PackedBatch::new(&seqs.iter().map(|s| s.len()).collect::<Vec<_>>());
    let steps = packed.steps(tape, emb, &seqs);
    let l1_cell = p.layer1.vars(tape, ps);
    let l1 = run_birnn(tape, &l1_cell, &steps, &packed.lens_sorted, None);
    let l1_out: Vec<Var> = l1
        .outputs
        .iter()
        .map(|&o| dropout(tape, o, dropout_rate, training, rng))
        .collect::<Result<_, _>>()?;

    // Layer-2 initial states: four bias-free projections of h_t, in the
    // packed (length-sorted) row order.
    let h_sorted = tape.gather_rows(h, &packed.order);
    let proj = |tape: &mut Tape<F>, w: usize| {
        let wv = tape.param(ps, w);
        tape.matmul(h_sorted, wv)
    };
    let init = BiRnnInit {
        fwd_h: proj(tape, p.proj_fwd_h),
        bwd_h: proj(tape, p.proj_bwd_h),
        fwd_c: Some(proj(tape, p.proj_fwd_c)),
        bwd_c: Some(proj(tape, p.proj_bwd_c)),
    };
    let l2_cell = CellVars::Lstm {
        fwd: p.layer2_fwd.vars(tape, ps),
        bwd: p.layer2_bwd.vars(tape, ps),
    };
    let l2 = run_birnn(tape, &l2_cell, &l1_out, &packed.lens_sorted, Some(init));

    // Utterance representation s^2 for the whole-utterance heads.
    let s2 = packed.unpermute(tape, l2.final_state);
    let s2 = dropout(tape, s2, dropout_rate, training, rng)?;
    let head = |tape: &mut Tape<F>, x: Var, w: usize, b: usize| {
        let wv = tape.param(ps, w);
        let bv = tape.param(ps, b);
        let y = tape.matmul(x, wv);
        tape.add_row(y, bv)
    };
    let domain_logits = head(tape, s2, p.domain_w, p.domain_b);
    let intent_logits = head(tape, s2, p.intent_w, p.intent_b);

    // Token-level head over all real tokens, t-major.
    let mut flat = l2.outputs[0];
    for &o in &l2.outputs[1..] {
        flat = tape.concat_rows(flat, o);
    }
    let flat = dropout(tape, flat, dropout_rate, training, rng)?;
    let slot_logits = head(tape, flat, p.slot_w, p.slot_b);
    let mut slot_rows = Vec::new();
    for (t, o) in l2.outputs.iter().enumerate() {
        let active = tape.value(*o).nrows();
        for rank in 0..active {
            slot_rows.push((packed.order[rank], t));
        }
    }

    Ok(TagOutput {
        domain_logits,
        intent_logits,
        slot_logits,
        slot_rows,
    })
}

/// Joint loss: batch-mean domain cross-entropy + batch-mean summed intent
/// binary cross-entropy + batch-mean of per-utterance token-averaged slot
/// cross-entropy, weighted 1:1:1 by default.
pub fn joint_loss<F: Scalar>(
    tape: &mut Tape<F>,
    out: &TagOutput,
    examples: &[EncodedExample],
    num_intents: usize,
    weights: (f64, f64, f64),
) -> Var {
    let b = examples.len();
    let inv_b = F::from_f64(1.0 / b as f64);

    let domain_targets: Vec<usize> = examples.iter().map(|e| e.domain).collect();
    let row_w = Array1::from_elem(b, inv_b * F::from_f64(weights.0));
    let domain_loss = tape.softmax_xent(out.domain_logits, &domain_targets, &row_w);

    let mut intent_targets = Array2::zeros((b, num_intents));
    for (i, e) in examples.iter().enumerate() {
        for &idx in &e.intents {
            intent_targets[[i, idx]] = F::one();
        }
    }
    let row_w = Array1::from_elem(b, inv_b * F::from_f64(weights.1));
    let intent_loss = tape.bce_logits(out.intent_logits, intent_targets, &row_w);

    let slot_targets: Vec<usize> = out
        .slot_rows
        .iter()
        .map(|&(ex, t)| examples[ex].slots[t])
        .collect();
    let slot_w = Array1::from_iter(out.slot_rows.iter().map(|&(ex, _)| {
        inv_b * F::from_f64(weights.2 / examples[ex].current.len() as f64)
    }));
    let slot_loss = tape.softmax_xent(out.slot_logits, &slot_targets, &slot_w);

    let s = tape.add(domain_loss, intent_loss);
    tape.add(s, slot_loss)
}

/// Decoded frame plus retained head probabilities.
#[derive(Debug, Clone)]
pub struct FramePrediction {
    pub domain: String,
    pub intents: Vec<String>,
    pub iob: Vec<String>,
    pub domain_probs: Vec<f64>,
    pub intent_probs: Vec<f64>,
}

/// Repair IOB labels in place: an I-X that does not continue a span of X
/// becomes B-X.
pub fn repair_iob(labels: &mut [String]) {
    for i in 0..labels.len() {
        if let Some(name) = labels[i].strip_prefix("I-") {
            let continues = i > 0
                && (labels[i - 1].strip_prefix("B-") == Some(name)
                    || labels[i - 1].strip_prefix("I-") == Some(name));
            if !continues {
                labels[i] = format!("B-{name}");
            }
        }
    }
}

/// Decode head outputs into per-example frame predictions: domain argmax,
/// intents thresholded at probability 0.5, per-token slot argmax with IOB
/// repair.
pub fn decode_frames<F: Scalar>(
    tape: &Tape<F>,
    out: &TagOutput,
    examples: &[EncodedExample],
    labels: &LabelSpace,
) -> Vec<FramePrediction> {
    let domain = tape.value(out.domain_logits);
    let intent = tape.value(out.intent_logits);
    let slots = tape.value(out.slot_logits);

    let softmax_row = |row: ndarray::ArrayView1<F>| -> Vec<f64> {
        let max = row.iter().cloned().fold(F::min_value(), F::max);
        let exps: Vec<f64> = row.iter().map(|&x| (x - max).to_f64().exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.iter().map(|e| e / z).collect()
    };
    let argmax = |v: &[f64]| {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
    };

    let mut preds: Vec<FramePrediction> = examples
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let dp = softmax_row(domain.row(i));
            let ip: Vec<f64> = intent
                .row(i)
                .iter()
                .map(|&x| 1.0 / (1.0 + (-x.to_f64()).exp()))
                .collect();
            let intents: Vec<String> = ip
                .iter()
                .enumerate()
                .filter(|(_, p)| **p >= 0.5)
                .map(|(j, _)| labels.intents[j].clone())
                .collect();
            FramePrediction {
                domain: crate::corpus::DOMAINS[argmax(&dp)].to_string(),
                intents,
                iob: vec![String::new(); e.current.len()],
                domain_probs: dp,
                intent_probs: ip,
            }
        })
        .collect();

    for (row, &(ex, t)) in out.slot_rows.iter().enumerate() {
        let sp = softmax_row(slots.row(row));
        preds[ex].iob[t] = labels.slots[argmax(&sp)].clone();
    }
    for p in &mut preds {
        repair_iob(&mut p.iob);
    }
    preds
}
