//! The three interchangeable dialogue-context encoders.
//!
//! Each produces a 128-dim context vector h_t for a batch of examples:
//! - ED: BiGRU final state over the previous utterance only.
//! - MN: memory network — every history utterance is encoded by a shared
//!   BiGRU, scored against the encoded current utterance, and the encodings
//!   are attention-averaged.
//! - SDEN: every memory is combined with the current-utterance encoding by
//!   a shared feed-forward gate, and a session BiGRU consumes the gated
//!   vectors in chronological order; its final state is h_t.

use ndarray::Array2;
use rand::Rng;

use crate::cells::{run_birnn, BiRnnOutput, CellVars, GruCellParams};
use crate::params::ParamSet;
use crate::pipeline::{EncodedExample, HISTORY_LEN};
use crate::tape::{Scalar, Tape, Var};

pub const EMBED_DIM: usize = 256;
/// Per-direction hidden size; h_t is twice this.
pub const ENC_HIDDEN: usize = 64;
pub const CONTEXT_DIM: usize = 2 * ENC_HIDDEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    Ed,
    Mn,
    Sden,
}

impl EncoderKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ed" => Some(EncoderKind::Ed),
            "mn" => Some(EncoderKind::Mn),
            "sden" => Some(EncoderKind::Sden),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EncoderKind::Ed => "ed",
            EncoderKind::Mn => "mn",
            EncoderKind::Sden => "sden",
        }
    }
}

/// Attention scoring for MN: cosine (normalized) or raw dot product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttentionScore {
    #[default]
    Cosine,
    Dot,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EncoderOptions {
    pub score: AttentionScore,
    /// Exclude pad history slots from the attention softmax. Off by
    /// default: pad slots legitimately receive attention mass.
    pub mask_padding: bool,
}

#[derive(Debug, Clone)]
pub struct BiGruParams {
    pub fwd: GruCellParams,
    pub bwd: GruCellParams,
}

impl BiGruParams {
    pub fn init<F: Scalar>(
        ps: &mut ParamSet<F>,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        BiGruParams {
            fwd: GruCellParams::init(ps, &format!("{prefix}.fwd"), input_dim, hidden, rng),
            bwd: GruCellParams::init(ps, &format!("{prefix}.bwd"), input_dim, hidden, rng),
        }
    }

    pub fn vars<F: Scalar>(&self, tape: &mut Tape<F>, ps: &ParamSet<F>) -> CellVars {
        CellVars::Gru {
            fwd: self.fwd.vars(tape, ps),
            bwd: self.bwd.vars(tape, ps),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EdParams {
    pub rnn: BiGruParams,
}

#[derive(Debug, Clone)]
pub struct MnParams {
    pub memory: BiGruParams,
    pub current: BiGruParams,
}

#[derive(Debug, Clone)]
pub struct SdenParams {
    pub memory: BiGruParams,
    pub current: BiGruParams,
    /// Shared feed-forward gate: [m_k ; c] (4H) -> 2H, sigmoid activation.
    pub ff_w: usize,
    pub ff_b: usize,
    pub session: BiGruParams,
}

#[derive(Debug, Clone)]
pub enum EncoderParams {
    Ed(EdParams),
    Mn(MnParams),
    Sden(SdenParams),
}

impl EncoderParams {
    pub fn init<F: Scalar>(
        kind: EncoderKind,
        ps: &mut ParamSet<F>,
        embed_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        match kind {
            EncoderKind::Ed => EncoderParams::Ed(EdParams {
                rnn: BiGruParams::init(ps, "enc.ed", embed_dim, hidden, rng),
            }),
            EncoderKind::Mn => EncoderParams::Mn(MnParams {
                memory: BiGruParams::init(ps, "enc.mem", embed_dim, hidden, rng),
                current: BiGruParams::init(ps, "enc.cur", embed_dim, hidden, rng),
            }),
            EncoderKind::Sden => EncoderParams::Sden(SdenParams {
                memory: BiGruParams::init(ps, "enc.mem", embed_dim, hidden, rng),
                current: BiGruParams::init(ps, "enc.cur", embed_dim, hidden, rng),
                ff_w: ps.add_glorot("enc.ff.W", 4 * hidden, 2 * hidden, rng),
                ff_b: ps.add_zero_bias("enc.ff.b", 2 * hidden),
                session: BiGruParams::init(ps, "enc.session", 2 * hidden, hidden, rng),
            }),
        }
    }

    pub fn kind(&self) -> EncoderKind {
        match self {
            EncoderParams::Ed(_) => EncoderKind::Ed,
            EncoderParams::Mn(_) => EncoderKind::Mn,
            EncoderParams::Sden(_) => EncoderKind::Sden,
        }
    }
}

/// Length-descending packing of variable-length sequences for the batched
/// RNN: per-step input matrices carry only the still-active rows.
pub struct PackedBatch {
    /// Original indices in sorted (length-descending) order.
    pub order: Vec<usize>,
    pub lens_sorted: Vec<usize>,
    /// `sorted_rank[i]` = row of original sequence `i` in sorted order.
    pub sorted_rank: Vec<usize>,
}

impl PackedBatch {
    pub fn new(lens: &[usize]) -> Self {
        let mut order: Vec<usize> = (0..lens.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(lens[i]), i));
        let lens_sorted: Vec<usize> = order.iter().map(|&i| lens[i]).collect();
        let mut sorted_rank = vec![0; lens.len()];
        for (rank, &i) in order.iter().enumerate() {
            sorted_rank[i] = rank;
        }
        PackedBatch {
            order,
            lens_sorted,
            sorted_rank,
        }
    }

    /// Per-step embedded inputs: `steps[t]` gathers the embedding rows of
    /// token `t` for every sequence still active at `t`.
    pub fn steps<F: Scalar>(
        &self,
        tape: &mut Tape<F>,
        emb: Var,
        seqs: &[&[usize]],
    ) -> Vec<Var> {
        let max_len = self.lens_sorted.first().copied().unwrap_or(0);
        (0..max_len)
            .map(|t| {
                let ids: Vec<usize> = self
                    .order
                    .iter()
                    .filter(|&&i| seqs[i].len() > t)
                    .map(|&i| seqs[i][t])
                    .collect();
                tape.gather_rows(emb, &ids)
            })
            .collect()
    }

    /// Restore a `[N, D]` sorted-order matrix to original sequence order.
    pub fn unpermute<F: Scalar>(&self, tape: &mut Tape<F>, x: Var) -> Var {
        tape.gather_rows(x, &self.sorted_rank)
    }
}

/// Run a shared bidirectional GRU over a batch of sequences and return the
/// `[N, 2H]` final states in original order, plus the raw pass output.
pub fn encode_sequences<F: Scalar>(
    tape: &mut Tape<F>,
    ps: &ParamSet<F>,
    cell: &BiGruParams,
    emb: Var,
    seqs: &[&[usize]],
) -> (Var, BiRnnOutput, PackedBatch) {
    let lens: Vec<usize> = seqs.iter().map(|s| s.len()).collect();
    let packed = PackedBatch::new(&lens);
    let steps = packed.steps(tape, emb, seqs);
    let vars = cell.vars(tape, ps);
    let out = run_birnn(tape, &vars, &steps, &packed.lens_sorted, None);
    let finals = packed.unpermute(tape, out.final_state);
    (finals, out, packed)
}

/// Batched context encoding plus optional per-history-slot trace.
pub struct EncoderOutput<F: Scalar> {
    /// `[B, 2H]` context vectors h_t.
    pub h: Var,
    /// Per example, `HISTORY_LEN` nonnegative weights: MN attention, or
    /// SDEN session-state-change magnitudes. None for ED.
    pub attention: Option<Vec<Vec<F>>>,
    _marker: std::marker::PhantomData<F>,
}

fn memory_and_current<F: Scalar>(
    tape: &mut Tape<F>,
    ps: &ParamSet<F>,
    memory: &BiGruParams,
    current: &BiGruParams,
    emb: Var,
    examples: &[EncodedExample],
) -> (Var, Var) {
    let mem_seqs: Vec<&[usize]> = examples
        .iter()
        .flat_map(|e| e.history.iter().map(|h| h.as_slice()))
        .collect();
    let (m, _, _) = encode_sequences(tape, ps, memory, emb, &mem_seqs);
    let cur_seqs: Vec<&[usize]> = examples.iter().map(|e| e.current.as_slice()).collect();
    let (c, _, _) = encode_sequences(tape, ps, current, emb, &cur_seqs);
    (m, c)
}

/// Repeat each row of `c` once per history slot: `[B, D]` -> `[B*K, D]`.
fn repeat_rows<F: Scalar>(tape: &mut Tape<F>, c: Var, batch: usize) -> Var {
    let ids: Vec<usize> = (0..batch).flat_map(|b| std::iter::repeat(b).take(HISTORY_LEN)).collect();
    tape.gather_rows(c, &ids)
}

pub fn encode_batch<F: Scalar>(
    tape: &mut Tape<F>,
    ps: &ParamSet<F>,
    params: &EncoderParams,
    emb: Var,
    examples: &[EncodedExample],
    opts: &EncoderOptions,
    want_trace: bool,
) -> EncoderOutput<F> {
    let b = examples.len();
    assert!(b > 0, "encode_batch: empty batch");
    match params {
        EncoderParams::Ed(p) => {
            // Previous utterance = last history slot (distance 1).
            let seqs: Vec<&[usize]> = examples
                .iter()
                .map(|e| e.history[HISTORY_LEN - 1].as_slice())
                .collect();
            let (h, _, _) = encode_sequences(tape, ps, &p.rnn, emb, &seqs);
            EncoderOutput {
                h,
                attention: None,
                _marker: std::marker::PhantomData,
            }
        }
        EncoderParams::Mn(p) => {
            let (m, c) = memory_and_current(tape, ps, &p.memory, &p.current, emb, examples);
            let c_rep = repeat_rows(tape, c, b);
            let scores = match opts.score {
                AttentionScore::Cosine => tape.cosine_rows(m, c_rep),
                AttentionScore::Dot => tape.dot_rows(m, c_rep),
            };
            let mut scores = tape.reshape(scores, b, HISTORY_LEN);
            if opts.mask_padding {
                let mut mask = Array2::zeros((b, HISTORY_LEN));
                for (i, e) in examples.iter().enumerate() {
                    for (k, &real) in e.history_real.iter().enumerate() {
                        if !real {
                            mask[[i, k]] = F::from_f64(-1e9);
                        }
                    }
                }
                let mask = tape.constant(mask);
                scores = tape.add(scores, mask);
            }
            let a = tape.softmax_rows(scores);
            let h = tape.attn_apply(a, m);
            let attention = want_trace.then(|| {
                let av = tape.value(a);
                (0..b).map(|i| av.row(i).to_vec()).collect()
            });
            EncoderOutput {
                h,
                attention,
                _marker: std::marker::PhantomData,
            }
        }
        EncoderParams::Sden(p) => {
            let (m, c) = memory_and_current(tape, ps, &p.memory, &p.current, emb, examples);
            let c_rep = repeat_rows(tape, c, b);
            let mc = tape.concat_cols(m, c_rep);
            let ffw = tape.param(ps, p.ff_w);
            let ffb = tape.param(ps, p.ff_b);
            let pre = tape.matmul(mc, ffw);
            let pre = tape.add_row(pre, ffb);
            let g = tape.sigmoid(pre);
            // Session pass, oldest slot first; all sequences have length K.
            let steps: Vec<Var> = (0..HISTORY_LEN)
                .map(|t| {
                    let ids: Vec<usize> = (0..b).map(|i| i * HISTORY_LEN + t).collect();
                    tape.gather_rows(g, &ids)
                })
                .collect();
            let vars = p.session.vars(tape, ps);
            let lens = vec![HISTORY_LEN; b];
            let out = run_birnn(tape, &vars, &steps, &lens, None);
            let attention = want_trace.then(|| {
                (0..b)
                    .map(|i| session_trace(tape, &out.fwd_states, i, &examples[i].history_real))
                    .collect()
            });
            EncoderOutput {
                h: out.final_state,
                attention,
                _marker: std::marker::PhantomData,
            }
        }
    }
}

/// SDEN trace: L2 norm of the change in the forward session state at each
/// slot, normalized to sum to 1 over real slots (over all slots when the
/// history is entirely padding).
fn session_trace<F: Scalar>(
    tape: &Tape<F>,
    fwd_states: &[Var],
    row: usize,
    real: &[bool],
) -> Vec<F> {
    let mut deltas = Vec::with_capacity(fwd_states.len());
    let mut prev: Option<Var> = None;
    for &s in fwd_states {
        let cur = tape.value(s);
        let d: F = match prev {
            Some(p) => {
                let pv = tape.value(p);
                cur.row(row)
                    .iter()
                    .zip(pv.row(row).iter())
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum::<F>()
                    .sqrt()
            }
            None => cur.row(row).iter().map(|&a| a * a).sum::<F>().sqrt(),
        };
        deltas.push(d);
        prev = Some(s);
    }
    let any_real = real.iter().any(|&r| r);
    let denom: F = deltas
        .iter()
        .zip(real.iter())
        .filter(|(_, &r)| r || !any_real)
        .map(|(&d, _)| d)
        .sum();
    if denom > F::zero() {
        deltas
            .iter()
            .zip(real.iter())
            .map(|(&d, &r)| {
                if r || !any_real {
                    d / denom
                } else {
                    F::zero()
                }
            })
            .collect()
    } else {
        let n = F::from_f64(deltas.len() as f64);
        deltas.iter().map(|_| F::one() / n).collect()
    }
}
