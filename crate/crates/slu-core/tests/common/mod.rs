//! Shared harness for the finite-difference gradient checks, used by both
//! the dedicated gradcheck target and the acceptance suite.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use slu_core::cells::{gru_step, lstm_step, run_birnn, CellVars, GruCellParams, LstmCellParams};
use slu_core::corpus::{Dialogue, SemanticFrame, Turn};
use slu_core::encoders::{encode_batch, EncoderKind, EncoderOptions, EncoderParams};
use slu_core::model::{Model, ModelSpec};
use slu_core::params::ParamSet;
use slu_core::pipeline::{encode_corpus, LabelSpace, Vocabulary};
use slu_core::rng;
use slu_core::tagger::joint_loss;
use slu_core::tape::{Tape, Var};

pub const H_STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
/// Coordinates sampled per parameter tensor.
pub const COORDS: usize = 4;

fn loss_value(ps: &ParamSet<f64>, build: &dyn Fn(&mut Tape<f64>, &ParamSet<f64>) -> Var) -> f64 {
    let mut tape = Tape::new();
    let loss = build(&mut tape, ps);
    tape.scalar(loss)
}

/// Compare analytic gradients against central differences on a random
/// subset of coordinates of every parameter. Returns the max relative
/// error seen above the finite-difference noise floor.
pub fn check(
    ps: &mut ParamSet<f64>,
    build: &dyn Fn(&mut Tape<f64>, &ParamSet<f64>) -> Var,
    rng: &mut ChaCha8Rng,
    what: &str,
) -> f64 {
    let mut tape = Tape::new();
    let loss = build(&mut tape, ps);
    ps.zero_grads();
    tape.backward(loss, ps).unwrap();
    let analytic: Vec<Array2<f64>> = (0..ps.len()).map(|i| ps.grad(i).clone()).collect();

    let mut max_rel = 0.0f64;
    for idx in 0..ps.len() {
        let (rows, cols) = ps.value(idx).dim();
        for _ in 0..COORDS.min(rows * cols) {
            let (r, c) = (rng.gen_range(0..rows), rng.gen_range(0..cols));
            let orig = ps.value(idx)[[r, c]];
            ps.value_mut(idx)[[r, c]] = orig + H_STEP;
            let up = loss_value(ps, build);
            ps.value_mut(idx)[[r, c]] = orig - H_STEP;
            let down = loss_value(ps, build);
            ps.value_mut(idx)[[r, c]] = orig;

            let numeric = (up - down) / (2.0 * H_STEP);
            let a = analytic[idx][[r, c]];
            // Below the central-difference noise floor (~eps*|loss|/h) the
            // relative test is meaningless; require absolute agreement.
            if (a - numeric).abs() < 1e-8 {
                continue;
            }
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
            assert!(
                rel < TOL,
                "{what}: param '{}'[{r},{c}] analytic {a} vs numeric {numeric} (rel {rel:.2e})",
                ps.name(idx)
            );
        }
    }
    max_rel
}

pub fn rand_param(
    ps: &mut ParamSet<f64>,
    name: &str,
    rows: usize,
    cols: usize,
    rng: &mut ChaCha8Rng,
) -> usize {
    let v = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-0.8..0.8));
    ps.add(name, v)
}

pub fn gru_step_gradients(seed: u64) -> f64 {
    let mut r = rng::labeled(seed, "gc/gru");
    let mut ps = ParamSet::new();
    let cell = GruCellParams::init(&mut ps, "gru", 5, 4, &mut r);
    let x = rand_param(&mut ps, "x", 3, 5, &mut r);
    let h0 = rand_param(&mut ps, "h0", 3, 4, &mut r);
    let build = move |tape: &mut Tape<f64>, ps: &ParamSet<f64>| {
        let vars = cell.vars(tape, ps);
        let xv = tape.param(ps, x);
        let hv = tape.param(ps, h0);
        let h1 = gru_step(tape, &vars, xv, hv);
        tape.sum_all(h1)
    };
    check(&mut ps, &build, &mut r, "gru step")
}

pub fn lstm_step_gradients(seed: u64) -> f64 {
    let mut r = rng::labeled(seed, "gc/lstm");
    let mut ps = ParamSet::new();
    let cell = LstmCellParams::init(&mut ps, "lstm", 5, 4, &mut r);
    let x = rand_param(&mut ps, "x", 3, 5, &mut r);
    let h0 = rand_param(&mut ps, "h0", 3, 4, &mut r);
    let c0 = rand_param(&mut ps, "c0", 3, 4, &mut r);
    let build = move |tape: &mut Tape<f64>, ps: &ParamSet<f64>| {
        let vars = cell.vars(tape, ps);
        let xv = tape.param(ps, x);
        let hv = tape.param(ps, h0);
        let cv = tape.param(ps, c0);
        let (h1, c1) = lstm_step(tape, &vars, xv, hv, cv);
        let sh = tape.sum_all(h1);
        let sc = tape.sum_all(c1);
        tape.add(sh, sc)
    };
    check(&mut ps, &build, &mut r, "lstm step")
}

pub fn birnn_gradients(seed: u64) -> f64 {
    let mut r = rng::labeled(seed, "gc/birnn");
    let mut ps = ParamSet::new();
    let cell = GruCellParams::init(&mut ps, "fwd", 4, 3, &mut r);
    let bwd = GruCellParams::init(&mut ps, "bwd", 4, 3, &mut r);
    // Two sequences, lengths 8 and 5; the embedding carries the gradient
    // for every step input.
    let emb = rand_param(&mut ps, "emb", 12, 4, &mut r);
    let ids: Vec<Vec<usize>> = (0..8)
        .map(|t| {
            let mut row = vec![r.gen_range(0..12)];
            if t < 5 {
                row.push(r.gen_range(0..12));
            }
            row
        })
        .collect();
    let build = move |tape: &mut Tape<f64>, ps: &ParamSet<f64>| {
        let vars = CellVars::Gru {
            fwd: cell.vars(tape, ps),
            bwd: bwd.vars(tape, ps),
        };
        let ev = tape.param(ps, emb);
        let steps: Vec<Var> = ids.iter().map(|row| tape.gather_rows(ev, row)).collect();
        let out = run_birnn(tape, &vars, &steps, &[8, 5], None);
        let a = tape.sum_all(out.final_state);
        let b = tape.sum_all(out.outputs[3]);
        tape.add(a, b)
    };
    check(&mut ps, &build, &mut r, "birnn 8 steps")
}

pub fn tiny_dialogues() -> Vec<Dialogue> {
    let f1 = SemanticFrame::new(
        "movies",
        vec!["movies".into()],
        vec!["O".into(), "O".into(), "B-movie".into()],
    );
    let f2 = SemanticFrame::new(
        "reserve-restaurant",
        vec!["reserve-restaurant".into(), "contextual".into()],
        vec!["O".into(), "O".into(), "B-num_people".into()],
    );
    vec![Dialogue::new_sim(
        "gc-0".into(),
        vec![
            Turn::system(vec!["hello".into(), "there".into()]),
            Turn::user(vec!["tickets".into(), "for".into(), "inferno".into()], f1),
            Turn::system(vec!["how".into(), "many".into(), "people".into()]),
            Turn::user(vec!["table".into(), "for".into(), "2".into()], f2),
        ],
    )]
}

pub fn encoder_gradients(kind: EncoderKind, seed: u64) -> f64 {
    let dialogues = tiny_dialogues();
    let vocab = Vocabulary::build(&[&dialogues], 0).unwrap();
    let labels = LabelSpace::new();
    let examples = encode_corpus(&dialogues, &vocab, &labels).unwrap();
    let mut r = rng::labeled(seed, "gc/encoder");
    let mut ps = ParamSet::new();
    let emb = ps.add_embedding("emb", vocab.len(), 5, &mut r);
    let enc = EncoderParams::init(kind, &mut ps, 5, 3, &mut r);
    let build = move |tape: &mut Tape<f64>, ps: &ParamSet<f64>| {
        let ev = tape.param(ps, emb);
        let out = encode_batch(
            tape,
            ps,
            &enc,
            ev,
            &examples,
            &EncoderOptions::default(),
            false,
        );
        tape.sum_all(out.h)
    };
    check(&mut ps, &build, &mut r, kind.name())
}

pub fn full_model_gradients(seed: u64) -> f64 {
    let dialogues = tiny_dialogues();
    let vocab = Vocabulary::build(&[&dialogues], 0).unwrap();
    let labels = LabelSpace::new();
    let examples = encode_corpus(&dialogues, &vocab, &labels).unwrap();
    let num_intents = labels.intents.len();
    let spec = ModelSpec {
        encoder: "sden".into(),
        score: "cosine".into(),
        vocab_size: vocab.len(),
        embed_dim: 5,
        enc_hidden: 3,
        tag_hidden: 4,
        num_domains: labels.num_domains(),
        num_intents,
        num_slots: labels.slots.len(),
    };
    let mut model = Model::<f64>::init(spec, seed).unwrap();
    let emb = model.emb;
    let enc = model.encoder.clone();
    let tagger = model.tagger.clone();
    let mut r = rng::labeled(seed, "gc/model");
    let build = move |tape: &mut Tape<f64>, ps: &ParamSet<f64>| {
        let ev = tape.param(ps, emb);
        let out = encode_batch(
            tape,
            ps,
            &enc,
            ev,
            &examples,
            &EncoderOptions::default(),
            false,
        );
        let mut drop_rng = rng::labeled(0, "gc/never-drops");
        let tagged = slu_core::tagger::tag(
            tape, ps, &tagger, ev, &examples, out.h, false, 0.0, &mut drop_rng,
        )
        .unwrap();
        joint_loss(tape, &tagged, &examples, num_intents, (1.0, 1.0, 1.0))
    };
    check(&mut model.ps, &build, &mut r, "full model")
}
