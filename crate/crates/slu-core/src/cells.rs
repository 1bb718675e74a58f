//! GRU and LSTM cell steps plus the bidirectional sequence runner.
//!
//! Batches are packed: sequences must be sorted by length descending, and the
//! per-time-step input matrices carry only the rows still active at that step
//! (a prefix of the batch). Rows stop updating once their sequence ends, so
//! the state matrix after the last step holds each sequence's final state.

use ndarray::Array2;
use rand::Rng;

use crate::params::ParamSet;
use crate::tape::{Scalar, Tape, Var};

/// Parameter indices for one GRU cell direction.
#[derive(Debug, Clone)]
pub struct GruCellParams {
    pub w_z: usize,
    pub u_z: usize,
    pub b_z: usize,
    pub w_r: usize,
    pub u_r: usize,
    pub b_r: usize,
    pub w_h: usize,
    pub u_h: usize,
    pub b_h: usize,
    pub input_dim: usize,
    pub hidden: usize,
}

impl GruCellParams {
    pub fn init<F: Scalar>(
        ps: &mut ParamSet<F>,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        GruCellParams {
            w_z: ps.add_glorot(format!("{prefix}.W_z"), input_dim, hidden, rng),
            u_z: ps.add_glorot(format!("{prefix}.U_z"), hidden, hidden, rng),
            b_z: ps.add_zero_bias(format!("{prefix}.b_z"), hidden),
            w_r: ps.add_glorot(format!("{prefix}.W_r"), input_dim, hidden, rng),
            u_r: ps.add_glorot(format!("{prefix}.U_r"), hidden, hidden, rng),
            b_r: ps.add_zero_bias(format!("{prefix}.b_r"), hidden),
            w_h: ps.add_glorot(format!("{prefix}.W_h"), input_dim, hidden, rng),
            u_h: ps.add_glorot(format!("{prefix}.U_h"), hidden, hidden, rng),
            b_h: ps.add_zero_bias(format!("{prefix}.b_h"), hidden),
            input_dim,
            hidden,
        }
    }

    pub fn vars<F: Scalar>(&self, tape: &mut Tape<F>, ps: &ParamSet<F>) -> GruVars {
        GruVars {
            w_z: tape.param(ps, self.w_z),
            u_z: tape.param(ps, self.u_z),
            b_z: tape.param(ps, self.b_z),
            w_r: tape.param(ps, self.w_r),
            u_r: tape.param(ps, self.u_r),
            b_r: tape.param(ps, self.b_r),
            w_h: tape.param(ps, self.w_h),
            u_h: tape.param(ps, self.u_h),
            b_h: tape.param(ps, self.b_h),
            input_dim: self.input_dim,
            hidden: self.hidden,
        }
    }
}

/// Tape handles for one GRU direction.
#[derive(Clone)]
pub struct GruVars {
    pub w_z: Var,
    pub u_z: Var,
    pub b_z: Var,
    pub w_r: Var,
    pub u_r: Var,
    pub b_r: Var,
    pub w_h: Var,
    pub u_h: Var,
    pub b_h: Var,
    pub input_dim: usize,
    pub hidden: usize,
}

/// Standard GRU recurrence (Cho-style reset inside the candidate):
/// z = sig(Wx + Uh + b); r likewise; h~ = tanh(W_h x + U_h (r*h) + b_h);
/// h' = (1-z)*h + z*h~.
pub fn gru_step<F: Scalar>(tape: &mut Tape<F>, p: &GruVars, x: Var, h: Var) -> Var {
    assert_eq!(tape.value(x).ncols(), p.input_dim, "gru_step: input dim");
    assert_eq!(tape.value(h).ncols(), p.hidden, "gru_step: hidden dim");
    assert_eq!(tape.value(x).nrows(), tape.value(h).nrows(), "gru_step: rows");
    let gate = |tape: &mut Tape<F>, w, u, b| {
        let xw = tape.matmul(x, w);
        let hu = tape.matmul(h, u);
        let s = tape.add(xw, hu);
        tape.add_row(s, b)
    };
    let z_pre = gate(tape, p.w_z, p.u_z, p.b_z);
    let z = tape.sigmoid(z_pre);
    let r_pre = gate(tape, p.w_r, p.u_r, p.b_r);
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h);
    let xw = tape.matmul(x, p.w_h);
    let rhu = tape.matmul(rh, p.u_h);
    let cand_pre = tape.add(xw, rhu);
    let cand_pre = tape.add_row(cand_pre, p.b_h);
    let cand = tape.tanh(cand_pre);
    let keep = tape.one_minus(z);
    let kh = tape.mul(keep, h);
    let zc = tape.mul(z, cand);
    tape.add(kh, zc)
}

/// Parameter indices for one LSTM cell direction.
#[derive(Debug, Clone)]
pub struct LstmCellParams {
    pub w_i: usize,
    pub u_i: usize,
    pub b_i: usize,
    pub w_f: usize,
    pub u_f: usize,
    pub b_f: usize,
    pub w_o: usize,
    pub u_o: usize,
    pub b_o: usize,
    pub w_g: usize,
    pub u_g: usize,
    pub b_g: usize,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmCellParams {
    pub fn init<F: Scalar>(
        ps: &mut ParamSet<F>,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        fn gate<F: Scalar>(
            ps: &mut ParamSet<F>,
            prefix: &str,
            name: &str,
            input_dim: usize,
            hidden: usize,
            rng: &mut impl Rng,
        ) -> (usize, usize, usize) {
            (
                ps.add_glorot(format!("{prefix}.W_{name}"), input_dim, hidden, rng),
                ps.add_glorot(format!("{prefix}.U_{name}"), hidden, hidden, rng),
                ps.add_zero_bias(format!("{prefix}.b_{name}"), hidden),
            )
        }
        let (w_i, u_i, b_i) = gate(ps, prefix, "i", input_dim, hidden, rng);
        let (w_f, u_f, b_f) = gate(ps, prefix, "f", input_dim, hidden, rng);
        let (w_o, u_o, b_o) = gate(ps, prefix, "o", input_dim, hidden, rng);
        let (w_g, u_g, b_g) = gate(ps, prefix, "g", input_dim, hidden, rng);
        LstmCellParams {
            w_i,
            u_i,
            b_i,
            w_f,
            u_f,
            b_f,
            w_o,
            u_o,
            b_o,
            w_g,
            u_g,
            b_g,
            input_dim,
            hidden,
        }
    }

    pub fn vars<F: Scalar>(&self, tape: &mut Tape<F>, ps: &ParamSet<F>) -> LstmVars {
        LstmVars {
            w_i: tape.param(ps, self.w_i),
            u_i: tape.param(ps, self.u_i),
            b_i: tape.param(ps, self.b_i),
            w_f: tape.param(ps, self.w_f),
            u_f: tape.param(ps, self.u_f),
            b_f: tape.param(ps, self.b_f),
            w_o: tape.param(ps, self.w_o),
            u_o: tape.param(ps, self.u_o),
            b_o: tape.param(ps, self.b_o),
            w_g: tape.param(ps, self.w_g),
            u_g: tape.param(ps, self.u_g),
            b_g: tape.param(ps, self.b_g),
            input_dim: self.input_dim,
            hidden: self.hidden,
        }
    }
}

#[derive(Clone)]
pub struct LstmVars {
    pub w_i: Var,
    pub u_i: Var,
    pub b_i: Var,
    pub w_f: Var,
    pub u_f: Var,
    pub b_f: Var,
    pub w_o: Var,
    pub u_o: Var,
    pub b_o: Var,
    pub w_g: Var,
    pub u_g: Var,
    pub b_g: Var,
    pub input_dim: usize,
    pub hidden: usize,
}

/// i,f,o = sig(.); g = tanh(.); c' = f*c + i*g; h' = o*tanh(c').
pub fn lstm_step<F: Scalar>(
    tape: &mut Tape<F>,
    p: &LstmVars,
    x: Var,
    h: Var,
    c: Var,
) -> (Var, Var) {
    assert_eq!(tape.value(x).ncols(), p.input_dim, "lstm_step: input dim");
    assert_eq!(tape.value(h).ncols(), p.hidden, "lstm_step: hidden dim");
    assert_eq!(tape.value(c).ncols(), p.hidden, "lstm_step: cell dim");
    let gate = |tape: &mut Tape<F>, w, u, b| {
        let xw = tape.matmul(x, w);
        let hu = tape.matmul(h, u);
        let s = tape.add(xw, hu);
        tape.add_row(s, b)
    };
    let i_pre = gate(tape, p.w_i, p.u_i, p.b_i);
    let i = tape.sigmoid(i_pre);
    let f_pre = gate(tape, p.w_f, p.u_f, p.b_f);
    let f = tape.sigmoid(f_pre);
    let o_pre = gate(tape, p.w_o, p.u_o, p.b_o);
    let o = tape.sigmoid(o_pre);
    let g_pre = gate(tape, p.w_g, p.u_g, p.b_g);
    let g = tape.tanh(g_pre);
    let fc = tape.mul(f, c);
    let ig = tape.mul(i, g);
    let c_new = tape.add(fc, ig);
    let tc = tape.tanh(c_new);
    let h_new = tape.mul(o, tc);
    (h_new, c_new)
}

/// Cell selection for the bidirectional runner.
pub enum CellVars {
    Gru { fwd: GruVars, bwd: GruVars },
    Lstm { fwd: LstmVars, bwd: LstmVars },
}

impl CellVars {
    fn hidden(&self) -> usize {
        match self {
            CellVars::Gru { fwd, .. } => fwd.hidden,
            CellVars::Lstm { fwd, .. } => fwd.hidden,
        }
    }
    fn is_lstm(&self) -> bool {
        matches!(self, CellVars::Lstm { .. })
    }
}

/// Optional explicit initial states, one `[N, H]` matrix per direction.
/// Cell states are required for LSTM cells and ignored for GRU.
pub struct BiRnnInit {
    pub fwd_h: Var,
    pub bwd_h: Var,
    pub fwd_c: Option<Var>,
    pub bwd_c: Option<Var>,
}

/// Output of a bidirectional pass.
pub struct BiRnnOutput {
    /// Per-position `[active_t, 2H]` concatenations `[fwd_t ; bwd_t]`.
    pub outputs: Vec<Var>,
    /// `[N, 2H]` concatenation of forward and backward final hidden states.
    pub final_state: Var,
    /// Forward hidden state after each position (`[active_t, H]`).
    pub fwd_states: Vec<Var>,
    /// Backward hidden state at each position (`[active_t, H]`).
    pub bwd_states: Vec<Var>,
    /// `[N, 2H]` final cell states (LSTM only).
    pub final_cells: Option<Var>,
}

/// Run a bidirectional RNN over a packed batch.
///
/// `steps[t]` holds the inputs at position `t` for the `active(t)` sequences
/// whose length exceeds `t`; `lens` must be sorted descending and positive.
pub fn run_birnn<F: Scalar>(
    tape: &mut Tape<F>,
    cell: &CellVars,
    steps: &[Var],
    lens: &[usize],
    init: Option<BiRnnInit>,
) -> BiRnnOutput {
    assert!(!steps.is_empty(), "run_birnn: empty sequence");
    assert!(
        lens.windows(2).all(|w| w[0] >= w[1]) && *lens.last().unwrap() > 0,
        "run_birnn: lens must be sorted descending and positive"
    );
    let n = lens.len();
    let max_len = lens[0];
    assert_eq!(steps.len(), max_len, "run_birnn: steps vs max length");
    let h = cell.hidden();
    let active = |t: usize| lens.iter().filter(|&&l| l > t).count();

    let (init_fh, init_bh, init_fc, init_bc) = match init {
        Some(i) => {
            assert_eq!(tape.value(i.fwd_h).dim(), (n, h), "run_birnn: init dim");
            assert_eq!(tape.value(i.bwd_h).dim(), (n, h), "run_birnn: init dim");
            if cell.is_lstm() {
                (
                    i.fwd_h,
                    i.bwd_h,
                    Some(i.fwd_c.expect("lstm needs initial cell state")),
                    Some(i.bwd_c.expect("lstm needs initial cell state")),
                )
            } else {
                (i.fwd_h, i.bwd_h, None, None)
            }
        }
        None => {
            let z = tape.zeros(n, h);
            let (fc, bc) = if cell.is_lstm() {
                (Some(tape.zeros(n, h)), Some(tape.zeros(n, h)))
            } else {
                (None, None)
            };
            (z, z, fc, bc)
        }
    };

    // Updates the prefix of `state` with `new` (rows 0..a), keeping the rest.
    let splice = |tape: &mut Tape<F>, state: Var, new: Var, a: usize| -> Var {
        if a == n {
            new
        } else {
            let rest = tape.slice_rows(state, a, n);
            tape.concat_rows(new, rest)
        }
    };

    let mut fwd_states: Vec<Var> = Vec::with_capacity(max_len);
    let mut fh = init_fh;
    let mut fc = init_fc;
    for (t, &x) in steps.iter().enumerate() {
        let a = active(t);
        assert_eq!(tape.value(x).nrows(), a, "run_birnn: step {t} row count");
        let h_act = if a == n { fh } else { tape.slice_rows(fh, 0, a) };
        match cell {
            CellVars::Gru { fwd, .. } => {
                let h_new = gru_step(tape, fwd, x, h_act);
                fwd_states.push(h_new);
                fh = splice(tape, fh, h_new, a);
            }
            CellVars::Lstm { fwd, .. } => {
                let c_prev = fc.unwrap();
                let c_act = if a == n {
                    c_prev
                } else {
                    tape.slice_rows(c_prev, 0, a)
                };
                let (h_new, c_new) = lstm_step(tape, fwd, x, h_act, c_act);
                fwd_states.push(h_new);
                fh = splice(tape, fh, h_new, a);
                fc = Some(splice(tape, c_prev, c_new, a));
            }
        }
    }

    let mut bwd_states: Vec<Option<Var>> = vec![None; max_len];
    let mut bh = init_bh;
    let mut bc = init_bc;
    for t in (0..max_len).rev() {
        let a = active(t);
        let x = steps[t];
        let h_act = if a == n { bh } else { tape.slice_rows(bh, 0, a) };
        match cell {
            CellVars::Gru { bwd, .. } => {
                let h_new = gru_step(tape, bwd, x, h_act);
                bwd_states[t] = Some(h_new);
                bh = splice(tape, bh, h_new, a);
            }
            CellVars::Lstm { bwd, .. } => {
                let c_prev = bc.unwrap();
                let c_act = if a == n {
                    c_prev
                } else {
                    tape.slice_rows(c_prev, 0, a)
                };
                let (h_new, c_new) = lstm_step(tape, bwd, x, h_act, c_act);
                bwd_states[t] = Some(h_new);
                bh = splice(tape, bh, h_new, a);
                bc = Some(splice(tape, c_prev, c_new, a));
            }
        }
    }
    let bwd_states: Vec<Var> = bwd_states.into_iter().map(|v| v.unwrap()).collect();

    let outputs: Vec<Var> = fwd_states
        .iter()
        .zip(bwd_states.iter())
        .map(|(&f, &b)| tape.concat_cols(f, b))
        .collect();
    let final_state = tape.concat_cols(fh, bh);
    let final_cells = match (fc, bc) {
        (Some(f), Some(b)) => Some(tape.concat_cols(f, b)),
        _ => None,
    };

    BiRnnOutput {
        outputs,
        final_state,
        fwd_states,
        bwd_states,
        final_cells,
    }
}

/// Single-sequence convenience wrapper: embeds each `[1, D]` input row.
pub fn run_birnn_single<F: Scalar>(
    tape: &mut Tape<F>,
    cell: &CellVars,
    seq: &[Array2<F>],
    init: Option<BiRnnInit>,
) -> BiRnnOutput {
    assert!(!seq.is_empty(), "run_birnn: empty sequence");
    let steps: Vec<Var> = seq.iter().map(|x| tape.constant(x.clone())).collect();
    run_birnn(tape, cell, &steps, &[seq.len()], init)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_gru(ps: &mut ParamSet<f64>, input: usize, hidden: usize) -> GruCellParams {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GruCellParams::init(ps, "g", input, hidden, &mut rng);
        for idx in [p.w_z, p.u_z, p.w_r, p.u_r, p.w_h, p.u_h] {
            ps.value_mut(idx).fill(0.0);
        }
        p
    }

    #[test]
    fn gru_zero_params_halves_state() {
        let mut ps = ParamSet::<f64>::new();
        let p = zero_gru(&mut ps, 2, 3);
        let mut t = Tape::new();
        let vars = p.vars(&mut t, &ps);
        let x = t.constant(array![[0.3, -0.7]]);
        let h = t.constant(array![[1.0, -2.0, 0.5]]);
        let out = gru_step(&mut t, &vars, x, h);
        // z = sig(0) = 0.5, cand = tanh(0) = 0 -> h' = 0.5 h
        for (o, e) in t.value(out).iter().zip([0.5, -1.0, 0.25]) {
            assert!((o - e).abs() < 1e-12);
        }
    }

    #[test]
    fn gru_zero_input_zero_state_fixed_point() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = GruCellParams::init(&mut ps, "g", 2, 3, &mut rng);
        let mut t = Tape::new();
        let vars = p.vars(&mut t, &ps);
        let x = t.zeros(1, 2);
        let h = t.zeros(1, 3);
        let out = gru_step(&mut t, &vars, x, h);
        assert!(t.value(out).iter().all(|&v| v.abs() < 1e-12));
    }

    /// Independent scalar-loop GRU oracle.
    fn gru_oracle(
        ps: &ParamSet<f64>,
        p: &GruCellParams,
        x: &Array1<f64>,
        h: &Array1<f64>,
    ) -> Array1<f64> {
        let hsz = p.hidden;
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let lin = |w: usize, u: usize, b: usize, hv: &Array1<f64>, j: usize| {
            let mut s = ps.value(b)[[0, j]];
            for (i, &xi) in x.iter().enumerate() {
                s += xi * ps.value(w)[[i, j]];
            }
            for (i, &hi) in hv.iter().enumerate() {
                s += hi * ps.value(u)[[i, j]];
            }
            s
        };
        let mut out = Array1::zeros(hsz);
        for j in 0..hsz {
            let z = sig(lin(p.w_z, p.u_z, p.b_z, h, j));
            let r_all: Array1<f64> = (0..hsz)
                .map(|k| sig(lin(p.w_r, p.u_r, p.b_r, h, k)))
                .collect();
            let rh: Array1<f64> = (0..hsz).map(|k| r_all[k] * h[k]).collect();
            let cand = lin(p.w_h, p.u_h, p.b_h, &rh, j).tanh();
            out[j] = (1.0 - z) * h[j] + z * cand;
        }
        out
    }

    #[test]
    fn gru_matches_scalar_oracle() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = GruCellParams::init(&mut ps, "g", 4, 3, &mut rng);
        let x = Array1::from_shape_fn(4, |_| rng.gen_range(-1.0..1.0));
        let h = Array1::from_shape_fn(3, |_| rng.gen_range(-1.0..1.0));
        let mut t = Tape::new();
        let vars = p.vars(&mut t, &ps);
        let xv = t.constant(x.clone().insert_axis(ndarray::Axis(0)));
        let hv = t.constant(h.clone().insert_axis(ndarray::Axis(0)));
        let out = gru_step(&mut t, &vars, xv, hv);
        let expect = gru_oracle(&ps, &p, &x, &h);
        for j in 0..3 {
            assert!((t.value(out)[[0, j]] - expect[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn lstm_zero_params_case() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmCellParams::init(&mut ps, "l", 2, 2, &mut rng);
        for idx in [
            p.w_i, p.u_i, p.w_f, p.u_f, p.w_o, p.u_o, p.w_g, p.u_g,
        ] {
            ps.value_mut(idx).fill(0.0);
        }
        let mut t = Tape::new();
        let vars = p.vars(&mut t, &ps);
        let x = t.constant(array![[0.4, 0.6]]);
        let h = t.constant(array![[0.1, -0.1]]);
        let c = t.constant(array![[0.8, -1.2]]);
        let (h2, c2) = lstm_step(&mut t, &vars, x, h, c);
        // gates all 0.5, g = 0 -> c' = 0.5 c, h' = 0.5 tanh(0.5 c)
        for j in 0..2 {
            let cv = t.value(c2)[[0, j]];
            assert!((cv - 0.5 * t.value(c)[[0, j]]).abs() < 1e-12);
            assert!((t.value(h2)[[0, j]] - 0.5 * cv.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn lstm_zero_everything_fixed_point() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = LstmCellParams::init(&mut ps, "l", 2, 2, &mut rng);
        let mut t = Tape::new();
        let vars = p.vars(&mut t, &ps);
        let x = t.zeros(1, 2);
        let h = t.zeros(1, 2);
        let c = t.zeros(1, 2);
        let (h2, c2) = lstm_step(&mut t, &vars, x, h, c);
        assert!(t.value(h2).iter().all(|&v| v.abs() < 1e-12));
        assert!(t.value(c2).iter().all(|&v| v.abs() < 1e-12));
    }

    /// Independent scalar-loop LSTM oracle.
    fn lstm_oracle(
        ps: &ParamSet<f64>,
        p: &LstmCellParams,
        x: &Array1<f64>,
        h: &Array1<f64>,
        c: &Array1<f64>,
    ) -> (Array1<f64>, Array1<f64>) {
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let lin = |w: usize, u: usize, b: usize, j: usize| {
            let mut s = ps.value(b)[[0, j]];
            for (i, &xi) in x.iter().enumerate() {
                s += xi * ps.value(w)[[i, j]];
            }
            for (i, &hi) in h.iter().enumerate() {
                s += hi * ps.value(u)[[i, j]];
            }
            s
        };
        let n = p.hidden;
        let mut hn = Array1::zeros(n);
        let mut cn = Array1::zeros(n);
        for j in 0..n {
            let i = sig(lin(p.w_i, p.u_i, p.b_i, j));
            let f = sig(lin(p.w_f, p.u_f, p.b_f, j));
            let o = sig(lin(p.w_o, p.u_o, p.b_o, j));
            let g = lin(p.w_g, p.u_g, p.b_g, j).tanh();
            cn[j] = f * c[j] + i * g;
            hn[j] = o * cn[j].tanh();
        }
        (hn, cn)
    }

    #[test]
    fn lstm_matches_scalar_oracle() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = LstmCellParams::init(&mut ps, "l", 3, 4, &mut rng);
        let x = Array1::from_shape_fn(3, |_| rng.gen_range(-1.0..1.0));
        let h = Array1::from_shape_fn(4, |_| rng.gen_range(-1.0..1.0));
        let c = Array1::from_shape_fn(4, |_| rng.gen_range(-1.0..1.0));
        let mut t = Tape::new();
        let vars = p.vars(&mut t, &ps);
        let xv = t.constant(x.clone().insert_axis(ndarray::Axis(0)));
        let hv = t.constant(h.clone().insert_axis(ndarray::Axis(0)));
        let cv = t.constant(c.clone().insert_axis(ndarray::Axis(0)));
        let (h2, c2) = lstm_step(&mut t, &vars, xv, hv, cv);
        let (he, ce) = lstm_oracle(&ps, &p, &x, &h, &c);
        for j in 0..4 {
            assert!((t.value(h2)[[0, j]] - he[j]).abs() < 1e-6);
            assert!((t.value(c2)[[0, j]] - ce[j]).abs() < 1e-6);
        }
    }

    fn rand_seq(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> Vec<Array2<f64>> {
        (0..len)
            .map(|_| Array2::from_shape_fn((1, dim), |_| rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn birnn_length_one_output_equals_final_state() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let fwd = GruCellParams::init(&mut ps, "f", 2, 3, &mut rng);
        let bwd = GruCellParams::init(&mut ps, "b", 2, 3, &mut rng);
        let mut t = Tape::new();
        let cell = CellVars::Gru {
            fwd: fwd.vars(&mut t, &ps),
            bwd: bwd.vars(&mut t, &ps),
        };
        let seq = rand_seq(&mut rng, 1, 2);
        let out = run_birnn_single(&mut t, &cell, &seq, None);
        for j in 0..6 {
            assert!((t.value(out.outputs[0])[[0, j]] - t.value(out.final_state)[[0, j]]).abs() < 1e-12);
        }
    }

    #[test]
    fn birnn_palindrome_symmetry() {
        // fwd params == bwd params, palindromic input: fwd outputs read forward
        // equal bwd outputs read backward.
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = GruCellParams::init(&mut ps, "s", 2, 3, &mut rng);
        let mut t = Tape::new();
        let vars = p.vars(&mut t, &ps);
        let cell = CellVars::Gru {
            fwd: vars.clone(),
            bwd: vars,
        };
        let a = Array2::from_shape_fn((1, 2), |_| rng.gen_range(-1.0..1.0));
        let b = Array2::from_shape_fn((1, 2), |_| rng.gen_range(-1.0..1.0));
        let seq = vec![a.clone(), b.clone(), a.clone()];
        let out = run_birnn_single(&mut t, &cell, &seq, None);
        for s in 0..3 {
            let f = t.value(out.fwd_states[s]).clone();
            let bw = t.value(out.bwd_states[2 - s]).clone();
            for j in 0..3 {
                assert!((f[[0, j]] - bw[[0, j]]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn birnn_default_init_equals_explicit_zeros() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let fwd = LstmCellParams::init(&mut ps, "f", 2, 3, &mut rng);
        let bwd = LstmCellParams::init(&mut ps, "b", 2, 3, &mut rng);
        let seq = rand_seq(&mut rng, 4, 2);

        let mut t1 = Tape::new();
        let cell1 = CellVars::Lstm {
            fwd: fwd.vars(&mut t1, &ps),
            bwd: bwd.vars(&mut t1, &ps),
        };
        let o1 = run_birnn_single(&mut t1, &cell1, &seq, None);

        let mut t2 = Tape::new();
        let cell2 = CellVars::Lstm {
            fwd: fwd.vars(&mut t2, &ps),
            bwd: bwd.vars(&mut t2, &ps),
        };
        let fh = t2.zeros(1, 3);
        let bh = t2.zeros(1, 3);
        let fcv = t2.zeros(1, 3);
        let bcv = t2.zeros(1, 3);
        let init = BiRnnInit {
            fwd_h: fh,
            bwd_h: bh,
            fwd_c: Some(fcv),
            bwd_c: Some(bcv),
        };
        let steps: Vec<Var> = seq.iter().map(|x| t2.constant(x.clone())).collect();
        let o2 = run_birnn(&mut t2, &cell2, &steps, &[4], Some(init));

        for (a, b) in t1
            .value(o1.final_state)
            .iter()
            .zip(t2.value(o2.final_state).iter())
        {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn birnn_output_width_is_twice_hidden() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fwd = GruCellParams::init(&mut ps, "f", 2, 5, &mut rng);
        let bwd = GruCellParams::init(&mut ps, "b", 2, 5, &mut rng);
        let mut t = Tape::new();
        let cell = CellVars::Gru {
            fwd: fwd.vars(&mut t, &ps),
            bwd: bwd.vars(&mut t, &ps),
        };
        let seq = rand_seq(&mut rng, 3, 2);
        let out = run_birnn_single(&mut t, &cell, &seq, None);
        for o in &out.outputs {
            assert_eq!(t.value(*o).ncols(), 10);
        }
        assert_eq!(t.value(out.final_state).ncols(), 10);
    }

    #[test]
    #[should_panic(expected = "empty sequence")]
    fn birnn_empty_sequence_is_error() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let fwd = GruCellParams::init(&mut ps, "f", 2, 3, &mut rng);
        let bwd = GruCellParams::init(&mut ps, "b", 2, 3, &mut rng);
        let mut t: Tape<f64> = Tape::new();
        let cell = CellVars::Gru {
            fwd: fwd.vars(&mut t, &ps),
            bwd: bwd.vars(&mut t, &ps),
        };
        run_birnn_single(&mut t, &cell, &[], None);
    }

    #[test]
    fn birnn_packed_batch_matches_individual_runs() {
        // Three sequences of different lengths, packed, must agree with
        // running each alone.
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fwd = GruCellParams::init(&mut ps, "f", 2, 3, &mut rng);
        let bwd = GruCellParams::init(&mut ps, "b", 2, 3, &mut rng);
        let lens = [4usize, 2, 1];
        let seqs: Vec<Vec<Array2<f64>>> = lens.iter().map(|&l| rand_seq(&mut rng, l, 2)).collect();

        let mut tp = Tape::new();
        let cell = CellVars::Gru {
            fwd: fwd.vars(&mut tp, &ps),
            bwd: bwd.vars(&mut tp, &ps),
        };
        let steps: Vec<Var> = (0..4)
            .map(|t| {
                let rows: Vec<Array2<f64>> = seqs
                    .iter()
                    .filter(|s| s.len() > t)
                    .map(|s| s[t].clone())
                    .collect();
                let mut m = Array2::zeros((rows.len(), 2));
                for (i, r) in rows.iter().enumerate() {
                    m.row_mut(i).assign(&r.row(0));
                }
                tp.constant(m)
            })
            .collect();
        let packed = run_birnn(&mut tp, &cell, &steps, &lens, None);

        for (i, seq) in seqs.iter().enumerate() {
            let mut ti = Tape::new();
            let cell_i = CellVars::Gru {
                fwd: fwd.vars(&mut ti, &ps),
                bwd: bwd.vars(&mut ti, &ps),
            };
            let solo = run_birnn_single(&mut ti, &cell_i, seq, None);
            for j in 0..6 {
                let a = tp.value(packed.final_state)[[i, j]];
                let b = ti.value(solo.final_state)[[0, j]];
                assert!((a - b).abs() < 1e-12, "seq {i} dim {j}: {a} vs {b}");
            }
        }
    }
}
