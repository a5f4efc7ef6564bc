//! Batched forward pass that records a tape of coarse ops, and the reverse
//! replay that turns it into parameter gradients.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, RngCore};

use super::{AttentionKind, Model, Role};
use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` inside the loss.
pub const BCE_EPS: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln p + (1 - y) ln(1 - p)]` with `p` clamped.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Inputs as one `batch × input_dim` matrix per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Vec<Array2<f64>>,
    pub y: Vec<f64>,
}

impl Batch {
    /// Each sample is a row-major `n_steps × dim` slice.
    pub fn from_rows(samples: &[&[f64]], y: &[f64], n_steps: usize, dim: usize) -> Result<Self> {
        if samples.len() != y.len() || samples.is_empty() {
            return Err(Error::Dimension(format!(
                "{} samples, {} labels",
                samples.len(),
                y.len()
            )));
        }
        if let Some(s) = samples.iter().find(|s| s.len() != n_steps * dim) {
            return Err(Error::Dimension(format!(
                "sample of {} values, expected {n_steps}x{dim}",
                s.len()
            )));
        }
        let x = (0..n_steps)
            .map(|t| {
                Array2::from_shape_fn((samples.len(), dim), |(b, j)| samples[b][t * dim + j])
            })
            .collect();
        Ok(Batch { x, y: y.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

pub enum Mode<'a> {
    Eval,
    /// Dropout masks are drawn from the generator.
    Train(&'a mut dyn RngCore),
}

enum Op {
    /// Inverted dropout on sequence `seq` (0 = input, `l + 1` = output of
    /// layer `l`); masks already include the `1/(1-p)` scale.
    Dropout { seq: usize, masks: Vec<Array2<f64>> },
    LstmStep {
        layer: usize,
        t: usize,
        concat: Array2<f64>,
        /// Activated gates `[i, f, g, o]`, `batch × 4H`.
        gates: Array2<f64>,
        c_prev: Array2<f64>,
        tanh_c: Array2<f64>,
    },
    Attention {
        hs: Vec<Array2<f64>>,
        /// `tanh` activations per step: `batch × 1` or `batch × H`.
        u: Vec<Array2<f64>>,
        alpha: Array2<f64>,
    },
    Dense { v: Array2<f64> },
}

/// Everything the backward pass needs, in execution order.
pub struct Tape {
    ops: Vec<Op>,
    version: u64,
    pub p: Array1<f64>,
}

impl Tape {
    pub fn n_ops(&self) -> usize {
        self.ops.len()
    }

    /// Attention weights, `batch × n_steps`.
    pub fn alpha(&self) -> Option<&Array2<f64>> {
        self.ops.iter().find_map(|op| match op {
            Op::Attention { alpha, .. } => Some(alpha),
            _ => None,
        })
    }
}

fn dropout_masks(rng: &mut dyn RngCore, rate: f64, shape: (usize, usize), n: usize) -> Vec<Array2<f64>> {
    let keep = 1.0 - rate;
    (0..n)
        .map(|_| Array2::from_shape_simple_fn(shape, || if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }))
        .collect()
}

/// One LSTM step on a batch: activated gates, new cell state, `tanh(C)`, `h`.
fn lstm_step(
    concat: &Array2<f64>,
    w: ArrayView2<f64>,
    b: ArrayView1<f64>,
    c_prev: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
    let h = c_prev.ncols();
    let mut gates = concat.dot(&w.t()) + &b;
    gates.slice_mut(s![.., ..2 * h]).mapv_inplace(sigmoid);
    gates.slice_mut(s![.., 2 * h..3 * h]).mapv_inplace(f64::tanh);
    gates.slice_mut(s![.., 3 * h..]).mapv_inplace(sigmoid);
    let (i, f) = (gates.slice(s![.., ..h]), gates.slice(s![.., h..2 * h]));
    let (g, o) = (gates.slice(s![.., 2 * h..3 * h]), gates.slice(s![.., 3 * h..]));
    let c = &f * c_prev + &i * &g;
    let tanh_c = c.mapv(f64::tanh);
    let h_new = &o * &tanh_c;
    (gates, c, tanh_c, h_new)
}

/// Single-sample cell: `i, f, o = σ(W·[h, x] + b)`, `g = tanh(W_c·[h, x] + b_c)`,
/// `C = f∗C_prev + i∗g`, `h = o∗tanh(C)`. `w` is `4H × (H + in)` with gate
/// blocks i, f, c, o.
pub fn lstm_cell_forward<'a>(
    x: ArrayView1<'a, f64>,
    h_prev: ArrayView1<'a, f64>,
    c_prev: ArrayView1<f64>,
    w: ArrayView2<f64>,
    b: ArrayView1<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let h = h_prev.len();
    if c_prev.len() != h || w.nrows() != 4 * h || w.ncols() != h + x.len() || b.len() != 4 * h {
        return Err(Error::Dimension(format!(
            "cell: h {h}, c {}, x {}, W {:?}, b {}",
            c_prev.len(),
            x.len(),
            w.dim(),
            b.len()
        )));
    }
    let concat = concatenate(Axis(0), &[h_prev, x])
        .expect("1-d concat")
        .insert_axis(Axis(0));
    let c0 = c_prev.to_owned().insert_axis(Axis(0));
    let (_, c, _, h_new) = lstm_step(&concat, w, b, &c0);
    Ok((h_new.row(0).to_owned(), c.row(0).to_owned()))
}

fn softmax_rows(e: &mut Array2<f64>) {
    for mut row in e.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Scalar-score attention over hidden states `hs` (`steps × H`):
/// `u_i = tanh(w_s·h_i + b_s)`, `α = softmax(u)`, `v = Σ α_i h_i`.
pub fn attention_forward(hs: ArrayView2<f64>, w_s: ArrayView1<f64>, b_s: f64) -> Result<(Array1<f64>, Array1<f64>)> {
    if hs.ncols() != w_s.len() || hs.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "attention: states {:?}, w_s {}",
            hs.dim(),
            w_s.len()
        )));
    }
    let mut e = hs.dot(&w_s).mapv(|s| (s + b_s).tanh()).insert_axis(Axis(0));
    softmax_rows(&mut e);
    let alpha = e.row(0).to_owned();
    let v = alpha.dot(&hs);
    Ok((v, alpha))
}

/// Forward pass. Returns probabilities and the tape for [`backward`].
pub fn forward(model: &Model, batch: &Batch, mut mode: Mode) -> Result<Tape> {
    let cfg = &model.config;
    let (lay, theta) = (&model.layout, model.theta.as_slice());
    let (t_len, h) = (cfg.n_steps, cfg.hidden);
    let n = batch.len();
    if batch.x.len() != t_len || batch.x.iter().any(|x| x.dim() != (n, cfg.input_dim)) {
        return Err(Error::Dimension(format!(
            "batch has {} steps of {:?}, model expects {t_len} of ({n}, {})",
            batch.x.len(),
            batch.x.first().map(Array2::dim),
            cfg.input_dim
        )));
    }
    let mut ops = Vec::with_capacity(cfg.depth * (t_len + 1) + 3);
    let mut seq = batch.x.clone();

    let mut drop = |seq_id: usize, seq: &mut Vec<Array2<f64>>, ops: &mut Vec<Op>| {
        if let Mode::Train(rng) = &mut mode {
            let rate = cfg.dropout[seq_id];
            if rate > 0.0 {
                let masks = dropout_masks(*rng, rate, seq[0].dim(), seq.len());
                for (x, m) in seq.iter_mut().zip(&masks) {
                    *x *= m;
                }
                ops.push(Op::Dropout { seq: seq_id, masks });
            }
        }
    };
    drop(0, &mut seq, &mut ops);

    for layer in 0..cfg.depth {
        let w = lay.view2(theta, Role::LstmWeight { layer });
        let b = lay.view1(theta, Role::LstmBias { layer });
        let mut hs = Array2::zeros((n, h));
        let mut c = Array2::zeros((n, h));
        let mut out = Vec::with_capacity(t_len);
        for (t, x) in seq.iter().enumerate() {
            let concat = concatenate(Axis(1), &[hs.view(), x.view()]).expect("same batch size");
            let (gates, c_new, tanh_c, h_new) = lstm_step(&concat, w, b, &c);
            ops.push(Op::LstmStep {
                layer,
                t,
                concat,
                gates,
                c_prev: std::mem::replace(&mut c, c_new),
                tanh_c,
            });
            hs = h_new;
            out.push(hs.clone());
        }
        seq = out;
        drop(layer + 1, &mut seq, &mut ops);
    }

    // attention over the top layer
    let w_s = lay.view2(theta, Role::AttnWeight);
    let b_s = lay.view1(theta, Role::AttnBias);
    let mut e = Array2::zeros((n, t_len));
    let mut u = Vec::with_capacity(t_len);
    for (t, hs) in seq.iter().enumerate() {
        let ut = (hs.dot(&w_s.t()) + &b_s).mapv(f64::tanh);
        let score = match cfg.attention {
            AttentionKind::Scalar => ut.column(0).to_owned(),
            AttentionKind::Context => ut.dot(&lay.view1(theta, Role::AttnContext)),
        };
        e.column_mut(t).assign(&score);
        u.push(ut);
    }
    softmax_rows(&mut e);
    let alpha = e;
    let mut v = Array2::zeros((n, h));
    for (t, hs) in seq.iter().enumerate() {
        v += &(hs * &alpha.column(t).insert_axis(Axis(1)));
    }
    ops.push(Op::Attention { hs: seq, u, alpha });

    let w_d = lay.view1(theta, Role::DenseWeight);
    let b_d = theta[lay.slot(Role::DenseBias).offset];
    let p = (v.dot(&w_d) + b_d).mapv(sigmoid);
    ops.push(Op::Dense { v });
    Ok(Tape {
        ops,
        version: model.version,
        p,
    })
}

/// Mean clamped BCE of the tape's predictions plus `l2 · Σ‖W_lstm‖²`.
pub fn loss(model: &Model, tape: &Tape, y: &[f64]) -> f64 {
    let data = tape.p.iter().zip(y).map(|(&p, &y)| bce_loss(p, y)).sum::<f64>() / y.len() as f64;
    data + model.config.l2 * model.l2_norm_sq()
}

/// Replay the tape in reverse. Returns the loss and its gradient with
/// respect to every parameter, in the model's flat layout.
pub fn backward(model: &Model, tape: &Tape, y: &[f64]) -> Result<(f64, Vec<f64>)> {
    if tape.version != model.version {
        return Err(Error::StaleCache(format!(
            "tape from parameter version {}, model is at {}",
            tape.version, model.version
        )));
    }
    if y.len() != tape.p.len() {
        return Err(Error::Dimension(format!("{} labels for {} predictions", y.len(), tape.p.len())));
    }
    let cfg = &model.config;
    let (lay, theta) = (&model.layout, model.theta.as_slice());
    let (t_len, h, n) = (cfg.n_steps, cfg.hidden, y.len());
    let mut grad = vec![0.0; lay.total];

    // d loss / d logit; zero where the clamp is active
    let dz = Array1::from_shape_fn(n, |b| {
        let p = tape.p[b];
        if p > BCE_EPS && p < 1.0 - BCE_EPS {
            (p - y[b]) / n as f64
        } else {
            0.0
        }
    });

    let mut cur: Vec<Array2<f64>> = Vec::new();
    let mut below: Vec<Array2<f64>> = Vec::new();
    let mut dh_next = Array2::zeros((n, h));
    let mut dc_next = Array2::zeros((n, h));
    let mut dv = Array2::zeros((n, h));

    for op in tape.ops.iter().rev() {
        match op {
            Op::Dense { v } => {
                let w_d = lay.view1(theta, Role::DenseWeight);
                lay.view1_mut(&mut grad, Role::DenseWeight).scaled_add(1.0, &v.t().dot(&dz));
                grad[lay.slot(Role::DenseBias).offset] += dz.sum();
                dv = dz.view().insert_axis(Axis(1)).dot(&w_d.insert_axis(Axis(0)));
            }
            Op::Attention { hs, u, alpha } => {
                let mut dalpha = Array2::zeros((n, t_len));
                cur = hs
                    .iter()
                    .enumerate()
                    .map(|(t, ht)| {
                        dalpha.column_mut(t).assign(&(&dv * ht).sum_axis(Axis(1)));
                        &dv * &alpha.column(t).insert_axis(Axis(1))
                    })
                    .collect();
                // softmax: de_t = α_t (dα_t − Σ_j α_j dα_j)
                let inner = (&dalpha * alpha).sum_axis(Axis(1)).insert_axis(Axis(1));
                let de = alpha * &(&dalpha - &inner);
                let w_s = lay.view2(theta, Role::AttnWeight);
                for t in 0..t_len {
                    let det = de.column(t).insert_axis(Axis(1));
                    let ds = match cfg.attention {
                        AttentionKind::Scalar => &det * &u[t].mapv(|a| 1.0 - a * a),
                        AttentionKind::Context => {
                            let ctx = lay.view1(theta, Role::AttnContext);
                            lay.view1_mut(&mut grad, Role::AttnContext)
                                .scaled_add(1.0, &u[t].t().dot(&de.column(t)));
                            let du = det.dot(&ctx.insert_axis(Axis(0)));
                            du * &u[t].mapv(|a| 1.0 - a * a)
                        }
                    };
                    lay.view2_mut(&mut grad, Role::AttnWeight).scaled_add(1.0, &ds.t().dot(&hs[t]));
                    lay.view1_mut(&mut grad, Role::AttnBias).scaled_add(1.0, &ds.sum_axis(Axis(0)));
                    cur[t] += &ds.dot(&w_s);
                }
            }
            Op::Dropout { seq, masks } => {
                if *seq > 0 {
                    for (g, m) in cur.iter_mut().zip(masks) {
                        *g *= m;
                    }
                }
            }
            Op::LstmStep {
                layer,
                t,
                concat,
                gates,
                c_prev,
                tanh_c,
            } => {
                let (layer, t) = (*layer, *t);
                if t + 1 == t_len {
                    dh_next.fill(0.0);
                    dc_next.fill(0.0);
                    let width = concat.ncols() - h;
                    below = vec![Array2::zeros((n, width)); t_len];
                }
                let dh = &cur[t] + &dh_next;
                let i = gates.slice(s![.., ..h]);
                let f = gates.slice(s![.., h..2 * h]);
                let g = gates.slice(s![.., 2 * h..3 * h]);
                let o = gates.slice(s![.., 3 * h..]);

                let mut dgates = Array2::zeros((n, 4 * h));
                let mut dc = Array2::zeros((n, h));
                Zip::from(&mut dc)
                    .and(&dh)
                    .and(&o)
                    .and(tanh_c)
                    .and(&dc_next)
                    .for_each(|dc, &dh, &o, &tc, &dcn| *dc = dh * o * (1.0 - tc * tc) + dcn);
                Zip::from(dgates.slice_mut(s![.., ..h]))
                    .and(&dc)
                    .and(&g)
                    .and(&i)
                    .for_each(|d, &dc, &g, &i| *d = dc * g * i * (1.0 - i));
                Zip::from(dgates.slice_mut(s![.., h..2 * h]))
                    .and(&dc)
                    .and(c_prev)
                    .and(&f)
                    .for_each(|d, &dc, &cp, &f| *d = dc * cp * f * (1.0 - f));
                Zip::from(dgates.slice_mut(s![.., 2 * h..3 * h]))
                    .and(&dc)
                    .and(&i)
                    .and(&g)
                    .for_each(|d, &dc, &i, &g| *d = dc * i * (1.0 - g * g));
                Zip::from(dgates.slice_mut(s![.., 3 * h..]))
                    .and(&dh)
                    .and(tanh_c)
                    .and(&o)
                    .for_each(|d, &dh, &tc, &o| *d = dh * tc * o * (1.0 - o));
                dc_next = dc * &f;

                let w = lay.view2(theta, Role::LstmWeight { layer });
                lay.view2_mut(&mut grad, Role::LstmWeight { layer })
                    .scaled_add(1.0, &dgates.t().dot(concat));
                lay.view1_mut(&mut grad, Role::LstmBias { layer })
                    .scaled_add(1.0, &dgates.sum_axis(Axis(0)));
                let dconcat = dgates.dot(&w);
                dh_next = dconcat.slice(s![.., ..h]).to_owned();
                below[t] = dconcat.slice(s![.., h..]).to_owned();
                if t == 0 {
                    cur = std::mem::take(&mut below);
                }
            }
        }
    }

    if cfg.l2 > 0.0 {
        for layer in 0..cfg.depth {
            let r = lay.slot(Role::LstmWeight { layer }).range();
            for (g, w) in grad[r.clone()].iter_mut().zip(&theta[r]) {
                *g += 2.0 * cfg.l2 * w;
            }
        }
    }
    Ok((loss(model, tape, y), grad))
}
