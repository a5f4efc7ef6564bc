//! Attention-LSTM binary classifier, trained from scratch.
//!
//! Stacked LSTM layers over a 7-step sequence, attention pooling of the last
//! layer's hidden states, then a dense unit with a sigmoid. Parameters live in
//! one flat `Vec<f64>`; [`Layout`] names the slices.

mod adam;
mod checkpoint;
mod graph;
mod train;

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use graph::{
    attention_forward, backward, bce_loss, forward, loss, lstm_cell_forward, sigmoid, Batch, Mode,
    Tape, BCE_EPS,
};
pub use train::{predict, train, TrainLog};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    /// `u_i = tanh(w_s·h_i + b_s)` is the score itself.
    #[default]
    Scalar,
    /// `u_i = tanh(W_s h_i + b_s)` is a vector scored against a learned
    /// context vector.
    Context,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub depth: usize,
    pub n_steps: usize,
    /// Dropout after the input and after each LSTM layer.
    pub dropout: Vec<f64>,
    /// Coefficient of Σ‖W‖² over the LSTM weight matrices.
    pub l2: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub attention: AttentionKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::cross_subject()
    }
}

impl ModelConfig {
    pub fn cross_subject() -> Self {
        Self {
            input_dim: 297,
            hidden: 256,
            depth: 3,
            n_steps: 7,
            dropout: vec![0.0, 0.2, 0.1, 0.2],
            l2: 0.001,
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            epochs: 100,
            attention: AttentionKind::Scalar,
        }
    }

    pub fn intra_subject() -> Self {
        Self {
            dropout: vec![0.7, 0.2, 0.1, 0.1],
            batch_size: 2,
            epochs: 10,
            ..Self::cross_subject()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.depth == 0 || self.hidden == 0 || self.input_dim == 0 || self.n_steps == 0 {
            return bad("input_dim, hidden, depth and n_steps must be >= 1".into());
        }
        if self.dropout.len() != self.depth + 1 {
            return bad(format!(
                "{} dropout rates for depth {}; need depth + 1",
                self.dropout.len(),
                self.depth
            ));
        }
        if let Some(d) = self.dropout.iter().find(|d| !(0.0..1.0).contains(*d)) {
            return bad(format!("dropout {d} outside [0, 1)"));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.lr > 0.0 && self.epsilon > 0.0 && self.l2 >= 0.0) {
            return bad("lr and epsilon must be > 0, l2 >= 0".into());
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        Ok(())
    }

    fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// `4H × (H + in)`: gate blocks i, f, c, o by rows; columns `[h, x]`.
    LstmWeight { layer: usize },
    /// `4H`, gate order i, f, c, o.
    LstmBias { layer: usize },
    /// Scalar attention: `1 × H`. Context attention: `H × H`.
    AttnWeight,
    AttnBias,
    AttnContext,
    DenseWeight,
    DenseBias,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub role: Role,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Slot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Position of every parameter tensor in the flat vector, in storage order:
/// per layer (weight, bias), then attention weight, bias, [context], then
/// dense weight and bias.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub slots: Vec<Slot>,
    pub total: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let h = cfg.hidden;
        let mut slots = Vec::new();
        let mut offset = 0;
        let mut push = |role, rows, cols| {
            slots.push(Slot {
                role,
                offset,
                rows,
                cols,
            });
            offset += rows * cols;
        };
        for layer in 0..cfg.depth {
            push(Role::LstmWeight { layer }, 4 * h, h + cfg.layer_input(layer));
            push(Role::LstmBias { layer }, 1, 4 * h);
        }
        match cfg.attention {
            AttentionKind::Scalar => {
                push(Role::AttnWeight, 1, h);
                push(Role::AttnBias, 1, 1);
            }
            AttentionKind::Context => {
                push(Role::AttnWeight, h, h);
                push(Role::AttnBias, 1, h);
                push(Role::AttnContext, 1, h);
            }
        }
        push(Role::DenseWeight, 1, h);
        push(Role::DenseBias, 1, 1);
        Layout {
            slots,
            total: offset,
        }
    }

    pub fn slot(&self, role: Role) -> &Slot {
        self.slots
            .iter()
            .find(|s| s.role == role)
            .expect("role present in layout")
    }

    pub fn view2<'a>(&self, theta: &'a [f64], role: Role) -> ArrayView2<'a, f64> {
        let s = self.slot(role);
        ArrayView2::from_shape((s.rows, s.cols), &theta[s.range()]).expect("slot shape")
    }

    pub fn view1<'a>(&self, theta: &'a [f64], role: Role) -> ArrayView1<'a, f64> {
        let s = self.slot(role);
        ArrayView1::from(&theta[s.range()])
    }

    pub fn view2_mut<'a>(&self, theta: &'a mut [f64], role: Role) -> ArrayViewMut2<'a, f64> {
        let s = self.slot(role);
        ArrayViewMut2::from_shape((s.rows, s.cols), &mut theta[s.range()]).expect("slot shape")
    }

    pub fn view1_mut<'a>(&self, theta: &'a mut [f64], role: Role) -> ArrayViewMut1<'a, f64> {
        let s = self.slot(role);
        ArrayViewMut1::from(&mut theta[s.range()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub layout: Layout,
    pub theta: Vec<f64>,
    /// Bumped on every parameter update; tapes from older versions are stale.
    pub version: u64,
}

impl Model {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        Ok(Model {
            theta: vec![0.0; layout.total],
            config,
            layout,
            version: 0,
        })
    }

    /// Glorot-uniform weights (each gate block on its own fan-in/fan-out),
    /// zero biases except the forget gate at 1.
    pub fn init<R: Rng>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let h = m.config.hidden;
        for slot in m.layout.slots.clone() {
            let r = slot.range();
            match slot.role {
                Role::LstmWeight { .. } => {
                    let bound = (6.0 / (slot.cols + h) as f64).sqrt();
                    for v in &mut m.theta[r] {
                        *v = rng.gen_range(-bound..bound);
                    }
                }
                Role::AttnWeight | Role::AttnContext | Role::DenseWeight => {
                    let (fan_in, fan_out) = match slot.role {
                        Role::AttnContext => (slot.cols, 1),
                        _ => (slot.cols, slot.rows),
                    };
                    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    for v in &mut m.theta[r] {
                        *v = rng.gen_range(-bound..bound);
                    }
                }
                Role::LstmBias { .. } => {
                    for v in &mut m.theta[r.start + h..r.start + 2 * h] {
                        *v = 1.0;
                    }
                }
                Role::AttnBias | Role::DenseBias => {}
            }
        }
        Ok(m)
    }

    pub fn n_params(&self) -> usize {
        self.layout.total
    }

    pub fn forget_bias(&self, layer: usize) -> &[f64] {
        let s = self.layout.slot(Role::LstmBias { layer });
        let h = self.config.hidden;
        &self.theta[s.offset + h..s.offset + 2 * h]
    }

    /// Σ‖W‖² over the LSTM weight matrices.
    pub fn l2_norm_sq(&self) -> f64 {
        (0..self.config.depth)
            .flat_map(|layer| self.theta[self.layout.slot(Role::LstmWeight { layer }).range()].iter())
            .map(|w| w * w)
            .sum()
    }
}
