use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogregConfig {
    /// Coefficient of ½‖w‖² (bias excluded).
    pub l2: f64,
    pub lr: f64,
    /// Full-batch gradient steps.
    pub iterations: usize,
}

impl Default for LogregConfig {
    fn default() -> Self {
        Self {
            l2: 1e-2,
            lr: 0.1,
            iterations: 300,
        }
    }
}

impl LogregConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0 && self.lr > 0.0) {
            return Err(Error::Config("logreg: l2 must be >= 0 and lr > 0".into()));
        }
        Ok(())
    }
}

/// Logistic regression on standardized, flattened tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Logreg {
    pub mean: Array1<f64>,
    /// Per-column scale; 1 for constant columns.
    pub scale: Array1<f64>,
    pub w: Array1<f64>,
    pub b: f64,
}

impl Logreg {
    fn standardize(&self, xs: &[&[f64]]) -> Array2<f64> {
        let mut x = to_matrix(xs, self.mean.len());
        x -= &self.mean;
        x /= &self.scale;
        x
    }

    pub fn predict(&self, xs: &[&[f64]]) -> Vec<f64> {
        if xs.is_empty() {
            return Vec::new();
        }
        let z = self.standardize(xs).dot(&self.w) + self.b;
        z.iter().map(|&z| sigmoid(z)).collect()
    }
}

fn to_matrix(xs: &[&[f64]], d: usize) -> Array2<f64> {
    let mut x = Array2::zeros((xs.len(), d));
    for (mut row, s) in x.axis_iter_mut(Axis(0)).zip(xs) {
        row.assign(&ndarray::ArrayView1::from(*s));
    }
    x
}

/// Mean cross-entropy plus ½·l2·‖w‖², minimized by plain gradient descent
/// from zero weights. Columns are z-scored with training statistics.
pub fn fit_logreg(xs: &[&[f64]], y: &[f64], cfg: &LogregConfig) -> Result<Logreg> {
    cfg.validate()?;
    if xs.is_empty() || xs.len() != y.len() {
        return Err(Error::Dimension(format!("{} samples, {} labels", xs.len(), y.len())));
    }
    let d = xs[0].len();
    if let Some(bad) = xs.iter().position(|s| s.len() != d) {
        return Err(Error::Dimension(format!("sample {bad} has {} values, expected {d}", xs[bad].len())));
    }
    let raw = to_matrix(xs, d);
    let mean = raw.mean_axis(Axis(0)).expect("nonempty");
    let scale = raw
        .std_axis(Axis(0), 0.0)
        .mapv(|s| if s > 1e-12 { s } else { 1.0 });
    let mut model = Logreg {
        mean,
        scale,
        w: Array1::zeros(d),
        b: 0.0,
    };
    let x = model.standardize(xs);
    let y = Array1::from(y.to_vec());
    let n = xs.len() as f64;
    for _ in 0..cfg.iterations {
        let p = (x.dot(&model.w) + model.b).mapv(sigmoid);
        let r = p - &y;
        // Xᵀr accumulated row by row; the transposed product walks columns
        let mut gw = cfg.l2 * &model.w;
        for (row, &ri) in x.axis_iter(Axis(0)).zip(&r) {
            gw.scaled_add(ri / n, &row);
        }
        let gb = r.sum() / n;
        model.w.scaled_add(-cfg.lr, &gw);
        model.b -= cfg.lr * gb;
    }
    Ok(model)
}
