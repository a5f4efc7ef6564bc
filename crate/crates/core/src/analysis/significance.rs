use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};

pub const MIN_PER_CLASS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U of the positive class.
    pub u: f64,
    pub z: f64,
    /// Two-sided.
    pub p: f64,
}

/// Average ranks (1-based) and the tie term Σ(t³ − t).
fn ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut r = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            r[k] = avg;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (r, ties)
}

/// Two-sided Mann–Whitney U test, normal approximation with tie and
/// continuity corrections. A feature with no spread gives p = 1.
pub fn mann_whitney(values: &[f64], y: &[bool]) -> MannWhitney {
    let n1 = y.iter().filter(|&&v| v).count() as f64;
    let n2 = y.len() as f64 - n1;
    let n = n1 + n2;
    let (r, ties) = ranks(values);
    let r1: f64 = r.iter().zip(y).filter(|(_, &v)| v).map(|(r, _)| r).sum();
    let u1 = r1 - n1 * (n1 + 1.0) / 2.0;
    let mu = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if !(var > 0.0) {
        return MannWhitney { u: u1, z: 0.0, p: 1.0 };
    }
    let u = u1.max(n1 * n2 - u1);
    let z = (u - mu - 0.5) / var.sqrt();
    MannWhitney {
        u: u1,
        z,
        p: erfc(z / SQRT_2).min(1.0),
    }
}

/// Per-feature p-values over the columns of `x`.
pub fn significance_test(x: &[Vec<f64>], y: &[bool]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} rows, {} labels", x.len(), y.len())));
    }
    let pos = y.iter().filter(|&&v| v).count();
    let smallest = pos.min(y.len() - pos);
    if smallest < MIN_PER_CLASS {
        return Err(Error::Config(format!(
            "significance test needs {MIN_PER_CLASS} samples per class, smallest class has {smallest}"
        )));
    }
    let p = x[0].len();
    Ok((0..p)
        .map(|f| {
            let col: Vec<f64> = x.iter().map(|r| r[f]).collect();
            mann_whitney(&col, y).p
        })
        .collect())
}
