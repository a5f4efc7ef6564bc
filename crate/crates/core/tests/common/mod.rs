#![allow(dead_code)]

use handmove::nn::{backward, forward, loss, AttentionKind, Batch, Mode, Model, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tiny_config(depth: usize, attention: AttentionKind) -> ModelConfig {
    ModelConfig {
        input_dim: 5,
        hidden: 8,
        depth,
        n_steps: 7,
        dropout: vec![0.0; depth + 1],
        l2: 0.0,
        batch_size: 4,
        epochs: 1,
        attention,
        ..ModelConfig::cross_subject()
    }
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, cfg: &ModelConfig) -> Batch {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..cfg.n_steps * cfg.input_dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    Batch::from_rows(&refs, &y, cfg.n_steps, cfg.input_dim).unwrap()
}

/// Loss at the model's current parameters. Training mode redraws the same
/// dropout masks from `mask_seed` on every call.
pub fn loss_at(model: &Model, batch: &Batch, mask_seed: Option<u64>) -> f64 {
    let tape = match mask_seed {
        Some(s) => forward(model, batch, Mode::Train(&mut ChaCha8Rng::seed_from_u64(s))).unwrap(),
        None => forward(model, batch, Mode::Eval).unwrap(),
    };
    loss(model, &tape, &batch.y)
}

/// Noise floor for relative error. Central differences at h = 1e-5 carry
/// about 1e-11 absolute error, so gradients below ~1e-6 are compared on an
/// absolute scale.
pub const REL_FLOOR: f64 = 1e-6;

/// Max relative error of the analytic gradient against central differences
/// with step `h` over `coords` (every parameter when `None`). Relative error
/// is `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn gradcheck(model: &Model, batch: &Batch, mask_seed: Option<u64>, h: f64, coords: Option<&[usize]>) -> f64 {
    let tape = match mask_seed {
        Some(s) => forward(model, batch, Mode::Train(&mut ChaCha8Rng::seed_from_u64(s))).unwrap(),
        None => forward(model, batch, Mode::Eval).unwrap(),
    };
    let (_, grad) = backward(model, &tape, &batch.y).unwrap();
    let all: Vec<usize> = (0..model.theta.len()).collect();
    let coords = coords.unwrap_or(&all);
    let mut m = model.clone();
    let mut worst: f64 = 0.0;
    for &k in coords {
        let orig = m.theta[k];
        m.theta[k] = orig + h;
        let up = loss_at(&m, batch, mask_seed);
        m.theta[k] = orig - h;
        let down = loss_at(&m, batch, mask_seed);
        m.theta[k] = orig;
        let num = (up - down) / (2.0 * h);
        let a = grad[k];
        worst = worst.max((a - num).abs() / a.abs().max(num.abs()).max(REL_FLOOR));
    }
    worst
}

/// In-memory store with one montage pair (11 features per step). Feature 9
/// (alpha power) of every step is shifted by `+signal` for Right and
/// `-signal` for Left on top of unit Gaussian noise.
pub fn toy_set(n_subjects: u16, per_subject: usize, signal: f64, seed: u64) -> handmove::features::FeatureSet {
    use handmove::edf::Hand;
    use handmove::features::{FeatureConfig, FeatureSet, FeatureTensor, StoreMeta, N_STEPS};
    let meta = StoreMeta::new(160.0, vec!["C1-C2".into()], FeatureConfig::default());
    let dim = meta.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = Vec::new();
    for s in 1..=n_subjects {
        for trial in 0..per_subject {
            let label = if trial % 2 == 0 { Hand::Left } else { Hand::Right };
            let shift = if label == Hand::Right { signal } else { -signal };
            let data = (0..N_STEPS * dim)
                .map(|i| {
                    let noise = rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0);
                    if i % dim == 9 {
                        noise + shift
                    } else {
                        noise
                    }
                })
                .collect();
            tensors.push(FeatureTensor {
                data,
                n_steps: N_STEPS,
                dim,
                label,
                subject: s,
                run: Some(3),
                trial,
                offset: 0.0,
            });
        }
    }
    FeatureSet::new(meta, tensors).unwrap()
}

/// Small network sized for [`toy_set`].
pub fn toy_model() -> ModelConfig {
    ModelConfig {
        input_dim: 11,
        hidden: 6,
        depth: 2,
        dropout: vec![0.0, 0.1, 0.1],
        batch_size: 8,
        epochs: 8,
        lr: 0.01,
        ..ModelConfig::cross_subject()
    }
}

/// Straight transcription of the 11 feature definitions with direct sums
/// and an O(N²) DFT.
pub fn feature_oracle(x: &[f64], fs: f64) -> [f64; 11] {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m = |p: i32| x.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
    let (m2, m3, m4) = (m(2), m(3), m(4));
    let s2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let (skew, kurt) = if m2 == 0.0 { (0.0, 0.0) } else { (m3 / s2.powf(1.5), m4 / (m2 * m2) - 3.0) };
    let zc = (1..x.len()).filter(|&i| x[i] * x[i - 1] < 0.0).count() as f64;

    let dx = 1.0 / fs;
    let a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let intervals = a.len() - 1;
    let simpson_pts = if intervals % 2 == 0 { a.len() } else { a.len() - 1 };
    let mut area = 0.0;
    for i in 0..simpson_pts {
        let w = if i == 0 || i == simpson_pts - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        area += w * a[i];
    }
    area *= dx / 3.0;
    if intervals % 2 == 1 {
        area += 0.5 * dx * (a[a.len() - 2] + a[a.len() - 1]);
    }

    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);

    let len = x.len();
    let power: Vec<f64> = (0..=len / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            let one_sided = if k == 0 || 2 * k == len { 1.0 } else { 2.0 };
            one_sided * (re * re + im * im) / (n * fs)
        })
        .collect();
    let df = fs / n;
    let band = |lo: f64, hi: f64| -> f64 {
        (0..power.len())
            .filter(|&k| (k as f64 * df) >= lo && (k as f64 * df) < hi)
            .map(|k| power[k] * df)
            .sum()
    };
    let total = band(0.5, 70.0);
    let rel = |lo, hi| if total == 0.0 { 0.0 } else { band(lo, hi) / total };
    [
        mean,
        m2,
        skew,
        kurt,
        zc,
        area,
        hi - lo,
        rel(0.5, 4.0),
        rel(4.0, 8.0),
        rel(8.0, 12.0),
        rel(12.0, 30.0),
    ]
}
