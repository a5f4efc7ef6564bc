use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::graph::{backward, forward};
use super::{AdamState, Batch, Mode, Model};
use crate::error::{Error, Result};
use crate::rng::{stream, stream2, Stream};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean minibatch loss of each epoch.
    pub epoch_loss: Vec<f64>,
}

/// Minibatch Adam for `config.epochs` epochs. Sample order is reshuffled
/// each epoch from `(seed, job, epoch)`; dropout masks come from
/// `(seed, job)`. The last partial batch is kept.
pub fn train(
    model: &mut Model,
    samples: &[&[f64]],
    y: &[f64],
    seed: u64,
    job: u64,
) -> Result<(TrainLog, AdamState)> {
    if samples.is_empty() || samples.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} samples, {} labels",
            samples.len(),
            y.len()
        )));
    }
    let cfg = model.config.clone();
    let mut adam = AdamState::new(model.n_params());
    let mut drop_rng = stream(seed, Stream::Dropout, job);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut stream2(seed, Stream::Shuffle, job, epoch as u64));
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| samples[i]).collect();
            let ys: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
            let batch = Batch::from_rows(&xs, &ys, cfg.n_steps, cfg.input_dim)?;
            let tape = forward(model, &batch, Mode::Train(&mut drop_rng))?;
            let (loss, grad) = backward(model, &tape, &ys)?;
            adam.apply(model, &grad)?;
            total += loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        log::debug!("job {job} epoch {epoch}: loss {mean:.5}");
        log.epoch_loss.push(mean);
    }
    Ok((log, adam))
}

/// Eval-mode probabilities of the positive (Right) class.
pub fn predict(model: &Model, samples: &[&[f64]]) -> Result<Vec<f64>> {
    let cfg = &model.config;
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(256) {
        let batch = Batch::from_rows(chunk, &vec![0.0; chunk.len()], cfg.n_steps, cfg.input_dim)?;
        out.extend(forward(model, &batch, Mode::Eval)?.p);
    }
    Ok(out)
}
