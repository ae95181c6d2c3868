//! Patch classifier: training, evaluation and repetition statistics.

mod adam;
mod checkpoint;
mod metrics;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use metrics::{accuracy, auc, metrics_from_scores, summarize, Metrics, RepetitionReport};
pub use mlp::{MLPModel, Mlp, Real, DEFAULT_HIDDEN};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rf::{NormStats, Patch};
use mlp::Workspace;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub flip_prob: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 256,
            validation_fraction: 0.1,
            flip_prob: 0.5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            hidden: DEFAULT_HIDDEN,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.epochs > 0
            && self.batch_size > 0
            && self.hidden > 0
            && self.validation_fraction > 0.0
            && self.validation_fraction < 1.0
            && (0.0..=1.0).contains(&self.flip_prob)
            && (0.0..1.0).contains(&self.adam_beta1)
            && (0.0..1.0).contains(&self.adam_beta2)
            && self.adam_eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::BadConfig(format!("invalid training config {self:?}")))
        }
    }
}

fn label_of(p: &Patch) -> Result<u8> {
    match p.label {
        Some(l @ (0 | 1)) => Ok(l),
        Some(l) => Err(Error::BadConfig(format!("label {l} is not binary"))),
        None => Err(Error::BadConfig("patch without a class label".into())),
    }
}

fn check_inputs(patches: &[Patch], stats: &NormStats) -> Result<()> {
    let expected = (stats.axial_len, stats.lateral_len);
    for p in patches {
        if p.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: p.shape(),
            });
        }
    }
    Ok(())
}

/// Normalizes `patch` (mirrored laterally when `flip`) into a network input row.
fn fill_input<T: Real>(patch: &Patch, flip: bool, stats: &NormStats, scratch: &mut [f32], dst: &mut [T]) {
    let a = patch.axial_len();
    let l = patch.lateral_len();
    if flip {
        for j in 0..l {
            let src = patch.line(l - 1 - j);
            let range = j * a..(j + 1) * a;
            stats.normalize_into_range(src, range.clone(), &mut scratch[range]);
        }
    } else {
        stats.normalize_into(patch.samples(), scratch);
    }
    for (d, &s) in dst.iter_mut().zip(scratch.iter()) {
        *d = T::from_f32(s);
    }
}

/// Class-1 probabilities for `patches[idx]`, evaluated in batches.
fn predict<T: Real>(model: &Mlp<T>, patches: &[Patch], idx: &[usize], stats: &NormStats, batch: usize) -> Vec<f64> {
    let d = model.input_dim;
    let mut ws = Workspace::default();
    let mut x = vec![T::zero(); batch * d];
    let mut scratch = vec![0.0f32; d];
    let mut out = vec![T::zero(); batch];
    let mut scores = Vec::with_capacity(idx.len());
    for chunk in idx.chunks(batch) {
        for (row, &i) in x.chunks_exact_mut(d).zip(chunk) {
            fill_input(&patches[i], false, stats, &mut scratch, row);
        }
        model.forward_batch(&x, chunk.len(), &mut ws, &mut out);
        scores.extend(out[..chunk.len()].iter().map(|p| p.to_f64().unwrap()));
    }
    scores
}

fn check_model_dim<T>(model: &Mlp<T>, stats: &NormStats) -> Result<()> {
    let got = stats.axial_len * stats.lateral_len;
    if got != model.input_dim {
        return Err(Error::DimMismatch {
            expected: model.input_dim,
            got,
        });
    }
    Ok(())
}

/// Trains a fresh model on labelled patches normalized with `stats`.
///
/// `model_seed` drives initialization, `cfg.seed` the split, shuffling and
/// flips. Returns the parameters of the epoch with the best validation
/// accuracy (earliest on ties).
pub fn train(model_seed: u64, patches: &[Patch], stats: &NormStats, cfg: &TrainConfig) -> Result<MLPModel> {
    train_generic::<f32>(model_seed, patches, stats, cfg)
}

pub fn train_generic<T: Real>(model_seed: u64, patches: &[Patch], stats: &NormStats, cfg: &TrainConfig) -> Result<Mlp<T>> {
    cfg.validate()?;
    if patches.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_inputs(patches, stats)?;
    let labels: Vec<u8> = patches.iter().map(label_of).collect::<Result<_>>()?;
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(Error::SingleClassDataset);
    }
    let n = patches.len();
    let d = stats.axial_len * stats.lateral_len;
    let mut init_rng = ChaCha8Rng::seed_from_u64(model_seed);
    let mut model = Mlp::<T>::init(d, cfg.hidden, &mut init_rng);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((cfg.validation_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let (val_idx, train_idx) = if n > 1 { order.split_at(n_val) } else { (&order[..], &order[..]) };
    let val_idx = val_idx.to_vec();
    let mut train_idx = train_idx.to_vec();
    let val_labels: Vec<u8> = val_idx.iter().map(|&i| labels[i]).collect();

    let adam = cfg.adam();
    let mut state = AdamState::new(model.params.len());
    let mut grad = vec![T::zero(); model.params.len()];
    let mut ws = Workspace::default();
    let bs = cfg.batch_size;
    let mut x = vec![T::zero(); bs * d];
    let mut y = Vec::with_capacity(bs);
    let mut scratch = vec![0.0f32; d];
    let mut best: Option<(f64, Vec<T>)> = None;

    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in train_idx.chunks(bs) {
            y.clear();
            for (row, &i) in x.chunks_exact_mut(d).zip(chunk) {
                // always draw, so the stream does not depend on flip_prob
                let flip = rng.random::<f64>() < cfg.flip_prob;
                fill_input(&patches[i], flip, stats, &mut scratch, row);
                y.push(T::from(labels[i]).unwrap());
            }
            let loss = model.loss_and_grad(&x[..chunk.len() * d], &y, &mut ws, &mut grad);
            loss_sum += loss.to_f64().unwrap() * chunk.len() as f64;
            adam_step(&mut model.params, &grad, &mut state, &adam)?;
        }
        let scores = predict(&model, patches, &val_idx, stats, bs);
        let val_acc = accuracy(&scores, &val_labels)?;
        log::debug!(
            "epoch {epoch}: train loss {:.4}, validation accuracy {val_acc:.4}",
            loss_sum / train_idx.len() as f64
        );
        if best.as_ref().is_none_or(|(b, _)| val_acc > *b) {
            best = Some((val_acc, model.params.clone()));
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(model)
}

/// Accuracy at 0.5 and Mann-Whitney AUC on labelled patches.
pub fn evaluate<T: Real>(model: &Mlp<T>, patches: &[Patch], stats: &NormStats) -> Result<Metrics> {
    if patches.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_model_dim(model, stats)?;
    check_inputs(patches, stats)?;
    let labels: Vec<u8> = patches.iter().map(label_of).collect::<Result<_>>()?;
    let idx: Vec<usize> = (0..patches.len()).collect();
    let scores = predict(model, patches, &idx, stats, 256);
    if log::log_enabled!(log::Level::Debug) {
        for class in [0u8, 1] {
            let (n, hit) = scores.iter().zip(&labels).filter(|(_, &l)| l == class).fold((0, 0), |(n, h), (&s, _)| {
                (n + 1, h + usize::from((s >= 0.5) == (class == 1)))
            });
            log::debug!("class {class}: {hit}/{n} correct");
        }
    }
    metrics_from_scores(&scores, &labels)
}

/// Runs `run(seed)` for seeds `base_seed..base_seed + n` in parallel.
pub fn repeat_experiment<F>(run: F, n: usize, base_seed: u64) -> Result<RepetitionReport>
where
    F: Fn(u64) -> Result<Metrics> + Sync,
{
    if n == 0 {
        return Err(Error::BadConfig("repetition count must be at least 1".into()));
    }
    let per_run = (0..n as u64)
        .into_par_iter()
        .map(|i| run(base_seed + i))
        .collect::<Result<Vec<_>>>()?;
    summarize(per_run)
}
