use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network_input;
use crate::error::{Error, Result};
use crate::models::{save_checkpoint, Model};
use crate::nn::{adam_step, softmax_cross_entropy, AdamConfig, AdamState};
use crate::weak_label::LabeledSlice;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    pub lr: f64,
    pub seed: u64,
    /// Reshuffle the sample order every epoch; otherwise cycle in input order.
    pub shuffle: bool,
    /// Write an intermediate checkpoint every this many iterations (0: only at the end).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            lr: 1e-4,
            seed: 0,
            shuffle: true,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} is invalid", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Loss at each iteration, starting at iteration 1.
    pub losses: Vec<f64>,
    pub wall_time: Duration,
    pub checkpoint: Option<PathBuf>,
}

impl TrainReport {
    /// `iteration,loss` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,loss\n");
        for (i, l) in self.losses.iter().enumerate() {
            let _ = writeln!(out, "{},{l:.9}", i + 1);
        }
        out
    }
}

/// Batch-size-one Adam training on softmax cross-entropy.
///
/// Samples are drawn epoch by epoch; with `shuffle` each epoch uses a fresh
/// permutation from a generator seeded by `cfg.seed`. When `checkpoint` is
/// given the final parameters are written there, plus intermediate copies
/// every `checkpoint_every` iterations.
pub fn train(
    model: &mut Model,
    dataset: &[LabeledSlice],
    cfg: &TrainConfig,
    checkpoint: Option<&Path>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let size = model.input_size();
    if let Some(s) = dataset.iter().find(|s| s.ct.width() != size || s.ct.height() != size) {
        return Err(Error::shape(format!(
            "slice {} is {}x{}, model expects {size}x{size}",
            s.id(),
            s.ct.width(),
            s.ct.height()
        )));
    }
    let inputs: Vec<_> = dataset.iter().map(|s| network_input(&s.ct)).collect();

    let lens: Vec<usize> = model
        .layers()
        .iter()
        .flat_map(|l| [l.params.weights.len(), l.params.bias.len()])
        .collect();
    let mut adam = AdamState::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        &lens,
    )?;

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut losses = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        let pos = it % dataset.len();
        if pos == 0 && cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let k = order[pos];
        let (logits, cache) = model.forward_train(&inputs[k])?;
        let out = softmax_cross_entropy(&logits, std::slice::from_ref(&dataset[k].mask))?;
        if !out.loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss {} at iteration {} (slice {})",
                out.loss,
                it + 1,
                dataset[k].id()
            )));
        }
        losses.push(out.loss);
        let grads = model.backward(&cache, &out.grad_logits)?;

        let grad_refs: Vec<&[f64]> = grads
            .iter()
            .flat_map(|g| [g.grad_w.data(), g.grad_b.as_slice()])
            .collect();
        let mut param_refs: Vec<&mut [f64]> = Vec::with_capacity(lens.len());
        for l in model.layers_mut() {
            param_refs.push(l.params.weights.data_mut());
            param_refs.push(l.params.bias.as_mut_slice());
        }
        adam_step(&mut adam, &mut param_refs, &grad_refs)?;

        if let Some(path) = checkpoint {
            let done = it + 1;
            if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < cfg.iterations {
                save_checkpoint(model, &intermediate_path(path, done), done as u64, cfg.seed)?;
            }
        }
    }
    if let Some(path) = checkpoint {
        save_checkpoint(model, path, cfg.iterations as u64, cfg.seed)?;
    }
    Ok(TrainReport {
        losses,
        wall_time: start.elapsed(),
        checkpoint: checkpoint.map(Path::to_path_buf),
    })
}

/// `model.pseg` -> `model.iter500.pseg`.
fn intermediate_path(path: &Path, iteration: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.iter{iteration}.{}", ext.to_string_lossy()),
        None => format!("{stem}.iter{iteration}"),
    };
    path.with_file_name(name)
}
