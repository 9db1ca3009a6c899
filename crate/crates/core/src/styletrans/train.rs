//! Deterministic single-threaded training loop: each iteration samples one
//! content and one style image from a seeded stream, runs the forward pass
//! and losses, backpropagates and applies one Adam step.

use super::loss::{loss_nodes, LossBreakdown, LossWeights};
use super::{ModelError, Result, StyleTransferModel};
use crate::imageio::Image;
use crate::numcore::{adam_step, Graph, OptimState, SplitMix64, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct TrainHyper {
    /// Adam learning rate; 0 disables parameter updates.
    pub lr: f64,
    pub iterations: usize,
    pub weights: LossWeights,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            iterations: 300,
            weights: LossWeights::default(),
        }
    }
}

/// Completed training run.
#[derive(Debug)]
pub struct TrainRun {
    pub seed: u64,
    pub iterations: usize,
    pub history: Vec<LossBreakdown>,
    pub model: StyleTransferModel,
}

/// Stepwise trainer; callers that need mid-run snapshots (periodic
/// checkpoints) drive this directly.
pub struct Trainer {
    model: StyleTransferModel,
    content: Vec<Tensor>,
    style: Vec<Tensor>,
    hyper: TrainHyper,
    seed: u64,
    rng: SplitMix64,
    optim: Option<OptimState>,
    iteration: usize,
    history: Vec<LossBreakdown>,
}

impl Trainer {
    pub fn new(
        model: StyleTransferModel,
        content: &[Image],
        style: &[Image],
        hyper: TrainHyper,
        seed: u64,
    ) -> Result<Self> {
        if content.is_empty() {
            return Err(ModelError::EmptyDataset { which: "content" });
        }
        if style.is_empty() {
            return Err(ModelError::EmptyDataset { which: "style" });
        }
        let side = model.config().image_side;
        let check = |img: &Image| -> Result<Tensor> {
            if img.width() != side || img.height() != side || !img.is_gray() {
                return Err(ModelError::InputSizeMismatch {
                    got_w: img.width(),
                    got_h: img.height(),
                    side,
                });
            }
            Ok(img.to_tensor())
        };
        let content = content.iter().map(check).collect::<Result<Vec<_>>>()?;
        let style = style.iter().map(check).collect::<Result<Vec<_>>>()?;
        let optim = if hyper.lr > 0.0 {
            Some(OptimState::new(hyper.lr)?)
        } else {
            None
        };
        Ok(Self {
            model,
            content,
            style,
            hyper,
            seed,
            rng: SplitMix64::new(seed),
            optim,
            iteration: 0,
            history: Vec::new(),
        })
    }

    pub fn model(&self) -> &StyleTransferModel {
        &self.model
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn history(&self) -> &[LossBreakdown] {
        &self.history
    }

    /// One sampled (content, style) pair: forward, losses, backward, Adam.
    pub fn step(&mut self) -> Result<LossBreakdown> {
        let ci = self.rng.next_index(self.content.len());
        let si = self.rng.next_index(self.style.len());
        self.iteration += 1;

        let mut g = Graph::new();
        let (tree, flat) = self.model.bind(&mut g, self.optim.is_some());
        let c = g.input(self.content[ci].clone());
        let s = g.input(self.style[si].clone());
        let cfg = *self.model.config();
        let nodes = loss_nodes(&mut g, &tree, &cfg, c, s, None, &self.hyper.weights)?;
        let breakdown = LossBreakdown::from_nodes(&g, &nodes, self.hyper.weights);
        if !breakdown.total.is_finite() {
            return Err(ModelError::NonFiniteLoss {
                iteration: self.iteration,
            });
        }

        if let Some(optim) = self.optim.as_mut() {
            g.backward(nodes.total)?;
            let grads: Vec<Tensor> = flat
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    g.grad(v)
                        .cloned()
                        .unwrap_or_else(|| Tensor::zeros(self.model.value(i).shape().to_vec()))
                })
                .collect();
            let mut params: Vec<&mut Tensor> = self.model.values_mut().iter_mut().collect();
            let grad_refs: Vec<&Tensor> = grads.iter().collect();
            adam_step(&mut params, &grad_refs, optim)?;
        }

        self.history.push(breakdown);
        Ok(breakdown)
    }

    pub fn into_run(self) -> TrainRun {
        TrainRun {
            seed: self.seed,
            iterations: self.iteration,
            history: self.history,
            model: self.model,
        }
    }
}

/// Run a full training session over in-memory images.
pub fn train(
    model: StyleTransferModel,
    content: &[Image],
    style: &[Image],
    hyper: TrainHyper,
    seed: u64,
) -> Result<TrainRun> {
    let mut trainer = Trainer::new(model, content, style, hyper, seed)?;
    for _ in 0..hyper.iterations {
        trainer.step()?;
    }
    Ok(trainer.into_run())
}
