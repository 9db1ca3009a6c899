//! Training losses. The feature extractor is the model's own content
//! pathway (patch embed + CAPE + content encoder), evaluated at each block
//! output, which keeps the artifact self-contained:
//!
//! - content loss: MSE between deepest-level features of output and content;
//! - style loss: summed squared differences of channel-wise feature means
//!   and stds, over every level;
//! - identity losses: pixel MSE and feature MSE of `transfer(c,c)` vs `c`
//!   and `transfer(s,s)` vs `s`.

use super::forward::{content_pathway, decode_nodes, style_pathway};
use super::params::ParamTree;
use super::{ModelConfig, Result, StyleTransferModel};
use crate::imageio::Image;
use crate::numcore::{Graph, Var};

/// Loss weights; the total is their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub content: f64,
    pub style: f64,
    pub identity_pixel: f64,
    pub identity_feature: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            content: 1.0,
            style: 10.0,
            identity_pixel: 50.0,
            identity_feature: 1.0,
        }
    }
}

/// Loss components for one (content, style) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub content: f64,
    pub style: f64,
    pub identity_pixel: f64,
    pub identity_feature: f64,
    pub weights: LossWeights,
    pub total: f64,
}

pub(crate) struct LossNodes {
    pub total: Var,
    pub content: Var,
    pub style: Var,
    pub identity_pixel: Var,
    pub identity_feature: Var,
    #[allow(dead_code)]
    pub output: Var,
}

fn mse(g: &mut Graph, a: Var, b: Var) -> Result<Var> {
    let d = g.sub(a, b)?;
    let sq = g.mul(d, d)?;
    Ok(g.mean_all(sq)?)
}

/// Channel-wise mean and std over tokens; std uses a small floor under the
/// square root so the gradient stays finite for degenerate features.
fn feature_stats(g: &mut Graph, f: Var) -> Result<(Var, Var)> {
    let n = g.value(f).shape()[0];
    let mu = g.mean_rows(f)?;
    let mub = g.broadcast_row(mu, n)?;
    let centered = g.sub(f, mub)?;
    let sq = g.mul(centered, centered)?;
    let var = g.mean_rows(sq)?;
    let var_eps = g.add_scalar(var, 1e-8)?;
    let sigma = g.sqrt(var_eps)?;
    Ok((mu, sigma))
}

/// `||mu_a - mu_b||^2 + ||sigma_a - sigma_b||^2` for one feature level.
fn stats_loss(g: &mut Graph, fa: Var, fb: Var) -> Result<Var> {
    let (mu_a, sig_a) = feature_stats(g, fa)?;
    let (mu_b, sig_b) = feature_stats(g, fb)?;
    let dm = g.sub(mu_a, mu_b)?;
    let dm2 = g.mul(dm, dm)?;
    let lm = g.sum_all(dm2)?;
    let ds = g.sub(sig_a, sig_b)?;
    let ds2 = g.mul(ds, ds)?;
    let ls = g.sum_all(ds2)?;
    Ok(g.add(lm, ls)?)
}

/// Build the full training loss on `g`. When `output` is `None` the main
/// transfer is built in-graph (the training path); otherwise the supplied
/// node is scored as-is.
pub(crate) fn loss_nodes(
    g: &mut Graph,
    tree: &ParamTree<Var>,
    cfg: &ModelConfig,
    content: Var,
    style: Var,
    output: Option<Var>,
    w: &LossWeights,
) -> Result<LossNodes> {
    let (content_code, content_levels) = content_pathway(g, tree, cfg, content)?;
    let (style_content_code, style_levels) = content_pathway(g, tree, cfg, style)?;
    let style_code = style_pathway(g, tree, cfg, style)?;

    let output = match output {
        Some(o) => o,
        None => decode_nodes(g, tree, cfg, content_code, style_code)?,
    };
    let (_, output_levels) = content_pathway(g, tree, cfg, output)?;

    // Content loss: deepest features (or raw pixels when there are no
    // encoder levels).
    let l_content = match (output_levels.last(), content_levels.last()) {
        (Some(&fo), Some(&fc)) => mse(g, fo, fc)?,
        _ => mse(g, output, content)?,
    };

    // Style loss: feature statistics at every level.
    let mut l_style = g.input(crate::numcore::Tensor::scalar(0.0));
    for (&fo, &fs) in output_levels.iter().zip(&style_levels) {
        let term = stats_loss(g, fo, fs)?;
        l_style = g.add(l_style, term)?;
    }

    // Identity pair 1: transfer(c, c).
    let style_code_of_content = style_pathway(g, tree, cfg, content)?;
    let t_cc = decode_nodes(g, tree, cfg, content_code, style_code_of_content)?;
    // Identity pair 2: transfer(s, s).
    let t_ss = decode_nodes(g, tree, cfg, style_content_code, style_code)?;

    let id1_c = mse(g, t_cc, content)?;
    let id1_s = mse(g, t_ss, style)?;
    let l_id1 = g.add(id1_c, id1_s)?;

    let (_, tcc_levels) = content_pathway(g, tree, cfg, t_cc)?;
    let (_, tss_levels) = content_pathway(g, tree, cfg, t_ss)?;
    let mut l_id2 = g.input(crate::numcore::Tensor::scalar(0.0));
    for (&ft, &fc) in tcc_levels.iter().zip(&content_levels) {
        let term = mse(g, ft, fc)?;
        l_id2 = g.add(l_id2, term)?;
    }
    for (&ft, &fs) in tss_levels.iter().zip(&style_levels) {
        let term = mse(g, ft, fs)?;
        l_id2 = g.add(l_id2, term)?;
    }

    let wc = g.scale(l_content, w.content)?;
    let ws = g.scale(l_style, w.style)?;
    let w1 = g.scale(l_id1, w.identity_pixel)?;
    let w2 = g.scale(l_id2, w.identity_feature)?;
    let t1 = g.add(wc, ws)?;
    let t2 = g.add(w1, w2)?;
    let total = g.add(t1, t2)?;

    Ok(LossNodes {
        total,
        content: l_content,
        style: l_style,
        identity_pixel: l_id1,
        identity_feature: l_id2,
        output,
    })
}

impl LossBreakdown {
    pub(crate) fn from_nodes(g: &Graph, nodes: &LossNodes, weights: LossWeights) -> Self {
        let content = g.value(nodes.content).item();
        let style = g.value(nodes.style).item();
        let identity_pixel = g.value(nodes.identity_pixel).item();
        let identity_feature = g.value(nodes.identity_feature).item();
        Self {
            content,
            style,
            identity_pixel,
            identity_feature,
            weights,
            total: g.value(nodes.total).item(),
        }
    }

    /// Weighted sum recomputed from the parts; equals `total` up to
    /// floating-point association.
    pub fn weighted_sum(&self) -> f64 {
        self.weights.content * self.content
            + self.weights.style * self.style
            + self.weights.identity_pixel * self.identity_pixel
            + self.weights.identity_feature * self.identity_feature
    }
}

impl StyleTransferModel {
    /// Score an (output, content, style) triple. Pure: gradients are not
    /// recorded and the model is unchanged.
    pub fn compute_losses(
        &self,
        output: &Image,
        content: &Image,
        style: &Image,
        weights: LossWeights,
    ) -> Result<LossBreakdown> {
        let mut g = Graph::new();
        let (tree, _) = self.bind(&mut g, false);
        let c = g.input(content.to_tensor());
        let s = g.input(style.to_tensor());
        let o = g.input(output.to_tensor());
        let nodes = loss_nodes(&mut g, &tree, self.config(), c, s, Some(o), &weights)?;
        Ok(LossBreakdown::from_nodes(&g, &nodes, weights))
    }

    /// Training objective for one (content, style) pair, with the main
    /// transfer built in-graph. Value only, no gradients.
    pub fn training_loss(
        &self,
        content: &Image,
        style: &Image,
        weights: LossWeights,
    ) -> Result<LossBreakdown> {
        let mut g = Graph::new();
        let (tree, _) = self.bind(&mut g, false);
        let c = g.input(content.to_tensor());
        let s = g.input(style.to_tensor());
        let nodes = loss_nodes(&mut g, &tree, self.config(), c, s, None, &weights)?;
        Ok(LossBreakdown::from_nodes(&g, &nodes, weights))
    }

    /// Analytic gradients of the training objective w.r.t. every parameter,
    /// in checkpoint record order.
    pub fn training_gradients(
        &self,
        content: &Image,
        style: &Image,
        weights: LossWeights,
    ) -> Result<(LossBreakdown, Vec<(String, crate::numcore::Tensor)>)> {
        let mut g = Graph::new();
        let (tree, flat) = self.bind(&mut g, true);
        let c = g.input(content.to_tensor());
        let s = g.input(style.to_tensor());
        let nodes = loss_nodes(&mut g, &tree, self.config(), c, s, None, &weights)?;
        let breakdown = LossBreakdown::from_nodes(&g, &nodes, weights);
        g.backward(nodes.total)?;
        let grads = self
            .param_names()
            .map(str::to_owned)
            .zip(flat.iter().enumerate().map(|(i, &v)| {
                g.grad(v)
                    .cloned()
                    .unwrap_or_else(|| crate::numcore::Tensor::zeros(self.value(i).shape().to_vec()))
            }))
            .collect();
        Ok((breakdown, grads))
    }
}
