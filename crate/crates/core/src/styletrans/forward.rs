//! Forward passes, both the graph builders used in training and plain-value
//! wrappers for inference and tests.

use super::params::{AttnP, DecoderLayerP, EncoderLayerP, LinearP, ParamTree};
use super::{ModelConfig, ModelError, PatchSequence, Result, StyleTransferModel};
use crate::imageio::Image;
use crate::numcore::{Graph, PadMode, Tensor, Var};

pub(crate) const LN_EPS: f64 = 1e-5;

/// Fixed sinusoidal positional encoding: `PE(pos, 2i) = sin(pos / 10000^(2i/d))`,
/// `PE(pos, 2i+1) = cos(...)`. Content-independent by construction.
pub fn sinusoidal_pe(n_tokens: usize, dim: usize) -> Result<Tensor> {
    if !dim.is_multiple_of(2) {
        return Err(ModelError::OddDimension { dim });
    }
    let mut data = vec![0.0; n_tokens * dim];
    for pos in 0..n_tokens {
        for i in 0..dim / 2 {
            let rate = 10_000f64.powf(2.0 * i as f64 / dim as f64);
            let angle = pos as f64 / rate;
            data[pos * dim + 2 * i] = angle.sin();
            data[pos * dim + 2 * i + 1] = angle.cos();
        }
    }
    Ok(Tensor::new(vec![n_tokens, dim], data)?)
}

fn linear(g: &mut Graph, x: Var, p: &LinearP<Var>) -> Result<Var> {
    let y = g.matmul(x, p.w)?;
    Ok(g.add_row_bias(y, p.b)?)
}

/// Multi-head scaled dot-product attention; `q_in` supplies queries, `kv_in`
/// keys and values. Row softmax keeps every attention row a probability
/// distribution.
fn attention(g: &mut Graph, q_in: Var, kv_in: Var, p: &AttnP<Var>, heads: usize) -> Result<Var> {
    let d = g.value(q_in).shape()[1];
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = linear(g, q_in, &p.q)?;
    let k = linear(g, kv_in, &p.k)?;
    let v = linear(g, kv_in, &p.v)?;
    let mut outs = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_cols(q, h * dh, dh)?;
        let kh = g.slice_cols(k, h * dh, dh)?;
        let vh = g.slice_cols(v, h * dh, dh)?;
        let kt = g.transpose(kh)?;
        let scores = g.matmul(qh, kt)?;
        let scaled = g.scale(scores, scale)?;
        let attn = g.softmax_axis(scaled, 1)?;
        outs.push(g.matmul(attn, vh)?);
    }
    let cat = g.concat_cols(&outs)?;
    linear(g, cat, &p.o)
}

fn mlp(g: &mut Graph, x: Var, w1: &LinearP<Var>, w2: &LinearP<Var>) -> Result<Var> {
    let h = linear(g, x, w1)?;
    let a = g.gelu(h)?;
    linear(g, a, w2)
}

fn encoder_layer(
    g: &mut Graph,
    x: Var,
    p: &EncoderLayerP<Var>,
    heads: usize,
) -> Result<Var> {
    let n1 = g.layer_norm(x, p.norm1.gamma, p.norm1.beta, LN_EPS)?;
    let att = attention(g, n1, n1, &p.attn, heads)?;
    let x = g.add(x, att)?;
    let n2 = g.layer_norm(x, p.norm2.gamma, p.norm2.beta, LN_EPS)?;
    let m = mlp(g, n2, &p.mlp1, &p.mlp2)?;
    Ok(g.add(x, m)?)
}

fn layer_context(stack: &'static str, layer: usize) -> impl FnOnce(ModelError) -> ModelError {
    move |source| ModelError::LayerFailed {
        stack,
        layer,
        source: Box::new(source),
    }
}

/// Pre-norm encoder stack; returns the final sequence and each block's
/// output (the loss feature levels). `L = 0` is the identity. Failures
/// (for example NaN propagation) name the offending layer.
pub(crate) fn encoder_stack(
    g: &mut Graph,
    mut x: Var,
    layers: &[EncoderLayerP<Var>],
    heads: usize,
) -> Result<(Var, Vec<Var>)> {
    let mut levels = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        x = encoder_layer(g, x, layer, heads).map_err(layer_context("encoder", i))?;
        levels.push(x);
    }
    Ok((x, levels))
}

fn decoder_layer(
    g: &mut Graph,
    x: Var,
    style_code: Var,
    p: &DecoderLayerP<Var>,
    heads: usize,
) -> Result<Var> {
    let n1 = g.layer_norm(x, p.norm1.gamma, p.norm1.beta, LN_EPS)?;
    let sa = attention(g, n1, n1, &p.self_attn, heads)?;
    let x = g.add(x, sa)?;
    let n2 = g.layer_norm(x, p.norm2.gamma, p.norm2.beta, LN_EPS)?;
    // Content supplies queries, style supplies keys/values.
    let ca = attention(g, n2, style_code, &p.cross_attn, heads)?;
    let x = g.add(x, ca)?;
    let n3 = g.layer_norm(x, p.norm3.gamma, p.norm3.beta, LN_EPS)?;
    let m = mlp(g, n3, &p.mlp1, &p.mlp2)?;
    Ok(g.add(x, m)?)
}

pub(crate) fn decoder_stack(
    g: &mut Graph,
    mut x: Var,
    style_code: Var,
    layers: &[DecoderLayerP<Var>],
    heads: usize,
) -> Result<Var> {
    for (i, layer) in layers.iter().enumerate() {
        x = decoder_layer(g, x, style_code, layer, heads).map_err(layer_context("decoder", i))?;
    }
    Ok(x)
}

/// Strided patch-embedding convolution; `[1,H,W]` image -> `[n, d]` tokens
/// in raster order.
pub(crate) fn patch_embed_nodes(
    g: &mut Graph,
    tree: &ParamTree<Var>,
    cfg: &ModelConfig,
    img: Var,
) -> Result<Var> {
    let p = cfg.patch;
    let fm = g.conv2d(img, tree.patch_embed.w, p, 0, PadMode::Zero)?;
    let fm = g.add_chan_bias(fm, tree.patch_embed.b)?;
    let side = cfg.grid_side();
    let flat = g.reshape(fm, vec![cfg.embed_dim, side * side])?;
    Ok(g.transpose(flat)?)
}

/// CAPE: average-pool the token grid to `s x s`, apply the learned 1x1
/// channel map, and bilinearly interpolate (align corners) back to the full
/// grid. A pure function of the pooled grid and the output dims.
pub(crate) fn cape_nodes(
    g: &mut Graph,
    tree: &ParamTree<Var>,
    cfg: &ModelConfig,
    tokens: Var,
    grid: (usize, usize),
) -> Result<Var> {
    let (gh, gw) = grid;
    let d = cfg.embed_dim;
    let t = g.transpose(tokens)?;
    let fm = g.reshape(t, vec![d, gh, gw])?;
    let pooled = g.adaptive_avg_pool2d(fm, cfg.cape_grid, cfg.cape_grid)?;
    let mapped = g.conv2d(pooled, tree.cape.w, 1, 0, PadMode::Zero)?;
    let mapped = g.add_chan_bias(mapped, tree.cape.b)?;
    let up = g.resize_bilinear(mapped, gh, gw)?;
    let flat = g.reshape(up, vec![d, gh * gw])?;
    Ok(g.transpose(flat)?)
}

/// Content pathway: patch embed, add CAPE, run the content encoder.
/// This doubles as the loss feature extractor; the returned levels are the
/// per-block outputs.
pub(crate) fn content_pathway(
    g: &mut Graph,
    tree: &ParamTree<Var>,
    cfg: &ModelConfig,
    img: Var,
) -> Result<(Var, Vec<Var>)> {
    let tokens = patch_embed_nodes(g, tree, cfg, img)?;
    let grid = (cfg.grid_side(), cfg.grid_side());
    let pe = cape_nodes(g, tree, cfg, tokens, grid)?;
    let x = g.add(tokens, pe)?;
    encoder_stack(g, x, &tree.enc_content, cfg.heads)
}

/// Style pathway: patch embed, add the fixed sinusoidal encoding, run the
/// style encoder.
pub(crate) fn style_pathway(
    g: &mut Graph,
    tree: &ParamTree<Var>,
    cfg: &ModelConfig,
    img: Var,
) -> Result<Var> {
    let tokens = patch_embed_nodes(g, tree, cfg, img)?;
    let pe = g.input(sinusoidal_pe(cfg.token_count(), cfg.embed_dim)?);
    let x = g.add(tokens, pe)?;
    Ok(encoder_stack(g, x, &tree.enc_style, cfg.heads)?.0)
}

/// Pixel decoder: reshape tokens into a feature map, then repeated
/// (2x nearest upsample, 3x3 replicate-pad conv, ReLU) stages until the
/// total upsampling equals the patch size, and a final 3x3 conv + sigmoid
/// down to one channel.
pub(crate) fn pixel_decode_nodes(
    g: &mut Graph,
    tree: &ParamTree<Var>,
    cfg: &ModelConfig,
    tokens: Var,
    grid: (usize, usize),
) -> Result<Var> {
    let (gh, gw) = grid;
    let t = g.transpose(tokens)?;
    let mut fm = g.reshape(t, vec![cfg.embed_dim, gh, gw])?;
    for stage in &tree.pixel_stages {
        fm = g.upsample_nearest2(fm)?;
        fm = g.conv2d(fm, stage.w, 1, 1, PadMode::Replicate)?;
        fm = g.add_chan_bias(fm, stage.b)?;
        fm = g.gelu(fm)?;
    }
    let out = g.conv2d(fm, tree.pixel_out.w, 1, 1, PadMode::Replicate)?;
    let out = g.add_chan_bias(out, tree.pixel_out.b)?;
    Ok(g.sigmoid(out)?)
}

/// Full generation graph: content and style pathways, cross-attention
/// decoding, pixel decoding.
pub(crate) fn transfer_nodes(
    g: &mut Graph,
    tree: &ParamTree<Var>,
    cfg: &ModelConfig,
    content: Var,
    style: Var,
) -> Result<Var> {
    let (content_code, _) = content_pathway(g, tree, cfg, content)?;
    let style_code = style_pathway(g, tree, cfg, style)?;
    decode_nodes(g, tree, cfg, content_code, style_code)
}

pub(crate) fn decode_nodes(
    g: &mut Graph,
    tree: &ParamTree<Var>,
    cfg: &ModelConfig,
    content_code: Var,
    style_code: Var,
) -> Result<Var> {
    let mixed = decoder_stack(g, content_code, style_code, &tree.decoder, cfg.heads)?;
    let grid = (cfg.grid_side(), cfg.grid_side());
    pixel_decode_nodes(g, tree, cfg, mixed, grid)
}

fn image_input(g: &mut Graph, cfg: &ModelConfig, img: &Image) -> Result<Var> {
    if img.width() != cfg.image_side || img.height() != cfg.image_side || !img.is_gray() {
        return Err(ModelError::InputSizeMismatch {
            got_w: img.width(),
            got_h: img.height(),
            side: cfg.image_side,
        });
    }
    Ok(g.input(img.to_tensor()))
}

impl StyleTransferModel {
    /// Decompose a grayscale image into embedded patch tokens.
    pub fn patch_embed(&self, img: &Image) -> Result<PatchSequence> {
        let mut g = Graph::new();
        let (tree, _) = self.bind(&mut g, false);
        let input = image_input(&mut g, self.config(), img)?;
        let tokens = patch_embed_nodes(&mut g, &tree, self.config(), input)?;
        let side = self.config().grid_side();
        PatchSequence::new((side, side), g.value(tokens).clone())
    }

    /// Content-aware positional encoding of a token sequence.
    pub fn cape(&self, seq: &PatchSequence) -> Result<Tensor> {
        let mut g = Graph::new();
        let (tree, _) = self.bind(&mut g, false);
        let tokens = g.input(seq.tokens.clone());
        let out = cape_nodes(&mut g, &tree, self.config(), tokens, seq.grid)?;
        Ok(g.value(out).clone())
    }

    /// Content-encoder stack over an already position-encoded sequence.
    pub fn encode_content(&self, seq: &PatchSequence) -> Result<PatchSequence> {
        let mut g = Graph::new();
        let (tree, _) = self.bind(&mut g, false);
        let x = g.input(seq.tokens.clone());
        let (out, _) = encoder_stack(&mut g, x, &tree.enc_content, self.config().heads)?;
        PatchSequence::new(seq.grid, g.value(out).clone())
    }

    /// Style-encoder stack over an already position-encoded sequence.
    pub fn encode_style(&self, seq: &PatchSequence) -> Result<PatchSequence> {
        let mut g = Graph::new();
        let (tree, _) = self.bind(&mut g, false);
        let x = g.input(seq.tokens.clone());
        let (out, _) = encoder_stack(&mut g, x, &tree.enc_style, self.config().heads)?;
        PatchSequence::new(seq.grid, g.value(out).clone())
    }

    /// Cross-attention decoding: content code as queries over the style code.
    pub fn decoder_forward(
        &self,
        content_code: &PatchSequence,
        style_code: &PatchSequence,
    ) -> Result<PatchSequence> {
        if content_code.dim() != style_code.dim() {
            return Err(ModelError::ShapeMismatch {
                what: format!(
                    "content dim {} vs style dim {}",
                    content_code.dim(),
                    style_code.dim()
                ),
            });
        }
        let mut g = Graph::new();
        let (tree, _) = self.bind(&mut g, false);
        let x = g.input(content_code.tokens.clone());
        let s = g.input(style_code.tokens.clone());
        let out = decoder_stack(&mut g, x, s, &tree.decoder, self.config().heads)?;
        PatchSequence::new(content_code.grid, g.value(out).clone())
    }

    /// Convert a token sequence back to a `[0,1]` grayscale image.
    pub fn pixel_decode(&self, seq: &PatchSequence) -> Result<Image> {
        let mut g = Graph::new();
        let (tree, _) = self.bind(&mut g, false);
        let tokens = g.input(seq.tokens.clone());
        let out = pixel_decode_nodes(&mut g, &tree, self.config(), tokens, seq.grid)?;
        Ok(Image::from_tensor_clamped(g.value(out))?)
    }

    /// Generate a pseudo-acoustic image: content structure, style texture.
    /// Deterministic per model.
    pub fn transfer(&self, content: &Image, style: &Image) -> Result<Image> {
        let mut g = Graph::new();
        let (tree, _) = self.bind(&mut g, false);
        let c = image_input(&mut g, self.config(), content)?;
        let s = image_input(&mut g, self.config(), style)?;
        let out = transfer_nodes(&mut g, &tree, self.config(), c, s)?;
        Ok(Image::from_tensor_clamped(g.value(out))?)
    }
}
