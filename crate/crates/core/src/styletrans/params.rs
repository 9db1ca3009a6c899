//! Named parameter storage, initialization and checkpoint I/O.
//!
//! Parameters live in one flat `Vec<Tensor>`; a typed index tree addresses
//! them from the forward code. Registration order is the single source of
//! truth for RNG draws during init, gradient/optimizer pairing, and
//! checkpoint record order.

use super::{ModelConfig, ModelError, Result};
use crate::numcore::{Graph, SplitMix64, Tensor, Var};
use crate::records::{RecordReader, RecordWriter};
use std::path::Path;

pub(crate) const CHECKPOINT_MAGIC: [u8; 8] = *b"UWSTM\0\0\x01";
pub(crate) const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub(crate) struct LinearP<T> {
    pub w: T,
    pub b: T,
}

#[derive(Debug, Clone)]
pub(crate) struct NormP<T> {
    pub gamma: T,
    pub beta: T,
}

#[derive(Debug, Clone)]
pub(crate) struct AttnP<T> {
    pub q: LinearP<T>,
    pub k: LinearP<T>,
    pub v: LinearP<T>,
    pub o: LinearP<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct EncoderLayerP<T> {
    pub norm1: NormP<T>,
    pub attn: AttnP<T>,
    pub norm2: NormP<T>,
    pub mlp1: LinearP<T>,
    pub mlp2: LinearP<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct DecoderLayerP<T> {
    pub norm1: NormP<T>,
    pub self_attn: AttnP<T>,
    pub norm2: NormP<T>,
    pub cross_attn: AttnP<T>,
    pub norm3: NormP<T>,
    pub mlp1: LinearP<T>,
    pub mlp2: LinearP<T>,
}

#[derive(Debug, Clone)]
pub(crate) struct ConvP<T> {
    pub w: T,
    pub b: T,
}

#[derive(Debug, Clone)]
pub(crate) struct ParamTree<T> {
    pub patch_embed: ConvP<T>,
    pub cape: ConvP<T>,
    pub enc_content: Vec<EncoderLayerP<T>>,
    pub enc_style: Vec<EncoderLayerP<T>>,
    pub decoder: Vec<DecoderLayerP<T>>,
    pub pixel_stages: Vec<ConvP<T>>,
    pub pixel_out: ConvP<T>,
}

impl<T> LinearP<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> LinearP<U> {
        LinearP {
            w: f(&self.w),
            b: f(&self.b),
        }
    }
}

impl<T> NormP<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> NormP<U> {
        NormP {
            gamma: f(&self.gamma),
            beta: f(&self.beta),
        }
    }
}

impl<T> AttnP<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> AttnP<U> {
        AttnP {
            q: self.q.map(f),
            k: self.k.map(f),
            v: self.v.map(f),
            o: self.o.map(f),
        }
    }
}

impl<T> EncoderLayerP<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> EncoderLayerP<U> {
        EncoderLayerP {
            norm1: self.norm1.map(f),
            attn: self.attn.map(f),
            norm2: self.norm2.map(f),
            mlp1: self.mlp1.map(f),
            mlp2: self.mlp2.map(f),
        }
    }
}

impl<T> DecoderLayerP<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> DecoderLayerP<U> {
        DecoderLayerP {
            norm1: self.norm1.map(f),
            self_attn: self.self_attn.map(f),
            norm2: self.norm2.map(f),
            cross_attn: self.cross_attn.map(f),
            norm3: self.norm3.map(f),
            mlp1: self.mlp1.map(f),
            mlp2: self.mlp2.map(f),
        }
    }
}

impl<T> ConvP<T> {
    fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> ConvP<U> {
        ConvP {
            w: f(&self.w),
            b: f(&self.b),
        }
    }
}

impl<T> ParamTree<T> {
    pub(crate) fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> ParamTree<U> {
        ParamTree {
            patch_embed: self.patch_embed.map(f),
            cape: self.cape.map(f),
            enc_content: self.enc_content.iter().map(|l| l.map(f)).collect(),
            enc_style: self.enc_style.iter().map(|l| l.map(f)).collect(),
            decoder: self.decoder.iter().map(|l| l.map(f)).collect(),
            pixel_stages: self.pixel_stages.iter().map(|l| l.map(f)).collect(),
            pixel_out: self.pixel_out.map(f),
        }
    }
}

/// Allocates parameters in a fixed order, producing names, initial values
/// and the typed index tree.
struct Registrar<'a> {
    names: Vec<String>,
    values: Vec<Tensor>,
    rng: &'a mut SplitMix64,
}

impl Registrar<'_> {
    fn push(&mut self, name: String, value: Tensor) -> usize {
        self.names.push(name);
        self.values.push(value);
        self.values.len() - 1
    }

    fn uniform(&mut self, shape: Vec<usize>, fan_in: usize) -> Tensor {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Tensor::rand_uniform(shape, -bound, bound, self.rng)
    }

    fn linear(&mut self, path: &str, fan_in: usize, fan_out: usize) -> LinearP<usize> {
        let w = self.uniform(vec![fan_in, fan_out], fan_in);
        LinearP {
            w: self.push(format!("{path}.w"), w),
            b: self.push(format!("{path}.b"), Tensor::zeros(vec![fan_out])),
        }
    }

    fn norm(&mut self, path: &str, dim: usize) -> NormP<usize> {
        NormP {
            gamma: self.push(format!("{path}.gamma"), Tensor::full(vec![dim], 1.0)),
            beta: self.push(format!("{path}.beta"), Tensor::zeros(vec![dim])),
        }
    }

    fn conv(&mut self, path: &str, c_out: usize, c_in: usize, k: usize) -> ConvP<usize> {
        let w = self.uniform(vec![c_out, c_in, k, k], c_in * k * k);
        ConvP {
            w: self.push(format!("{path}.w"), w),
            b: self.push(format!("{path}.b"), Tensor::zeros(vec![c_out])),
        }
    }

    fn attn(&mut self, path: &str, d: usize) -> AttnP<usize> {
        AttnP {
            q: self.linear(&format!("{path}.q"), d, d),
            k: self.linear(&format!("{path}.k"), d, d),
            v: self.linear(&format!("{path}.v"), d, d),
            o: self.linear(&format!("{path}.o"), d, d),
        }
    }

    fn encoder_layer(&mut self, path: &str, d: usize, hidden: usize) -> EncoderLayerP<usize> {
        EncoderLayerP {
            norm1: self.norm(&format!("{path}.norm1"), d),
            attn: self.attn(&format!("{path}.attn"), d),
            norm2: self.norm(&format!("{path}.norm2"), d),
            mlp1: self.linear(&format!("{path}.mlp1"), d, hidden),
            mlp2: self.linear(&format!("{path}.mlp2"), hidden, d),
        }
    }

    fn decoder_layer(&mut self, path: &str, d: usize, hidden: usize) -> DecoderLayerP<usize> {
        DecoderLayerP {
            norm1: self.norm(&format!("{path}.norm1"), d),
            self_attn: self.attn(&format!("{path}.self_attn"), d),
            norm2: self.norm(&format!("{path}.norm2"), d),
            cross_attn: self.attn(&format!("{path}.cross_attn"), d),
            norm3: self.norm(&format!("{path}.norm3"), d),
            mlp1: self.linear(&format!("{path}.mlp1"), d, hidden),
            mlp2: self.linear(&format!("{path}.mlp2"), hidden, d),
        }
    }
}

/// Pixel-decoder channel schedule: halve per stage, floor 4.
pub(crate) fn pixel_stage_channels(cfg: &ModelConfig) -> Vec<(usize, usize)> {
    let stages = cfg.patch.trailing_zeros() as usize;
    let mut channels = Vec::with_capacity(stages);
    let mut c = cfg.embed_dim;
    for _ in 0..stages {
        let next = (c / 2).max(4);
        channels.push((c, next));
        c = next;
    }
    channels
}

/// The trained artifact: named parameters plus architecture config.
#[derive(Debug, Clone)]
pub struct StyleTransferModel {
    cfg: ModelConfig,
    names: Vec<String>,
    values: Vec<Tensor>,
    pub(crate) plan: ParamTree<usize>,
}

impl StyleTransferModel {
    /// Fresh model with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights,
    /// zero biases, and the CAPE map initialized to the identity so the
    /// untrained encoding is pool-then-interpolate of the tokens.
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.embed_dim;
        let hidden = 2 * d;
        let mut rng = SplitMix64::new(seed);
        let mut reg = Registrar {
            names: Vec::new(),
            values: Vec::new(),
            rng: &mut rng,
        };

        let patch_embed = reg.conv("patch_embed", d, 1, cfg.patch);
        let mut cape = reg.conv("cape", d, d, 1);
        let enc_content = (0..cfg.enc_layers)
            .map(|l| reg.encoder_layer(&format!("enc_content.{l}"), d, hidden))
            .collect();
        let enc_style = (0..cfg.enc_layers)
            .map(|l| reg.encoder_layer(&format!("enc_style.{l}"), d, hidden))
            .collect();
        let decoder = (0..cfg.dec_layers)
            .map(|l| reg.decoder_layer(&format!("decoder.{l}"), d, hidden))
            .collect();
        let pixel_stages = pixel_stage_channels(&cfg)
            .iter()
            .enumerate()
            .map(|(i, &(c_in, c_out))| reg.conv(&format!("pixel.{i}"), c_out, c_in, 3))
            .collect();
        let last_c = pixel_stage_channels(&cfg).last().map_or(d, |&(_, c)| c);
        let pixel_out = reg.conv("pixel_out", 1, last_c, 3);

        // Identity-initialize the CAPE channel map.
        let mut eye = Tensor::zeros(vec![d, d, 1, 1]);
        for i in 0..d {
            eye.data_mut()[i * d + i] = 1.0;
        }
        reg.values[cape.w] = eye;
        cape = ConvP {
            w: cape.w,
            b: cape.b,
        };

        Ok(Self {
            cfg,
            names: reg.names,
            values: reg.values,
            plan: ParamTree {
                patch_embed,
                cape,
                enc_content,
                enc_style,
                decoder,
                pixel_stages,
                pixel_out,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn param_count(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    pub(crate) fn value(&self, idx: usize) -> &Tensor {
        &self.values[idx]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    /// Register every parameter on a graph (in registration order) and
    /// return the typed Var tree plus the flat Var list.
    pub(crate) fn bind(&self, g: &mut Graph, trainable: bool) -> (ParamTree<Var>, Vec<Var>) {
        let mut flat = Vec::with_capacity(self.values.len());
        let tree = self.plan.map(&mut |&idx| {
            let v = g.leaf(self.values[idx].clone(), trainable);
            flat.push(v);
            v
        });
        // Registration order and traversal order must agree for flat to be
        // index-aligned with `values`.
        debug_assert_eq!(flat.len(), self.values.len());
        (tree, flat)
    }

    /// True when every parameter value is finite.
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(Tensor::is_finite)
    }

    /// Parameter names in checkpoint record order.
    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        let idx = self.names.iter().position(|n| n == name)?;
        Some(&self.values[idx])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        let idx = self.names.iter().position(|n| n == name)?;
        Some(&mut self.values[idx])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.cfg;
        let header = [
            c.patch as u32,
            c.embed_dim as u32,
            c.heads as u32,
            c.enc_layers as u32,
            c.dec_layers as u32,
            c.cape_grid as u32,
            c.image_side as u32,
        ];
        let mut w = RecordWriter::new(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &header);
        for (name, value) in self.names.iter().zip(&self.values) {
            w.put(name, value);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, mut r) = RecordReader::open(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, 7)?;
        let cfg = ModelConfig {
            patch: header[0] as usize,
            embed_dim: header[1] as usize,
            heads: header[2] as usize,
            enc_layers: header[3] as usize,
            dec_layers: header[4] as usize,
            cape_grid: header[5] as usize,
            image_side: header[6] as usize,
        };
        let mut model = Self::init(cfg, 0)?;
        let records = r.read_all()?;
        if records.len() != model.names.len() {
            return Err(ModelError::ShapeMismatch {
                what: format!(
                    "checkpoint holds {} records, model has {} parameters",
                    records.len(),
                    model.names.len()
                ),
            });
        }
        for (i, (name, tensor)) in records.into_iter().enumerate() {
            if name != model.names[i] {
                return Err(ModelError::CheckpointNameMismatch {
                    index: i,
                    expected: model.names[i].clone(),
                    found: name,
                });
            }
            if tensor.shape() != model.values[i].shape() {
                return Err(ModelError::ShapeMismatch {
                    what: format!(
                        "record '{name}' has shape {:?}, expected {:?}",
                        tensor.shape(),
                        model.values[i].shape()
                    ),
                });
            }
            model.values[i] = tensor;
        }
        Ok(model)
    }
}

/// Write the checkpoint file (f32 values, fixed record order).
pub fn save_checkpoint(model: &StyleTransferModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model.to_bytes())?;
    Ok(())
}

/// Load and validate a checkpoint.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<StyleTransferModel> {
    StyleTransferModel::from_bytes(&std::fs::read(path)?)
}
