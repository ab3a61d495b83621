use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Binding, Linear, Mlp, ParamId, ParamStore};
use crate::tensor::{Tape, Tensor, Var};

use super::FusionConfig;

/// Learned per-feature affine after normalization.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Self {
        Self {
            gain: store.add(format!("{name}.gain"), Tensor::full([width], 1.0)),
            bias: store.add(format!("{name}.bias"), Tensor::zeros([width])),
        }
    }

    pub fn forward(&self, tape: &mut Tape, bind: &Binding, x: Var) -> Result<Var> {
        tape.layer_norm(x, bind.var(self.gain), bind.var(self.bias))
    }
}

/// Multi-head scaled dot-product attention with an output projection.
#[derive(Clone, Debug)]
pub struct Attention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
}

impl Attention {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, heads: usize, rng: &mut impl Rng) -> Result<Self> {
        if heads == 0 || width % heads != 0 {
            return Err(Error::Config(format!("width {width} is not divisible by {heads} heads")));
        }
        Ok(Self {
            query: Linear::new(store, &format!("{name}.q"), width, width, true, rng),
            // A key bias only shifts each score row by a constant, which the softmax removes.
            key: Linear::new(store, &format!("{name}.k"), width, width, false, rng),
            value: Linear::new(store, &format!("{name}.v"), width, width, true, rng),
            output: Linear::new(store, &format!("{name}.o"), width, width, true, rng),
            heads,
        })
    }

    /// Returns the attended output and one `[N_query, N_key]` attention matrix per head.
    pub fn forward(&self, tape: &mut Tape, bind: &Binding, queries: Var, keys: Var) -> Result<(Var, Vec<Var>)> {
        let width = self.query.fan_out;
        let d = width / self.heads;
        let q = self.query.forward(tape, bind, queries)?;
        let k = self.key.forward(tape, bind, keys)?;
        let v = self.value.forward(tape, bind, keys)?;
        let scale = 1.0 / (d as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        let mut maps = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = tape.slice_cols(q, h * d, d)?;
            let kh = tape.slice_cols(k, h * d, d)?;
            let vh = tape.slice_cols(v, h * d, d)?;
            let kt = tape.transpose(kh)?;
            let scores = tape.matmul(qh, kt)?;
            let scores = tape.scale(scores, scale)?;
            let a = tape.softmax(scores, 1)?;
            outs.push(tape.matmul(a, vh)?);
            maps.push(a);
        }
        let joined = if outs.len() == 1 { outs[0] } else { tape.concat_cols(&outs)? };
        Ok((self.output.forward(tape, bind, joined)?, maps))
    }
}

/// One stacked block: embeddings attend to themselves, then points attend to
/// the embeddings, then a point-wise feed-forward layer; each step residual and normalized.
#[derive(Clone, Debug)]
pub struct SffmBlock {
    pub self_attention: Attention,
    pub self_norm: LayerNorm,
    pub cross_attention: Attention,
    pub cross_norm: LayerNorm,
    pub ffn: Mlp,
    pub ffn_norm: LayerNorm,
}

impl SffmBlock {
    pub fn new(store: &mut ParamStore, name: &str, width: usize, heads: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            self_attention: Attention::new(store, &format!("{name}.self"), width, heads, rng)?,
            self_norm: LayerNorm::new(store, &format!("{name}.self_norm"), width),
            cross_attention: Attention::new(store, &format!("{name}.cross"), width, heads, rng)?,
            cross_norm: LayerNorm::new(store, &format!("{name}.cross_norm"), width),
            ffn: Mlp::new(store, &format!("{name}.ffn"), [width, 2 * width, width], rng),
            ffn_norm: LayerNorm::new(store, &format!("{name}.ffn_norm"), width),
        })
    }

    /// `Norm(E + MHSA(E))`.
    pub fn embed_step(&self, tape: &mut Tape, bind: &Binding, e: Var) -> Result<(Var, Vec<Var>)> {
        let (a, maps) = self.self_attention.forward(tape, bind, e, e)?;
        let x = tape.add(e, a)?;
        Ok((self.self_norm.forward(tape, bind, x)?, maps))
    }

    /// `Norm(F + MHCA(F, E, E))`.
    pub fn cross_step(&self, tape: &mut Tape, bind: &Binding, f: Var, e: Var) -> Result<(Var, Vec<Var>)> {
        let (a, maps) = self.cross_attention.forward(tape, bind, f, e)?;
        let x = tape.add(f, a)?;
        Ok((self.cross_norm.forward(tape, bind, x)?, maps))
    }

    /// `Norm(F + FFN(F))`.
    pub fn ffn_step(&self, tape: &mut Tape, bind: &Binding, f: Var) -> Result<Var> {
        let a = self.ffn.forward(tape, bind, f)?;
        let x = tape.add(f, a)?;
        self.ffn_norm.forward(tape, bind, x)
    }
}

#[derive(Clone, Debug)]
pub struct SffmOutput {
    /// `[N_point, C_sfused]`.
    pub features: Var,
    /// Every self-attention matrix (`[2 N_cls, 2 N_cls]`) and cross-attention
    /// matrix (`[N_point, 2 N_cls]`), block by block, head by head.
    pub attention: Vec<Var>,
}

/// Semantic-based fusion: point features query the class embeddings of both modalities.
#[derive(Clone, Debug)]
pub struct Sffm {
    pub point_proj: Linear,
    pub lidar_proj: Linear,
    pub camera_proj: Linear,
    pub blocks: Vec<SffmBlock>,
}

impl Sffm {
    pub fn new(store: &mut ParamStore, widths: [usize; 3], cfg: &FusionConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let [gfused, lidar, camera] = widths;
        let c = cfg.sfused_width;
        Ok(Self {
            point_proj: Linear::new(store, "sffm.proj_point", gfused, c, true, rng),
            lidar_proj: Linear::new(store, "sffm.proj_lidar", lidar, c, true, rng),
            camera_proj: Linear::new(store, "sffm.proj_camera", camera, c, true, rng),
            blocks: (0..cfg.blocks)
                .map(|k| SffmBlock::new(store, &format!("sffm.block{k}"), c, cfg.heads, rng))
                .collect::<Result<_>>()?,
        })
    }

    /// Class embeddings entering each block's cross-attention, plus the self-attention maps.
    /// They do not depend on the points, so a scene can compute them once.
    pub fn embeddings(&self, tape: &mut Tape, bind: &Binding, e_lidar: Var, e_cam: Var) -> Result<(Vec<Var>, Vec<Var>)> {
        let el = self.lidar_proj.forward(tape, bind, e_lidar)?;
        let ec = self.camera_proj.forward(tape, bind, e_cam)?;
        let mut e = tape.concat_rows(&[el, ec])?;
        let mut per_block = Vec::with_capacity(self.blocks.len());
        let mut maps = Vec::new();
        for block in &self.blocks {
            let (next, m) = block.embed_step(tape, bind, e)?;
            e = next;
            per_block.push(e);
            maps.extend(m);
        }
        Ok((per_block, maps))
    }

    /// Point path given the per-block embeddings; returns features and cross-attention maps.
    pub fn attend(&self, tape: &mut Tape, bind: &Binding, f_gfused: Var, embeddings: &[Var]) -> Result<(Var, Vec<Var>)> {
        if embeddings.len() != self.blocks.len() {
            return Err(Error::shape("sffm", format!("{} embeddings for {} blocks", embeddings.len(), self.blocks.len())));
        }
        let mut f = self.point_proj.forward(tape, bind, f_gfused)?;
        let mut maps = Vec::new();
        for (block, &e) in self.blocks.iter().zip(embeddings) {
            let (f2, m) = block.cross_step(tape, bind, f, e)?;
            maps.extend(m);
            f = block.ffn_step(tape, bind, f2)?;
        }
        Ok((f, maps))
    }

    pub fn forward(&self, tape: &mut Tape, bind: &Binding, f_gfused: Var, e_lidar: Var, e_cam: Var) -> Result<SffmOutput> {
        let (embeddings, self_maps) = self.embeddings(tape, bind, e_lidar, e_cam)?;
        let (features, cross_maps) = self.attend(tape, bind, f_gfused, &embeddings)?;
        let heads = self.blocks.first().map_or(1, |b| b.self_attention.heads);
        // Interleave per block: self-attention heads, then cross-attention heads.
        let mut attention = Vec::with_capacity(self_maps.len() + cross_maps.len());
        for (s, c) in self_maps.chunks(heads).zip(cross_maps.chunks(heads)) {
            attention.extend_from_slice(s);
            attention.extend_from_slice(c);
        }
        Ok(SffmOutput { features, attention })
    }
}
