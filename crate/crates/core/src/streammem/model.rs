//! The toy streaming segmentation model.
//!
//! One patch encoder, one memory-attention block (self-attention with
//! adapted Q/K/V, cross-attention to memory with adapted Q), and a
//! pointer-queried mask decoder. The four adapted projections each own
//! a rank-1 adapter bank and a gate net.

use super::config::{Conditioning, ModelConfig};
use crate::error::{Error, Result};
use crate::moga::{GateNet, GateNetVars, Rank1AdapterBank};
use crate::numkit::{Tape, Tensor, Var};
use crate::rng::{self, Stream};

#[derive(Clone, Debug)]
pub struct LayerNormParams {
    pub gain: Tensor,
    pub bias: Tensor,
}

impl LayerNormParams {
    fn new(dim: usize) -> Self {
        LayerNormParams { gain: Tensor::filled(&[dim], 1.0), bias: Tensor::zeros(&[dim]) }
    }
}

/// One adapted linear projection: frozen-at-adaptation base weight plus
/// gated rank-1 components and their conditioning head.
#[derive(Clone, Debug)]
pub struct AdaptedProj {
    pub bank: Rank1AdapterBank,
    pub gate: GateNet,
    /// Learned constant logits, present only without conditioning.
    pub alpha_const: Option<Tensor>,
}

/// Which parameters train.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainScope {
    /// Pre-training: the base model; adapters and gates stay untouched.
    Base,
    /// Adaptation: adapter components, gate parameters, LayerNorms.
    AdaptersAndNorms,
}

pub const PROJ_NAMES: [&str; 4] = ["self_q", "self_k", "self_v", "cross_q"];

#[derive(Clone, Debug)]
pub struct Model {
    pub cfg: ModelConfig,
    pub enc_patch_w: Tensor,
    pub enc_patch_b: Tensor,
    pub enc_norm: LayerNormParams,
    /// Fixed (never trained) direction used to mask-condition memory
    /// entries; downstream weights learn to read it.
    pub mask_cond: Tensor,
    pub projs: [AdaptedProj; 4],
    pub self_out: Tensor,
    pub norm1: LayerNormParams,
    pub cross_k: Tensor,
    pub cross_v: Tensor,
    pub cross_out: Tensor,
    pub norm2: LayerNormParams,
    pub dec_w: Tensor,
}

fn gaussian(rng: &mut Stream, rows: usize, cols: usize, std: f64) -> Tensor {
    Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| std * rng::normal(rng)).collect())
}

impl Model {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.feature_dim;
        let mut rng = rng::stream(rng::derive(seed, 0x4D4F_4441)); // model init stream
        let std = 1.0 / (d as f64).sqrt();

        let enc_patch_w = gaussian(&mut rng, d, cfg.patch_features(), 1.0 / (cfg.patch_features() as f64).sqrt());
        let mask_cond = Tensor::new(vec![d], (0..d).map(|_| 0.3 * rng::normal(&mut rng)).collect());

        let mk_proj = |rng: &mut Stream| -> Result<AdaptedProj> {
            let w0 = gaussian(rng, d, d, std);
            let bank = Rank1AdapterBank::init(w0, cfg.rank, rng)?;
            let gate = GateNet::init(d, cfg.rank, rng);
            let alpha_const = (cfg.conditioning == Conditioning::NoConditioning)
                .then(|| Tensor::filled(&[1, cfg.rank], 1.0));
            Ok(AdaptedProj { bank, gate, alpha_const })
        };
        let projs = [
            mk_proj(&mut rng)?,
            mk_proj(&mut rng)?,
            mk_proj(&mut rng)?,
            mk_proj(&mut rng)?,
        ];

        Ok(Model {
            enc_patch_b: Tensor::zeros(&[d]),
            enc_norm: LayerNormParams::new(d),
            mask_cond,
            projs,
            self_out: gaussian(&mut rng, d, d, std),
            norm1: LayerNormParams::new(d),
            cross_k: gaussian(&mut rng, d, d, std),
            cross_v: gaussian(&mut rng, d, d, std),
            cross_out: gaussian(&mut rng, d, d, std),
            norm2: LayerNormParams::new(d),
            dec_w: gaussian(&mut rng, d, d, std),
            enc_patch_w,
            cfg,
        })
    }

    /// Every parameter as (name, tensor), in a fixed order.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![
            ("enc.patch.w".into(), &self.enc_patch_w),
            ("enc.patch.b".into(), &self.enc_patch_b),
            ("enc.norm.gain".into(), &self.enc_norm.gain),
            ("enc.norm.bias".into(), &self.enc_norm.bias),
            ("mem.mask_cond".into(), &self.mask_cond),
        ];
        for (proj, name) in self.projs.iter().zip(PROJ_NAMES) {
            out.push((format!("attn.{name}.w0"), &proj.bank.w0));
            out.push((format!("attn.{name}.adapter.a"), &proj.bank.a));
            out.push((format!("attn.{name}.adapter.b"), &proj.bank.b));
            out.push((format!("attn.{name}.gate.w1"), &proj.gate.w1));
            out.push((format!("attn.{name}.gate.b1"), &proj.gate.b1));
            out.push((format!("attn.{name}.gate.w2"), &proj.gate.w2));
            out.push((format!("attn.{name}.gate.b2"), &proj.gate.b2));
            out.push((format!("attn.{name}.gate.w3"), &proj.gate.w3));
            out.push((format!("attn.{name}.gate.b3"), &proj.gate.b3));
            if let Some(ac) = &proj.alpha_const {
                out.push((format!("attn.{name}.alpha_const"), ac));
            }
        }
        out.push(("attn.self_out.w".into(), &self.self_out));
        out.push(("attn.norm1.gain".into(), &self.norm1.gain));
        out.push(("attn.norm1.bias".into(), &self.norm1.bias));
        out.push(("attn.cross_k.w".into(), &self.cross_k));
        out.push(("attn.cross_v.w".into(), &self.cross_v));
        out.push(("attn.cross_out.w".into(), &self.cross_out));
        out.push(("attn.norm2.gain".into(), &self.norm2.gain));
        out.push(("attn.norm2.bias".into(), &self.norm2.bias));
        out.push(("dec.w".into(), &self.dec_w));
        out
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        match name {
            "enc.patch.w" => return Some(&mut self.enc_patch_w),
            "enc.patch.b" => return Some(&mut self.enc_patch_b),
            "enc.norm.gain" => return Some(&mut self.enc_norm.gain),
            "enc.norm.bias" => return Some(&mut self.enc_norm.bias),
            "mem.mask_cond" => return Some(&mut self.mask_cond),
            "attn.self_out.w" => return Some(&mut self.self_out),
            "attn.norm1.gain" => return Some(&mut self.norm1.gain),
            "attn.norm1.bias" => return Some(&mut self.norm1.bias),
            "attn.cross_k.w" => return Some(&mut self.cross_k),
            "attn.cross_v.w" => return Some(&mut self.cross_v),
            "attn.cross_out.w" => return Some(&mut self.cross_out),
            "attn.norm2.gain" => return Some(&mut self.norm2.gain),
            "attn.norm2.bias" => return Some(&mut self.norm2.bias),
            "dec.w" => return Some(&mut self.dec_w),
            _ => {}
        }
        let rest = name.strip_prefix("attn.")?;
        let (proj_name, field) = rest.split_once('.')?;
        let idx = PROJ_NAMES.iter().position(|&p| p == proj_name)?;
        let proj = &mut self.projs[idx];
        match field {
            "w0" => Some(&mut proj.bank.w0),
            "adapter.a" => Some(&mut proj.bank.a),
            "adapter.b" => Some(&mut proj.bank.b),
            "gate.w1" => Some(&mut proj.gate.w1),
            "gate.b1" => Some(&mut proj.gate.b1),
            "gate.w2" => Some(&mut proj.gate.w2),
            "gate.b2" => Some(&mut proj.gate.b2),
            "gate.w3" => Some(&mut proj.gate.w3),
            "gate.b3" => Some(&mut proj.gate.b3),
            "alpha_const" => proj.alpha_const.as_mut(),
            _ => None,
        }
    }

    /// Trainability of one parameter under a scope. The mask-conditioning
    /// direction is a fixed buffer and never trains.
    pub fn is_trainable(&self, name: &str, scope: TrainScope) -> bool {
        if name == "mem.mask_cond" {
            return false;
        }
        let adapterish = name.contains(".adapter.")
            || name.contains(".gate.")
            || name.ends_with(".alpha_const");
        match scope {
            TrainScope::Base => !adapterish,
            TrainScope::AdaptersAndNorms => {
                if name.contains(".adapter.") {
                    return true;
                }
                if name.contains(".norm") {
                    return true;
                }
                match self.cfg.conditioning {
                    Conditioning::NoConditioning => name.ends_with(".alpha_const"),
                    _ => name.contains(".gate."),
                }
            }
        }
    }

    pub fn trainable_param_count(&self, scope: TrainScope) -> usize {
        self.named_params()
            .iter()
            .filter(|(n, _)| self.is_trainable(n, scope))
            .map(|(_, t)| t.numel())
            .sum()
    }

    /// Closed-form count of the adaptation parameters for the gated
    /// variants: 4·R·(D+K) adapter components, four gate nets, and the
    /// three LayerNorms. Independent of the number of tracked objects.
    pub fn expected_adaptation_params(&self) -> usize {
        let d = self.cfg.feature_dim;
        let r = self.cfg.rank;
        let adapters = 4 * r * (d + d);
        let gate_net = 4 * ((d * d + d) + (d * d + d) + (r * d + r));
        let norms = 3 * 2 * d;
        adapters + gate_net + norms
    }
}

// ── tape binding ────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug)]
pub struct ProjVars {
    pub w0: Var,
    pub adapter: Option<(Var, Var)>,
    pub gate: Option<GateNetVars>,
    pub alpha_const: Option<Var>,
}

#[derive(Clone, Debug)]
pub struct ModelVars {
    pub enc_w: Var,
    pub enc_b: Var,
    pub enc_gain: Var,
    pub enc_bias: Var,
    pub projs: [ProjVars; 4],
    pub self_out: Var,
    pub norm1_gain: Var,
    pub norm1_bias: Var,
    pub cross_k: Var,
    pub cross_v: Var,
    pub cross_out: Var,
    pub norm2_gain: Var,
    pub norm2_bias: Var,
    pub dec_w: Var,
}

/// Parameters actually tracked on a tape, for gradient extraction.
pub type Registry = Vec<(String, Var)>;

impl Model {
    /// Puts the model on a tape. `scope: None` binds everything as
    /// constants (inference). `with_adapters: false` omits adapter and
    /// gate tensors entirely (pre-training forward).
    pub fn bind(
        &self,
        tape: &mut Tape,
        scope: Option<TrainScope>,
        with_adapters: bool,
    ) -> (ModelVars, Registry) {
        let mut registry = Registry::new();
        let mut bind_one = |tape: &mut Tape, name: &str, t: &Tensor| -> Var {
            let trainable = scope.map(|s| self.is_trainable(name, s)).unwrap_or(false);
            if trainable {
                let v = tape.leaf(t.clone());
                registry.push((name.to_string(), v));
                v
            } else {
                tape.constant(t.clone())
            }
        };

        let enc_w = bind_one(tape, "enc.patch.w", &self.enc_patch_w);
        let enc_b = bind_one(tape, "enc.patch.b", &self.enc_patch_b);
        let enc_gain = bind_one(tape, "enc.norm.gain", &self.enc_norm.gain);
        let enc_bias = bind_one(tape, "enc.norm.bias", &self.enc_norm.bias);

        let mut projs = Vec::with_capacity(4);
        for (proj, name) in self.projs.iter().zip(PROJ_NAMES) {
            let w0 = bind_one(tape, &format!("attn.{name}.w0"), &proj.bank.w0);
            let (adapter, gate, alpha_const) = if with_adapters {
                let a = bind_one(tape, &format!("attn.{name}.adapter.a"), &proj.bank.a);
                let b = bind_one(tape, &format!("attn.{name}.adapter.b"), &proj.bank.b);
                let gate = match self.cfg.conditioning {
                    Conditioning::NoConditioning => None,
                    _ => Some(GateNetVars {
                        w1: bind_one(tape, &format!("attn.{name}.gate.w1"), &proj.gate.w1),
                        b1: bind_one(tape, &format!("attn.{name}.gate.b1"), &proj.gate.b1),
                        w2: bind_one(tape, &format!("attn.{name}.gate.w2"), &proj.gate.w2),
                        b2: bind_one(tape, &format!("attn.{name}.gate.b2"), &proj.gate.b2),
                        w3: bind_one(tape, &format!("attn.{name}.gate.w3"), &proj.gate.w3),
                        b3: bind_one(tape, &format!("attn.{name}.gate.b3"), &proj.gate.b3),
                    }),
                };
                let ac = proj
                    .alpha_const
                    .as_ref()
                    .map(|t| bind_one(tape, &format!("attn.{name}.alpha_const"), t));
                (Some((a, b)), gate, ac)
            } else {
                (None, None, None)
            };
            projs.push(ProjVars { w0, adapter, gate, alpha_const });
        }
        let projs: [ProjVars; 4] = [projs[0], projs[1], projs[2], projs[3]];

        let vars = ModelVars {
            enc_w,
            enc_b,
            enc_gain,
            enc_bias,
            projs,
            self_out: bind_one(tape, "attn.self_out.w", &self.self_out),
            norm1_gain: bind_one(tape, "attn.norm1.gain", &self.norm1.gain),
            norm1_bias: bind_one(tape, "attn.norm1.bias", &self.norm1.bias),
            cross_k: bind_one(tape, "attn.cross_k.w", &self.cross_k),
            cross_v: bind_one(tape, "attn.cross_v.w", &self.cross_v),
            cross_out: bind_one(tape, "attn.cross_out.w", &self.cross_out),
            norm2_gain: bind_one(tape, "attn.norm2.gain", &self.norm2.gain),
            norm2_bias: bind_one(tape, "attn.norm2.bias", &self.norm2.bias),
            dec_w: bind_one(tape, "dec.w", &self.dec_w),
        };
        (vars, registry)
    }

    /// Writes a checkpoint-shaped parameter map back into the model.
    pub fn load_params(&mut self, params: &std::collections::BTreeMap<String, Tensor>) -> Result<()> {
        let names: Vec<String> = self.named_params().iter().map(|(n, _)| n.clone()).collect();
        for name in &names {
            let incoming = params
                .get(name)
                .ok_or_else(|| Error::Data(format!("checkpoint missing tensor `{name}`")))?;
            let slot = self.param_mut(name).unwrap();
            if slot.shape != incoming.shape {
                return Err(Error::Data(format!(
                    "checkpoint tensor `{name}` has shape {:?}, expected {:?}",
                    incoming.shape, slot.shape
                )));
            }
            *slot = incoming.clone();
        }
        Ok(())
    }
}
