//! Binary checkpoint, little-endian:
//!
//! ```text
//! magic "ZRCK1\0" | u8 kind | u32 config digest
//! u8 networks | per network: u32 input_dim | u32 layers | layers x (u32 size | u8 activation) | u64 seed
//! per network, per layer: weight (out x in, row-major) f32 | bias f32
//! u8 has_speakers [| u32 n | u32 dim | n x (u16 len | name) | n*dim f32]
//! f32 margin
//! u8 has_optimizer [| u8 kind | f64 lr | f64 rho or decay | f64 eps | u64 step
//!                   | u32 tensors | tensors x (u32 len | len f32 E[g^2] | len f32 E[dx^2])]
//! u32 epoch | u64 seed
//! ```

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{CTriamese, Cae, Model, ModelKind, SpeakerTable, Triamese};
use crate::error::{Error, Result};
use crate::features::Cursor;
use crate::nn::{Activation, Layer, NetworkSpec, OptimizerConfig, OptimizerState, Parameters};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"ZRCK1\0";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub optimizer: Option<OptimizerState<f32>>,
    pub epoch: u32,
    pub seed: u64,
    pub config_digest: u32,
}

impl Checkpoint {
    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    /// The model, or a kind-mismatch error when it is not of kind `expected`.
    pub fn require_kind(&self, expected: ModelKind) -> Result<&Model<f32>> {
        if self.kind() == expected {
            Ok(&self.model)
        } else {
            Err(Error::KindMismatch {
                expected: expected.to_string(),
                got: self.kind().to_string(),
            })
        }
    }

    /// Warns and returns false when the stored digest differs from `expected`.
    pub fn check_digest(&self, expected: u32) -> bool {
        let ok = self.config_digest == expected;
        if !ok {
            log::warn!(
                "checkpoint config digest {:08x} differs from the current configuration {expected:08x}",
                self.config_digest
            );
        }
        ok
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::invalid(format!("{v} exceeds u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s<'a>(&mut self, vals: impl IntoIterator<Item = &'a f32>) {
        for v in vals {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Linear => 1,
    }
}

fn networks(model: &Model<f32>) -> Vec<(&NetworkSpec, &Parameters<f32>)> {
    match model {
        Model::Cae(m) => vec![(&m.encoder_spec, &m.encoder), (&m.decoder_spec, &m.decoder)],
        Model::Triamese(m) => vec![(&m.branch_spec, &m.branch)],
        Model::CTriamese(m) => vec![(&m.cae.encoder_spec, &m.cae.encoder), (&m.cae.decoder_spec, &m.cae.decoder)],
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(CHECKPOINT_MAGIC);
    w.u8(ck.kind().code());
    w.0.extend_from_slice(&ck.config_digest.to_le_bytes());
    let nets = networks(&ck.model);
    w.u8(nets.len() as u8);
    for (spec, _) in &nets {
        w.u32(spec.input_dim)?;
        w.u32(spec.layer_sizes.len())?;
        for (&size, &act) in spec.layer_sizes.iter().zip(&spec.activations) {
            w.u32(size)?;
            w.u8(activation_code(act));
        }
        w.u64(spec.seed);
    }
    for (spec, params) in &nets {
        if !params.matches(spec) {
            return Err(Error::invalid("parameters do not match their network spec"));
        }
        for layer in &params.layers {
            w.f32s(layer.weight.iter());
            w.f32s(layer.bias.iter());
        }
    }
    match ck.model.speaker_table() {
        Some(table) => {
            w.u8(1);
            w.u32(table.names.len())?;
            w.u32(table.dim())?;
            for name in &table.names {
                let len = u16::try_from(name.len()).map_err(|_| Error::invalid(format!("speaker id '{name}' too long")))?;
                w.u16(len);
                w.0.extend_from_slice(name.as_bytes());
            }
            w.f32s(table.vectors.iter());
        }
        None => w.u8(0),
    }
    let margin = match &ck.model {
        Model::Cae(_) => 0.0,
        Model::Triamese(m) => m.margin,
        Model::CTriamese(m) => m.margin,
    };
    w.f32s([margin].iter());
    match &ck.optimizer {
        Some(opt) => {
            w.u8(1);
            let (code, a, b, c) = match opt.config {
                OptimizerConfig::Adadelta { lr, rho, eps } => (0, lr, rho, eps),
                OptimizerConfig::Sgd { lr, decay } => (1, lr, decay, 0.0),
            };
            w.u8(code);
            w.f64(a);
            w.f64(b);
            w.f64(c);
            w.u64(opt.step);
            w.u32(opt.grad_sq.len())?;
            for (g, u) in opt.grad_sq.iter().zip(&opt.update_sq) {
                w.u32(g.len())?;
                w.f32s(g);
                w.f32s(u);
            }
        }
        None => w.u8(0),
    }
    w.u32(ck.epoch as usize)?;
    w.u64(ck.seed);
    Ok(w.0)
}

fn f64(c: &mut Cursor<'_>) -> Result<f64> {
    Ok(f64::from_bits(c.u64()?))
}

fn malformed(detail: impl Into<String>) -> Error {
    Error::Malformed {
        what: "checkpoint",
        detail: detail.into(),
    }
}

fn read_spec(c: &mut Cursor<'_>) -> Result<NetworkSpec> {
    let input_dim = c.u32()? as usize;
    let n = c.u32()? as usize;
    let mut layer_sizes = Vec::new();
    let mut activations = Vec::new();
    for _ in 0..n {
        layer_sizes.push(c.u32()? as usize);
        activations.push(match c.u8()? {
            0 => Activation::Relu,
            1 => Activation::Linear,
            other => return Err(malformed(format!("unknown activation code {other}"))),
        });
    }
    let spec = NetworkSpec {
        input_dim,
        layer_sizes,
        activations,
        seed: c.u64()?,
    };
    spec.validate().map_err(|e| malformed(e.to_string()))?;
    Ok(spec)
}

fn read_params(c: &mut Cursor<'_>, spec: &NetworkSpec) -> Result<Parameters<f32>> {
    let layers = spec
        .shapes()
        .map(|(fan_in, fan_out)| {
            let weight = Array2::from_shape_vec((fan_out, fan_in), c.f32_vec(fan_in * fan_out)?).expect("sized");
            let bias = Array1::from(c.f32_vec(fan_out)?);
            Ok(Layer { weight, bias })
        })
        .collect::<Result<_>>()?;
    Ok(Parameters { layers })
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < CHECKPOINT_MAGIC.len() || &bytes[..CHECKPOINT_MAGIC.len()] != CHECKPOINT_MAGIC {
        return Err(Error::NotACheckpoint);
    }
    let mut c = Cursor::new(&bytes[CHECKPOINT_MAGIC.len()..], "checkpoint");
    let code = c.u8()?;
    let kind = ModelKind::from_code(code).ok_or_else(|| malformed(format!("unknown model kind {code}")))?;
    let config_digest = c.u32()?;
    let n_nets = c.u8()? as usize;
    let expected_nets = if kind == ModelKind::Triamese { 1 } else { 2 };
    if n_nets != expected_nets {
        return Err(malformed(format!("{kind} needs {expected_nets} networks, found {n_nets}")));
    }
    let specs = (0..n_nets).map(|_| read_spec(&mut c)).collect::<Result<Vec<_>>>()?;
    let params = specs.iter().map(|s| read_params(&mut c, s)).collect::<Result<Vec<_>>>()?;
    let speakers = match c.u8()? {
        0 => None,
        1 => {
            let n = c.u32()? as usize;
            let dim = c.u32()? as usize;
            let names = (0..n)
                .map(|_| {
                    let len = c.u16()? as usize;
                    c.string(len)
                })
                .collect::<Result<Vec<_>>>()?;
            if names.windows(2).any(|w| w[0] >= w[1]) {
                return Err(malformed("speaker names are not sorted and unique"));
            }
            let vectors = Array2::from_shape_vec((n, dim), c.f32_vec(n * dim)?).expect("sized");
            Some(SpeakerTable { names, vectors })
        }
        other => return Err(malformed(format!("bad speaker flag {other}"))),
    };
    let margin = c.f32()?;
    let optimizer = match c.u8()? {
        0 => None,
        1 => {
            let code = c.u8()?;
            let (a, b, e) = (f64(&mut c)?, f64(&mut c)?, f64(&mut c)?);
            let config = match code {
                0 => OptimizerConfig::Adadelta { lr: a, rho: b, eps: e },
                1 => OptimizerConfig::Sgd { lr: a, decay: b },
                other => return Err(malformed(format!("unknown optimizer code {other}"))),
            };
            let step = c.u64()?;
            let n = c.u32()? as usize;
            let mut grad_sq = Vec::with_capacity(n.min(1024));
            let mut update_sq = Vec::with_capacity(n.min(1024));
            for _ in 0..n {
                let len = c.u32()? as usize;
                grad_sq.push(c.f32_vec(len)?);
                update_sq.push(c.f32_vec(len)?);
            }
            Some(OptimizerState {
                config,
                step,
                grad_sq,
                update_sq,
            })
        }
        other => return Err(malformed(format!("bad optimizer flag {other}"))),
    };
    let epoch = c.u32()?;
    let seed = c.u64()?;
    c.finish()?;

    let mut specs = specs.into_iter();
    let mut params = params.into_iter();
    let model = match kind {
        ModelKind::Triamese => {
            if speakers.is_some() {
                return Err(malformed("Triamese checkpoints carry no speaker table"));
            }
            Model::Triamese(Triamese {
                branch_spec: specs.next().expect("one network"),
                branch: params.next().expect("one network"),
                margin,
            })
        }
        ModelKind::Cae | ModelKind::CTriamese => {
            let cae = Cae {
                encoder_spec: specs.next().expect("two networks"),
                encoder: params.next().expect("two networks"),
                decoder_spec: specs.next().expect("two networks"),
                decoder: params.next().expect("two networks"),
                speakers,
            };
            if cae.decoder_spec.input_dim < cae.encoder_spec.output_dim() {
                return Err(malformed("decoder narrower than the bottleneck"));
            }
            if kind == ModelKind::Cae {
                Model::Cae(cae)
            } else {
                Model::CTriamese(CTriamese { cae, margin })
            }
        }
    };
    Ok(Checkpoint {
        model,
        optimizer,
        epoch,
        seed,
        config_digest,
    })
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(ck)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
