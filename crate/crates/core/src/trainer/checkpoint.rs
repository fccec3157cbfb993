use std::collections::HashMap;
use std::path::Path;

use super::TrainConfig;
use crate::models::{Architecture, ModelConfig, ModelError, ModelVariant, MonoMode, Networks};
use crate::tensor::{AdamConfig, AdamState, ParamSet, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MNCK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found}, expected {CHECKPOINT_VERSION}")]
    UnsupportedVersion { found: u16 },
    #[error("checkpoint checksum mismatch (file corrupted)")]
    Checksum,
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("checkpoint tensor {name}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint lacks tensor {0}")]
    MissingTensor(String),
    #[error("checkpoint byte {pos}: {reason}")]
    Format { pos: usize, reason: String },
    #[error("invalid model configuration: {0}")]
    Model(#[from] ModelError),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, CheckpointError>;

/// Parameters, optimizer state and counters of a training run.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub networks: Networks,
    pub adam_g: AdamState,
    pub adam_c: AdamState,
    pub adam_d: AdamState,
    /// Completed iterations.
    pub iteration: u64,
    /// Position of the noise generator's stream.
    pub noise_word_pos: u128,
}

struct Out(Vec<u8>);

impl Out {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend(v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend(v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend(v.to_le_bytes());
    }
    fn u128(&mut self, v: u128) {
        self.0.extend(v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend(v.to_le_bytes());
    }
    fn tensor(&mut self, name: &str, t: &Tensor) {
        self.u16(name.len() as u16);
        self.0.extend(name.as_bytes());
        self.u8(t.shape().len() as u8);
        for &d in t.shape() {
            self.u32(d as u32);
        }
        for &v in t.data() {
            self.f32(v);
        }
    }
}

struct In<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> In<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(CheckpointError::Truncated(self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn arr<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.arr::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.arr()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.arr()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.arr()?))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.arr()?))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.arr()?))
    }
    fn bool(&mut self) -> Result<bool> {
        let pos = self.pos;
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(CheckpointError::Format {
                pos,
                reason: format!("flag byte {b}"),
            }),
        }
    }
    fn tensor(&mut self) -> Result<(String, Tensor)> {
        let len = self.u16()? as usize;
        let pos = self.pos;
        let name = std::str::from_utf8(self.take(len)?)
            .map_err(|_| CheckpointError::Format {
                pos,
                reason: "tensor name is not UTF-8".into(),
            })?
            .to_string();
        let rank = self.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = self.take(n.checked_mul(4).ok_or(CheckpointError::Truncated(self.pos))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok((name, Tensor::new(shape, data).expect("product matches")))
    }
}

fn write_config(o: &mut Out, c: &TrainConfig) {
    let m = &c.model;
    let v = &m.variant;
    o.u8(v.id);
    o.u32(v.g_filters as u32);
    o.u32(v.cond_filters as u32);
    o.u8(v.twod_layers.iter().enumerate().map(|(k, &b)| u8::from(b) << k).sum());
    o.u8(v.use_chord.into());
    o.f32(v.lambda1);
    o.f32(v.lambda2);
    let a = &m.arch;
    for d in [a.noise_dim, a.g_fc1, a.g_fc2, a.d_filters1, a.d_filters2, a.d_fc] {
        o.u32(d as u32);
    }
    o.u8(match m.mono {
        MonoMode::StraightThrough => 0,
        MonoMode::SamplingOnly => 1,
    });
    o.u8(m.d_sees_prev.into());
    o.f32(m.leak);
    o.u32(c.epochs);
    o.u32(c.batch_size as u32);
    o.u64(c.seed);
    for x in [c.adam.lr, c.adam.beta1, c.adam.beta2, c.adam.eps, c.label_smooth] {
        o.f32(x);
    }
    o.u64(c.max_iterations.unwrap_or(u64::MAX));
    o.u64(c.checkpoint_every.unwrap_or(0));
}

fn read_config(r: &mut In) -> Result<TrainConfig> {
    let id = r.u8()?;
    let g_filters = r.u32()? as usize;
    let cond_filters = r.u32()? as usize;
    let pos = r.pos;
    let mask = r.u8()?;
    if mask > 0x0f {
        return Err(CheckpointError::Format {
            pos,
            reason: format!("layer mask {mask:#x}"),
        });
    }
    let variant = ModelVariant {
        id,
        g_filters,
        cond_filters,
        twod_layers: std::array::from_fn(|k| mask & (1 << k) != 0),
        use_chord: r.bool()?,
        lambda1: r.f32()?,
        lambda2: r.f32()?,
    };
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let arch = Architecture {
        noise_dim: dims[0],
        g_fc1: dims[1],
        g_fc2: dims[2],
        d_filters1: dims[3],
        d_filters2: dims[4],
        d_fc: dims[5],
    };
    let pos = r.pos;
    let mono = match r.u8()? {
        0 => MonoMode::StraightThrough,
        1 => MonoMode::SamplingOnly,
        b => {
            return Err(CheckpointError::Format {
                pos,
                reason: format!("mono mode {b}"),
            })
        }
    };
    let model = ModelConfig {
        variant,
        arch,
        mono,
        d_sees_prev: r.bool()?,
        leak: r.f32()?,
    };
    let epochs = r.u32()?;
    let batch_size = r.u32()? as usize;
    let seed = r.u64()?;
    let adam = AdamConfig {
        lr: r.f32()?,
        beta1: r.f32()?,
        beta2: r.f32()?,
        eps: r.f32()?,
    };
    let label_smooth = r.f32()?;
    let max_iterations = Some(r.u64()?).filter(|&m| m != u64::MAX);
    let checkpoint_every = Some(r.u64()?).filter(|&m| m != 0);
    Ok(TrainConfig {
        model,
        epochs,
        batch_size,
        seed,
        adam,
        label_smooth,
        max_iterations,
        checkpoint_every,
    })
}

fn take_set(found: &mut HashMap<String, Tensor>, template: &ParamSet, prefix: &str) -> Result<ParamSet> {
    let mut out = ParamSet::new();
    for (name, t) in template.iter() {
        let key = format!("{prefix}{name}");
        let v = found
            .remove(&key)
            .ok_or_else(|| CheckpointError::MissingTensor(key.clone()))?;
        if v.shape() != t.shape() {
            return Err(CheckpointError::ShapeMismatch {
                name: key,
                expected: t.shape().to_vec(),
                found: v.shape().to_vec(),
            });
        }
        out.push(name, v);
    }
    Ok(out)
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut o = Out(CHECKPOINT_MAGIC.to_vec());
        o.u16(CHECKPOINT_VERSION);
        write_config(&mut o, &self.config);
        o.u64(self.iteration);
        o.u128(self.noise_word_pos);
        for a in [&self.adam_g, &self.adam_c, &self.adam_d] {
            o.u64(a.step);
        }
        let sets = [
            (&self.networks.generator, &self.adam_g),
            (&self.networks.conditioner, &self.adam_c),
            (&self.networks.discriminator, &self.adam_d),
        ];
        let count: usize = sets.iter().map(|(p, _)| 3 * p.len()).sum();
        o.u32(count as u32);
        for (params, adam) in sets {
            for (k, (name, t)) in params.iter().enumerate() {
                o.tensor(name, t);
                o.tensor(&format!("adam.m.{name}"), &adam.first[k]);
                o.tensor(&format!("adam.v.{name}"), &adam.second[k]);
            }
        }
        let crc = crc32fast::hash(&o.0);
        o.u32(crc);
        o.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::decode(bytes, None)
    }

    /// As [`Checkpoint::from_bytes`], additionally requiring every tensor to
    /// have the shape variant `id` prescribes.
    pub fn from_bytes_for_variant(bytes: &[u8], id: u8) -> Result<Self> {
        Self::decode(bytes, Some(id))
    }

    fn decode(bytes: &[u8], expect_variant: Option<u8>) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let mut r = In { bytes, pos: 4 };
        let version = r.u16()?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::UnsupportedVersion { found: version });
        }
        if bytes.len() < 10 {
            return Err(CheckpointError::Truncated(bytes.len()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("4 bytes")) {
            return Err(CheckpointError::Checksum);
        }
        let mut r = In { bytes: body, pos: 6 };
        let mut config = read_config(&mut r)?;
        let iteration = r.u64()?;
        let noise_word_pos = r.u128()?;
        let steps = [r.u64()?, r.u64()?, r.u64()?];
        let count = r.u32()? as usize;
        let mut found = HashMap::new();
        for _ in 0..count {
            let (name, t) = r.tensor()?;
            found.insert(name, t);
        }
        if r.pos != body.len() {
            return Err(CheckpointError::Format {
                pos: r.pos,
                reason: "trailing bytes".into(),
            });
        }

        let mut expected = config.model;
        if let Some(id) = expect_variant {
            expected.variant = ModelVariant::new(id)?;
        }
        expected.validate()?;
        let template = Networks::init(expected, 0)?;
        let mut sets = Vec::new();
        for (params, step) in [&template.generator, &template.conditioner, &template.discriminator]
            .into_iter()
            .zip(steps)
        {
            let values = take_set(&mut found, params, "")?;
            let first = take_set(&mut found, params, "adam.m.")?;
            let second = take_set(&mut found, params, "adam.v.")?;
            let adam = AdamState {
                config: config.adam,
                step,
                first: first.values().to_vec(),
                second: second.values().to_vec(),
            };
            sets.push((values, adam));
        }
        if let Some(extra) = found.keys().next() {
            return Err(CheckpointError::Format {
                pos: r.pos,
                reason: format!("unexpected tensor {extra}"),
            });
        }
        config.model = expected;
        let mut it = sets.into_iter();
        let (generator, adam_g) = it.next().expect("three sets");
        let (conditioner, adam_c) = it.next().expect("three sets");
        let (discriminator, adam_d) = it.next().expect("three sets");
        Ok(Checkpoint {
            config,
            networks: Networks {
                config: expected,
                generator,
                conditioner,
                discriminator,
            },
            adam_g,
            adam_c,
            adam_d,
            iteration,
            noise_word_pos,
        })
    }
}

/// Write atomically via a sibling temporary file.
pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, ckpt.to_bytes())?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
