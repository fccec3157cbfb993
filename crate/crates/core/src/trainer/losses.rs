use rand::Rng;
use rand_distr::StandardNormal;

use super::{Result, TrainError};
use crate::dataset::{BarRoll, TrainingTriple, CHORD_DIMS};
use crate::models::{conditioner_forward, discriminator_forward, generator_forward, ModelConfig, MonoMode, Networks};
use crate::tensor::{Tape, Tensor, Var};

/// `B×dim` standard normal noise.
pub fn noise<R: Rng + ?Sized>(rng: &mut R, batch: usize, dim: usize) -> Tensor {
    let data = (0..batch * dim).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::new([batch, dim], data).expect("noise shape")
}

/// One minibatch as tensors: current bars, previous bars and, when the
/// model uses them, chords.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub cur: Tensor,
    pub prev: Tensor,
    pub chords: Option<Tensor>,
}

impl Batch {
    pub fn from_triples(triples: &[&TrainingTriple], use_chord: bool) -> Result<Self> {
        if triples.is_empty() {
            return Err(TrainError::Contract("empty batch".into()));
        }
        let cur: Vec<BarRoll> = triples.iter().map(|t| t.cur).collect();
        let prev: Vec<BarRoll> = triples.iter().map(|t| t.prev).collect();
        let chords = if use_chord {
            let mut data = Vec::with_capacity(triples.len() * CHORD_DIMS);
            for t in triples {
                let c = t
                    .chord
                    .ok_or_else(|| TrainError::Contract("model needs chords but a triple has none".into()))?;
                data.extend(c.to_f32());
            }
            Some(Tensor::new([triples.len(), CHORD_DIMS], data)?)
        } else {
            None
        };
        Ok(Batch {
            cur: BarRoll::batch_tensor(&cur),
            prev: BarRoll::batch_tensor(&prev),
            chords,
        })
    }

    pub fn len(&self) -> usize {
        self.cur.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Record the batch as constants.
    pub fn bind(&self, tape: &mut Tape) -> BatchVars {
        BatchVars {
            cur: tape.constant(self.cur.clone()),
            prev: tape.constant(self.prev.clone()),
            chord: self.chords.as_ref().map(|c| tape.constant(c.clone())),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BatchVars {
    pub cur: Var,
    pub prev: Var,
    pub chord: Option<Var>,
}

/// Generated bars as the discriminator sees them.
fn fake_bars(tape: &mut Tape, cfg: &ModelConfig, g: &[Var], c: &[Var], b: &BatchVars, z: Var) -> Result<Var> {
    let maps = if cfg.variant.uses_prev() {
        Some(conditioner_forward(tape, cfg, c, b.prev)?)
    } else {
        None
    };
    let trace = generator_forward(tape, cfg, g, z, b.chord, maps.as_ref())?;
    Ok(match cfg.mono {
        MonoMode::StraightThrough => tape.column_argmax(trace.output())?,
        MonoMode::SamplingOnly => trace.output(),
    })
}

fn d_prev(cfg: &ModelConfig, b: &BatchVars) -> Option<Var> {
    cfg.d_sees_prev.then_some(b.prev)
}

#[derive(Clone, Copy, Debug)]
pub struct GLossVars {
    pub adv: Var,
    pub fm1: Var,
    pub fm2: Var,
    pub total: Var,
    pub fake: Var,
    pub d_fake: Var,
}

/// `CE(D(G(z)), 1) + λ1‖mean X − mean G(z)‖² + λ2‖mean f(X) − mean f(G(z))‖²`,
/// with `f` the discriminator's first-convolution activation.
pub fn g_loss_graph(
    tape: &mut Tape,
    cfg: &ModelConfig,
    g: &[Var],
    c: &[Var],
    d: &[Var],
    batch: &BatchVars,
    z: Var,
) -> Result<GLossVars> {
    let fake = fake_bars(tape, cfg, g, c, batch, z)?;
    let on_fake = discriminator_forward(tape, cfg, d, fake, batch.chord, d_prev(cfg, batch))?;
    let on_real = discriminator_forward(tape, cfg, d, batch.cur, batch.chord, d_prev(cfg, batch))?;
    let n = tape.shape(fake)[0];
    let adv = tape.sigmoid_cross_entropy(on_fake.logit, &vec![1.0; n])?;
    let mean_real = tape.mean_batch(batch.cur)?;
    let mean_fake = tape.mean_batch(fake)?;
    let fm1 = tape.l2_diff(mean_real, mean_fake)?;
    let feat_real = tape.mean_batch(on_real.features)?;
    let feat_fake = tape.mean_batch(on_fake.features)?;
    let fm2 = tape.l2_diff(feat_real, feat_fake)?;
    let w1 = tape.scale(fm1, cfg.variant.lambda1);
    let w2 = tape.scale(fm2, cfg.variant.lambda2);
    let total = tape.add(adv, w1)?;
    let total = tape.add(total, w2)?;
    Ok(GLossVars {
        adv,
        fm1,
        fm2,
        total,
        fake,
        d_fake: on_fake.prob,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct DLossVars {
    pub loss: Var,
    pub d_real: Var,
    pub d_fake: Var,
}

/// `CE(D(X), label_smooth) + CE(D(G(z)), 0)`.
#[allow(clippy::too_many_arguments)]
pub fn d_loss_graph(
    tape: &mut Tape,
    cfg: &ModelConfig,
    g: &[Var],
    c: &[Var],
    d: &[Var],
    batch: &BatchVars,
    z: Var,
    label_smooth: f32,
) -> Result<DLossVars> {
    let fake = fake_bars(tape, cfg, g, c, batch, z)?;
    let on_real = discriminator_forward(tape, cfg, d, batch.cur, batch.chord, d_prev(cfg, batch))?;
    let on_fake = discriminator_forward(tape, cfg, d, fake, batch.chord, d_prev(cfg, batch))?;
    let n = tape.shape(fake)[0];
    let real_loss = tape.sigmoid_cross_entropy(on_real.logit, &vec![label_smooth; n])?;
    let fake_loss = tape.sigmoid_cross_entropy(on_fake.logit, &vec![0.0; n])?;
    let loss = tape.add(real_loss, fake_loss)?;
    Ok(DLossVars {
        loss,
        d_real: on_real.prob,
        d_fake: on_fake.prob,
    })
}

/// Generator loss components evaluated without updating anything.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GLossTerms {
    pub adv: f32,
    pub fm1: f32,
    pub fm2: f32,
    pub total: f32,
}

impl GLossTerms {
    pub fn evaluate(nets: &Networks, batch: &Batch, z: &Tensor) -> Result<Self> {
        let mut tape = Tape::new();
        let g = nets.generator.bind(&mut tape, false);
        let c = nets.conditioner.bind(&mut tape, false);
        let d = nets.discriminator.bind(&mut tape, false);
        let bv = batch.bind(&mut tape);
        let zv = tape.constant(z.clone());
        let out = g_loss_graph(&mut tape, &nets.config, &g, &c, &d, &bv, zv)?;
        Ok(GLossTerms {
            adv: tape.value(out.adv).item(),
            fm1: tape.value(out.fm1).item(),
            fm2: tape.value(out.fm2).item(),
            total: tape.value(out.total).item(),
        })
    }

    /// Weighted feature-matching contribution to `total` under `nets`' λs.
    pub fn fm_contribution(&self, cfg: &ModelConfig) -> f32 {
        cfg.variant.lambda1 * self.fm1 + cfg.variant.lambda2 * self.fm2
    }

    /// Share of `total` due to feature matching.
    pub fn fm_share(&self, cfg: &ModelConfig) -> f32 {
        self.fm_contribution(cfg) / self.total
    }
}
