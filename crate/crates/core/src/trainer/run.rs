use std::io::Write;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::losses::{d_loss_graph, g_loss_graph, noise, Batch, GLossTerms};
use super::{save_checkpoint, Checkpoint, MetricRow, MetricsLog, Result, StepKind, TrainConfig, TrainError};
use crate::dataset::{BatchIter, TrainingTriple};
use crate::models::Networks;
use crate::tensor::{AdamState, Tape, Tensor};

const NOISE_STREAM: u64 = 3;

fn mean(t: &Tensor) -> f32 {
    t.sum() / t.numel() as f32
}

/// Slope of the least-squares line through `(i, ys[i])`.
pub fn least_squares_slope(ys: &[f32]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().map(|&y| y as f64).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y as f64 - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Training state advanced one update at a time.
pub struct Trainer {
    pub config: TrainConfig,
    pub nets: Networks,
    pub adam_g: AdamState,
    pub adam_c: AdamState,
    pub adam_d: AdamState,
    /// Completed iterations.
    pub iteration: u64,
    pub log: MetricsLog,
    noise_rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let nets = Networks::init(config.model, config.seed)?;
        let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
        noise_rng.set_stream(NOISE_STREAM);
        Ok(Trainer {
            adam_g: AdamState::new(config.adam, &nets.generator),
            adam_c: AdamState::new(config.adam, &nets.conditioner),
            adam_d: AdamState::new(config.adam, &nets.discriminator),
            config,
            nets,
            iteration: 0,
            log: MetricsLog::default(),
            noise_rng,
        })
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        ckpt.config.validate()?;
        let mut noise_rng = ChaCha8Rng::seed_from_u64(ckpt.config.seed);
        noise_rng.set_stream(NOISE_STREAM);
        noise_rng.set_word_pos(ckpt.noise_word_pos);
        Ok(Trainer {
            config: ckpt.config,
            nets: ckpt.networks,
            adam_g: ckpt.adam_g,
            adam_c: ckpt.adam_c,
            adam_d: ckpt.adam_d,
            iteration: ckpt.iteration,
            log: MetricsLog::default(),
            noise_rng,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config,
            networks: self.nets.clone(),
            adam_g: self.adam_g.clone(),
            adam_c: self.adam_c.clone(),
            adam_d: self.adam_d.clone(),
            iteration: self.iteration,
            noise_word_pos: self.noise_rng.get_word_pos(),
        }
    }

    pub fn next_noise(&mut self, batch: usize) -> Tensor {
        noise(&mut self.noise_rng, batch, self.config.model.arch.noise_dim)
    }

    pub fn batch(&self, triples: &[&TrainingTriple]) -> Result<Batch> {
        Batch::from_triples(triples, self.config.model.variant.use_chord)
    }

    fn non_finite(&self, what: &str) -> TrainError {
        TrainError::NonFinite {
            iteration: self.iteration,
            what: what.into(),
        }
    }

    /// One discriminator update with noise `z`. Returns
    /// `(d_loss, mean D(real), mean D(fake))`.
    pub fn d_step_with(&mut self, batch: &Batch, z: &Tensor) -> Result<(f32, f32, f32)> {
        let cfg = self.nets.config;
        let mut tape = Tape::new();
        let g = self.nets.generator.bind(&mut tape, false);
        let c = self.nets.conditioner.bind(&mut tape, false);
        let d = self.nets.discriminator.bind(&mut tape, true);
        let bv = batch.bind(&mut tape);
        let zv = tape.constant(z.clone());
        let out = d_loss_graph(&mut tape, &cfg, &g, &c, &d, &bv, zv, self.config.label_smooth)?;
        let loss = tape.value(out.loss).item();
        if !loss.is_finite() {
            return Err(self.non_finite("discriminator loss"));
        }
        tape.backward(out.loss)?;
        let mut grads = self.nets.discriminator.grads(&tape, &d);
        self.adam_d.step(&mut self.nets.discriminator, &mut grads)?;
        if !self.nets.discriminator.all_finite() {
            return Err(self.non_finite("discriminator parameters"));
        }
        self.log.schedule.push(StepKind::Discriminator);
        Ok((loss, mean(tape.value(out.d_real)), mean(tape.value(out.d_fake))))
    }

    pub fn d_step(&mut self, batch: &Batch) -> Result<(f32, f32, f32)> {
        let z = self.next_noise(batch.len());
        self.d_step_with(batch, &z)
    }

    /// One joint generator and conditioner update with noise `z`.
    pub fn g_step_with(&mut self, batch: &Batch, z: &Tensor) -> Result<GLossTerms> {
        let cfg = self.nets.config;
        let mut tape = Tape::new();
        let g = self.nets.generator.bind(&mut tape, true);
        let c = self.nets.conditioner.bind(&mut tape, true);
        let d = self.nets.discriminator.bind(&mut tape, false);
        let bv = batch.bind(&mut tape);
        let zv = tape.constant(z.clone());
        let out = g_loss_graph(&mut tape, &cfg, &g, &c, &d, &bv, zv)?;
        let terms = GLossTerms {
            adv: tape.value(out.adv).item(),
            fm1: tape.value(out.fm1).item(),
            fm2: tape.value(out.fm2).item(),
            total: tape.value(out.total).item(),
        };
        if !terms.total.is_finite() {
            return Err(self.non_finite("generator loss"));
        }
        tape.backward(out.total)?;
        let mut gg = self.nets.generator.grads(&tape, &g);
        let mut cg = self.nets.conditioner.grads(&tape, &c);
        self.adam_g.step(&mut self.nets.generator, &mut gg)?;
        self.adam_c.step(&mut self.nets.conditioner, &mut cg)?;
        if !(self.nets.generator.all_finite() && self.nets.conditioner.all_finite()) {
            return Err(self.non_finite("generator parameters"));
        }
        self.log.schedule.push(StepKind::Generator);
        Ok(terms)
    }

    pub fn g_step(&mut self, batch: &Batch) -> Result<GLossTerms> {
        let z = self.next_noise(batch.len());
        self.g_step_with(batch, &z)
    }

    /// One discriminator update then two generator updates, each with
    /// fresh noise; the row is appended to the log.
    pub fn iterate(&mut self, batch: &Batch) -> Result<MetricRow> {
        let (d_loss, d_real, d_fake) = self.d_step(batch)?;
        let a = self.g_step(batch)?;
        let b = self.g_step(batch)?;
        let row = MetricRow {
            iteration: self.iteration,
            d_loss,
            g_adv: (a.adv + b.adv) / 2.0,
            fm1: (a.fm1 + b.fm1) / 2.0,
            fm2: (a.fm2 + b.fm2) / 2.0,
            d_real,
            d_fake,
        };
        if !row.is_finite() {
            return Err(self.non_finite("metrics"));
        }
        self.iteration += 1;
        self.log.rows.push(row);
        Ok(row)
    }

    /// Iterations the configured run performs over `n` triples.
    pub fn planned_iterations(&self, n: usize) -> Result<u64> {
        let per_epoch = BatchIter::new(n, self.config.batch_size, self.config.seed)?.batches_per_epoch() as u64;
        if per_epoch == 0 {
            return Err(TrainError::Contract(format!(
                "{n} triples do not fill one batch of {}",
                self.config.batch_size
            )));
        }
        let total = per_epoch * self.config.epochs as u64;
        Ok(self.config.max_iterations.map_or(total, |m| m.min(total)))
    }

    /// Train until the planned iteration count, resuming from
    /// `self.iteration`. Metrics rows are written as they are produced and
    /// flushed before any error is returned.
    pub fn run(&mut self, triples: &[TrainingTriple], outputs: &TrainOutputs) -> Result<()> {
        let total = self.planned_iterations(triples.len())?;
        let iter = BatchIter::new(triples.len(), self.config.batch_size, self.config.seed)?;
        let per_epoch = iter.batches_per_epoch() as u64;
        let mut metrics = match &outputs.metrics {
            Some(p) => {
                let mut w = std::io::BufWriter::new(std::fs::File::create(p)?);
                writeln!(w, "{}", MetricRow::HEADER)?;
                Some(w)
            }
            None => None,
        };
        let mut epoch_batches: Option<(u64, Vec<Vec<usize>>)> = None;
        let result = (|| -> Result<()> {
            while self.iteration < total {
                let epoch = self.iteration / per_epoch;
                if epoch_batches.as_ref().is_none_or(|(e, _)| *e != epoch) {
                    epoch_batches = Some((epoch, iter.epoch(epoch)));
                }
                let idx = &epoch_batches.as_ref().expect("set above").1[(self.iteration % per_epoch) as usize];
                let picked: Vec<&TrainingTriple> = idx.iter().map(|&i| &triples[i]).collect();
                let batch = self.batch(&picked)?;
                let row = self.iterate(&batch)?;
                if let Some(w) = metrics.as_mut() {
                    writeln!(w, "{}", row.to_tsv())?;
                }
                log::debug!("iteration {} {}", row.iteration, row.to_tsv());
                if let (Some(every), Some(path)) = (self.config.checkpoint_every, &outputs.checkpoint) {
                    if self.iteration.is_multiple_of(every) && self.iteration < total {
                        save_checkpoint(&self.checkpoint(), path)?;
                    }
                }
            }
            Ok(())
        })();
        if let Some(w) = metrics.as_mut() {
            w.flush()?;
        }
        result?;
        if let Some(path) = &outputs.checkpoint {
            save_checkpoint(&self.checkpoint(), path)?;
        }
        Ok(())
    }
}

/// Where [`train`] writes its artifacts; `None` skips the file.
#[derive(Clone, Debug, Default)]
pub struct TrainOutputs {
    pub checkpoint: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
}

/// Run a fresh training job.
pub fn train(
    triples: &[TrainingTriple],
    config: TrainConfig,
    outputs: &TrainOutputs,
) -> Result<(Checkpoint, MetricsLog)> {
    let mut trainer = Trainer::new(config)?;
    trainer.run(triples, outputs)?;
    Ok((trainer.checkpoint(), trainer.log))
}
