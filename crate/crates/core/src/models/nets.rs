use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelError, Result};
use crate::dataset::{BarRoll, CHORD_DIMS, PITCHES, STEPS};
use crate::tensor::{truncated_normal, ParamSet, Tape, Tensor, Var};

/// Standard deviation of the truncated-normal weight initialisation.
pub const INIT_STD: f32 = 0.02;

const COND_STRIDE: (usize, usize) = (2, 2);

fn layer<R: rand::Rng>(p: &mut ParamSet, name: &str, w_shape: &[usize], bias: usize, rng: &mut R) {
    p.push(format!("{name}.w"), truncated_normal(w_shape, INIT_STD, rng));
    p.push(format!("{name}.b"), Tensor::zeros([bias]));
}

fn g_in_channels(cfg: &ModelConfig, k: usize) -> usize {
    let v = &cfg.variant;
    let base = if k == 1 {
        cfg.arch.reshape_channels()
    } else {
        v.g_filters
    };
    base + if v.use_chord { CHORD_DIMS } else { 0 } + if v.twod_layers[k - 1] { v.cond_filters } else { 0 }
}

fn d_in_channels(cfg: &ModelConfig) -> usize {
    1 + if cfg.variant.use_chord { CHORD_DIMS } else { 0 } + usize::from(cfg.d_sees_prev)
}

/// `fc1, fc2, t1..t4`, each as weight then bias. Transposed-conv filters are
/// laid out `in×out×kH×kW`.
pub fn init_generator<R: rand::Rng>(cfg: &ModelConfig, rng: &mut R) -> ParamSet {
    let (a, v) = (&cfg.arch, &cfg.variant);
    let mut p = ParamSet::new();
    layer(&mut p, "g.fc1", &[a.noise_dim, a.g_fc1], a.g_fc1, rng);
    layer(&mut p, "g.fc2", &[a.g_fc1, a.g_fc2], a.g_fc2, rng);
    for k in 1..=3 {
        layer(
            &mut p,
            &format!("g.t{k}"),
            &[g_in_channels(cfg, k), v.g_filters, 1, 2],
            v.g_filters,
            rng,
        );
    }
    layer(&mut p, "g.t4", &[g_in_channels(cfg, 4), 1, PITCHES, 1], 1, rng);
    p
}

/// `c1..c4`; empty when the variant has no 2-D condition.
pub fn init_conditioner<R: rand::Rng>(cfg: &ModelConfig, rng: &mut R) -> ParamSet {
    let c = cfg.variant.cond_filters;
    let mut p = ParamSet::new();
    if !cfg.variant.uses_prev() {
        return p;
    }
    layer(&mut p, "c.c1", &[c, 1, PITCHES, 1], c, rng);
    for k in 2..=4 {
        layer(&mut p, &format!("c.c{k}"), &[c, c, 1, 2], c, rng);
    }
    p
}

/// `conv1, conv2, fc1, fc2`.
pub fn init_discriminator<R: rand::Rng>(cfg: &ModelConfig, rng: &mut R) -> ParamSet {
    let a = &cfg.arch;
    let mut p = ParamSet::new();
    layer(
        &mut p,
        "d.conv1",
        &[a.d_filters1, d_in_channels(cfg), PITCHES, 2],
        a.d_filters1,
        rng,
    );
    layer(
        &mut p,
        "d.conv2",
        &[a.d_filters2, a.d_filters1, 1, 4],
        a.d_filters2,
        rng,
    );
    layer(&mut p, "d.fc1", &[a.d_filters2 * 3, a.d_fc], a.d_fc, rng);
    layer(&mut p, "d.fc2", &[a.d_fc, 1], 1, rng);
    p
}

fn expect_shape(tape: &Tape, v: Var, want: &[usize], what: &str) -> Result<()> {
    if tape.shape(v) != want {
        return Err(ModelError::Contract(format!(
            "{what}: expected shape {want:?}, got {:?}",
            tape.shape(v)
        )));
    }
    Ok(())
}

fn batch_of(tape: &Tape, v: Var) -> usize {
    tape.shape(v).first().copied().unwrap_or(0)
}

/// Feature maps `[m1, m2, m3, m4]` of the previous bar `prev[B×1×128×16]`,
/// with spatial extents `1×16, 1×8, 1×4, 1×2`.
pub fn conditioner_forward(tape: &mut Tape, cfg: &ModelConfig, params: &[Var], prev: Var) -> Result<[Var; 4]> {
    if params.len() != 8 {
        return Err(ModelError::Contract(format!(
            "conditioner expects 8 parameters, got {}",
            params.len()
        )));
    }
    let batch = batch_of(tape, prev);
    expect_shape(tape, prev, &[batch, 1, PITCHES, STEPS], "conditioner input")?;
    let mut maps = [prev; 4];
    let mut h = prev;
    for k in 0..4 {
        let stride = if k == 0 { (1, 1) } else { COND_STRIDE };
        h = tape.conv2d(h, params[2 * k], stride)?;
        h = tape.add_channel_bias(h, params[2 * k + 1])?;
        h = tape.relu(h);
        maps[k] = h;
    }
    debug_assert_eq!(tape.shape(maps[3])[1], cfg.variant.cond_filters);
    Ok(maps)
}

/// Intermediate values of one generator pass.
#[derive(Clone, Copy, Debug)]
pub struct GeneratorTrace {
    /// The 512-unit layer reshaped to `B×256×1×2`.
    pub reshaped: Var,
    /// Output of each transposed-conv layer after its activation; the last
    /// is the sigmoid output `B×1×128×16`.
    pub layers: [Var; 4],
}

impl GeneratorTrace {
    pub fn output(&self) -> Var {
        self.layers[3]
    }
}

/// Noise `z[B×l]` to activations `B×1×128×16` in `[0, 1]`.
///
/// `chord[B×13]` must be given exactly when the variant uses chords, and
/// `maps` exactly when it has 2-D conditions; map `m_{5−k}` is
/// concatenated before transposed-conv layer `k`.
pub fn generator_forward(
    tape: &mut Tape,
    cfg: &ModelConfig,
    params: &[Var],
    z: Var,
    chord: Option<Var>,
    maps: Option<&[Var; 4]>,
) -> Result<GeneratorTrace> {
    let v = &cfg.variant;
    if params.len() != 12 {
        return Err(ModelError::Contract(format!(
            "generator expects 12 parameters, got {}",
            params.len()
        )));
    }
    if chord.is_some() != v.use_chord {
        return Err(ModelError::Contract(format!(
            "variant {} {} a chord condition",
            v.id,
            if v.use_chord { "requires" } else { "does not take" }
        )));
    }
    if maps.is_some() != v.uses_prev() {
        return Err(ModelError::Contract(format!(
            "variant {} {} a previous-bar condition",
            v.id,
            if v.uses_prev() { "requires" } else { "does not take" }
        )));
    }
    let batch = batch_of(tape, z);
    expect_shape(tape, z, &[batch, cfg.arch.noise_dim], "noise")?;
    if let Some(c) = chord {
        expect_shape(tape, c, &[batch, CHORD_DIMS], "chord condition")?;
    }

    let h = tape.fully_connected(z, params[0], params[1])?;
    let h = tape.relu(h);
    let h = tape.fully_connected(h, params[2], params[3])?;
    let h = tape.relu(h);
    let reshaped = tape.reshape(h, &[batch, cfg.arch.reshape_channels(), 1, 2])?;

    let mut layers = [reshaped; 4];
    let mut h = reshaped;
    for k in 1..=4 {
        let (height, width) = {
            let s = tape.shape(h);
            (s[2], s[3])
        };
        if let Some(c) = chord {
            let tiled = tape.broadcast_condition(c, height, width)?;
            h = tape.concat_channels(h, tiled)?;
        }
        if v.twod_layers[k - 1] {
            let m = maps.expect("checked above")[4 - k];
            h = tape.concat_channels(h, m).map_err(|e| {
                ModelError::Contract(format!(
                    "conditioner map m{} does not fit generator layer {k}: {e}",
                    5 - k
                ))
            })?;
        }
        let stride = if k < 4 { (2, 2) } else { (1, 1) };
        h = tape.transposed_conv2d(h, params[2 + 2 * k], stride)?;
        h = tape.add_channel_bias(h, params[3 + 2 * k])?;
        h = if k < 4 { tape.relu(h) } else { tape.sigmoid(h) };
        layers[k - 1] = h;
    }
    Ok(GeneratorTrace { reshaped, layers })
}

/// Discriminator outputs for a batch.
#[derive(Clone, Copy, Debug)]
pub struct DiscriminatorOutput {
    /// `B×1`, `sigmoid(logit)`.
    pub prob: Var,
    pub logit: Var,
    /// First-convolution activation, `B×14×1×8`.
    pub features: Var,
    /// Second-convolution activation, `B×77×1×3`.
    pub conv2: Var,
}

/// Scores `x[B×1×128×16]`. `prev` is consulted only when the config lets
/// the discriminator see the previous bar.
pub fn discriminator_forward(
    tape: &mut Tape,
    cfg: &ModelConfig,
    params: &[Var],
    x: Var,
    chord: Option<Var>,
    prev: Option<Var>,
) -> Result<DiscriminatorOutput> {
    if params.len() != 8 {
        return Err(ModelError::Contract(format!(
            "discriminator expects 8 parameters, got {}",
            params.len()
        )));
    }
    let batch = batch_of(tape, x);
    expect_shape(tape, x, &[batch, 1, PITCHES, STEPS], "discriminator input")?;
    let mut h = x;
    match (cfg.variant.use_chord, chord) {
        (true, Some(c)) => {
            expect_shape(tape, c, &[batch, CHORD_DIMS], "chord condition")?;
            let tiled = tape.broadcast_condition(c, PITCHES, STEPS)?;
            h = tape.concat_channels(h, tiled)?;
        }
        (false, None) => {}
        _ => {
            return Err(ModelError::Contract(
                "chord condition does not match the variant".into(),
            ))
        }
    }
    match (cfg.d_sees_prev, prev) {
        (true, Some(p)) => {
            expect_shape(tape, p, &[batch, 1, PITCHES, STEPS], "previous bar")?;
            h = tape.concat_channels(h, p)?;
        }
        (true, None) => return Err(ModelError::Contract("discriminator needs the previous bar".into())),
        (false, _) => {}
    }
    let h = tape.conv2d(h, params[0], (2, 2))?;
    let h = tape.add_channel_bias(h, params[1])?;
    let features = tape.leaky_relu(h, cfg.leak)?;
    let h = tape.conv2d(features, params[2], (2, 2))?;
    let h = tape.add_channel_bias(h, params[3])?;
    let conv2 = tape.leaky_relu(h, cfg.leak)?;
    let flat = tape.shape(conv2)[1..].iter().product::<usize>();
    let h = tape.reshape(conv2, &[batch, flat])?;
    let h = tape.fully_connected(h, params[4], params[5])?;
    let h = tape.leaky_relu(h, cfg.leak)?;
    let logit = tape.fully_connected(h, params[6], params[7])?;
    let prob = tape.sigmoid(logit);
    Ok(DiscriminatorOutput {
        prob,
        logit,
        features,
        conv2,
    })
}

/// Per-column argmax of `B×1×128×16` activations, one bar per batch item.
pub fn monophonize(activations: &Tensor) -> Result<Vec<BarRoll>> {
    let s = activations.shape();
    if s.len() != 4 || s[1] != 1 || s[2] != PITCHES || s[3] != STEPS {
        return Err(ModelError::Contract(format!("cannot monophonize shape {s:?}")));
    }
    if !activations.all_finite() {
        return Err(ModelError::Contract("non-finite activations".into()));
    }
    Ok(activations
        .data()
        .chunks(PITCHES * STEPS)
        .map(BarRoll::monophonize)
        .collect())
}

/// The three parameter sets of one model together with its configuration.
#[derive(Clone, Debug)]
pub struct Networks {
    pub config: ModelConfig,
    pub generator: ParamSet,
    pub conditioner: ParamSet,
    pub discriminator: ParamSet,
}

fn chord_tensor(chords: &[[f32; CHORD_DIMS]]) -> Tensor {
    Tensor::new([chords.len(), CHORD_DIMS], chords.concat()).expect("chord batch")
}

impl Networks {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let generator = init_generator(&config, &mut rng);
        rng.set_stream(1);
        let conditioner = init_conditioner(&config, &mut rng);
        rng.set_stream(2);
        let discriminator = init_discriminator(&config, &mut rng);
        Ok(Networks {
            config,
            generator,
            conditioner,
            discriminator,
        })
    }

    /// Generator activations for noise `z[B×l]`, optional chords and
    /// optional previous bars, without recording gradients.
    pub fn generate(
        &self,
        z: &Tensor,
        chords: Option<&[[f32; CHORD_DIMS]]>,
        prev: Option<&[BarRoll]>,
    ) -> Result<Tensor> {
        let mut tape = Tape::new();
        let g = self.generator.bind(&mut tape, false);
        let zv = tape.constant(z.clone());
        let chord = chords.map(|c| tape.constant(chord_tensor(c)));
        let maps = match prev {
            Some(bars) => {
                let c = self.conditioner.bind(&mut tape, false);
                let pv = tape.constant(BarRoll::batch_tensor(bars));
                Some(conditioner_forward(&mut tape, &self.config, &c, pv)?)
            }
            None => None,
        };
        let trace = generator_forward(&mut tape, &self.config, &g, zv, chord, maps.as_ref())?;
        Ok(tape.value(trace.output()).clone())
    }

    /// Conditioner maps for the given bars.
    pub fn conditioner_maps(&self, prev: &[BarRoll]) -> Result<[Tensor; 4]> {
        let mut tape = Tape::new();
        let c = self.conditioner.bind(&mut tape, false);
        let pv = tape.constant(BarRoll::batch_tensor(prev));
        let maps = conditioner_forward(&mut tape, &self.config, &c, pv)?;
        Ok(maps.map(|m| tape.value(m).clone()))
    }

    /// Discriminator probabilities `B×1` and first-layer features.
    pub fn discriminate(
        &self,
        x: &Tensor,
        chords: Option<&[[f32; CHORD_DIMS]]>,
        prev: Option<&[BarRoll]>,
    ) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::new();
        let d = self.discriminator.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let chord = chords.map(|c| tape.constant(chord_tensor(c)));
        let pv = prev.map(|p| tape.constant(BarRoll::batch_tensor(p)));
        let out = discriminator_forward(&mut tape, &self.config, &d, xv, chord, pv)?;
        Ok((tape.value(out.prob).clone(), tape.value(out.features).clone()))
    }

    pub fn all_finite(&self) -> bool {
        self.generator.all_finite() && self.conditioner.all_finite() && self.discriminator.all_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Architecture, ModelVariant};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noise(batch: usize, dim: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::new(
            [batch, dim],
            (0..batch * dim).map(|_| rng.sample(StandardNormal)).collect(),
        )
        .unwrap()
    }

    fn shapes_for(id: u8) -> (Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<usize>) {
        let cfg = ModelConfig::for_id(id).unwrap();
        let net = Networks::init(cfg, 1).unwrap();
        let mut tape = Tape::new();
        let g = net.generator.bind(&mut tape, false);
        let c = net.conditioner.bind(&mut tape, false);
        let z = tape.constant(noise(2, 100, 0));
        let chord = cfg
            .variant
            .use_chord
            .then(|| tape.constant(Tensor::zeros([2, CHORD_DIMS])));
        let prev = tape.constant(Tensor::zeros([2, 1, 128, 16]));
        let maps = conditioner_forward(&mut tape, &cfg, &c, prev).unwrap();
        let trace = generator_forward(&mut tape, &cfg, &g, z, chord, Some(&maps)).unwrap();
        let mut traj = vec![tape.shape(trace.reshaped).to_vec()];
        traj.extend(trace.layers.iter().map(|&v| tape.shape(v).to_vec()));
        let cmaps = maps.iter().map(|&m| tape.shape(m).to_vec()).collect();
        let t1_in = net.generator.get("g.t1.w").unwrap().shape()[0];
        let d_in = net.discriminator.get("d.conv1.w").unwrap().shape()[1];
        (traj, cmaps, vec![t1_in, d_in])
    }

    #[test]
    fn generator_and_conditioner_shapes() {
        let (traj, maps, chans) = shapes_for(1);
        assert_eq!(
            traj,
            vec![
                vec![2, 256, 1, 2],
                vec![2, 256, 1, 4],
                vec![2, 256, 1, 8],
                vec![2, 256, 1, 16],
                vec![2, 1, 128, 16]
            ]
        );
        assert_eq!(
            maps,
            vec![
                vec![2, 256, 1, 16],
                vec![2, 256, 1, 8],
                vec![2, 256, 1, 4],
                vec![2, 256, 1, 2]
            ]
        );
        assert_eq!(chans, vec![512, 1]);
        let (traj, maps, chans) = shapes_for(2);
        assert_eq!(traj[4], vec![2, 1, 128, 16]);
        assert_eq!(maps[0], vec![2, 16, 1, 16]);
        assert_eq!(maps[3], vec![2, 16, 1, 2]);
        assert_eq!(chans, vec![256 + 13, 14]);
    }

    #[test]
    fn discriminator_shapes_and_range() {
        let cfg = ModelConfig::for_id(2).unwrap();
        let net = Networks::init(cfg, 5).unwrap();
        let mut tape = Tape::new();
        let d = net.discriminator.bind(&mut tape, false);
        let x = tape.constant(Tensor::full([3, 1, 128, 16], 0.7));
        let chord = tape.constant(Tensor::ones([3, 13]));
        let out = discriminator_forward(&mut tape, &cfg, &d, x, Some(chord), None).unwrap();
        assert_eq!(tape.shape(out.features), &[3, 14, 1, 8]);
        assert_eq!(tape.shape(out.conv2), &[3, 77, 1, 3]);
        for (&p, &l) in tape.value(out.prob).data().iter().zip(tape.value(out.logit).data()) {
            assert!((0.0..=1.0).contains(&p));
            assert!((p - 1.0 / (1.0 + (-l).exp())).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_previous_bar_gives_zero_maps() {
        let net = Networks::init(ModelConfig::for_id(3).unwrap(), 2).unwrap();
        let maps = net.conditioner_maps(&[BarRoll::EMPTY]).unwrap();
        assert!(maps.iter().all(|m| m.data().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn condition_mismatch_is_a_contract_error() {
        let net = Networks::init(ModelConfig::for_id(1).unwrap(), 2).unwrap();
        let z = noise(1, 100, 1);
        let chord = [[0.0; CHORD_DIMS]];
        assert!(matches!(
            net.generate(&z, Some(&chord), Some(&[BarRoll::EMPTY])),
            Err(ModelError::Contract(_))
        ));
        assert!(matches!(net.generate(&z, None, None), Err(ModelError::Contract(_))));
        assert!(net.generate(&noise(1, 99, 1), None, Some(&[BarRoll::EMPTY])).is_err());
    }

    #[test]
    fn distinct_noise_distinct_output() {
        let net = Networks::init(ModelConfig::for_id(1).unwrap(), 9).unwrap();
        let a = net.generate(&noise(1, 100, 1), None, Some(&[BarRoll::EMPTY])).unwrap();
        let b = net.generate(&noise(1, 100, 2), None, Some(&[BarRoll::EMPTY])).unwrap();
        assert_ne!(a, b);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn monophonize_examples() {
        let mut act = vec![0.0f32; 128 * 16];
        act[16] = 0.9; // row 1, column 0
        act[0] = 0.1;
        act[2 * 16] = 0.3;
        let t = Tensor::new([1, 1, 128, 16], act.clone()).unwrap();
        let bars = monophonize(&t).unwrap();
        assert_eq!(bars[0].pitch_at(0), Some(1));
        assert_eq!(bars[0].pitch_at(5), Some(0));
        let scaled = Tensor::new([1, 1, 128, 16], act.iter().map(|v| v * 3.5).collect()).unwrap();
        assert_eq!(monophonize(&scaled).unwrap(), bars);
        assert!(monophonize(&Tensor::zeros([1, 2, 128, 16])).is_err());
    }

    #[test]
    fn toy_architecture_runs() {
        let mut cfg = ModelConfig::new(ModelVariant {
            g_filters: 3,
            cond_filters: 2,
            ..ModelVariant::new(3).unwrap()
        });
        cfg.arch = Architecture::toy();
        let net = Networks::init(cfg, 0).unwrap();
        let out = net
            .generate(&noise(2, 4, 0), Some(&[[0.0; 13]; 2]), Some(&[BarRoll::EMPTY; 2]))
            .unwrap();
        assert_eq!(out.shape(), &[2, 1, 128, 16]);
    }
}
