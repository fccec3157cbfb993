//! Oracles shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use midinet::dataset::{raw_roll, split_at_barlines, BarRoll, CHORD_DIMS, STEPS};
use midinet::midi::{parse_midi, quantize};
use midinet::models::{
    conditioner_forward, discriminator_forward, generator_forward, Architecture, ModelConfig, ModelVariant, MonoMode,
    Networks,
};
use midinet::tensor::{grad_check, grad_check_with, GradCheckOptions, ParamSet, Tape, Tensor, Var};
use midinet::trainer::{d_loss_graph, g_loss_graph, BatchVars};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const EPS: f32 = 1e-3;
pub const TOL: f32 = 1e-3;

pub fn randn(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

pub fn naive_conv(x: &Tensor, w: &Tensor, s: (usize, usize)) -> Vec<f32> {
    let [b, c, h, wd] = x.dims4();
    let [f, _, kh, kw] = w.dims4();
    let (oh, ow) = ((h - kh) / s.0 + 1, (wd - kw) / s.1 + 1);
    let mut out = vec![0.0; b * f * oh * ow];
    for n in 0..b {
        for o in 0..f {
            for y in 0..oh {
                for x_ in 0..ow {
                    let mut acc = 0.0f64;
                    for ch in 0..c {
                        for i in 0..kh {
                            for j in 0..kw {
                                acc += x.at4(n, ch, y * s.0 + i, x_ * s.1 + j) as f64 * w.at4(o, ch, i, j) as f64;
                            }
                        }
                    }
                    out[((n * f + o) * oh + y) * ow + x_] = acc as f32;
                }
            }
        }
    }
    out
}

pub fn naive_tconv(x: &Tensor, w: &Tensor, s: (usize, usize)) -> Vec<f32> {
    let [b, c, h, wd] = x.dims4();
    let [_, f, kh, kw] = w.dims4();
    let (oh, ow) = ((h - 1) * s.0 + kh, (wd - 1) * s.1 + kw);
    let mut out = vec![0.0f64; b * f * oh * ow];
    for n in 0..b {
        for ch in 0..c {
            for y in 0..h {
                for x_ in 0..wd {
                    let v = x.at4(n, ch, y, x_) as f64;
                    for o in 0..f {
                        for i in 0..kh {
                            for j in 0..kw {
                                out[((n * f + o) * oh + y * s.0 + i) * ow + x_ * s.1 + j] +=
                                    v * w.at4(ch, o, i, j) as f64;
                            }
                        }
                    }
                }
            }
        }
    }
    out.into_iter().map(|v| v as f32).collect()
}

pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

/// `⟨y, w⟩` with small random weights, so every output element gets a
/// distinct gradient while the loss stays O(1) for well-conditioned
/// central differences.
pub fn project(tape: &mut Tape, y: midinet::tensor::Var, seed: u64) -> midinet::tensor::Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = randn(tape.shape(y), &mut rng);
    let wv = tape.constant(w);
    let wv = tape.scale(wv, 0.1);
    let p = tape.mul(y, wv).unwrap();
    tape.sum(p)
}

/// Worst deviations over `cases` random shapes (all extents ≤ 8):
/// `(conv2d vs oracle, transposed_conv2d vs oracle, adjointness gap)`.
pub fn conv_oracle_sweep(cases: usize, seed: u64) -> (f32, f32, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut conv, mut tconv, mut adj) = (0.0f32, 0.0f32, 0.0f64);
    for _ in 0..cases {
        let (b, c, f) = (
            rng.random_range(1..=3),
            rng.random_range(1..=8),
            rng.random_range(1..=8),
        );
        let (sh, sw) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let (h, w) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let (kh, kw) = (rng.random_range(1..=h), rng.random_range(1..=w));
        let x = randn(&[b, c, h, w], &mut rng);
        let k = randn(&[f, c, kh, kw], &mut rng);
        let mut tape = Tape::new();
        let (xv, kv) = (tape.constant(x.clone()), tape.constant(k.clone()));
        let y = tape.conv2d(xv, kv, (sh, sw)).unwrap();
        conv = conv.max(max_abs_diff(tape.value(y).data(), &naive_conv(&x, &k, (sh, sw))));

        let (th, tw) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let tx = randn(&[b, f, th, tw], &mut rng);
        let tv = tape.constant(tx.clone());
        let ty = tape.transposed_conv2d(tv, kv, (sh, sw)).unwrap();
        tconv = tconv.max(max_abs_diff(tape.value(ty).data(), &naive_tconv(&tx, &k, (sh, sw))));

        let (oh, ow) = (tape.shape(y)[2], tape.shape(y)[3]);
        let (eh, ew) = ((oh - 1) * sh + kh, (ow - 1) * sw + kw);
        let xe = randn(&[b, c, eh, ew], &mut rng);
        let ye = randn(&[b, f, oh, ow], &mut rng);
        let (xev, yev) = (tape.constant(xe.clone()), tape.constant(ye.clone()));
        let cx = tape.conv2d(xev, kv, (sh, sw)).unwrap();
        let tyv = tape.transposed_conv2d(yev, kv, (sh, sw)).unwrap();
        adj = adj.max((tape.value(cx).dot(&ye) - xe.dot(tape.value(tyv))).abs());
    }
    (conv, tconv, adj)
}

/// Finite-difference error of every differentiable tape operation.
pub fn op_gradient_errors(seed: u64) -> Vec<(&'static str, f32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut check =
        |name: &'static str, inputs: Vec<Tensor>, f: &dyn Fn(&mut Tape, &[Var]) -> midinet::tensor::Result<Var>| {
            out.push((name, grad_check(f, &inputs, EPS).unwrap()));
        };
    check(
        "fully_connected",
        vec![
            randn(&[2, 3], &mut rng),
            randn(&[3, 4], &mut rng),
            randn(&[4], &mut rng),
        ],
        &|t, v| {
            let y = t.fully_connected(v[0], v[1], v[2])?;
            Ok(project(t, y, 1))
        },
    );
    check(
        "conv2d",
        vec![randn(&[2, 2, 5, 6], &mut rng), randn(&[3, 2, 2, 3], &mut rng)],
        &|t, v| {
            let y = t.conv2d(v[0], v[1], (2, 1))?;
            Ok(project(t, y, 2))
        },
    );
    check(
        "transposed_conv2d",
        vec![randn(&[2, 3, 2, 3], &mut rng), randn(&[3, 2, 2, 2], &mut rng)],
        &|t, v| {
            let y = t.transposed_conv2d(v[0], v[1], (2, 2))?;
            Ok(project(t, y, 3))
        },
    );
    check(
        "concat_channels/add_channel_bias/mul",
        vec![
            randn(&[2, 2, 2, 3], &mut rng),
            randn(&[2, 1, 2, 3], &mut rng),
            randn(&[3], &mut rng),
            randn(&[2, 3, 2, 3], &mut rng),
        ],
        &|t, v| {
            let y = t.concat_channels(v[0], v[1])?;
            let y = t.add_channel_bias(y, v[2])?;
            let y = t.mul(y, v[3])?;
            Ok(project(t, y, 4))
        },
    );
    check(
        "relu/leaky_relu/sigmoid/add/mean_batch",
        vec![randn(&[3, 4], &mut rng)],
        &|t, v| {
            let a = t.leaky_relu(v[0], 0.2)?;
            let s = t.sigmoid(v[0]);
            let r = t.relu(v[0]);
            let y = t.add(a, s)?;
            let y = t.add(y, r)?;
            let y = t.mean_batch(y)?;
            Ok(project(t, y, 5))
        },
    );
    check("sigmoid_cross_entropy", vec![randn(&[6], &mut rng)], &|t, v| {
        t.sigmoid_cross_entropy(v[0], &[0.9, 0.0, 1.0, 0.3, 0.9, 0.0])
    });
    check(
        "broadcast_condition/reshape",
        vec![randn(&[2, 3], &mut rng)],
        &|t, v| {
            let y = t.broadcast_condition(v[0], 2, 2)?;
            let y = t.reshape(y, &[2, 12])?;
            Ok(project(t, y, 6))
        },
    );
    check(
        "l2_diff/scale/sum",
        vec![randn(&[2, 5], &mut rng), randn(&[2, 5], &mut rng)],
        &|t, v| {
            let d = t.l2_diff(v[0], v[1])?;
            let s = t.scale(v[0], 0.3);
            let s = t.sum(s);
            let y = t.scale(d, 0.05);
            t.add(y, s)
        },
    );
    out
}

/// Toy-sized configuration of variant `id` for finite-difference checks.
pub fn toy_model(id: u8, mono: MonoMode) -> ModelConfig {
    let v = ModelVariant::new(id).unwrap();
    let mut cfg = ModelConfig::new(ModelVariant {
        g_filters: 3,
        cond_filters: 2,
        ..v
    });
    cfg.arch = Architecture::toy();
    cfg.mono = mono;
    cfg
}

/// Random parameters scaled by fan-in so activations stay O(1).
pub fn scaled_params(p: &ParamSet, rng: &mut impl Rng) -> Vec<Tensor> {
    p.iter()
        .map(|(name, t)| {
            let s = t.shape();
            let std = match s.len() {
                1 => 0.1,
                2 => 1.0 / (s[0] as f32).sqrt(),
                _ if name.starts_with("g.t") => 1.0 / (s[0] as f32).sqrt(),
                _ => 1.0 / ((s[1] * s[2] * s[3]) as f32).sqrt(),
            };
            let r = randn(s, rng);
            Tensor::new(s.to_vec(), r.data().iter().map(|v| v * std).collect()).unwrap()
        })
        .collect()
}

fn opts(seed: u64) -> GradCheckOptions {
    GradCheckOptions {
        eps: EPS,
        max_elements: Some(40),
        seed,
        kink_tolerance: Some(2.0 * TOL),
    }
}

fn bars(rng: &mut impl Rng, batch: usize) -> Tensor {
    let data = (0..batch * 128 * 16).map(|_| rng.random::<f32>()).collect();
    Tensor::new([batch, 1, 128, 16], data).unwrap()
}

/// One finite-difference check of a whole network or loss.
#[derive(Debug)]
pub struct NetCheck {
    pub name: String,
    pub max_rel_error: f32,
    pub checked: usize,
    /// Elements whose `±ε` stencil straddled a ReLU kink.
    pub skipped: usize,
}

/// Finite-difference checks of the conditioner, generator, discriminator
/// and both training losses at toy sizes.
pub fn network_gradient_errors(seed: u64) -> Vec<NetCheck> {
    let mut out = Vec::new();
    for id in [1u8, 3] {
        let cfg = toy_model(id, MonoMode::SamplingOnly);
        let nets = Networks::init(cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ id as u64);
        let (ng, nc, nd) = (nets.generator.len(), nets.conditioner.len(), nets.discriminator.len());
        let g = scaled_params(&nets.generator, &mut rng);
        let c = scaled_params(&nets.conditioner, &mut rng);
        let d = scaled_params(&nets.discriminator, &mut rng);
        let batch = 2;
        let prev = bars(&mut rng, batch);
        let cur = bars(&mut rng, batch);
        let z = randn(&[batch, cfg.arch.noise_dim], &mut rng);
        let chord = randn(&[batch, CHORD_DIMS], &mut rng);
        let use_chord = cfg.variant.use_chord;

        let mut inputs = c.clone();
        inputs.push(prev.clone());
        let r = grad_check_with(
            |t, v| {
                let maps = conditioner_forward(t, &cfg, &v[..nc], v[nc]).unwrap();
                let mut acc = project(t, maps[0], 10);
                for (k, &m) in maps.iter().enumerate().skip(1) {
                    let p = project(t, m, 10 + k as u64);
                    acc = t.add(acc, p)?;
                }
                Ok(acc)
            },
            &inputs,
            &vec![true; inputs.len()],
            &opts(seed),
        )
        .unwrap();
        out.push(NetCheck {
            name: format!("conditioner (variant {id})"),
            max_rel_error: r.max_rel_error,
            checked: r.checked,
            skipped: r.skipped,
        });

        let maps: Vec<Tensor> = nets
            .conditioner_maps(&[midinet::dataset::BarRoll::constant(64); 2])
            .unwrap()
            .iter()
            .map(|m| randn(m.shape(), &mut rng))
            .collect();
        let mut inputs = g.clone();
        inputs.push(z.clone());
        inputs.push(chord.clone());
        inputs.extend(maps);
        let r = grad_check_with(
            |t, v| {
                let maps = [v[ng + 2], v[ng + 3], v[ng + 4], v[ng + 5]];
                let ch = use_chord.then_some(v[ng + 1]);
                let tr = generator_forward(t, &cfg, &v[..ng], v[ng], ch, Some(&maps)).unwrap();
                Ok(project(t, tr.output(), 20))
            },
            &inputs,
            &vec![true; inputs.len()],
            &opts(seed),
        )
        .unwrap();
        out.push(NetCheck {
            name: format!("generator (variant {id})"),
            max_rel_error: r.max_rel_error,
            checked: r.checked,
            skipped: r.skipped,
        });

        let mut inputs = d.clone();
        inputs.push(cur.clone());
        inputs.push(chord.clone());
        let r = grad_check_with(
            |t, v| {
                let ch = use_chord.then_some(v[nd + 1]);
                let o = discriminator_forward(t, &cfg, &v[..nd], v[nd], ch, None).unwrap();
                let a = project(t, o.logit, 30);
                let b = project(t, o.features, 31);
                let p = project(t, o.prob, 32);
                let s = t.add(a, b)?;
                t.add(s, p)
            },
            &inputs,
            &vec![true; inputs.len()],
            &opts(seed),
        )
        .unwrap();
        out.push(NetCheck {
            name: format!("discriminator (variant {id})"),
            max_rel_error: r.max_rel_error,
            checked: r.checked,
            skipped: r.skipped,
        });

        let mut inputs = g.clone();
        inputs.extend(c.iter().cloned());
        inputs.extend(d.iter().cloned());
        inputs.extend([cur.clone(), prev.clone(), chord.clone(), z.clone()]);
        let n = ng + nc + nd;
        let batch_vars = |v: &[Var]| BatchVars {
            cur: v[n],
            prev: v[n + 1],
            chord: use_chord.then_some(v[n + 2]),
        };
        let mut trainable = vec![true; ng + nc];
        trainable.extend(vec![false; nd + 4]);
        let r = grad_check_with(
            |t, v| {
                let bv = batch_vars(v);
                let o = g_loss_graph(t, &cfg, &v[..ng], &v[ng..ng + nc], &v[ng + nc..n], &bv, v[n + 3]).unwrap();
                Ok(o.total)
            },
            &inputs,
            &trainable,
            &opts(seed),
        )
        .unwrap();
        out.push(NetCheck {
            name: format!("g_step loss (variant {id})"),
            max_rel_error: r.max_rel_error,
            checked: r.checked,
            skipped: r.skipped,
        });

        let mut trainable = vec![false; ng + nc];
        trainable.extend(vec![true; nd]);
        trainable.extend(vec![false; 4]);
        let r = grad_check_with(
            |t, v| {
                let bv = batch_vars(v);
                let o = d_loss_graph(t, &cfg, &v[..ng], &v[ng..ng + nc], &v[ng + nc..n], &bv, v[n + 3], 0.9).unwrap();
                Ok(o.loss)
            },
            &inputs,
            &trainable,
            &opts(seed),
        )
        .unwrap();
        out.push(NetCheck {
            name: format!("d_step loss (variant {id})"),
            max_rel_error: r.max_rel_error,
            checked: r.checked,
            skipped: r.skipped,
        });
    }
    out
}

/// Monophonic bar with roughly one silent column in five.
pub fn random_roll(rng: &mut impl Rng) -> BarRoll {
    let mut cols = [None; STEPS];
    for c in cols.iter_mut() {
        if rng.random_bool(0.8) {
            *c = Some(rng.random_range(0..128));
        }
    }
    BarRoll::from_columns(cols).unwrap()
}

/// Unfilled rolls of the first track of an SMF, one per written bar.
pub fn melody_rolls(bytes: &[u8]) -> Vec<BarRoll> {
    let song = parse_midi(bytes).unwrap();
    let bars = (song.length_ticks / song.ticks_per_bar()) as usize;
    let grid = quantize(&song.tracks[0].notes, song.ppq);
    split_at_barlines(&grid, bars).iter().map(|b| raw_roll(b)).collect()
}
