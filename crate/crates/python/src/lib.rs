//! Python bindings: datasets, training, generation and MIDI rendering.
//!
//! Bars cross the boundary as lists of 16 entries, each a MIDI pitch or
//! `None` for silence. Chords are symbols such as `"C"` or `"F#m"`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use midinet::dataset::{self, synth::SyntheticCorpus, BarRoll, Chord, ChordVec, STEPS};
use midinet::models::{ModelConfig, MonoMode, Networks};
use midinet::sampler::{generate_sequence, GenerationRequest};
use midinet::trainer::{self, Checkpoint, TrainConfig, TrainOutputs, Trainer};

type PyBar = Vec<Option<u8>>;
/// `(iteration, d_loss, g_adv, fm1, fm2, d_real, d_fake)`.
type PyMetricRow = (u64, f32, f32, f32, f32, f32, f32);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn bar_to_py(bar: &BarRoll) -> PyBar {
    bar.columns().to_vec()
}

fn bar_from_py(bar: &[Option<u8>]) -> PyResult<BarRoll> {
    let cols: [Option<u8>; STEPS] = bar
        .try_into()
        .map_err(|_| value_err(format!("a bar has {STEPS} columns, got {}", bar.len())))?;
    BarRoll::from_columns(cols).ok_or_else(|| value_err("pitches must be below 128"))
}

fn bars_from_py(bars: &[PyBar]) -> PyResult<Vec<BarRoll>> {
    bars.iter().map(|b| bar_from_py(b)).collect()
}

fn chords_from_py(symbols: &[String]) -> PyResult<Vec<ChordVec>> {
    symbols
        .iter()
        .map(|s| Chord::parse(s).map(dataset::chord_to_vec).map_err(value_err))
        .collect()
}

fn parse_mono(mode: &str) -> PyResult<MonoMode> {
    match mode {
        "straight-through" => Ok(MonoMode::StraightThrough),
        "sampling-only" => Ok(MonoMode::SamplingOnly),
        other => Err(value_err(format!("unknown mono mode {other:?}"))),
    }
}

/// Training triples (previous bar, current bar, chord).
#[pyclass(module = "pymidinet")]
pub struct Dataset {
    inner: dataset::Dataset,
}

#[pymethods]
impl Dataset {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(&path).map_err(io_err)?;
        Ok(Dataset {
            inner: dataset::Dataset::from_bytes(&bytes).map_err(value_err)?,
        })
    }

    /// Seeded synthetic pop corpus, 8 triples per group, no augmentation.
    #[staticmethod]
    #[pyo3(signature = (seed, n_groups, augment = false))]
    fn synthetic(seed: u64, n_groups: usize, augment: bool) -> PyResult<Self> {
        let mut groups = SyntheticCorpus::new(seed).groups(n_groups);
        if augment {
            groups = dataset::transpose_augment(&groups);
        }
        let triples = groups.iter().flat_map(dataset::make_training_triples).collect();
        Ok(Dataset {
            inner: dataset::Dataset::new(triples).map_err(value_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        std::fs::write(path, self.inner.to_bytes()).map_err(io_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn has_chords(&self) -> bool {
        self.inner.has_chords
    }

    /// `(prev, cur, chord_code)` of triple `i`; `chord_code` is 13 ints or `None`.
    fn triple(&self, i: usize) -> PyResult<(PyBar, PyBar, Option<Vec<u8>>)> {
        let t = self
            .inner
            .triples
            .get(i)
            .ok_or_else(|| PyIndexError::new_err(format!("triple {i} of {}", self.inner.len())))?;
        Ok((
            bar_to_py(&t.prev),
            bar_to_py(&t.cur),
            t.chord.map(|c| c.as_bytes().to_vec()),
        ))
    }

    fn current_bars(&self) -> Vec<PyBar> {
        self.inner.triples.iter().map(|t| bar_to_py(&t.cur)).collect()
    }
}

/// Generator, conditioner and discriminator of one variant.
#[pyclass(module = "pymidinet")]
pub struct Model {
    nets: Networks,
    checkpoint: Option<Checkpoint>,
}

#[pymethods]
impl Model {
    /// Freshly initialised networks of `variant` (1, 2 or 3).
    #[new]
    #[pyo3(signature = (variant, seed = 0))]
    fn new(variant: u8, seed: u64) -> PyResult<Self> {
        let cfg = ModelConfig::for_id(variant).map_err(value_err)?;
        Ok(Model {
            nets: Networks::init(cfg, seed).map_err(value_err)?,
            checkpoint: None,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let ckpt = trainer::load_checkpoint(&path).map_err(io_err)?;
        Ok(Model {
            nets: ckpt.networks.clone(),
            checkpoint: Some(ckpt),
        })
    }

    /// Write the checkpoint this model was trained or loaded with.
    fn save(&self, path: PathBuf) -> PyResult<()> {
        let ckpt = self
            .checkpoint
            .as_ref()
            .ok_or_else(|| value_err("only trained or loaded models carry a checkpoint"))?;
        trainer::save_checkpoint(ckpt, &path).map_err(io_err)
    }

    #[getter]
    fn variant(&self) -> u8 {
        self.nets.config.variant.id
    }

    #[getter]
    fn uses_chords(&self) -> bool {
        self.nets.config.variant.use_chord
    }

    /// Generate `n_bars` bars; a primer becomes bar 1. Chord-conditioned
    /// variants need one chord symbol per bar.
    #[pyo3(signature = (n_bars = 8, seed = 0, primer = None, chords = None))]
    fn generate(
        &self,
        n_bars: usize,
        seed: u64,
        primer: Option<PyBar>,
        chords: Option<Vec<String>>,
    ) -> PyResult<Vec<PyBar>> {
        let req = GenerationRequest {
            primer: primer.as_deref().map(bar_from_py).transpose()?,
            chords: chords.as_deref().map(chords_from_py).transpose()?,
            n_bars,
            seed,
        };
        let out = generate_sequence(&self.nets, &req).map_err(value_err)?;
        Ok(out.bars.iter().map(bar_to_py).collect())
    }
}

/// Train `variant` on `dataset`. Returns the model and one
/// `(iteration, d_loss, g_adv, fm1, fm2, d_real, d_fake)` row per iteration.
#[pyfunction]
#[pyo3(signature = (
    dataset, variant = 1, epochs = 20, batch_size = 64, seed = 0,
    max_iterations = None, mono = "straight-through", checkpoint = None, metrics = None
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    dataset: &Dataset,
    variant: u8,
    epochs: u32,
    batch_size: usize,
    seed: u64,
    max_iterations: Option<u64>,
    mono: &str,
    checkpoint: Option<PathBuf>,
    metrics: Option<PathBuf>,
) -> PyResult<(Model, Vec<PyMetricRow>)> {
    let mut model = ModelConfig::for_id(variant).map_err(value_err)?;
    model.mono = parse_mono(mono)?;
    if model.variant.use_chord && !dataset.inner.has_chords {
        return Err(value_err(format!("variant {variant} needs a dataset with chords")));
    }
    let mut cfg = TrainConfig::new(model);
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.seed = seed;
    cfg.max_iterations = max_iterations;
    let outputs = TrainOutputs { checkpoint, metrics };
    let triples = &dataset.inner.triples;
    let (ckpt, log) = py
        .detach(|| {
            let mut t = Trainer::new(cfg)?;
            t.run(triples, &outputs)?;
            Ok::<_, trainer::TrainError>((t.checkpoint(), t.log))
        })
        .map_err(value_err)?;
    let rows = log
        .rows
        .iter()
        .map(|r| (r.iteration, r.d_loss, r.g_adv, r.fm1, r.fm2, r.d_real, r.d_fake))
        .collect();
    Ok((
        Model {
            nets: ckpt.networks.clone(),
            checkpoint: Some(ckpt),
        },
        rows,
    ))
}

/// The 13-entry chord code of a symbol such as `"Am"`.
#[pyfunction]
fn chord_code(symbol: &str) -> PyResult<Vec<u8>> {
    Ok(chords_from_py(&[symbol.to_string()])?[0].as_bytes().to_vec())
}

/// Render bars (and optionally one chord symbol per bar) as a MIDI file.
#[pyfunction]
#[pyo3(signature = (bars, chords = None, bpm = 120.0))]
fn write_midi<'py>(
    py: Python<'py>,
    bars: Vec<PyBar>,
    chords: Option<Vec<String>>,
    bpm: f32,
) -> PyResult<Bound<'py, PyBytes>> {
    let bars = bars_from_py(&bars)?;
    let chords = chords.as_deref().map(chords_from_py).transpose()?;
    let bytes = midinet::midi::write_midi(&bars, chords.as_deref(), bpm).map_err(value_err)?;
    Ok(PyBytes::new(py, &bytes))
}

/// Preprocessed 8-bar groups of a MIDI file: a list of 8-bar lists.
#[pyfunction]
fn preprocess_midi(data: &[u8]) -> PyResult<Vec<Vec<PyBar>>> {
    let song = midinet::midi::parse_midi(data).map_err(value_err)?;
    let pre = dataset::preprocess_song(&song).map_err(value_err)?;
    Ok(pre
        .groups
        .iter()
        .map(|g| g.bars.iter().map(bar_to_py).collect())
        .collect())
}

/// Pitch statistics of a bar list.
#[pyclass(module = "pymidinet", get_all)]
pub struct RollStats {
    bars: usize,
    active_cells: u64,
    inside_fraction: f64,
    outside_fraction: f64,
    change_rate: f64,
    monophonic_fraction: f64,
    pitch_histogram: Vec<u64>,
    pitch_class_histogram: Vec<u64>,
}

#[pyfunction]
fn roll_stats(bars: Vec<PyBar>) -> PyResult<RollStats> {
    let s = midinet::stats::RollStats::from_bars(&bars_from_py(&bars)?);
    Ok(RollStats {
        bars: s.bars,
        active_cells: s.active_cells,
        inside_fraction: s.inside_fraction(),
        outside_fraction: s.outside_fraction(),
        change_rate: s.change_rate,
        monophonic_fraction: s.monophonic_fraction(),
        pitch_histogram: s.pitch_histogram.to_vec(),
        pitch_class_histogram: s.pitch_class_histogram.to_vec(),
    })
}

#[pymodule]
fn pymidinet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_class::<RollStats>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(chord_code, m)?)?;
    m.add_function(wrap_pyfunction!(write_midi, m)?)?;
    m.add_function(wrap_pyfunction!(preprocess_midi, m)?)?;
    m.add_function(wrap_pyfunction!(roll_stats, m)?)?;
    m.add("STEPS", STEPS)?;
    Ok(())
}
