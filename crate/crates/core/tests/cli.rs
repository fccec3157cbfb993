use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use midinet::dataset::synth::SyntheticCorpus;
use midinet::dataset::Dataset;
use midinet::midi::{parse_midi, write_song, MidiSong, NoteEvent, NoteTrack, WRITE_PPQ};
use tempfile::TempDir;

fn midinet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_midinet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// TSV value of `key` inside a `[summary]` block.
fn summary_value(report: &str, key: &str) -> String {
    let block = report.split("[summary]").nth(1).expect("summary block");
    block
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("{key} missing from report"))
        .to_string()
}

fn write_corpus(dir: &Path, n: u64, bars: usize, chords: bool) {
    std::fs::create_dir_all(dir).unwrap();
    let corpus = SyntheticCorpus::new(3);
    for i in 0..n {
        let mut song = corpus.song(i, bars);
        if !chords {
            song.tracks.truncate(1);
        }
        std::fs::write(dir.join(format!("song{i:02}.mid")), write_song(&song).unwrap()).unwrap();
    }
}

fn held_notes(pitch: u8, bars: u64) -> MidiSong {
    let bar = WRITE_PPQ as u64 * 4;
    MidiSong {
        ppq: WRITE_PPQ,
        tempo: 500_000,
        time_signatures: vec![],
        tracks: vec![NoteTrack {
            track: 0,
            channel: 0,
            notes: (0..bars)
                .map(|b| NoteEvent {
                    pitch,
                    onset: b * bar,
                    duration: bar,
                    channel: 0,
                    velocity: 100,
                })
                .collect(),
        }],
        length_ticks: bars * bar,
    }
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Fixture {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Preprocess a small corpus and return the dataset path.
    fn dataset(&self, name: &str, chords: bool) -> PathBuf {
        let corpus = self.path(&format!("{name}_midi"));
        write_corpus(&corpus, 2, 8, chords);
        let out = self.path(&format!("{name}.mnds"));
        let o = midinet(&[
            "preprocess",
            "--in",
            s(&corpus),
            "--out",
            s(&out),
            "--report",
            s(&self.path("r.txt")),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        out
    }

    /// Train a tiny run and return the checkpoint path.
    fn checkpoint(&self, variant: &str) -> PathBuf {
        let data = self.dataset(&format!("v{variant}"), true);
        let ckpt = self.path(&format!("v{variant}.ckpt"));
        let o = midinet(&[
            "train",
            "--dataset",
            s(&data),
            "--variant",
            variant,
            "--batch-size",
            "4",
            "--max-iterations",
            "2",
            "--out",
            s(&ckpt),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        ckpt
    }
}

#[test]
fn preprocess_synthetic_corpus_counts_triples() {
    let f = Fixture::new();
    let corpus = f.path("midi");
    write_corpus(&corpus, 10, 16, true);
    let (out, report) = (f.path("d.mnds"), f.path("report.txt"));
    let o = midinet(&[
        "preprocess",
        "--in",
        s(&corpus),
        "--out",
        s(&out),
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(
        o.stdout.is_empty(),
        "stdout must stay empty when the report goes to a file"
    );

    let ds = Dataset::from_bytes(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(ds.len(), 10 * (16 / 8) * 8 * 12);
    assert!(ds.has_chords);
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(summary_value(&text, "triples"), "1920");
    assert_eq!(summary_value(&text, "accepted"), "10");
}

#[test]
fn preprocess_is_deterministic() {
    let f = Fixture::new();
    let corpus = f.path("midi");
    write_corpus(&corpus, 3, 8, true);
    let mut outputs = Vec::new();
    for name in ["a.mnds", "b.mnds"] {
        let out = f.path(name);
        let o = midinet(&["preprocess", "--in", s(&corpus), "--out", s(&out)]);
        assert_eq!(code(&o), 0);
        outputs.push((std::fs::read(&out).unwrap(), o.stdout));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn preprocess_empty_dir_exits_3_with_report() {
    let f = Fixture::new();
    let empty = f.path("empty");
    std::fs::create_dir(&empty).unwrap();
    let report = f.path("report.txt");
    let o = midinet(&[
        "preprocess",
        "--in",
        s(&empty),
        "--out",
        s(&f.path("d")),
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&o), 3);
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("no .mid or .midi files"), "{text}");
    assert!(!f.path("d").exists());
}

#[test]
fn preprocess_skips_and_lists_corrupt_files() {
    let f = Fixture::new();
    let corpus = f.path("midi");
    write_corpus(&corpus, 2, 8, true);
    std::fs::write(corpus.join("broken.mid"), b"MThd\x00\x00").unwrap();
    let report = f.path("report.txt");
    let o = midinet(&[
        "preprocess",
        "--in",
        s(&corpus),
        "--out",
        s(&f.path("d")),
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.lines().any(|l| l.starts_with("broken.mid\tskipped\t")), "{text}");
    assert_eq!(summary_value(&text, "accepted"), "2");
}

#[test]
fn preprocess_all_corrupt_exits_3() {
    let f = Fixture::new();
    let corpus = f.path("midi");
    std::fs::create_dir(&corpus).unwrap();
    std::fs::write(corpus.join("x.mid"), b"not midi").unwrap();
    let o = midinet(&["preprocess", "--in", s(&corpus), "--out", s(&f.path("d"))]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("x.mid\tskipped"));
}

#[test]
fn preprocess_missing_dir_exits_2() {
    let f = Fixture::new();
    let o = midinet(&["preprocess", "--in", s(&f.path("nope")), "--out", s(&f.path("d"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn mixed_chord_corpus_drops_chords() {
    let f = Fixture::new();
    let corpus = f.path("midi");
    write_corpus(&corpus, 2, 8, true);
    let bare = held_notes(64, 8);
    std::fs::write(corpus.join("zz_bare.mid"), write_song(&bare).unwrap()).unwrap();
    let out = f.path("d.mnds");
    let o = midinet(&["preprocess", "--in", s(&corpus), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ds = Dataset::from_bytes(&std::fs::read(&out).unwrap()).unwrap();
    assert!(!ds.has_chords);
    assert_eq!(ds.len(), 3 * 8 * 12);
}

#[test]
fn train_variant_checks_against_dataset() {
    let f = Fixture::new();
    let bare = f.dataset("bare", false);
    let ckpt = f.path("m.ckpt");
    let base = [
        "train",
        "--dataset",
        s(&bare),
        "--batch-size",
        "4",
        "--max-iterations",
        "2",
        "--out",
        s(&ckpt),
    ];

    let o = midinet(&[&base[..], &["--variant", "2"]].concat());
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let o = midinet(&[&base[..], &["--variant", "3"]].concat());
    assert_eq!(code(&o), 4);
    assert!(!ckpt.exists());

    let o = midinet(&[&base[..], &["--variant", "1"]].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    assert!(ckpt.exists());
    let metrics = std::fs::read_to_string(f.path("m.ckpt.metrics.tsv")).unwrap();
    assert_eq!(metrics.lines().count(), 3);
}

#[test]
fn train_rejects_unreadable_dataset_and_bad_variant() {
    let f = Fixture::new();
    let ckpt = f.path("m.ckpt");
    let o = midinet(&["train", "--dataset", s(&f.path("missing")), "--out", s(&ckpt)]);
    assert_eq!(code(&o), 2);
    std::fs::write(f.path("junk"), b"MNDSjunk").unwrap();
    let o = midinet(&["train", "--dataset", s(&f.path("junk")), "--out", s(&ckpt)]);
    assert_eq!(code(&o), 2);
    let data = f.dataset("d", false);
    let o = midinet(&["train", "--dataset", s(&data), "--variant", "9", "--out", s(&ckpt)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn train_divergence_exits_nonzero_and_flushes_metrics() {
    let f = Fixture::new();
    let data = f.dataset("d", false);
    let ckpt = f.path("m.ckpt");
    let o = midinet(&[
        "train",
        "--dataset",
        s(&data),
        "--batch-size",
        "4",
        "--max-iterations",
        "40",
        "--lr",
        "1e36",
        "--out",
        s(&ckpt),
    ]);
    assert_ne!(code(&o), 0);
    assert!(stderr(&o).contains("non-finite"), "{}", stderr(&o));
    let metrics = std::fs::read_to_string(f.path("m.ckpt.metrics.tsv")).unwrap();
    assert!(metrics.starts_with("step\t"));
}

#[test]
fn config_file_precedence_and_unknown_keys() {
    let f = Fixture::new();
    let data = f.dataset("d", false);
    let cfg = f.path("run.conf");
    std::fs::write(&cfg, "# tiny run\nbatch_size = 4\nmax_iterations = 3\n").unwrap();
    let ckpt = f.path("m.ckpt");
    let rows = || {
        std::fs::read_to_string(f.path("m.ckpt.metrics.tsv"))
            .unwrap()
            .lines()
            .count()
            - 1
    };

    let o = midinet(&["--config", s(&cfg), "train", "--dataset", s(&data), "--out", s(&ckpt)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(rows(), 3);
    let o = midinet(&[
        "train",
        "--config",
        s(&cfg),
        "--dataset",
        s(&data),
        "--out",
        s(&ckpt),
        "--max-iterations",
        "1",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(rows(), 1);

    std::fs::write(&cfg, "batch_size = 4\n\nlearning_rate = 0.1\n").unwrap();
    let o = midinet(&["--config", s(&cfg), "train", "--dataset", s(&data), "--out", s(&ckpt)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = midinet(&["--config", s(&f.path("absent.conf")), "stats", "--in", s(&data)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn generate_with_primer_is_deterministic() {
    let f = Fixture::new();
    let ckpt = f.checkpoint("1");
    let primer = f.path("p.mid");
    std::fs::write(&primer, write_song(&SyntheticCorpus::new(11).song(0, 2)).unwrap()).unwrap();
    let mut files = Vec::new();
    for name in ["a.mid", "b.mid"] {
        let out = f.path(name);
        let o = midinet(&[
            "generate",
            "--ckpt",
            s(&ckpt),
            "--bars",
            "8",
            "--primer",
            s(&primer),
            "--seed",
            "7",
            "--out",
            s(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(o.stdout.is_empty());
        files.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let song = parse_midi(&files[0]).unwrap();
    assert_eq!(song.tracks.len(), 1);
    assert!(song.tracks[0].notes.last().unwrap().end() <= 8 * song.ticks_per_bar());

    let out = f.path("c.mid");
    let o = midinet(&[
        "generate",
        "--ckpt",
        s(&ckpt),
        "--seed",
        "8",
        "--primer",
        s(&primer),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    assert_ne!(std::fs::read(&out).unwrap(), files[0]);
}

#[test]
fn generate_chord_conditioned_bars() {
    let f = Fixture::new();
    let ckpt = f.checkpoint("2");
    let out = f.path("g.mid");
    let o = midinet(&[
        "generate",
        "--ckpt",
        s(&ckpt),
        "--chords",
        "C,Am,F,G",
        "--bars",
        "4",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let song = parse_midi(&std::fs::read(&out).unwrap()).unwrap();
    let bar = song.ticks_per_bar();
    assert_eq!(song.tracks.len(), 2);
    let chord_bars: Vec<u64> = song.tracks[1].notes.iter().map(|n| n.onset / bar).collect();
    assert_eq!(chord_bars, vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]);
    let melody_end = song.tracks[0].notes.iter().map(NoteEvent::end).max().unwrap();
    assert_eq!(melody_end.div_ceil(bar), 4);

    let o = midinet(&["generate", "--ckpt", s(&ckpt), "--bars", "4", "--out", s(&out)]);
    assert_eq!(code(&o), 4, "chords are required by variant 2");
}

#[test]
fn generate_argument_errors() {
    let f = Fixture::new();
    let ckpt = f.checkpoint("1");
    let out = f.path("g.mid");
    let o = midinet(&["generate", "--ckpt", s(&ckpt), "--chords", "C,H7", "--out", s(&out)]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("\"H7\""), "{}", stderr(&o));
    let o = midinet(&["generate", "--ckpt", s(&ckpt), "--chords", "C,Am", "--out", s(&out)]);
    assert_eq!(code(&o), 4);
    let o = midinet(&["generate", "--ckpt", s(&f.path("none.ckpt")), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    let o = midinet(&[
        "generate",
        "--ckpt",
        s(&ckpt),
        "--primer",
        s(&f.path("none.mid")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn stats_on_dataset_midi_and_bad_input() {
    let f = Fixture::new();
    let data = f.dataset("d", true);
    let o = midinet(&["stats", "--in", s(&data)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = String::from_utf8(o.stdout).unwrap();
    assert_eq!(summary_value(&report, "outside_fraction"), "0");
    assert_eq!(summary_value(&report, "bars"), (2 * 8 * 12).to_string());

    let c4 = f.path("c4.mid");
    std::fs::write(&c4, write_song(&held_notes(60, 5)).unwrap()).unwrap();
    let out = f.path("stats.txt");
    let o = midinet(&["stats", "--in", s(&c4), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let report = std::fs::read_to_string(&out).unwrap();
    assert!(
        report.contains("[pitch_histogram]\npitch\tcount\tfraction\n60\t80\t1\n"),
        "{report}"
    );

    let high = f.path("high.mid");
    std::fs::write(&high, write_song(&held_notes(90, 1)).unwrap()).unwrap();
    let o = midinet(&["stats", "--in", s(&high)]);
    assert_eq!(
        summary_value(&String::from_utf8(o.stdout).unwrap(), "outside_fraction"),
        "1"
    );

    std::fs::write(f.path("bad.mid"), b"garbage").unwrap();
    assert_eq!(code(&midinet(&["stats", "--in", s(&f.path("bad.mid"))])), 2);
    assert_eq!(code(&midinet(&["stats", "--in", s(&f.path("missing"))])), 2);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(code(&midinet(&["frobnicate"])), 1);
    assert_eq!(code(&midinet(&["generate"])), 1);
    let o = midinet(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("preprocess"));
}
