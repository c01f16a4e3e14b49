#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use shse_core::features::Variant;
use shse_enhancer::EnhancerConfig;
use shse_pipeline::rir::Mode;
use shse_pipeline::{features, mix, rir, synth, ExperimentConfig};
use tempfile::TempDir;

/// One-second utterances, a handful of rooms and a two-channel network.
pub fn small_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.seed = 11;
    c.data.synth_speech = 12;
    c.data.synth_noise = 2;
    c.data.utterance_seconds = 1.0;
    c.data.train_scenarios = 3;
    c.data.train_pairs = 8;
    c.data.train_rt60 = [0.2, 0.4];
    c.data.pairs_per_eval_case = 1;
    c.data.split_modulo = 3;
    c.model = EnhancerConfig {
        encoder_blocks: 1,
        glu_channels: 2,
        decoder_blocks: 1,
        decoder_channels: 2,
        recurrent_hidden: 2,
        ..EnhancerConfig::desk(Variant::Parallel)
    };
    c.train.epochs = 2;
    c.train.batch_size = 2;
    c.train.segment_frames = 16;
    c
}

pub struct Fixture {
    _root: TempDir,
    pub root: PathBuf,
    pub config: ExperimentConfig,
}

impl Fixture {
    pub fn corpus(&self) -> (PathBuf, PathBuf) {
        (self.root.join("corpus/speech"), self.root.join("corpus/noise"))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

/// Corpus, train and eval datasets and train features of [`small_config`],
/// generated once per test binary.
pub fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let root = dir.path().to_path_buf();
        let config = small_config();
        build(&config, &root);
        Fixture {
            _root: dir,
            root,
            config,
        }
    })
}

pub fn build(config: &ExperimentConfig, root: &Path) {
    synth::cmd_synth(config, &root.join("corpus")).unwrap();
    let (speech, noise) = (root.join("corpus/speech"), root.join("corpus/noise"));
    for (mode, name) in [(Mode::Train, "train"), (Mode::Eval, "eval")] {
        let rirs = root.join(format!("rir_{name}"));
        rir::cmd_rir(config, mode, &rirs).unwrap();
        mix::cmd_mix(config, &speech, &noise, &rirs, &root.join(name)).unwrap();
    }
    features::cmd_features(config, &root.join("train"), &root.join("train_feats")).unwrap();
}

/// Every file under `dir` with its contents, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}
