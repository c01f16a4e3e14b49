//! Training driver: segment sampling, epochs, validation and checkpoints.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use shse_core::features::{ModelInput, RealTensor};
use shse_core::spectral::StftProcessor;
use shse_enhancer::train::{evaluate_loss, train_step, Adam, LrSchedule};
use shse_enhancer::Enhancer;

use crate::checkpoint::{Checkpoint, EpochRecord};
use crate::config::ExperimentConfig;
use crate::features::{self, load_features, model_input, slice_frames, FeatureRecord};
use crate::io::{read_jsonl, read_mono, write_jsonl};
use crate::mix::{self, PairRecord};
use crate::seeds::{rng_for, sub_seed, Split, Stream};
use crate::{Error, Result};

pub const CHECKPOINT: &str = "checkpoint.shck";
pub const LOSSES: &str = "losses.jsonl";

/// One utterance held in memory for training.
pub struct Utterance {
    pub id: String,
    pub stft: RealTensor,
    pub sht: RealTensor,
    pub target: Vec<f64>,
}

impl Utterance {
    pub fn frames(&self) -> usize {
        self.stft.frames
    }
}

/// Loads the train and validation utterances of a featurized dataset.
pub fn load_split(
    config: &ExperimentConfig,
    dataset_dir: &Path,
    features_dir: &Path,
) -> Result<(Vec<Utterance>, Vec<Utterance>)> {
    let pairs: Vec<PairRecord> = read_jsonl(&dataset_dir.join(mix::MANIFEST))?;
    let feats_path = features_dir.join(features::MANIFEST);
    let feats: Vec<FeatureRecord> = read_jsonl(&feats_path)?;
    let by_id: HashMap<&str, &FeatureRecord> = feats.iter().map(|f| (f.id.as_str(), f)).collect();
    let (mut train, mut valid) = (Vec::new(), Vec::new());
    for pair in &pairs {
        let dest = match pair.split {
            Split::Train => &mut train,
            Split::Valid => &mut valid,
            Split::Test => continue,
        };
        let record = by_id
            .get(pair.id.as_str())
            .ok_or_else(|| Error::manifest(&feats_path, format!("no features for {}", pair.id)))?;
        if record.order != config.features.order {
            return Err(Error::manifest(
                &feats_path,
                format!("features have order {}, config {}", record.order, config.features.order),
            ));
        }
        let (stft, sht) = load_features(config, features_dir, record)?;
        let target = read_mono(&dataset_dir.join(&pair.target), config.sample_rate)?;
        dest.push(Utterance {
            id: pair.id.clone(),
            stft,
            sht,
            target,
        });
    }
    if train.is_empty() {
        return Err(Error::manifest(&dataset_dir.join(mix::MANIFEST), "no training pairs"));
    }
    Ok((train, valid))
}

/// Trains `config.model` for `config.train.epochs` epochs, writing
/// `checkpoint.shck` and `losses.jsonl` into `out_dir` after every epoch.
///
/// With `resume`, training continues from the saved epoch; the result is
/// identical to an uninterrupted run because every epoch draws its segments
/// from its own seed.
pub fn cmd_train(
    config: &ExperimentConfig,
    dataset_dir: &Path,
    features_dir: &Path,
    out_dir: &Path,
    resume: Option<&Path>,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    let (train, valid) = load_split(config, dataset_dir, features_dir)?;
    crate::io::create_dir(out_dir)?;
    let mut state = match resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if ck.config.model != config.model {
                return Err(Error::Checkpoint {
                    path: path.to_path_buf(),
                    reason: "model configuration differs from the experiment config".into(),
                });
            }
            Checkpoint {
                config: config.clone(),
                ..ck
            }
        }
        None => {
            let model = Enhancer::<f32>::new(config.model.clone(), sub_seed(config.seed, Stream::Model, 0))?;
            let adam = Adam::new(model.params());
            Checkpoint {
                config: config.clone(),
                epoch: 0,
                schedule: LrSchedule::new(config.train.learning_rate),
                history: Vec::new(),
                model,
                adam,
            }
        }
    };
    let stft = StftProcessor::new(config.stft())?;
    let segment = train
        .iter()
        .map(Utterance::frames)
        .min()
        .unwrap_or(0)
        .min(config.train.segment_frames);
    if segment == 0 {
        return Err(Error::InvalidConfig("training utterances are shorter than one frame".into()));
    }
    let variant = config.model.variant;
    let hop = config.features.hop;
    let seg_samples = config.stft().output_len(segment);

    while state.epoch < config.train.epochs {
        let epoch = state.epoch;
        let mut rng = rng_for(config.seed, Stream::Epoch, epoch as u64);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        let mut segments = Vec::with_capacity(order.len());
        for &i in &order {
            let u = &train[i];
            let start = rng.gen_range(0..=u.frames() - segment);
            let input = model_input(
                slice_frames(&u.stft, start, segment),
                slice_frames(&u.sht, start, segment),
                variant,
            )?;
            let s0 = (start * hop).min(u.target.len());
            let s1 = (s0 + seg_samples).min(u.target.len());
            segments.push((input, u.target[s0..s1].to_vec()));
        }
        let lr = state.schedule.lr;
        let mut step_losses = Vec::new();
        for batch in segments.chunks(config.train.batch_size) {
            let inputs: Vec<&ModelInput> = batch.iter().map(|(x, _)| x).collect();
            let targets: Vec<&[f64]> = batch.iter().map(|(_, y)| y.as_slice()).collect();
            let loss = train_step(&mut state.model, &inputs, &targets, &mut state.adam, lr, &stft)?;
            step_losses.push(loss);
        }
        let valid_loss = validation_loss(config, &state.model, &valid, &stft)?;
        let train_loss = step_losses.iter().sum::<f64>() / step_losses.len() as f64;
        state.schedule.observe(valid_loss.unwrap_or(train_loss));
        let record = EpochRecord {
            epoch,
            train_loss,
            valid_loss,
            lr,
            step_losses,
        };
        progress(&record);
        state.history.push(record);
        state.epoch += 1;
        state.save(&out_dir.join(CHECKPOINT))?;
        write_jsonl(&out_dir.join(LOSSES), &state.history)?;
    }
    Ok(state.history)
}

fn validation_loss(
    config: &ExperimentConfig,
    model: &Enhancer<f32>,
    valid: &[Utterance],
    stft: &StftProcessor,
) -> Result<Option<f64>> {
    if valid.is_empty() {
        return Ok(None);
    }
    let mut total = 0.0;
    for u in valid {
        let input = model_input(u.stft.clone(), u.sht.clone(), config.model.variant)?;
        total += evaluate_loss(model, &[&input], &[&u.target], stft)?;
    }
    let mean = total / valid.len() as f64;
    if !mean.is_finite() {
        return Err(shse_enhancer::Error::NonFinite(format!("validation loss {mean}")).into());
    }
    Ok(Some(mean))
}

pub fn checkpoint_path(out_dir: &Path) -> PathBuf {
    out_dir.join(CHECKPOINT)
}
