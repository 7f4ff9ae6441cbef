use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::MixupConfig;
use crate::data::{MotionSample, COORDS, NUM_JOINTS};
use crate::error::{Error, Result};
use crate::features::{build_jp, build_rjdp, NUM_PAIRS};
use crate::model::{Model, ModelInput};
use crate::nn::{batch_cross_entropy, softmax, Adam, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub k_folds: usize,
    pub mixup: MixupConfig,
    /// Check every activation for NaN/inf and abort naming the layer.
    pub checked: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 80,
            lr: 0.003,
            batch_size: 57,
            seed: 0,
            k_folds: 5,
            mixup: MixupConfig::default(),
            checked: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("learning rate {} is invalid", self.lr)));
        }
        if self.k_folds < 2 {
            return Err(Error::Config(format!("k_folds must be at least 2, got {}", self.k_folds)));
        }
        self.mixup.validate()
    }
}

/// Stream inputs of a fixed list of samples, precomputed once.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub frames: usize,
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    jp: Vec<Vec<f64>>,
    rjdp: Vec<Vec<f64>>,
}

impl FeatureSet {
    /// Samples must already share one frame count (see [`crate::data::normalize`]).
    pub fn from_samples(samples: &[MotionSample]) -> Result<Self> {
        let frames = samples.first().ok_or(Error::EmptyDataset)?.frames();
        if let Some(s) = samples.iter().find(|s| s.frames() != frames) {
            return Err(Error::Shape(format!(
                "sample `{}` has {} frames, expected {frames}",
                s.id,
                s.frames()
            )));
        }
        Ok(FeatureSet {
            frames,
            ids: samples.iter().map(|s| s.id.clone()).collect(),
            labels: samples.iter().map(|s| s.label.index()).collect(),
            jp: samples.iter().map(|s| build_jp(s).data).collect(),
            rjdp: samples.iter().map(|s| build_rjdp(s).data).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn batch(&self, indices: &[usize]) -> Result<ModelInput> {
        let jp: Vec<&[f64]> = indices.iter().map(|&i| self.jp[i].as_slice()).collect();
        let rjdp: Vec<&[f64]> = indices.iter().map(|&i| self.rjdp[i].as_slice()).collect();
        Ok(ModelInput {
            jp: Tensor::stack([self.frames, NUM_JOINTS, COORDS], &jp)?,
            rjdp: Tensor::stack([self.frames, NUM_PAIRS, COORDS], &rjdp)?,
        })
    }

    pub fn batch_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }
}

/// Mean loss per epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurves {
    pub train: Vec<f64>,
    pub test: Vec<f64>,
}

/// Samples per forward pass when only predicting.
const EVAL_CHUNK: usize = 64;

/// A model together with the optimizer and shuffling state that drive it.
#[derive(Debug)]
pub struct Trainer {
    pub model: Model,
    pub adam: Adam,
    pub rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(model: Model, lr: f64, seed: u64) -> Self {
        Trainer {
            model,
            adam: Adam::new(lr),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// One pass over `train` in shuffled mini-batches (the last one may be
    /// short). Returns the sample-weighted mean loss.
    pub fn epoch(&mut self, train: &FeatureSet, batch_size: usize) -> Result<f64> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size) {
            let input = train.batch(chunk)?;
            let trace = self.model.forward_trace(&input)?;
            let loss = batch_cross_entropy(trace.logits(), &train.batch_labels(chunk))?;
            if !loss.loss.is_finite() {
                return Err(Error::NonFinite { layer: "loss".into() });
            }
            total += loss.loss * chunk.len() as f64;
            self.model.zero_grad();
            self.model.backward(&trace, loss.grad)?;
            self.adam.step(&mut self.model.params_mut())?;
        }
        Ok(total / train.len() as f64)
    }

    /// Trains for `epochs`, recording the held-out loss after every epoch
    /// when `test` is given. The held-out set never influences updates.
    pub fn fit(
        &mut self,
        train: &FeatureSet,
        test: Option<&FeatureSet>,
        epochs: usize,
        batch_size: usize,
        mut on_epoch: impl FnMut(usize, f64),
    ) -> Result<LossCurves> {
        let mut curves = LossCurves::default();
        for e in 0..epochs {
            let loss = self.epoch(train, batch_size)?;
            curves.train.push(loss);
            if let Some(test) = test {
                curves.test.push(mean_loss(&self.model, test)?);
            }
            on_epoch(e + 1, loss);
        }
        Ok(curves)
    }
}

/// Class probabilities for every sample of `set`, in order.
pub fn predict(model: &Model, set: &FeatureSet) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(set.len());
    let all: Vec<usize> = (0..set.len()).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let logits = model.logits(&set.batch(chunk)?)?;
        out.extend((0..chunk.len()).map(|n| softmax(logits.item(n))));
    }
    Ok(out)
}

pub fn mean_loss(model: &Model, set: &FeatureSet) -> Result<f64> {
    let all: Vec<usize> = (0..set.len()).collect();
    let mut total = 0.0;
    for chunk in all.chunks(EVAL_CHUNK) {
        let logits = model.logits(&set.batch(chunk)?)?;
        total += batch_cross_entropy(&logits, &set.batch_labels(chunk))?.loss * chunk.len() as f64;
    }
    Ok(total / set.len() as f64)
}

pub fn argmax(p: &[f64]) -> usize {
    // first maximum wins
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}
