//! Inter-class mixup used to balance the training split of each fold.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{count_classes, ClassLabel, MotionSample};
use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixupConfig {
    pub lambda: f64,
    /// `None` balances every class up to the largest class in the split.
    pub target_per_class: Option<usize>,
    pub seed: u64,
}

impl Default for MixupConfig {
    fn default() -> Self {
        MixupConfig {
            lambda: DEFAULT_LAMBDA,
            target_per_class: None,
            seed: 0,
        }
    }
}

impl MixupConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("mixup lambda {} outside [0, 1]", self.lambda)));
        }
        if self.target_per_class == Some(0) {
            return Err(Error::Config("target_per_class must be positive".into()));
        }
        Ok(())
    }
}

/// Provenance of one synthetic sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecord {
    pub synthetic_id: String,
    pub parent_a: String,
    pub parent_b: String,
    pub lambda: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    /// Originals first, in input order, followed by synthetic samples.
    pub samples: Vec<MotionSample>,
    pub records: Vec<SyntheticRecord>,
}

/// `lambda * a + (1 - lambda) * b`, labelled as `a`.
pub fn mixup(a: &MotionSample, b: &MotionSample, lambda: f64) -> Result<MotionSample> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!("mixup lambda {lambda} outside [0, 1]")));
    }
    if a.frames() != b.frames() {
        return Err(Error::Shape(format!(
            "mixup of `{}` ({} frames) with `{}` ({} frames)",
            a.id,
            a.frames(),
            b.id,
            b.frames()
        )));
    }
    if a.label == b.label {
        return Err(Error::Config(format!(
            "mixup partners `{}` and `{}` share label {}",
            a.id, b.id, a.label
        )));
    }
    let positions = a
        .positions
        .iter()
        .zip(&b.positions)
        .map(|(fa, fb)| {
            let mut f = *fa;
            for (pa, pb) in f.iter_mut().zip(fb) {
                for (x, y) in pa.iter_mut().zip(pb) {
                    *x = lambda * *x + (1.0 - lambda) * y;
                }
            }
            f
        })
        .collect();
    Ok(MotionSample {
        id: format!("mix({},{})", a.id, b.id),
        label: a.label,
        positions,
        is_synthetic: true,
    })
}

/// Tops every class up to the target count with mixup samples whose
/// dominant parent comes from the deficit class. Deterministic in
/// `(cfg.seed, train order)`.
pub fn balance_split(train: &[MotionSample], cfg: &MixupConfig) -> Result<Augmented> {
    cfg.validate()?;
    let counts = count_classes(train);
    if let Some(missing) = ClassLabel::ALL.iter().find(|c| counts[c] == 0) {
        return Err(Error::Config(format!("class {missing} absent from training split")));
    }
    let largest = counts.values().copied().max().unwrap_or(0);
    let target = cfg.target_per_class.unwrap_or(largest);
    if target < largest {
        return Err(Error::Config(format!(
            "target {target} per class is below an existing class count {largest}"
        )));
    }

    let mut by_class: BTreeMap<ClassLabel, Vec<&MotionSample>> = BTreeMap::new();
    for s in train {
        by_class.entry(s.label).or_default().push(s);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = train.to_vec();
    let mut records = Vec::new();
    for class in ClassLabel::ALL {
        let others: Vec<ClassLabel> = ClassLabel::ALL.into_iter().filter(|&c| c != class).collect();
        for k in 0..target - counts[&class] {
            let a = by_class[&class].choose(&mut rng).expect("class present");
            let partner = others.choose(&mut rng).expect("other classes");
            let b = by_class[partner].choose(&mut rng).expect("class present");
            let mut v = mixup(a, b, cfg.lambda)?;
            v.id = format!("syn-{}-{:03}", class.as_str(), k);
            records.push(SyntheticRecord {
                synthetic_id: v.id.clone(),
                parent_a: a.id.clone(),
                parent_b: b.id.clone(),
                lambda: cfg.lambda,
                seed: cfg.seed,
            });
            samples.push(v);
        }
    }
    Ok(Augmented { samples, records })
}
