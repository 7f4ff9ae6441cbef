use std::thread;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::folds::{check_leakage, stratified_kfold};
use super::metrics::{evaluate_predictions, MetricsReport};
use super::train::{predict, FeatureSet, LossCurves, TrainConfig, Trainer};
use crate::augment::{balance_split, MixupConfig};
use crate::data::{Dataset, MotionSample};
use crate::error::{Error, Result};
use crate::model::{AttentionAccumulator, AttentionReport, Model, ModelConfig, DEFAULT_TOP_K};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_originals: usize,
    pub train_synthetic: usize,
    pub test_ids: Vec<String>,
    pub metrics: MetricsReport,
    /// Test-set labels and probabilities, kept for pooling across folds.
    pub labels: Vec<usize>,
    pub probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    /// Metrics of the test predictions of all folds pooled together; loss
    /// curves are the per-epoch mean over folds.
    pub aggregate: MetricsReport,
    pub fold_mean_accuracy: f64,
    pub param_count: usize,
    pub per_sample_test_ms: Option<f64>,
    pub attention: Option<AttentionReport>,
}

#[derive(Default)]
pub struct CvOptions<'a> {
    /// Folds trained concurrently; results do not depend on it.
    pub jobs: usize,
    /// Measure wall-clock inference time per test sample.
    pub timing: bool,
    pub progress: Option<&'a (dyn Fn(&str) + Sync)>,
}

/// Seeds of one fold's model initialization, mixup draws, and batch order.
struct FoldSeeds {
    init: u64,
    mixup: u64,
    shuffle: u64,
}

fn fold_seeds(seed: u64, fold: usize) -> FoldSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fold as u64 + 1);
    FoldSeeds {
        init: rng.random(),
        mixup: rng.random(),
        shuffle: rng.random(),
    }
}

struct FoldOutcome {
    report: FoldReport,
    test_seconds: f64,
    attention: Option<AttentionAccumulator>,
}

/// Stratified k-fold cross-validation of `model_cfg` on an already
/// normalized dataset: each fold's training split is balanced by mixup,
/// trained from scratch, and scored on its untouched test split.
pub fn cross_validate(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    opts: &CvOptions,
) -> Result<CvReport> {
    train_cfg.validate()?;
    model_cfg.validate()?;
    let frames = dataset.samples.first().ok_or(Error::EmptyDataset)?.frames();
    if frames != model_cfg.frames {
        return Err(Error::Config(format!(
            "model expects {} frames but the dataset has {frames}",
            model_cfg.frames
        )));
    }
    let splits = stratified_kfold(dataset, train_cfg.k_folds, train_cfg.seed)?;
    let param_count = Model::new(model_cfg, 0)?.param_count();

    let run = |fold: usize| -> Result<FoldOutcome> {
        let split = &splits[fold];
        let seeds = fold_seeds(train_cfg.seed, fold);
        let pick = |idx: &[usize]| -> Vec<MotionSample> {
            idx.iter().map(|&i| dataset.samples[i].clone()).collect()
        };
        let (train_orig, test) = (pick(&split.train), pick(&split.test));
        let mixup = MixupConfig {
            seed: seeds.mixup,
            ..train_cfg.mixup.clone()
        };
        let augmented = balance_split(&train_orig, &mixup)?;
        check_leakage(&augmented.samples, &test)?;

        let train_set = FeatureSet::from_samples(&augmented.samples)?;
        let test_set = FeatureSet::from_samples(&test)?;
        let mut model = Model::new(model_cfg, seeds.init)?;
        model.checked = train_cfg.checked;
        let mut trainer = Trainer::new(model, train_cfg.lr, seeds.shuffle);
        let loss = trainer.fit(
            &train_set,
            Some(&test_set),
            train_cfg.epochs,
            train_cfg.batch_size,
            |epoch, loss| {
                if let Some(p) = opts.progress {
                    p(&format!("fold {} epoch {epoch}/{} loss {loss:.4}", fold + 1, train_cfg.epochs));
                }
            },
        )?;

        let start = Instant::now();
        let probs = predict(&trainer.model, &test_set)?;
        let test_seconds = start.elapsed().as_secs_f64();

        let attention = if model_cfg.attention {
            let mut acc = AttentionAccumulator::default();
            let all: Vec<usize> = (0..test_set.len()).collect();
            acc.add(&trainer.model, &test_set.batch(&all)?)?;
            Some(acc)
        } else {
            None
        };
        let metrics = evaluate_predictions(&test_set.labels, &probs, loss)?;
        Ok(FoldOutcome {
            report: FoldReport {
                fold,
                train_originals: train_orig.len(),
                train_synthetic: augmented.records.len(),
                test_ids: test_set.ids.clone(),
                metrics,
                labels: test_set.labels.clone(),
                probs,
            },
            test_seconds,
            attention,
        })
    };

    let jobs = opts.jobs.clamp(1, splits.len());
    let mut outcomes: Vec<(usize, Result<FoldOutcome>)> = if jobs == 1 {
        (0..splits.len()).map(|f| (f, run(f))).collect()
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = (0..jobs)
                .map(|w| {
                    let run = &run;
                    let folds: Vec<usize> = (w..splits.len()).step_by(jobs).collect();
                    scope.spawn(move || folds.into_iter().map(|f| (f, run(f))).collect::<Vec<_>>())
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("fold worker panicked"))
                .collect()
        })
    };
    outcomes.sort_by_key(|(f, _)| *f);
    let outcomes: Vec<FoldOutcome> = outcomes.into_iter().map(|(_, r)| r).collect::<Result<_>>()?;

    let labels: Vec<usize> = outcomes.iter().flat_map(|o| o.report.labels.clone()).collect();
    let probs: Vec<Vec<f64>> = outcomes.iter().flat_map(|o| o.report.probs.clone()).collect();
    let curves: Vec<&LossCurves> = outcomes.iter().map(|o| &o.report.metrics.loss).collect();
    let aggregate = evaluate_predictions(&labels, &probs, mean_curves(&curves))?;
    let fold_mean_accuracy =
        outcomes.iter().map(|o| o.report.metrics.accuracy).sum::<f64>() / outcomes.len() as f64;
    let per_sample_test_ms = opts
        .timing
        .then(|| 1000.0 * outcomes.iter().map(|o| o.test_seconds).sum::<f64>() / labels.len() as f64);

    let attention = if model_cfg.attention {
        let mut total = AttentionAccumulator::default();
        for o in &outcomes {
            total.merge(o.attention.as_ref().expect("attention collected"));
        }
        Some(total.finish(DEFAULT_TOP_K)?)
    } else {
        None
    };

    Ok(CvReport {
        folds: outcomes.into_iter().map(|o| o.report).collect(),
        aggregate,
        fold_mean_accuracy,
        param_count,
        per_sample_test_ms,
        attention,
    })
}

fn mean_curves(curves: &[&LossCurves]) -> LossCurves {
    let mean = |pick: fn(&LossCurves) -> &Vec<f64>| -> Vec<f64> {
        let len = curves.iter().map(|c| pick(c).len()).min().unwrap_or(0);
        (0..len)
            .map(|e| curves.iter().map(|c| pick(c)[e]).sum::<f64>() / curves.len() as f64)
            .collect()
    };
    LossCurves {
        train: mean(|c| &c.train),
        test: mean(|c| &c.test),
    }
}
