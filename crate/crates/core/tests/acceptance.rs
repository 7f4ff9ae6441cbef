//! Acceptance gate: one pass/fail line per criterion, non-zero exit on any
//! failure. Criterion 8 needs the clinical recordings and is skipped unless
//! `GAITNET_CLINICAL_MANIFEST` points at their manifest.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gaitnet::augment::{balance_split, mixup, MixupConfig};
use gaitnet::data::{count_classes, load_dataset, ClassLabel, Dataset, MotionSample, NUM_JOINTS};
use gaitnet::evaluate::{
    accuracy_header, accuracy_row, argmax, check_leakage, cross_validate, evaluate_predictions, predict, roc_auc,
    stratified_kfold, CvOptions, FeatureSet, LossCurves, MetricsFile, TrainConfig, Trainer,
};
use gaitnet::features::{build_rjdp, pair_flat, rjdp_from_positions, NUM_PAIRS};
use gaitnet::model::checkpoint;
use gaitnet::model::{fuse, Architecture, HeadVariant, Model, ModelConfig, ModelInput, ModelProbe};
use gaitnet::nn::{
    grad_check, softmax_cross_entropy, AdaptiveMaxPool, Conv2d, Dense, LayerProbe, Relu, SeGate, Tensor, FD_STEP,
};
use gaitnet::synth::synthesize;

struct Gate {
    failed: Vec<u32>,
}

impl Gate {
    fn run(&mut self, id: u32, name: &str, budget_s: Option<f64>, check: impl FnOnce() -> Result<String, String>) {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let over = budget_s.is_some_and(|b| secs > b);
        let (status, detail) = match outcome {
            Ok(d) if !over => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; runtime {secs:.1}s over the {:.0}s budget", budget_s.unwrap())),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            self.failed.push(id);
        }
        println!("criterion {id:>2} [{status}] {name}: {detail} ({secs:.1}s)");
    }

    fn skip(&self, id: u32, name: &str, why: &str) {
        println!("criterion {id:>2} [SKIP] {name}: {why}");
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_tensor(dims: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor {
    let n = dims.iter().product();
    Tensor::from_vec(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_input(n: usize, frames: usize, joints: usize, rng: &mut ChaCha8Rng) -> ModelInput {
    let per = frames * joints * 3;
    let (mut jp, mut rjdp) = (Vec::new(), Vec::new());
    for _ in 0..n {
        let item: Vec<f64> = (0..per).map(|_| rng.random_range(-1.0..1.0)).collect();
        rjdp.extend(rjdp_from_positions(&item, frames, joints));
        jp.extend(item);
    }
    ModelInput {
        jp: Tensor::from_vec([n, frames, joints, 3], jp).unwrap(),
        rjdp: Tensor::from_vec([n, frames, joints * (joints - 1), 3], rjdp).unwrap(),
    }
}

fn gradients() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut check = |name, err: f64| worst.push((name, err));

    let x = random_tensor([2, 6, 12, 3], &mut rng);
    let mut conv = Conv2d::new([3, 3], [1, 3], 3, 4, &mut rng);
    check("conv2d", grad_check(&mut LayerProbe::new(&mut conv, x.clone(), 2), FD_STEP).max_rel_error);
    let mut relu = Relu;
    check("relu", grad_check(&mut LayerProbe::new(&mut relu, x.clone(), 3), FD_STEP).max_rel_error);
    let mut pool = AdaptiveMaxPool::new([2, 3]);
    check("adaptive_max_pool", grad_check(&mut LayerProbe::new(&mut pool, x.clone(), 4), FD_STEP).max_rel_error);
    let mut gate = SeGate::new(12, &mut rng);
    check("se_gate", grad_check(&mut LayerProbe::new(&mut gate, x.clone(), 5), FD_STEP).max_rel_error);
    let flat = random_tensor([3, 1, 1, 10], &mut rng);
    let mut dense = Dense::new(10, 4, &mut rng);
    check("dense", grad_check(&mut LayerProbe::new(&mut dense, flat, 6), FD_STEP).max_rel_error);

    let cfg = ModelConfig {
        frames: 10,
        joints: 4,
        head_channels: 4,
        ..ModelConfig::default()
    };
    let mut model = Model::new(&cfg, 7).map_err(|e| e.to_string())?;
    let input = random_input(3, 10, 4, &mut rng);
    let report = grad_check(&mut ModelProbe::new(&mut model, input, vec![0, 2, 3]), FD_STEP);
    check("2s-cnn T=10 J=4 D=12", report.max_rel_error);

    let bad: Vec<String> = worst
        .iter()
        .filter(|(_, e)| e.is_nan() || *e >= 1e-5)
        .map(|(n, e)| format!("{n} {e:.2e}"))
        .collect();
    ensure(bad.is_empty(), format!("relative error >= 1e-5: {}", bad.join(", ")))?;
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    Ok(format!("max relative error {max:.2e} over {} checks", worst.len()))
}

fn shapes() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for t in [5, 10, 100] {
        let cfg = ModelConfig {
            frames: t,
            head_variant: HeadVariant::NoCnn,
            ..ModelConfig::default()
        };
        let cs = cfg.stream_channels;
        let model = Model::new(&cfg, 3).map_err(|e| e.to_string())?;
        let x = random_input(1, t, NUM_JOINTS, &mut rng);
        let a = model.forward_jp_stream(&x.jp).map_err(|e| e.to_string())?;
        let b = model.forward_rjdp_stream(&x.rjdp).map_err(|e| e.to_string())?;
        let f = fuse(&a, &b).map_err(|e| e.to_string())?;
        ensure(a.dims() == [1, t - 2, 20, cs], format!("T={t}: stream 1 {:?}", a.dims()))?;
        ensure(b.dims() == [1, t - 2, 20, cs], format!("T={t}: stream 2 {:?}", b.dims()))?;
        ensure(f.dims() == [1, t - 2, 20, 2 * cs], format!("T={t}: fused {:?}", f.dims()))?;
    }
    Ok("streams (T-2, 20, 3), fused (T-2, 20, 6) for T in {5, 10, 100}".into())
}

fn features() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    ensure(NUM_PAIRS == 380, format!("D = {NUM_PAIRS}"))?;
    let frames = 7;
    let dyadic = |rng: &mut ChaCha8Rng| rng.random_range(-256..256) as f64 / 64.0;
    let positions: Vec<[[f64; 3]; NUM_JOINTS]> = (0..frames)
        .map(|_| [(); NUM_JOINTS].map(|_| [(); 3].map(|_| dyadic(&mut rng))))
        .collect();
    let a = MotionSample::new("a", ClassLabel::Healthy, positions);
    let r = build_rjdp(&a);
    ensure(r.shape() == (frames, 380, 3), format!("RJDP shape {:?}", r.shape()))?;
    for t in 0..frames {
        for i in 0..NUM_JOINTS {
            for j in (0..NUM_JOINTS).filter(|&j| j != i) {
                let (ij, ji) = (pair_flat(i, j, NUM_JOINTS).unwrap(), pair_flat(j, i, NUM_JOINTS).unwrap());
                for c in 0..3 {
                    ensure(r.at(t, ij, c) == -r.at(t, ji, c), "antisymmetry violated")?;
                }
            }
        }
    }
    let shift = [3.0, -7.0, 12.0];
    let mut moved = a.clone();
    for p in moved.positions.iter_mut().flatten() {
        for c in 0..3 {
            p[c] += shift[c];
        }
    }
    ensure(build_rjdp(&moved).data == r.data, "translation changed RJDP")?;

    let b_pos: Vec<[[f64; 3]; NUM_JOINTS]> = (0..frames)
        .map(|_| [(); NUM_JOINTS].map(|_| [(); 3].map(|_| rng.random_range(-2.0..2.0))))
        .collect();
    let b = MotionSample::new("b", ClassLabel::JointProblem, b_pos);
    let mixed = build_rjdp(&mixup(&a, &b, 0.9).map_err(|e| e.to_string())?);
    let rb = build_rjdp(&b);
    let err = mixed
        .data
        .iter()
        .zip(r.data.iter().zip(&rb.data))
        .map(|(m, (x, y))| (m - (0.9 * x + 0.1 * y)).abs())
        .fold(0.0, f64::max);
    ensure(err <= 1e-12, format!("mixup commutation error {err:.2e}"))?;
    Ok(format!("D=380, antisymmetry and translation exact, linearity error {err:.1e}"))
}

fn mixup_contract() -> Result<String, String> {
    let d = synthesize([10, 4, 18, 13], 7, 16).and_then(|d| d.normalized(16)).map_err(|e| e.to_string())?;
    let (a, b) = (&d.samples[0], &d.samples[d.len() - 1]);
    ensure(mixup(a, b, 1.0).map_err(|e| e.to_string())?.positions == a.positions, "lambda=1 is not the identity")?;

    let cfg = MixupConfig {
        target_per_class: Some(45),
        ..MixupConfig::default()
    };
    let full = balance_split(&d.samples, &cfg).map_err(|e| e.to_string())?;
    let counts = count_classes(&full.samples);
    ensure(
        full.samples.len() == 180 && counts.values().all(|&n| n == 45),
        format!("balanced counts {counts:?}"),
    )?;

    let mut synthetic_seen = 0;
    for split in stratified_kfold(&d, 5, 0).map_err(|e| e.to_string())? {
        let train: Vec<MotionSample> = split.train.iter().map(|&i| d.samples[i].clone()).collect();
        let test: Vec<MotionSample> = split.test.iter().map(|&i| d.samples[i].clone()).collect();
        let aug = balance_split(&train, &MixupConfig::default()).map_err(|e| e.to_string())?;
        synthetic_seen += aug.records.len();
        check_leakage(&aug.samples, &test).map_err(|e| e.to_string())?;
        ensure(test.iter().all(|s| !s.is_synthetic), "synthetic sample in a test fold")?;
    }
    Ok(format!(
        "10/4/18/13 -> 45 per class, 180 total; {synthetic_seen} synthetic training samples, none in 5 test folds"
    ))
}

fn mann_whitney(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut twice, mut p, mut n) = (0u64, 0u64, 0u64);
    for (i, &yi) in positive.iter().enumerate() {
        if !yi {
            n += 1;
            continue;
        }
        p += 1;
        for (j, &yj) in positive.iter().enumerate() {
            if !yj {
                twice += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    twice as f64 / (2 * p * n) as f64
}

fn loss_and_metrics() -> Result<String, String> {
    let ce = softmax_cross_entropy(&[0.3; 4], &[0.0, 1.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    ensure((ce.loss - 4f64.ln()).abs() <= 1e-9, format!("uniform loss {}", ce.loss))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    while instances < 50 {
        let n = rng.random_range(2..=200);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..25) as f64 / 24.0).collect();
        let positive: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        if let Ok((_, auc)) = roc_auc(&scores, &positive) {
            worst = worst.max((auc - mann_whitney(&scores, &positive)).abs());
            instances += 1;
        }
    }
    ensure(worst <= 1e-12, format!("AUC differs from Mann-Whitney by {worst:.2e}"))?;

    let labels: Vec<usize> = (0..90).map(|_| rng.random_range(0..4)).collect();
    let probs: Vec<Vec<f64>> = labels.iter().map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
    let m = evaluate_predictions(&labels, &probs, LossCurves::default()).map_err(|e| e.to_string())?;
    for c in 0..4 {
        let support = labels.iter().filter(|&&y| y == c).count();
        ensure(m.confusion[c].iter().sum::<usize>() == support, format!("row {c} sum"))?;
    }
    Ok(format!("ln 4 loss exact to 1e-9; AUC = Mann-Whitney on 50 instances (max diff {worst:.1e}); confusion rows match"))
}

fn overfit() -> Result<String, String> {
    let frames = 100;
    let d = synthesize([2; 4], 11, frames).and_then(|d| d.normalized(frames)).map_err(|e| e.to_string())?;
    let set = FeatureSet::from_samples(&d.samples).map_err(|e| e.to_string())?;
    let model = Model::new(&ModelConfig::default(), 12).map_err(|e| e.to_string())?;
    let mut trainer = Trainer::new(model, 0.003, 13);
    for epoch in 1..=200 {
        trainer.epoch(&set, 57).map_err(|e| e.to_string())?;
        let probs = predict(&trainer.model, &set).map_err(|e| e.to_string())?;
        let correct = probs.iter().zip(&set.labels).filter(|(p, &y)| argmax(p) == y).count();
        if correct == set.len() {
            return Ok(format!("8/8 training samples correct after {epoch} epochs"));
        }
    }
    Err("training accuracy below 100% after 200 epochs".into())
}

const STUDY_FRAMES: usize = 20;

fn study_model(arch: Architecture) -> ModelConfig {
    ModelConfig {
        architecture: arch,
        frames: STUDY_FRAMES,
        head_channels: 8,
        ..ModelConfig::default()
    }
}

fn synthetic_study() -> Result<String, String> {
    let variants = [Architecture::TwoStream, Architecture::JpStream, Architecture::RjdpStream];
    let mut acc = vec![Vec::new(); variants.len()];
    for seed in 0..5u64 {
        let d = synthesize([50; 4], 100 + seed, STUDY_FRAMES)
            .and_then(|d| d.normalized(STUDY_FRAMES))
            .map_err(|e| e.to_string())?;
        let train = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        for (k, arch) in variants.iter().enumerate() {
            let r = cross_validate(&d, &study_model(*arch), &train, &CvOptions::default()).map_err(|e| e.to_string())?;
            acc[k].push(r.aggregate.accuracy);
        }
    }
    let mean: Vec<f64> = acc.iter().map(|a| a.iter().sum::<f64>() / a.len() as f64).collect();
    let summary = variants
        .iter()
        .zip(&mean)
        .map(|(v, m)| format!("{} {:.2}%", v.display_name(), 100.0 * m))
        .collect::<Vec<_>>()
        .join(", ");
    let lowest = acc.iter().flatten().copied().fold(1.0, f64::min);
    ensure(lowest > 0.25, format!("a run at or below chance ({lowest:.3}); {summary}"))?;
    ensure(
        mean[0] >= mean[1].max(mean[2]) - 0.02,
        format!("2s-CNN trails a single stream by more than 2 points; {summary}"),
    )?;
    Ok(format!("5-seed mean accuracy {summary}; lowest single run {:.2}%", 100.0 * lowest))
}

fn clinical_reproduction(manifest: &str) -> Result<String, String> {
    let d: Dataset = load_dataset(manifest.as_ref())
        .and_then(|d| d.normalized(100))
        .map_err(|e| e.to_string())?;
    let mut rows = vec![accuracy_header()];
    let mut acc = Vec::new();
    for arch in [Architecture::JpStream, Architecture::RjdpStream, Architecture::TwoStream] {
        let cfg = ModelConfig {
            architecture: arch,
            ..ModelConfig::default()
        };
        let r = cross_validate(&d, &cfg, &TrainConfig::default(), &CvOptions::default()).map_err(|e| e.to_string())?;
        rows.push(accuracy_row(arch.display_name(), &r.aggregate));
        acc.push(r.aggregate.accuracy);
    }
    for row in &rows {
        println!("    {row}");
    }
    ensure(acc[2] >= 0.85, format!("2s-CNN average {:.2}% below 85%", 100.0 * acc[2]))?;
    ensure(acc[2] > acc[0] && acc[2] > acc[1], "2s-CNN does not beat both single streams")?;
    Ok(format!("2s-CNN average {:.2}%", 100.0 * acc[2]))
}

fn determinism() -> Result<String, String> {
    let frames = 12;
    let d = synthesize([4; 4], 21, frames).and_then(|d| d.normalized(frames)).map_err(|e| e.to_string())?;
    let cfg = ModelConfig {
        frames,
        head_channels: 4,
        ..ModelConfig::default()
    };
    let train = TrainConfig {
        epochs: 3,
        k_folds: 4,
        seed: 9,
        ..TrainConfig::default()
    };
    let run = || -> Result<(String, Vec<u8>), String> {
        let r = cross_validate(&d, &cfg, &train, &CvOptions::default()).map_err(|e| e.to_string())?;
        let json = serde_json::to_string_pretty(&MetricsFile::new("2s-cnn", 9, &r)).map_err(|e| e.to_string())?;
        let set = FeatureSet::from_samples(&d.samples).map_err(|e| e.to_string())?;
        let mut t = Trainer::new(Model::new(&cfg, 9).map_err(|e| e.to_string())?, train.lr, 9);
        t.fit(&set, None, 3, 5, |_, _| {}).map_err(|e| e.to_string())?;
        let bytes = checkpoint::encode(&t.model, &t.adam, &t.rng).map_err(|e| e.to_string())?;
        Ok((json, bytes))
    };
    let (a, b) = (run()?, run()?);
    ensure(a.0 == b.0, "metrics.json differs between reruns")?;
    ensure(a.1 == b.1, "checkpoint bytes differ between reruns")?;
    Ok(format!("metrics.json ({} bytes) and checkpoint ({} bytes) identical on rerun", a.0.len(), a.1.len()))
}

fn ablation() -> Result<String, String> {
    let frames = 14;
    let d = synthesize([5; 4], 31, frames).and_then(|d| d.normalized(frames)).map_err(|e| e.to_string())?;
    let train = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    let mut lines = Vec::new();
    let mut default_counts = Vec::new();
    for variant in HeadVariant::ALL {
        let cfg = ModelConfig {
            frames,
            head_variant: variant,
            ..ModelConfig::default()
        };
        let r = cross_validate(&d, &cfg, &train, &CvOptions::default()).map_err(|e| e.to_string())?;
        ensure(r.folds.len() == 5, "expected five folds")?;
        let full_size = ModelConfig {
            head_variant: variant,
            ..ModelConfig::default()
        };
        let params = Model::new(&full_size, 0).map_err(|e| e.to_string())?.param_count();
        default_counts.push(params);
        lines.push(format!("{} {params}", variant.display_name()));
    }
    // HeadVariant::ALL is NoCnn, NoMaxP, SinCnn, Full
    let (no_cnn, no_maxp, sin, full) = (default_counts[0], default_counts[1], default_counts[2], default_counts[3]);
    ensure(no_cnn.max(sin) < full.min(no_maxp), format!("parameter ordering {lines:?}"))?;
    Ok(format!("four variants trained; params {}", lines.join(", ")))
}

fn main() {
    let mut gate = Gate { failed: Vec::new() };
    println!("acceptance suite");
    gate.run(1, "gradient correctness", Some(30.0), gradients);
    gate.run(2, "shape contract", None, shapes);
    gate.run(3, "feature properties", None, features);
    gate.run(4, "mixup contract", None, mixup_contract);
    gate.run(5, "loss and metric oracles", None, loss_and_metrics);
    gate.run(6, "overfit sanity", Some(120.0), overfit);
    gate.run(7, "end-to-end synthetic study", Some(900.0), synthetic_study);
    match std::env::var("GAITNET_CLINICAL_MANIFEST") {
        Ok(path) => gate.run(8, "clinical reproduction", Some(600.0), || clinical_reproduction(&path)),
        Err(_) => gate.skip(8, "clinical reproduction", "clinical dataset not available (set GAITNET_CLINICAL_MANIFEST)"),
    }
    gate.run(9, "determinism", None, determinism);
    gate.run(10, "ablation harness", None, ablation);
    if gate.failed.is_empty() {
        println!("acceptance: all evaluated criteria passed");
    } else {
        println!("acceptance: failed criteria {:?}", gate.failed);
        std::process::exit(1);
    }
}
