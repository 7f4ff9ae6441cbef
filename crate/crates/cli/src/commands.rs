use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gaitnet::augment::balance_split;
use gaitnet::data::{count_classes, load_dataset, write_dataset, ClassLabel, Dataset, JointId, NUM_JOINTS};
use gaitnet::evaluate::{
    accuracy_header, accuracy_row, argmax, cross_validate, export_attention, export_report, predict, CvOptions,
    CvReport, FeatureSet, MetricsFile, Trainer,
};
use gaitnet::features::{build_jp, build_rjdp, dump_tensor};
use gaitnet::model::{checkpoint, Architecture, HeadVariant, Model};
use gaitnet::synth::generate_dataset;

use crate::config::{RunConfig, ECHO_FILE};
use crate::Failure;

pub struct Log {
    pub quiet: bool,
}

impl Log {
    pub fn info(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn normalized(cfg: &RunConfig, log: &Log) -> Result<Dataset, Failure> {
    let manifest = cfg.manifest()?;
    let raw = load_dataset(manifest)?;
    log.info(&format!("loaded {} motions from {}", raw.len(), manifest.display()));
    Ok(raw.normalized(cfg.model.frames)?)
}

fn counts_line(samples: &[gaitnet::data::MotionSample]) -> String {
    let counts = count_classes(samples);
    ClassLabel::ALL
        .iter()
        .map(|c| format!("{}={}", c.as_str(), counts.get(c).copied().unwrap_or(0)))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn synth(cfg: &RunConfig, out: &Path, log: &Log) -> Result<(), Failure> {
    cfg.echo(out)?;
    let d = &cfg.data;
    let (dataset, manifest) = generate_dataset(d.counts, d.seed, d.frames, out)?;
    log.info(&format!("wrote {} motions of {} frames", dataset.len(), d.frames));
    println!("{}", manifest.display());
    Ok(())
}

pub fn ingest(cfg: &RunConfig, out: &Path, log: &Log) -> Result<(), Failure> {
    cfg.echo(out)?;
    let dataset = normalized(cfg, log)?;
    let manifest = write_dataset(out, &dataset.samples)?;
    let tensors = out.join("tensors");
    fs::create_dir_all(&tensors).map_err(|e| Failure::io(&tensors, e))?;
    for s in &dataset.samples {
        let jp = build_jp(s);
        let (t, j, c) = jp.shape();
        dump_tensor(&tensors, &format!("{}.jp", s.id), "JP", [t, j, c], &jp.data)?;
        let rjdp = build_rjdp(s);
        let (t, p, c) = rjdp.shape();
        dump_tensor(&tensors, &format!("{}.rjdp", s.id), "RJDP", [t, p, c], &rjdp.data)?;
    }
    log.info(&format!("normalized to {} frames; tensors in {}", cfg.model.frames, tensors.display()));
    println!("{} {}", manifest.display(), counts_line(&dataset.samples));
    Ok(())
}

pub fn augment(cfg: &RunConfig, out: &Path, log: &Log) -> Result<(), Failure> {
    cfg.echo(out)?;
    let dataset = normalized(cfg, log)?;
    let augmented = balance_split(&dataset.samples, &cfg.augment)?;
    let manifest = write_dataset(out, &augmented.samples)?;
    let records = out.join("mixup_records.json");
    let mut text = serde_json::to_string_pretty(&augmented.records).map_err(|e| Failure::Io(e.to_string()))?;
    text.push('\n');
    write(&records, &text)?;
    log.info(&format!(
        "{} originals + {} synthetic",
        dataset.len(),
        augmented.records.len()
    ));
    println!("{} {}", manifest.display(), counts_line(&augmented.samples));
    Ok(())
}

pub fn train(cfg: &RunConfig, out: &Path, log: &Log) -> Result<(), Failure> {
    cfg.echo(out)?;
    let dataset = normalized(cfg, log)?;
    let tc = cfg.train_config();
    let augmented = balance_split(&dataset.samples, &tc.mixup)?;
    let set = FeatureSet::from_samples(&augmented.samples)?;
    let mut model = Model::new(&cfg.model, tc.seed)?;
    model.checked = tc.checked;
    let mut trainer = Trainer::new(model, tc.lr, tc.seed);
    let every = (tc.epochs / 10).max(1);
    let curves = trainer.fit(&set, None, tc.epochs, tc.batch_size, |epoch, loss| {
        if epoch % every == 0 || epoch == tc.epochs {
            log.info(&format!("epoch {epoch}/{}: loss {loss:.4}", tc.epochs));
        }
    })?;

    let probs = predict(&trainer.model, &set)?;
    let correct = probs.iter().zip(&set.labels).filter(|(p, &y)| argmax(p) == y).count();
    checkpoint::save(&out.join("model.gaitnet"), &trainer.model, &trainer.adam, &trainer.rng)?;
    let echo = trainer.model.describe()?;
    let mut arch = serde_json::to_string_pretty(&echo).map_err(|e| Failure::Io(e.to_string()))?;
    arch.push('\n');
    write(&out.join("architecture.json"), &arch)?;
    let mut loss = String::from("epoch,train_loss\n");
    for (e, l) in curves.train.iter().enumerate() {
        let _ = writeln!(loss, "{},{l}", e + 1);
    }
    write(&out.join("loss.csv"), &loss)?;
    println!(
        "trained {} on {} samples: final loss {:.4}, training accuracy {:.2}%, {} parameters",
        cfg.model.architecture.display_name(),
        set.len(),
        curves.train.last().copied().unwrap_or(f64::NAN),
        100.0 * correct as f64 / set.len() as f64,
        echo.param_count
    );
    Ok(())
}

fn run_cv(cfg: &RunConfig, dataset: &Dataset, jobs: usize, timing: bool, log: &Log) -> Result<CvReport, Failure> {
    let progress = |m: &str| eprintln!("{m}");
    let opts = CvOptions {
        jobs: jobs.max(1),
        timing,
        progress: if log.quiet { None } else { Some(&progress) },
    };
    Ok(cross_validate(dataset, &cfg.model, &cfg.train_config(), &opts)?)
}

pub fn cv(cfg: &RunConfig, out: &Path, jobs: usize, timing: bool, log: &Log) -> Result<(), Failure> {
    cfg.echo(out)?;
    let dataset = normalized(cfg, log)?;
    let report = run_cv(cfg, &dataset, jobs, timing, log)?;
    let arch = cfg.model.architecture;
    let metrics = MetricsFile::new(arch.cli_name(), cfg.train.seed, &report);
    export_report(out, &[metrics])?;
    if let Some(att) = &report.attention {
        export_attention(out, att)?;
    }
    println!("{}", accuracy_header());
    println!("{}", accuracy_row(arch.display_name(), &report.aggregate));
    Ok(())
}

pub fn ablate(cfg: &RunConfig, out: &Path, jobs: usize, log: &Log) -> Result<(), Failure> {
    cfg.echo(out)?;
    let dataset = normalized(cfg, log)?;
    let mut runs = Vec::new();
    let mut table = String::from("method,params,test_ms,accuracy\n");
    for variant in HeadVariant::ALL {
        log.info(&format!("variant {}", variant.display_name()));
        let mut vcfg = cfg.clone();
        vcfg.model.head_variant = variant;
        let report = run_cv(&vcfg, &dataset, jobs, true, log)?;
        let _ = writeln!(
            table,
            "{},{},{:.4},{:.4}",
            variant.display_name(),
            report.param_count,
            report.per_sample_test_ms.unwrap_or(f64::NAN),
            100.0 * report.aggregate.accuracy
        );
        runs.push(MetricsFile::new(variant.cli_name(), cfg.train.seed, &report));
    }
    export_report(out, &runs)?;
    write(&out.join("ablation.csv"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn attention(cfg: &RunConfig, out: &Path, jobs: usize, log: &Log) -> Result<(), Failure> {
    let mut cfg = cfg.clone();
    cfg.model.attention = true;
    cfg.echo(out)?;
    let dataset = normalized(&cfg, log)?;
    let report = run_cv(&cfg, &dataset, jobs, false, log)?;
    let att = report
        .attention
        .as_ref()
        .ok_or_else(|| Failure::Config(format!("{} has no gates", cfg.model.architecture.cli_name())))?;
    export_attention(out, att)?;
    export_report(out, &[MetricsFile::new(cfg.model.architecture.cli_name(), cfg.train.seed, &report)])?;
    let name = |j: usize| JointId::new(j).map_or("?", |id| id.name());
    for p in att.top_pairs.iter().take(5) {
        println!("{} -> {}: {:.4}", name(p.anchor), name(p.partner), p.importance);
    }
    if att.per_joint_aggregate.len() == NUM_JOINTS {
        let best = (0..NUM_JOINTS)
            .max_by(|&a, &b| att.per_joint_aggregate[a].total_cmp(&att.per_joint_aggregate[b]))
            .unwrap_or(0);
        println!("most important joint (pair aggregate): {}", name(best + 1));
    }
    Ok(())
}

/// Re-exports saved metrics; the run configuration found next to the first
/// metrics file is carried over as the echo.
pub fn report(metrics: &[PathBuf], out: &Path, log: &Log) -> Result<(), Failure> {
    let runs = metrics
        .iter()
        .map(|p| MetricsFile::read(p))
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let echo = metrics[0].parent().unwrap_or(Path::new(".")).join(ECHO_FILE);
    if echo.is_file() {
        let dst = out.join(ECHO_FILE);
        if dst != echo {
            fs::copy(&echo, &dst).map_err(|e| Failure::io(&dst, e))?;
        }
    } else {
        log.info(&format!("no {ECHO_FILE} next to {}", metrics[0].display()));
    }
    let files = export_report(out, &runs)?;
    log.info(&format!("wrote {} files", files.len()));
    println!("{}", accuracy_header());
    for r in &runs {
        let name = Architecture::parse(&r.variant)
            .map(|a| a.display_name())
            .or_else(|| HeadVariant::parse(&r.variant).map(|h| h.display_name()))
            .unwrap_or(&r.variant);
        println!("{}", accuracy_row(name, &r.average));
    }
    Ok(())
}
