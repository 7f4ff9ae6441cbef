use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cv::CvReport;
use super::metrics::{accuracy_header, accuracy_row, ClassMetrics, MetricsReport};
use super::svg;
use crate::data::{ClassLabel, JointId};
use crate::error::{Error, Result};
use crate::model::AttentionReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldEntry {
    pub fold: usize,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    pub per_class: BTreeMap<ClassLabel, ClassMetrics>,
    pub auc: BTreeMap<ClassLabel, f64>,
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub variant: String,
    pub seed: u64,
    pub folds: Vec<FoldEntry>,
    pub average: MetricsReport,
    pub fold_mean_accuracy: f64,
    pub param_count: usize,
    /// Wall-clock inference time; only filled when timing was requested so
    /// that reruns stay byte-identical by default.
    pub per_sample_test_ms: Option<f64>,
}

impl MetricsFile {
    pub fn new(variant: &str, seed: u64, cv: &CvReport) -> Self {
        MetricsFile {
            variant: variant.to_string(),
            seed,
            folds: cv
                .folds
                .iter()
                .map(|f| FoldEntry {
                    fold: f.fold,
                    accuracy: f.metrics.accuracy,
                    confusion: f.metrics.confusion.clone(),
                    per_class: f.metrics.per_class.clone(),
                    auc: f
                        .metrics
                        .per_class
                        .iter()
                        .filter_map(|(c, m)| m.auc.map(|a| (*c, a)))
                        .collect(),
                })
                .collect(),
            average: cv.aggregate.clone(),
            fold_mean_accuracy: cv.fold_mean_accuracy,
            param_count: cv.param_count,
            per_sample_test_ms: cv.per_sample_test_ms,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, serde_json::to_string_pretty(self)? + "\n")
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_file(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            file: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

fn write_run(dir: &Path, run: &MetricsFile) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let avg = &run.average;
    let mut written = Vec::new();
    let mut emit = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    run.write(&emit("metrics.json"))?;

    let mut header = vec!["true"];
    header.extend(ClassLabel::ALL.iter().map(|c| c.as_str()));
    csv_file(
        &emit("confusion.csv"),
        &header,
        ClassLabel::ALL.iter().map(|c| {
            let mut row = vec![c.as_str().to_string()];
            row.extend(avg.confusion[c.index()].iter().map(|v| v.to_string()));
            row
        }),
    )?;
    csv_file(
        &emit("roc.csv"),
        &["class", "fpr", "tpr"],
        avg.roc.iter().flat_map(|curve| {
            curve
                .points
                .iter()
                .map(|p| vec![curve.class.as_str().to_string(), p[0].to_string(), p[1].to_string()])
        }),
    )?;
    let epochs = avg.loss.train.len().max(avg.loss.test.len());
    let cell = |v: Option<&f64>| v.map(f64::to_string).unwrap_or_default();
    csv_file(
        &emit("loss.csv"),
        &["epoch", "train_loss", "test_loss"],
        (0..epochs).map(|e| vec![(e + 1).to_string(), cell(avg.loss.train.get(e)), cell(avg.loss.test.get(e))]),
    )?;
    write_file(&emit("accuracy.txt"), format!("{}\n{}\n", accuracy_header(), accuracy_row(&run.variant, avg)))?;

    write_file(&emit("confusion.svg"), svg::confusion(avg, &format!("{} confusion matrix", run.variant)))?;
    write_file(&emit("roc.svg"), svg::roc(avg, &format!("{} ROC (one-vs-rest)", run.variant)))?;
    write_file(&emit("loss.svg"), svg::loss(avg, &format!("{} loss", run.variant)))?;
    Ok(written)
}

/// Writes metrics, CSV tables, and SVG plots for every run. A single run is
/// written straight into `out_dir`; several runs go to one subdirectory
/// each, with a combined accuracy table on top.
pub fn export_report(out_dir: &Path, runs: &[MetricsFile]) -> Result<Vec<PathBuf>> {
    match runs {
        [] => Err(Error::Config("no reports to export".into())),
        [run] => write_run(out_dir, run),
        _ => {
            let mut written = Vec::new();
            let mut used = BTreeSet::new();
            let mut table = accuracy_header() + "\n";
            for run in runs {
                let mut name = run.variant.clone();
                let mut k = 2;
                while !used.insert(name.clone()) {
                    name = format!("{}-{k}", run.variant);
                    k += 1;
                }
                written.extend(write_run(&out_dir.join(&name), run)?);
                table += &accuracy_row(&name, &run.average);
                table.push('\n');
            }
            let p = out_dir.join("accuracy.txt");
            write_file(&p, table)?;
            written.push(p);
            Ok(written)
        }
    }
}

/// Writes gate-importance tables and plots of an attention run.
pub fn export_attention(out_dir: &Path, report: &AttentionReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str| {
        let p = out_dir.join(name);
        written.push(p.clone());
        p
    };
    let name = |zero_based: usize| AttentionReport::joint_name(zero_based).to_string();

    write_file(&emit("attention.json"), serde_json::to_string_pretty(report)? + "\n")?;
    let streams = [("jp", &report.joint_importance), ("rjdp", &report.per_joint_mean)];
    csv_file(
        &emit("joint_importance.csv"),
        &["stream", "joint", "name", "importance"],
        streams.iter().flat_map(|(stream, values)| {
            values
                .iter()
                .enumerate()
                .map(move |(j, v)| vec![stream.to_string(), (j + 1).to_string(), name(j), v.to_string()])
        }),
    )?;
    csv_file(
        &emit("per_joint_aggregate.csv"),
        &["joint", "name", "aggregate", "mean"],
        (0..report.per_joint_aggregate.len()).map(|j| {
            vec![
                (j + 1).to_string(),
                name(j),
                report.per_joint_aggregate[j].to_string(),
                report.per_joint_mean[j].to_string(),
            ]
        }),
    )?;
    let pair_name = |a: usize, p: usize| format!("{} - {}", name(a - 1), name(p - 1));
    csv_file(
        &emit("pair_importance.csv"),
        &["pair", "anchor", "partner", "anchor_name", "partner_name", "importance"],
        crate::features::PairIndex::all().map(|p| {
            vec![
                p.flat.to_string(),
                p.anchor.index().to_string(),
                p.partner.index().to_string(),
                p.anchor.name().to_string(),
                p.partner.name().to_string(),
                report.pair_importance[p.flat].to_string(),
            ]
        }),
    )?;
    csv_file(
        &emit("top_pairs.csv"),
        &["rank", "anchor", "partner", "anchor_name", "partner_name", "importance"],
        report.top_pairs.iter().enumerate().map(|(k, s)| {
            let named = |i: usize| JointId::new(i).map(JointId::name).unwrap_or("?").to_string();
            vec![
                (k + 1).to_string(),
                s.anchor.to_string(),
                s.partner.to_string(),
                named(s.anchor),
                named(s.partner),
                s.importance.to_string(),
            ]
        }),
    )?;

    write_file(
        &emit("joint_importance.svg"),
        svg::skeleton(
            &[
                ("JP joint gates", &report.joint_importance),
                ("RJDP pair gates per joint", &report.per_joint_aggregate),
            ],
            "Joint importance",
        ),
    )?;
    let labels: Vec<String> = report.top_pairs.iter().map(|s| pair_name(s.anchor, s.partner)).collect();
    let values: Vec<f64> = report.top_pairs.iter().map(|s| s.importance).collect();
    write_file(
        &emit("top_pairs.svg"),
        svg::bars(&labels, &values, &format!("Top {} relative joint displacements", labels.len())),
    )?;
    Ok(written)
}
