//! Skeleton walking sequences: joint and class vocabularies, the motion CSV /
//! JSON manifest formats, and temporal + spatial normalization.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_JOINTS: usize = 20;
pub const COORDS: usize = 3;
pub const NUM_CLASSES: usize = 4;

/// Default number of frames every cycle is resampled to.
pub const DEFAULT_FRAMES: usize = 100;

/// Minimum horizontal hips travel for a usable walking cycle, in meters.
pub const MIN_HIPS_TRAVEL: f64 = 1e-6;

/// Parent/child joint pairs of the skeleton, zero-based.
pub const BONES: [(usize, usize); NUM_JOINTS - 1] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    (0, 5),
    (5, 6),
    (6, 7),
    (6, 8),
    (8, 9),
    (9, 10),
    (10, 11),
    (6, 12),
    (12, 13),
    (13, 14),
    (14, 15),
    (0, 16),
    (16, 17),
    (17, 18),
    (18, 19),
];

/// One skeleton pose: `[joint][x, y, z]` in meters, +Y up.
pub type Frame = [[f64; COORDS]; NUM_JOINTS];

const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "Hips",
    "Right Upper Leg",
    "Right Leg",
    "Right Foot",
    "Right Toes",
    "Spine",
    "Neck",
    "Head",
    "Left Shoulder",
    "Left Arm",
    "Left Forearm",
    "Left Hand",
    "Right Shoulder",
    "Right Arm",
    "Right Forearm",
    "Right Hand",
    "Left Upper Leg",
    "Left Leg",
    "Left Foot",
    "Left Toes",
];

/// 1-based joint number of the 20-joint skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JointId(u8);

impl JointId {
    pub const HIPS: JointId = JointId(1);

    pub fn new(index: usize) -> Option<Self> {
        (1..=NUM_JOINTS)
            .contains(&index)
            .then_some(JointId(index as u8))
    }

    pub fn from_zero_based(index: usize) -> Option<Self> {
        Self::new(index + 1)
    }

    pub fn from_name(name: &str) -> Option<Self> {
        JOINT_NAMES
            .iter()
            .position(|n| n.eq_ignore_ascii_case(name))
            .map(|i| JointId(i as u8 + 1))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn zero_based(self) -> usize {
        self.0 as usize - 1
    }

    pub fn name(self) -> &'static str {
        JOINT_NAMES[self.zero_based()]
    }

    pub fn all() -> impl Iterator<Item = JointId> {
        (1..=NUM_JOINTS as u8).map(JointId)
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassLabel {
    Healthy,
    JointProblem,
    MuscleWeakness,
    NeurologicalDefect,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] = [
        ClassLabel::Healthy,
        ClassLabel::JointProblem,
        ClassLabel::MuscleWeakness,
        ClassLabel::NeurologicalDefect,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Manifest spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Healthy => "healthy",
            ClassLabel::JointProblem => "joint_problem",
            ClassLabel::MuscleWeakness => "muscle_weakness",
            ClassLabel::NeurologicalDefect => "neurological_defect",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ClassLabel::Healthy => "Healthy",
            ClassLabel::JointProblem => "Joint Problem",
            ClassLabel::MuscleWeakness => "Muscle Weakness",
            ClassLabel::NeurologicalDefect => "Neurological Defect",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSample {
    pub id: String,
    pub label: ClassLabel,
    pub positions: Vec<Frame>,
    pub is_synthetic: bool,
}

impl MotionSample {
    pub fn new(id: impl Into<String>, label: ClassLabel, positions: Vec<Frame>) -> Self {
        MotionSample {
            id: id.into(),
            label,
            positions,
            is_synthetic: false,
        }
    }

    pub fn frames(&self) -> usize {
        self.positions.len()
    }

    /// Joint-major flattening `[t][j][c]`.
    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.positions.iter().flatten().flatten().copied()
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::invalid(&self.id, "no frames"));
        }
        for (t, frame) in self.positions.iter().enumerate() {
            for (j, joint) in frame.iter().enumerate() {
                if joint.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(
                        &self.id,
                        format!("non-finite coordinate at frame {t}, joint {}", j + 1),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<MotionSample>,
    pub class_counts: BTreeMap<ClassLabel, usize>,
}

impl Dataset {
    pub fn new(samples: Vec<MotionSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = HashSet::new();
        for s in &samples {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::invalid(&s.id, "duplicate sample id"));
            }
        }
        let class_counts = count_classes(&samples);
        Ok(Dataset {
            samples,
            class_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: ClassLabel) -> usize {
        self.class_counts.get(&label).copied().unwrap_or(0)
    }

    /// Resample every sample to `frames` and align it; see [`normalize`].
    pub fn normalized(&self, frames: usize) -> Result<Dataset> {
        let samples = self
            .samples
            .iter()
            .map(|s| normalize(s, frames))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples)
    }
}

pub fn count_classes(samples: &[MotionSample]) -> BTreeMap<ClassLabel, usize> {
    let mut counts: BTreeMap<ClassLabel, usize> = ClassLabel::ALL.iter().map(|&c| (c, 0)).collect();
    for s in samples {
        *counts.entry(s.label).or_default() += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub label: String,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(entries)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads every motion listed in a manifest. Files are resolved relative to
/// the manifest's directory.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let entries = read_manifest(manifest_path)?;
    if entries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut samples = Vec::with_capacity(entries.len());
    for (k, entry) in entries.iter().enumerate() {
        let label = ClassLabel::parse(&entry.label).ok_or_else(|| Error::Parse {
            file: manifest_path.to_path_buf(),
            line: k + 1,
            message: format!("unknown label `{}` for `{}`", entry.label, entry.id),
        })?;
        let file = base.join(&entry.file);
        let positions = read_motion_csv(&file)?;
        samples.push(MotionSample::new(entry.id.clone(), label, positions));
    }
    Dataset::new(samples)
}

/// Reads one motion: a headerless CSV with 60 columns per frame.
pub fn read_motion_csv(path: &Path) -> Result<Vec<Frame>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        file: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(0, format!("{other:?}")),
        })?;

    let mut frames = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 1;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != NUM_JOINTS * COORDS {
            return Err(parse_err(
                line,
                format!(
                    "expected {} columns, found {}",
                    NUM_JOINTS * COORDS,
                    record.len()
                ),
            ));
        }
        let mut frame = [[0.0; COORDS]; NUM_JOINTS];
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("column {}: not a number: `{cell}`", col + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(
                    line,
                    format!("non-finite value in frame {} column {}", line - 1, col + 1),
                ));
            }
            frame[col / COORDS][col % COORDS] = v;
        }
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(parse_err(0, "motion file has no frames".into()));
    }
    Ok(frames)
}

pub fn write_motion_csv(path: &Path, positions: &[Frame]) -> Result<()> {
    let mut out = String::with_capacity(positions.len() * NUM_JOINTS * COORDS * 12);
    for frame in positions {
        let mut first = true;
        for v in frame.iter().flatten() {
            if !first {
                out.push(',');
            }
            first = false;
            // `{}` prints the shortest representation that parses back exactly.
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes every sample as `<id>.csv` next to a `manifest.json`.
pub fn write_dataset(dir: &Path, samples: &[MotionSample]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(samples.len());
    for s in samples {
        let file = format!("{}.csv", s.id);
        write_motion_csv(&dir.join(&file), &s.positions)?;
        entries.push(ManifestEntry {
            id: s.id.clone(),
            file,
            label: s.label.as_str().to_string(),
        });
    }
    let manifest = dir.join("manifest.json");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}

/// Linearly resamples a sequence onto `t_target` uniformly spaced frames
/// spanning the same interval.
pub fn resample_temporal(sample: &MotionSample, t_target: usize) -> Result<MotionSample> {
    let src = sample.frames();
    if src < 2 {
        return Err(Error::invalid(&sample.id, format!("need at least 2 frames, have {src}")));
    }
    if t_target < 2 {
        return Err(Error::Config(format!("target frame count {t_target} < 2")));
    }
    let span = (src - 1) as f64;
    let steps = (t_target - 1) as f64;
    let positions = (0..t_target)
        .map(|k| {
            let s = (k as f64 * span) / steps;
            let i = (s.floor() as usize).min(src - 2);
            let f = s - i as f64;
            let (a, b) = (&sample.positions[i], &sample.positions[i + 1]);
            let mut frame = [[0.0; COORDS]; NUM_JOINTS];
            for j in 0..NUM_JOINTS {
                for c in 0..COORDS {
                    frame[j][c] = (1.0 - f) * a[j][c] + f * b[j][c];
                }
            }
            frame
        })
        .collect();
    Ok(MotionSample {
        positions,
        ..sample.clone()
    })
}

/// Rigid alignment: frame-0 hips to the origin, then a rotation about +Y so
/// the horizontal net hips displacement points along +Z.
pub fn align_spatial(sample: &MotionSample) -> Result<MotionSample> {
    let hips = JointId::HIPS.zero_based();
    let first = *sample
        .positions
        .first()
        .ok_or_else(|| Error::invalid(&sample.id, "no frames"))?;
    let last = sample.positions[sample.frames() - 1];
    let origin = first[hips];
    let dx = last[hips][0] - origin[0];
    let dz = last[hips][2] - origin[2];
    let r = dx.hypot(dz);
    if r <= MIN_HIPS_TRAVEL {
        return Err(Error::invalid(
            &sample.id,
            format!("degenerate trajectory: hips moved {r:.3e} m horizontally"),
        ));
    }
    let (cos, sin) = (dz / r, -dx / r);
    let positions = sample
        .positions
        .iter()
        .map(|frame| {
            let mut out = [[0.0; COORDS]; NUM_JOINTS];
            for (o, p) in out.iter_mut().zip(frame) {
                let x = p[0] - origin[0];
                let y = p[1] - origin[1];
                let z = p[2] - origin[2];
                *o = [x * cos + z * sin, y, -x * sin + z * cos];
            }
            out
        })
        .collect();
    Ok(MotionSample {
        positions,
        ..sample.clone()
    })
}

/// Validation, temporal resampling, then spatial alignment.
pub fn normalize(sample: &MotionSample, frames: usize) -> Result<MotionSample> {
    sample.validate()?;
    align_spatial(&resample_temporal(sample, frames)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sample(frames: usize, seed: u64) -> MotionSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions = (0..frames)
            .map(|t| {
                let mut f = [[0.0; 3]; NUM_JOINTS];
                for joint in f.iter_mut() {
                    for v in joint.iter_mut() {
                        *v = rng.random_range(-1.0..1.0);
                    }
                }
                // hips travel so alignment is well defined
                f[0][0] += 0.3 * t as f64 / frames as f64;
                f[0][2] += 0.5 * t as f64 / frames as f64;
                f
            })
            .collect();
        MotionSample::new(format!("r{seed}"), ClassLabel::Healthy, positions)
    }

    fn distances(frame: &Frame) -> Vec<f64> {
        let mut d = Vec::new();
        for i in 0..NUM_JOINTS {
            for j in i + 1..NUM_JOINTS {
                let s: f64 = (0..3).map(|c| (frame[i][c] - frame[j][c]).powi(2)).sum();
                d.push(s.sqrt());
            }
        }
        d
    }

    #[test]
    fn joint_names_are_bijective() {
        for j in JointId::all() {
            assert_eq!(JointId::from_name(j.name()), Some(j));
        }
        assert_eq!(JointId::all().count(), 20);
        assert_eq!(JointId::new(20).unwrap().name(), "Left Toes");
        assert!(JointId::new(0).is_none());
        assert!(JointId::new(21).is_none());
    }

    #[test]
    fn class_encoding_is_stable() {
        for (i, c) in ClassLabel::ALL.iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(ClassLabel::parse(c.as_str()), Some(*c));
        }
        assert_eq!(ClassLabel::parse("sick"), None);
    }

    #[test]
    fn resample_constant_pose() {
        let mut s = random_sample(50, 1);
        let pose = s.positions[0];
        s.positions.iter_mut().for_each(|f| *f = pose);
        let r = resample_temporal(&s, 100).unwrap();
        assert_eq!(r.frames(), 100);
        for f in &r.positions {
            for j in 0..NUM_JOINTS {
                for c in 0..3 {
                    assert!((f[j][c] - pose[j][c]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn resample_linear_ramp() {
        let mut s = random_sample(51, 2);
        for (t, f) in s.positions.iter_mut().enumerate() {
            f[3][1] = t as f64 / 50.0;
        }
        let r = resample_temporal(&s, 101).unwrap();
        for (k, f) in r.positions.iter().enumerate() {
            assert!((f[3][1] - k as f64 / 100.0).abs() < 1e-12, "frame {k}");
        }
    }

    /// Independent piecewise-linear evaluator at source time `s`.
    fn brute_force_eval(src: &[Frame], s: f64, j: usize, c: usize) -> f64 {
        for i in 0..src.len() - 1 {
            let (t0, t1) = (i as f64, (i + 1) as f64);
            if s >= t0 && s <= t1 {
                let w = (s - t0) / (t1 - t0);
                return src[i][j][c] + w * (src[i + 1][j][c] - src[i][j][c]);
            }
        }
        unreachable!("time {s} outside source span")
    }

    #[test]
    fn resample_matches_brute_force() {
        let s = random_sample(73, 3);
        let r = resample_temporal(&s, 100).unwrap();
        for k in 0..100 {
            let time = k as f64 * 72.0 / 99.0;
            for j in 0..NUM_JOINTS {
                for c in 0..3 {
                    let want = brute_force_eval(&s.positions, time, j, c);
                    assert!((r.positions[k][j][c] - want).abs() < 1e-12);
                }
            }
        }
        assert_eq!(r.positions[0], s.positions[0]);
        assert_eq!(r.positions[99], s.positions[72]);
    }

    #[test]
    fn resample_identity_is_exact() {
        let s = random_sample(40, 4);
        assert_eq!(resample_temporal(&s, 40).unwrap(), s);
    }

    #[test]
    fn resample_rejects_short_input() {
        let s = random_sample(1, 5);
        assert!(resample_temporal(&s, 10).is_err());
        let s = random_sample(5, 5);
        assert!(resample_temporal(&s, 1).is_err());
    }

    fn walking_along_z(frames: usize) -> MotionSample {
        let mut s = random_sample(frames, 6);
        let base = s.positions[0][0];
        for (t, f) in s.positions.iter_mut().enumerate() {
            for joint in f.iter_mut() {
                joint[0] -= base[0];
                joint[1] -= base[1];
                joint[2] -= base[2];
            }
            // hips exactly on the +Z line
            f[0] = [0.0, 0.1 * t as f64, 0.02 * t as f64];
        }
        s
    }

    #[test]
    fn align_identity_when_already_aligned() {
        let s = walking_along_z(30);
        let a = align_spatial(&s).unwrap();
        for (f, g) in s.positions.iter().zip(&a.positions) {
            for j in 0..NUM_JOINTS {
                for c in 0..3 {
                    assert!((f[j][c] - g[j][c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn align_is_translation_invariant() {
        let s = random_sample(30, 7);
        let mut moved = s.clone();
        for f in moved.positions.iter_mut() {
            for joint in f.iter_mut() {
                joint[0] += 5.0;
                joint[2] += 3.0;
            }
        }
        let a = align_spatial(&s).unwrap();
        let b = align_spatial(&moved).unwrap();
        for (f, g) in a.positions.iter().zip(&b.positions) {
            for j in 0..NUM_JOINTS {
                for c in 0..3 {
                    assert!((f[j][c] - g[j][c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn align_rotates_x_walk_onto_z() {
        let mut s = walking_along_z(25);
        // rotate the whole thing by -90 degrees about Y with an explicit matrix: z -> x
        let rot = [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]];
        for f in s.positions.iter_mut() {
            for p in f.iter_mut() {
                let q = *p;
                for r in 0..3 {
                    p[r] = (0..3).map(|k| rot[r][k] * q[k]).sum();
                }
            }
        }
        let last = s.positions[24][0];
        assert!(last[0] > 0.0 && last[2].abs() < 1e-12, "walks along +X");
        let a = align_spatial(&s).unwrap();
        let net = a.positions[24][0];
        assert!(net[0].abs() < 1e-12);
        assert!(net[2] > 0.0);
        assert_eq!(a.positions[0][0], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn align_preserves_distances_and_is_idempotent() {
        let s = random_sample(20, 8);
        let a = align_spatial(&s).unwrap();
        let b = align_spatial(&a).unwrap();
        for t in 0..20 {
            let d0 = distances(&s.positions[t]);
            let d1 = distances(&a.positions[t]);
            for (x, y) in d0.iter().zip(&d1) {
                assert!((x - y).abs() < 1e-9);
            }
            for j in 0..NUM_JOINTS {
                for c in 0..3 {
                    assert!((a.positions[t][j][c] - b.positions[t][j][c]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn align_rejects_stationary_subject() {
        let mut s = random_sample(10, 9);
        for f in s.positions.iter_mut() {
            f[0] = [1.0, 1.0, 1.0];
        }
        assert!(matches!(
            align_spatial(&s),
            Err(Error::InvalidSample { .. })
        ));
    }

    #[test]
    fn dataset_rejects_duplicates_and_empty() {
        assert!(matches!(Dataset::new(vec![]), Err(Error::EmptyDataset)));
        let s = random_sample(3, 10);
        assert!(Dataset::new(vec![s.clone(), s]).is_err());
    }

    #[test]
    fn validate_flags_nan() {
        let mut s = random_sample(3, 11);
        s.positions[2][4][1] = f64::NAN;
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("frame 2"), "{err}");
    }
}
