//! Parametric synthetic walking motions with class-specific deformations,
//! so the whole pipeline runs without the clinical recordings.
//!
//! Coordinates are meters with Y up; the subject walks along +Z and its
//! left side is +X. One sequence spans exactly one gait cycle.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{write_dataset, ClassLabel, Dataset, Frame, MotionSample, NUM_CLASSES};
use crate::error::{Error, Result};

pub const MIN_FRAMES: usize = 10;
pub const DEFAULT_NOISE_SIGMA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub label: ClassLabel,
    pub frames: usize,
    /// Forward travel over the cycle, meters.
    pub stride_length: f64,
    /// Gait cycles per second.
    pub cadence: f64,
    pub noise_sigma: f64,
    /// Fractional loss of swing amplitude on the weaker side.
    pub asymmetry: f64,
    pub tremor_amplitude: f64,
    pub tremor_frequency: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Typical parameters for `label`.
    pub fn for_class(label: ClassLabel, frames: usize, seed: u64) -> Self {
        let (stride_length, cadence) = match label {
            ClassLabel::Healthy => (1.3, 1.0),
            ClassLabel::JointProblem => (1.1, 0.9),
            ClassLabel::MuscleWeakness => (0.9, 0.85),
            ClassLabel::NeurologicalDefect => (0.8, 0.95),
        };
        let nd = label == ClassLabel::NeurologicalDefect;
        SynthConfig {
            label,
            frames,
            stride_length,
            cadence,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            asymmetry: if label == ClassLabel::MuscleWeakness { 0.35 } else { 0.0 },
            tremor_amplitude: if nd { 0.015 } else { 0.0 },
            tremor_frequency: if nd { 5.0 } else { 0.0 },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < MIN_FRAMES {
            return Err(Error::Config(format!(
                "synthetic sequences need at least {MIN_FRAMES} frames, got {}",
                self.frames
            )));
        }
        let magnitudes = [
            ("stride_length", self.stride_length),
            ("cadence", self.cadence),
            ("noise_sigma", self.noise_sigma),
            ("tremor_amplitude", self.tremor_amplitude),
            ("tremor_frequency", self.tremor_frequency),
        ];
        for (name, v) in magnitudes {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        if self.stride_length == 0.0 || self.cadence == 0.0 {
            return Err(Error::Config("stride_length and cadence must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.asymmetry) {
            return Err(Error::Config(format!("asymmetry {} outside [0, 1]", self.asymmetry)));
        }
        Ok(())
    }
}

struct Body {
    hip_half_width: f64,
    thigh: f64,
    shin: f64,
    foot: f64,
    spine: f64,
    neck: f64,
    head: f64,
    clavicle: f64,
    shoulder_half_width: f64,
    upper_arm: f64,
    forearm: f64,
}

impl Body {
    fn scaled(s: f64) -> Self {
        Body {
            hip_half_width: 0.09 * s,
            thigh: 0.44 * s,
            shin: 0.42 * s,
            foot: 0.14 * s,
            spine: 0.22 * s,
            neck: 0.50 * s,
            head: 0.65 * s,
            clavicle: 0.05 * s,
            shoulder_half_width: 0.18 * s,
            upper_arm: 0.29 * s,
            forearm: 0.26 * s,
        }
    }
}

/// Angles of one side of the body at a gait phase, radians.
#[derive(Clone, Copy)]
struct Swing {
    hip: f64,
    knee: f64,
    ankle: f64,
    shoulder: f64,
    elbow: f64,
}

#[derive(Clone, Copy)]
struct SideStyle {
    amplitude: f64,
    knee_limit: f64,
    ankle_limit: f64,
}

const FREE: SideStyle = SideStyle {
    amplitude: 1.0,
    knee_limit: f64::INFINITY,
    ankle_limit: f64::INFINITY,
};

fn swing(phase: f64, style: SideStyle, arm_amplitude: f64) -> Swing {
    let a = style.amplitude;
    let knee = 0.55 * a * (1.0 - (phase + 0.6).cos());
    let ankle = 0.25 * a * (phase - 0.8).sin();
    Swing {
        hip: 0.42 * a * phase.sin(),
        knee: knee.min(style.knee_limit),
        ankle: ankle.clamp(-style.ankle_limit, style.ankle_limit),
        shoulder: -arm_amplitude * a * phase.sin(),
        elbow: 0.35 + 0.15 * a * phase.sin(),
    }
}

/// Rotation about X that swings a hanging segment forward (+Z) for positive angles.
fn pitch(v: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    [v[0], v[1] * c + v[2] * s, -v[1] * s + v[2] * c]
}

fn yaw(v: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    [c * v[0] + s * v[2], v[1], -s * v[0] + c * v[2]]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(v: [f64; 3], k: f64) -> [f64; 3] {
    [v[0] * k, v[1] * k, v[2] * k]
}

const DOWN: [f64; 3] = [0.0, -1.0, 0.0];
const FORWARD: [f64; 3] = [0.0, 0.0, 1.0];

/// Leg joints relative to the hips centre: hip joint, knee, ankle, toes.
/// `side` is -1 for right, +1 for left.
fn leg(body: &Body, side: f64, sw: Swing, pelvis_yaw: f64) -> [[f64; 3]; 4] {
    let hip = [side * body.hip_half_width, 0.0, 0.0];
    let knee = add(hip, scale(pitch(DOWN, sw.hip), body.thigh));
    let ankle = add(knee, scale(pitch(DOWN, sw.hip - sw.knee), body.shin));
    let toes = add(ankle, scale(pitch(FORWARD, sw.hip - sw.knee + sw.ankle), body.foot));
    [hip, knee, ankle, toes].map(|p| yaw(p, pelvis_yaw))
}

/// Arm joints relative to the hips centre: clavicle, shoulder, elbow, wrist.
fn arm(body: &Body, side: f64, sw: Swing, trunk_yaw: f64, lean: f64) -> [[f64; 3]; 4] {
    let clavicle = pitch([side * body.clavicle, body.neck - 0.03, 0.0], -lean);
    let shoulder = pitch([side * body.shoulder_half_width, body.neck - 0.05, 0.0], -lean);
    let elbow = add(shoulder, scale(pitch(DOWN, sw.shoulder), body.upper_arm));
    let wrist = add(elbow, scale(pitch(DOWN, sw.shoulder + sw.elbow), body.forearm));
    [clavicle, shoulder, elbow, wrist].map(|p| yaw(p, trunk_yaw))
}

/// Joints shaken by tremor (zero-based): head, both forearms and hands.
const TREMOR_JOINTS: [usize; 5] = [7, 10, 11, 14, 15];

/// One synthetic walking cycle for `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<MotionSample> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let body = Body::scaled(rng.random_range(0.92..1.08));
    let vigor = rng.random_range(0.9..1.1);
    let affected_left = rng.random_bool(0.5);

    let base = SideStyle {
        amplitude: vigor,
        ..FREE
    };
    let (mut right, mut left) = (base, base);
    let mut arm_amplitude = 0.35;
    let mut lean = 0.0;
    {
        let affected = if affected_left { &mut left } else { &mut right };
        match cfg.label {
            ClassLabel::Healthy => {}
            ClassLabel::JointProblem => {
                affected.knee_limit = 0.3;
                affected.ankle_limit = 0.05;
                affected.amplitude *= 0.8;
            }
            ClassLabel::MuscleWeakness => {
                right.amplitude *= 0.65;
                left.amplitude *= 0.65;
            }
            ClassLabel::NeurologicalDefect => {
                arm_amplitude = 0.12;
                lean = 0.2;
            }
        }
    }
    // asymmetry weakens one side whatever the class
    if affected_left {
        left.amplitude *= 1.0 - cfg.asymmetry;
    } else {
        right.amplitude *= 1.0 - cfg.asymmetry;
    }

    let tremor_phase: Vec<[f64; 3]> = TREMOR_JOINTS
        .iter()
        .map(|_| [(); 3].map(|_| rng.random_range(0.0..TAU)))
        .collect();
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;

    let stand = body.thigh + body.shin + 0.08;
    let last = (cfg.frames - 1) as f64;
    let mut positions = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let u = t as f64 / last;
        let phase = TAU * u;
        let time = u / cfg.cadence;
        let root = [
            0.02 * phase.sin(),
            stand + 0.02 * (2.0 * phase).cos(),
            cfg.stride_length * u,
        ];
        let pelvis_yaw = 0.08 * phase.sin();

        let sw_r = swing(phase, right, arm_amplitude);
        let sw_l = swing(phase + PI, left, arm_amplitude);
        let leg_r = leg(&body, -1.0, sw_r, pelvis_yaw);
        let leg_l = leg(&body, 1.0, sw_l, pelvis_yaw);
        let arm_r = arm(&body, -1.0, sw_r, -pelvis_yaw, lean);
        let arm_l = arm(&body, 1.0, sw_l, -pelvis_yaw, lean);
        let axial = |h: f64| pitch([0.0, h, 0.0], -lean);

        let rel: Frame = [
            [0.0; 3],
            leg_r[0],
            leg_r[1],
            leg_r[2],
            leg_r[3],
            axial(body.spine),
            axial(body.neck),
            axial(body.head),
            arm_l[0],
            arm_l[1],
            arm_l[2],
            arm_l[3],
            arm_r[0],
            arm_r[1],
            arm_r[2],
            arm_r[3],
            leg_l[0],
            leg_l[1],
            leg_l[2],
            leg_l[3],
        ];
        let mut frame = rel.map(|p| add(p, root));
        for (k, &j) in TREMOR_JOINTS.iter().enumerate() {
            for c in 0..3 {
                let w = TAU * cfg.tremor_frequency * time + tremor_phase[k][c];
                frame[j][c] += cfg.tremor_amplitude * w.sin();
            }
        }
        if cfg.noise_sigma > 0.0 {
            for v in frame.iter_mut().flatten() {
                *v += noise.sample(&mut rng);
            }
        }
        positions.push(frame);
    }
    Ok(MotionSample::new(
        format!("{}-{}", cfg.label.as_str(), cfg.seed),
        cfg.label,
        positions,
    ))
}

/// In-memory dataset with `counts[c]` samples of class `c` (class order
/// healthy, joint problem, muscle weakness, neurological defect), each with
/// jittered class parameters.
pub fn synthesize(counts: [usize; NUM_CLASSES], seed: u64, frames: usize) -> Result<Dataset> {
    if counts.iter().all(|&n| n == 0) {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(counts.iter().sum());
    for (label, &n) in ClassLabel::ALL.iter().zip(&counts) {
        for k in 0..n {
            let mut cfg = SynthConfig::for_class(*label, frames, rng.random());
            cfg.stride_length *= rng.random_range(0.85..1.15);
            cfg.cadence *= rng.random_range(0.9..1.1);
            cfg.asymmetry = (cfg.asymmetry * rng.random_range(0.7..1.3)).min(1.0);
            cfg.tremor_amplitude *= rng.random_range(0.7..1.3);
            if cfg.tremor_frequency > 0.0 {
                cfg.tremor_frequency = rng.random_range(4.0..6.0);
            }
            let mut sample = generate(&cfg)?;
            sample.id = format!("{}-{k:03}", label.as_str());
            samples.push(sample);
        }
    }
    Dataset::new(samples)
}

/// Writes [`synthesize`]'s output as motion CSVs plus a manifest under `dir`.
pub fn generate_dataset(
    counts: [usize; NUM_CLASSES],
    seed: u64,
    frames: usize,
    dir: &Path,
) -> Result<(Dataset, PathBuf)> {
    let dataset = synthesize(counts, seed, frames)?;
    let manifest = write_dataset(dir, &dataset.samples)?;
    Ok((dataset, manifest))
}
