//! Browser bindings for the gait demo page: synthetic walking motions, mixup
//! previews, and relative joint displacement heatmaps.
//!
//! Positions are returned flat, frame-major, `[t][joint][xyz]`.

use gaitnet::augment::mixup;
use gaitnet::data::{align_spatial, ClassLabel, JointId, MotionSample, BONES, NUM_JOINTS};
use gaitnet::features::{pair_flat, rjdp_from_positions};
use gaitnet::synth::{generate, SynthConfig};
use wasm_bindgen::prelude::*;

fn label(class: &str) -> Result<ClassLabel, String> {
    ClassLabel::parse(class).ok_or_else(|| {
        let known: Vec<_> = ClassLabel::ALL.iter().map(|c| c.as_str()).collect();
        format!("unknown class `{class}`; expected one of {}", known.join(", "))
    })
}

fn motion(class: &str, frames: usize, seed: u32, noise: f64) -> Result<MotionSample, String> {
    let cfg = SynthConfig {
        noise_sigma: noise,
        ..SynthConfig::for_class(label(class)?, frames, u64::from(seed))
    };
    let sample = generate(&cfg).map_err(|e| e.to_string())?;
    align_spatial(&sample).map_err(|e| e.to_string())
}

fn flat(sample: &MotionSample) -> Vec<f64> {
    sample.flat().collect()
}

#[wasm_bindgen]
pub fn joint_count() -> usize {
    NUM_JOINTS
}

#[wasm_bindgen]
pub fn joint_names() -> Vec<String> {
    JointId::all().map(|j| j.name().to_string()).collect()
}

#[wasm_bindgen]
pub fn class_names() -> Vec<String> {
    ClassLabel::ALL.iter().map(|c| c.as_str().to_string()).collect()
}

/// Parent/child pairs of zero-based joint indices, flattened.
#[wasm_bindgen]
pub fn bones() -> Vec<u32> {
    BONES.iter().flat_map(|&(a, b)| [a as u32, b as u32]).collect()
}

/// One synthetic walking cycle, aligned so frame-0 hips sit at the origin
/// and the walk heads along +Z.
#[wasm_bindgen]
pub fn synth_motion(class: &str, frames: usize, seed: u32, noise: f64) -> Result<Vec<f64>, String> {
    Ok(flat(&motion(class, frames, seed, noise)?))
}

/// `lambda * a + (1 - lambda) * b` for motions of two classes.
#[wasm_bindgen]
pub fn mixup_preview(class_a: &str, class_b: &str, lambda: f64, frames: usize, seed: u32) -> Result<Vec<f64>, String> {
    let a = motion(class_a, frames, seed, 0.0)?;
    let b = motion(class_b, frames, seed.wrapping_add(1), 0.0)?;
    let mixed = mixup(&a, &b, lambda).map_err(|e| e.to_string())?;
    Ok(flat(&mixed))
}

/// Euclidean length of every relative displacement at one frame as a
/// row-major `J x J` matrix (row = anchor); the diagonal is zero.
#[wasm_bindgen]
pub fn rjdp_heatmap(positions: &[f64], frames: usize, frame: usize) -> Result<Vec<f64>, String> {
    if frames == 0 || positions.len() != frames * NUM_JOINTS * 3 {
        return Err(format!("expected {} values for {frames} frames", frames * NUM_JOINTS * 3));
    }
    if frame >= frames {
        return Err(format!("frame {frame} out of range 0..{frames}"));
    }
    let stride = NUM_JOINTS * 3;
    let one = &positions[frame * stride..(frame + 1) * stride];
    let rjdp = rjdp_from_positions(one, 1, NUM_JOINTS);
    let mut out = vec![0.0; NUM_JOINTS * NUM_JOINTS];
    for i in 0..NUM_JOINTS {
        for j in (0..NUM_JOINTS).filter(|&j| j != i) {
            let k = pair_flat(i, j, NUM_JOINTS).map_err(|e| e.to_string())? * 3;
            out[i * NUM_JOINTS + j] = rjdp[k..k + 3].iter().map(|v| v * v).sum::<f64>().sqrt();
        }
    }
    Ok(out)
}
