//! Stream inputs: raw joint positions (JP) and ordered-pair relative joint
//! displacements (RJDP).
//!
//! RJDP pairs are laid out anchor-major: the `J - 1` pairs anchored at joint
//! `i` are contiguous, partners ascending with `i` itself skipped. A spatial
//! window of width `J - 1` moved with stride `J - 1` therefore sees exactly
//! one anchor joint.

use std::fs;
use std::path::Path;

use crate::data::{JointId, MotionSample, COORDS, NUM_JOINTS};
use crate::error::{Error, Result};

/// Number of ordered pairs for the 20-joint skeleton.
pub const NUM_PAIRS: usize = NUM_JOINTS * (NUM_JOINTS - 1);

pub const fn pair_count(joints: usize) -> usize {
    joints * (joints - 1)
}

/// An ordered joint pair together with its flat RJDP index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairIndex {
    pub anchor: JointId,
    pub partner: JointId,
    pub flat: usize,
}

impl PairIndex {
    pub fn new(anchor: JointId, partner: JointId) -> Result<Self> {
        let flat = pair_flat(anchor.zero_based(), partner.zero_based(), NUM_JOINTS)?;
        Ok(PairIndex {
            anchor,
            partner,
            flat,
        })
    }

    pub fn from_flat(flat: usize) -> Result<Self> {
        let (i, j) = pair_unflat(flat, NUM_JOINTS)?;
        Ok(PairIndex {
            anchor: JointId::from_zero_based(i).expect("in range"),
            partner: JointId::from_zero_based(j).expect("in range"),
            flat,
        })
    }

    pub fn all() -> impl Iterator<Item = PairIndex> {
        (0..NUM_PAIRS).map(|k| PairIndex::from_flat(k).expect("in range"))
    }
}

/// Flat index of the zero-based ordered pair `(i, j)` among `joints` joints.
pub fn pair_flat(i: usize, j: usize, joints: usize) -> Result<usize> {
    if i == j {
        return Err(Error::Shape(format!("self pair ({}, {})", i + 1, j + 1)));
    }
    if i >= joints || j >= joints {
        return Err(Error::Shape(format!("pair ({i}, {j}) outside {joints} joints")));
    }
    Ok(i * (joints - 1) + if j < i { j } else { j - 1 })
}

pub fn pair_unflat(flat: usize, joints: usize) -> Result<(usize, usize)> {
    if joints < 2 || flat >= pair_count(joints) {
        return Err(Error::Shape(format!("pair index {flat} out of range")));
    }
    let i = flat / (joints - 1);
    let r = flat % (joints - 1);
    Ok((i, if r < i { r } else { r + 1 }))
}

/// `[t][j][c]` joint positions.
#[derive(Debug, Clone, PartialEq)]
pub struct JpTensor {
    pub frames: usize,
    pub data: Vec<f64>,
}

/// `[t][pair][c]` relative displacements, `pair` in anchor-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct RjdpTensor {
    pub frames: usize,
    pub data: Vec<f64>,
}

impl JpTensor {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.frames, NUM_JOINTS, COORDS)
    }

    pub fn at(&self, t: usize, joint: usize, c: usize) -> f64 {
        self.data[(t * NUM_JOINTS + joint) * COORDS + c]
    }
}

impl RjdpTensor {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.frames, NUM_PAIRS, COORDS)
    }

    pub fn at(&self, t: usize, pair: usize, c: usize) -> f64 {
        self.data[(t * NUM_PAIRS + pair) * COORDS + c]
    }
}

pub fn build_jp(sample: &MotionSample) -> JpTensor {
    JpTensor {
        frames: sample.frames(),
        data: sample.flat().collect(),
    }
}

pub fn build_rjdp(sample: &MotionSample) -> RjdpTensor {
    let flat: Vec<f64> = sample.flat().collect();
    RjdpTensor {
        frames: sample.frames(),
        data: rjdp_from_positions(&flat, sample.frames(), NUM_JOINTS),
    }
}

/// RJDP for an arbitrary joint count; `positions` is `[t][j][c]`.
pub fn rjdp_from_positions(positions: &[f64], frames: usize, joints: usize) -> Vec<f64> {
    assert_eq!(positions.len(), frames * joints * COORDS);
    let pairs = pair_count(joints);
    let mut out = Vec::with_capacity(frames * pairs * COORDS);
    for frame in positions.chunks_exact(joints * COORDS) {
        for i in 0..joints {
            let a = &frame[i * COORDS..(i + 1) * COORDS];
            for j in (0..joints).filter(|&j| j != i) {
                let b = &frame[j * COORDS..(j + 1) * COORDS];
                out.extend(a.iter().zip(b).map(|(x, y)| x - y));
            }
        }
    }
    out
}

/// Writes `<stem>.bin` (little-endian f64) and a `<stem>.txt` sidecar holding
/// the header line, e.g. `JP 100 20 3`.
pub fn dump_tensor(dir: &Path, stem: &str, kind: &str, dims: [usize; 3], data: &[f64]) -> Result<()> {
    debug_assert_eq!(dims.iter().product::<usize>(), data.len());
    let bin = dir.join(format!("{stem}.bin"));
    let txt = dir.join(format!("{stem}.txt"));
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let header = format!("{kind} {} {} {}\n", dims[0], dims[1], dims[2]);
    fs::write(&txt, header).map_err(|e| Error::io(&txt, e))
}

/// Reads a tensor written by [`dump_tensor`]; returns the kind tag and dims.
pub fn read_tensor(dir: &Path, stem: &str) -> Result<(String, [usize; 3], Vec<f64>)> {
    let bin = dir.join(format!("{stem}.bin"));
    let txt = dir.join(format!("{stem}.txt"));
    let header = fs::read_to_string(&txt).map_err(|e| Error::io(&txt, e))?;
    let bad = |m: &str| Error::Parse {
        file: txt.clone(),
        line: 1,
        message: m.to_string(),
    };
    let mut parts = header.split_whitespace();
    let kind = parts.next().ok_or_else(|| bad("missing kind"))?.to_string();
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        *d = parts
            .next()
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| bad("bad dimension"))?;
    }
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if bytes.len() != dims.iter().product::<usize>() * 8 {
        return Err(bad("payload length does not match header"));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((kind, dims, data))
}
