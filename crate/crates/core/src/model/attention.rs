//! Importance scores read from the stream gates of an attention-enabled model.

use serde::{Deserialize, Serialize};

use super::network::{Model, ModelInput};
use crate::data::{JointId, NUM_JOINTS};
use crate::error::{Error, Result};
use crate::features::{PairIndex, NUM_PAIRS};

pub const DEFAULT_TOP_K: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    /// One-based joint indices.
    pub anchor: usize,
    pub partner: usize,
    pub flat: usize,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    pub samples: usize,
    /// Mean joint-gate activation of the JP stream.
    pub joint_importance: Vec<f64>,
    /// Mean pair-gate activation of the RJDP stream, anchor-major.
    pub pair_importance: Vec<f64>,
    /// Sum of `pair_importance` over the `2(J-1)` ordered pairs touching each joint.
    pub per_joint_aggregate: Vec<f64>,
    /// `per_joint_aggregate` divided by the number of incident pairs.
    pub per_joint_mean: Vec<f64>,
    /// Largest pair gates, non-increasing.
    pub top_pairs: Vec<PairScore>,
}

/// Running sums of gate activations over validation samples and folds.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionAccumulator {
    joint_sum: Vec<f64>,
    pair_sum: Vec<f64>,
    samples: usize,
}

impl Default for AttentionAccumulator {
    fn default() -> Self {
        AttentionAccumulator {
            joint_sum: vec![0.0; NUM_JOINTS],
            pair_sum: vec![0.0; NUM_PAIRS],
            samples: 0,
        }
    }
}

impl AttentionAccumulator {
    pub fn add(&mut self, model: &Model, input: &ModelInput) -> Result<()> {
        let cfg = model.config();
        if !cfg.attention {
            return Err(Error::Config("attention was not enabled for this model".into()));
        }
        if cfg.joints != NUM_JOINTS {
            return Err(Error::Config("attention reports need the 20-joint skeleton".into()));
        }
        let (jp, pairs) = model.gate_activations(input)?;
        let (Some(jp), Some(pairs)) = (jp, pairs) else {
            return Err(Error::Config("attention report needs both streams".into()));
        };
        for row in jp.chunks_exact(NUM_JOINTS) {
            self.joint_sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
        }
        for row in pairs.chunks_exact(NUM_PAIRS) {
            self.pair_sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
        }
        self.samples += input.batch();
        Ok(())
    }

    pub fn merge(&mut self, other: &AttentionAccumulator) {
        self.joint_sum.iter_mut().zip(&other.joint_sum).for_each(|(a, b)| *a += b);
        self.pair_sum.iter_mut().zip(&other.pair_sum).for_each(|(a, b)| *a += b);
        self.samples += other.samples;
    }

    pub fn finish(&self, top_k: usize) -> Result<AttentionReport> {
        if self.samples == 0 {
            return Err(Error::Config("no gate activations collected".into()));
        }
        let n = self.samples as f64;
        let joint_importance: Vec<f64> = self.joint_sum.iter().map(|s| s / n).collect();
        let pair_importance: Vec<f64> = self.pair_sum.iter().map(|s| s / n).collect();
        Ok(report_from_means(joint_importance, pair_importance, top_k, self.samples))
    }
}

pub fn report_from_means(
    joint_importance: Vec<f64>,
    pair_importance: Vec<f64>,
    top_k: usize,
    samples: usize,
) -> AttentionReport {
    let mut per_joint_aggregate = vec![0.0; NUM_JOINTS];
    for p in PairIndex::all() {
        let v = pair_importance[p.flat];
        per_joint_aggregate[p.anchor.zero_based()] += v;
        per_joint_aggregate[p.partner.zero_based()] += v;
    }
    let incident = (2 * (NUM_JOINTS - 1)) as f64;
    let per_joint_mean = per_joint_aggregate.iter().map(|s| s / incident).collect();

    let mut order: Vec<usize> = (0..pair_importance.len()).collect();
    // stable sort keeps the lower flat index first among equal scores
    order.sort_by(|&a, &b| pair_importance[b].total_cmp(&pair_importance[a]));
    let top_pairs = order
        .into_iter()
        .take(top_k.min(NUM_PAIRS))
        .map(|flat| {
            let p = PairIndex::from_flat(flat).expect("flat index in range");
            PairScore {
                anchor: p.anchor.index(),
                partner: p.partner.index(),
                flat,
                importance: pair_importance[flat],
            }
        })
        .collect();
    AttentionReport {
        samples,
        joint_importance,
        pair_importance,
        per_joint_aggregate,
        per_joint_mean,
        top_pairs,
    }
}

impl AttentionReport {
    pub fn joint_name(index: usize) -> &'static str {
        JointId::from_zero_based(index).map(JointId::name).unwrap_or("?")
    }
}
