use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Architecture, ModelConfig};
use crate::data::COORDS;
use crate::error::{Error, Result};
use crate::nn::{AdaptiveMaxPool, Conv2d, Dense, LayerSpec, Param, Relu, SeGate, Sequential, Tensor};

/// Temporal extent of every convolution filter.
pub const TEMPORAL_KERNEL: usize = 3;

/// A batch of stream inputs: JP `(N, T, J, 3)` and RJDP `(N, T, J(J-1), 3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub jp: Tensor,
    pub rjdp: Tensor,
}

impl ModelInput {
    pub fn batch(&self) -> usize {
        self.jp.batch()
    }
}

/// Activations retained by a training forward pass.
#[derive(Debug)]
pub struct Trace {
    jp: Option<Vec<Tensor>>,
    rjdp: Option<Vec<Tensor>>,
    head: Vec<Tensor>,
}

impl Trace {
    pub fn logits(&self) -> &Tensor {
        self.head.last().expect("head output")
    }
}

/// JSON description written next to every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureEcho {
    pub config: ModelConfig,
    pub layers: Vec<LayerSpec>,
    pub param_count: usize,
}

/// The two-stream network, its single-stream baselines, or the FCNet
/// baseline, depending on [`ModelConfig::architecture`].
#[derive(Debug)]
pub struct Model {
    config: ModelConfig,
    jp: Option<Sequential>,
    rjdp: Option<Sequential>,
    head: Sequential,
    /// Abort with the layer name as soon as a non-finite value appears.
    pub checked: bool,
}

impl Model {
    /// Builds and initializes a model. Gate parameters come from a separate
    /// random stream so enabling attention leaves every other weight as is.
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gate_rng = ChaCha8Rng::seed_from_u64(seed);
        gate_rng.set_stream(1);

        let (t, j, cs) = (config.frames, config.joints, config.stream_channels);
        let arch = config.architecture;

        let jp = arch.uses_jp().then(|| {
            let mut s = Sequential::new("jp_stream");
            s.push("conv", Conv2d::new([TEMPORAL_KERNEL, 1], [1, 1], COORDS, cs, &mut rng))
                .push("relu", Relu);
            if config.attention {
                s.push("joint_gate", SeGate::new(j, &mut gate_rng));
            }
            s
        });
        let rjdp = arch.uses_rjdp().then(|| {
            let mut s = Sequential::new("rjdp_stream");
            if config.attention {
                s.push("pair_gate", SeGate::new(config.pairs(), &mut gate_rng));
            }
            s.push(
                "conv",
                Conv2d::new([TEMPORAL_KERNEL, j - 1], [1, j - 1], COORDS, cs, &mut rng),
            )
            .push("relu", Relu);
            s
        });

        let head = match arch {
            Architecture::FcNet => {
                let mut s = Sequential::new("fcnet");
                let mut width = t * (j + config.pairs()) * COORDS;
                for (k, &hidden) in config.fcnet_hidden.iter().enumerate() {
                    s.push(&format!("dense{}", k + 1), Dense::new(width, hidden, &mut rng))
                        .push(&format!("relu{}", k + 1), Relu);
                    width = hidden;
                }
                s.push("out", Dense::new(width, config.num_classes, &mut rng));
                s
            }
            _ => {
                let streams = usize::from(arch.uses_jp()) + usize::from(arch.uses_rjdp());
                build_head(config, streams * cs, &mut rng)?
            }
        };

        let model = Model {
            config: config.clone(),
            jp,
            rjdp,
            head,
            checked: true,
        };
        model.describe()?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn jp_dims(&self, n: usize) -> [usize; 4] {
        [n, self.config.frames, self.config.joints, COORDS]
    }

    fn rjdp_dims(&self, n: usize) -> [usize; 4] {
        [n, self.config.frames, self.config.pairs(), COORDS]
    }

    fn check_input(&self, input: &ModelInput) -> Result<()> {
        let n = input.jp.batch();
        if input.jp.dims() != self.jp_dims(n) || input.rjdp.dims() != self.rjdp_dims(n) {
            return Err(Error::Shape(format!(
                "model expects JP {:?} and RJDP {:?}, got {:?} and {:?}",
                self.jp_dims(n),
                self.rjdp_dims(n),
                input.jp.dims(),
                input.rjdp.dims()
            )));
        }
        Ok(())
    }

    /// Stream-1 features `(N, T-2, J, C_s)`.
    pub fn forward_jp_stream(&self, jp: &Tensor) -> Result<Tensor> {
        let s = self.jp.as_ref().ok_or_else(|| Error::Config("model has no JP stream".into()))?;
        if jp.dims() != self.jp_dims(jp.batch()) {
            return Err(Error::Shape(format!("JP input {:?}", jp.dims())));
        }
        s.forward(jp, self.checked)
    }

    /// Stream-2 features `(N, T-2, J, C_s)`; column `j` sees only pairs anchored at `j`.
    pub fn forward_rjdp_stream(&self, rjdp: &Tensor) -> Result<Tensor> {
        let s = self.rjdp.as_ref().ok_or_else(|| Error::Config("model has no RJDP stream".into()))?;
        if rjdp.dims() != self.rjdp_dims(rjdp.batch()) {
            return Err(Error::Shape(format!("RJDP input {:?}", rjdp.dims())));
        }
        s.forward(rjdp, self.checked)
    }

    /// Head on already fused (or single-stream) features; raw logits.
    pub fn head(&self, fused: &Tensor) -> Result<Tensor> {
        self.head.forward(fused, self.checked)
    }

    fn head_input(&self, jp: Option<&Tensor>, rjdp: Option<&Tensor>, input: &ModelInput) -> Result<Tensor> {
        match self.config.architecture {
            Architecture::FcNet => {
                let n = input.batch();
                let a = input.jp.clone().reshape([n, 1, 1, input.jp.item_len()])?;
                let b = input.rjdp.clone().reshape([n, 1, 1, input.rjdp.item_len()])?;
                Tensor::concat_channels(&a, &b)
            }
            Architecture::TwoStream => fuse(jp.expect("jp"), rjdp.expect("rjdp")),
            Architecture::JpStream => Ok(jp.expect("jp").clone()),
            Architecture::RjdpStream => Ok(rjdp.expect("rjdp").clone()),
        }
    }

    /// Logits `(N, 1, 1, classes)`.
    pub fn logits(&self, input: &ModelInput) -> Result<Tensor> {
        self.check_input(input)?;
        let jp = self.jp.as_ref().map(|s| s.forward(&input.jp, self.checked)).transpose()?;
        let rjdp = self
            .rjdp
            .as_ref()
            .map(|s| s.forward(&input.rjdp, self.checked))
            .transpose()?;
        let h = self.head_input(jp.as_ref(), rjdp.as_ref(), input)?;
        self.head.forward(&h, self.checked)
    }

    pub fn forward_trace(&self, input: &ModelInput) -> Result<Trace> {
        self.check_input(input)?;
        let jp = self
            .jp
            .as_ref()
            .map(|s| s.forward_trace(input.jp.clone(), self.checked))
            .transpose()?;
        let rjdp = self
            .rjdp
            .as_ref()
            .map(|s| s.forward_trace(input.rjdp.clone(), self.checked))
            .transpose()?;
        let h = self.head_input(
            jp.as_ref().and_then(|a| a.last()),
            rjdp.as_ref().and_then(|a| a.last()),
            input,
        )?;
        let head = self.head.forward_trace(h, self.checked)?;
        Ok(Trace { jp, rjdp, head })
    }

    /// Accumulates parameter gradients for `grad_logits` into every `Param::grad`.
    pub fn backward(&mut self, trace: &Trace, grad_logits: Tensor) -> Result<()> {
        let checked = self.checked;
        let has_streams = self.config.architecture != Architecture::FcNet;
        let g = self.head.backward(&trace.head, grad_logits, has_streams, checked)?;
        let Some(g) = g else { return Ok(()) };
        match (self.jp.as_mut(), self.rjdp.as_mut()) {
            (Some(jp), Some(rjdp)) => {
                let (gj, gr) = g.split_channels(self.config.stream_channels)?;
                jp.backward(trace.jp.as_ref().expect("jp trace"), gj, false, checked)?;
                rjdp.backward(trace.rjdp.as_ref().expect("rjdp trace"), gr, false, checked)?;
            }
            (Some(jp), None) => {
                jp.backward(trace.jp.as_ref().expect("jp trace"), g, false, checked)?;
            }
            (None, Some(rjdp)) => {
                rjdp.backward(trace.rjdp.as_ref().expect("rjdp trace"), g, false, checked)?;
            }
            (None, None) => {}
        }
        Ok(())
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        if let Some(s) = &self.jp {
            out.extend(s.params());
        }
        if let Some(s) = &self.rjdp {
            out.extend(s.params());
        }
        out.extend(self.head.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        if let Some(s) = &mut self.jp {
            out.extend(s.params_mut());
        }
        if let Some(s) = &mut self.rjdp {
            out.extend(s.params_mut());
        }
        out.extend(self.head.params_mut());
        out
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    /// Scalar weights and biases, gates included.
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Per-sample gate activations, `(joint gates N x J, pair gates N x D)`,
    /// for whichever streams carry gates.
    pub fn gate_activations(&self, input: &ModelInput) -> Result<(Option<Vec<f64>>, Option<Vec<f64>>)> {
        self.check_input(input)?;
        let gates = |s: &Sequential, x: &Tensor| -> Result<Option<Vec<f64>>> {
            let acts = s.forward_trace(x.clone(), self.checked)?;
            for (k, (_, layer)) in s.layers().enumerate() {
                if let Some(g) = layer.as_gate() {
                    return g.gate_values(&acts[k]).map(Some);
                }
            }
            Ok(None)
        };
        let jp = match &self.jp {
            Some(s) => gates(s, &input.jp)?,
            None => None,
        };
        let rjdp = match &self.rjdp {
            Some(s) => gates(s, &input.rjdp)?,
            None => None,
        };
        Ok((jp, rjdp))
    }

    pub fn describe(&self) -> Result<ArchitectureEcho> {
        let mut layers = Vec::new();
        let mut fused = None;
        if let Some(s) = &self.jp {
            layers.extend(s.describe(self.jp_dims(1))?);
            fused = Some(s.output_dims(self.jp_dims(1))?);
        }
        if let Some(s) = &self.rjdp {
            layers.extend(s.describe(self.rjdp_dims(1))?);
            let out = s.output_dims(self.rjdp_dims(1))?;
            fused = Some(match fused {
                Some([n, h, w, c]) => [n, h, w, c + out[3]],
                None => out,
            });
        }
        let head_in = match fused {
            Some(d) => d,
            None => [1, 1, 1, self.config.frames * (self.config.joints + self.config.pairs()) * COORDS],
        };
        layers.extend(self.head.describe(head_in)?);
        Ok(ArchitectureEcho {
            config: self.config.clone(),
            layers,
            param_count: self.param_count(),
        })
    }
}

/// Channel concatenation, stream-1 channels first.
pub fn fuse(jp: &Tensor, rjdp: &Tensor) -> Result<Tensor> {
    Tensor::concat_channels(jp, rjdp)
}

fn build_head(config: &ModelConfig, in_channels: usize, rng: &mut ChaCha8Rng) -> Result<Sequential> {
    let variant = config.head_variant;
    let hc = config.head_channels;
    let mut s = Sequential::new("head");
    let mut channels = in_channels;
    let mut height = config.frames - (TEMPORAL_KERNEL - 1);
    for k in 0..variant.conv_layers() {
        s.push(
            &format!("conv{}", k + 1),
            Conv2d::new([TEMPORAL_KERNEL, 1], [1, 1], channels, hc, rng),
        )
        .push(&format!("relu{}", k + 1), Relu);
        channels = hc;
        height = height.saturating_sub(TEMPORAL_KERNEL - 1);
    }
    let features = if variant.pools() {
        s.push("pool", AdaptiveMaxPool::new(config.pool_out));
        config.pool_out[0] * config.pool_out[1] * channels
    } else {
        height * config.joints * channels
    };
    if features == 0 {
        return Err(Error::Config(format!(
            "{} frames are too few for the {variant} head",
            config.frames
        )));
    }
    s.push("dense", Dense::new(features, config.num_classes, rng));
    Ok(s)
}
