use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{DEFAULT_FRAMES, NUM_CLASSES, NUM_JOINTS};
use crate::error::{Error, Result};

/// Which inputs feed the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    /// Both convolutional streams fused mid-network.
    #[serde(rename = "2s-cnn")]
    TwoStream,
    #[serde(rename = "3djp-cnn")]
    JpStream,
    #[serde(rename = "3drjdp-cnn")]
    RjdpStream,
    /// Fully connected baseline over the flattened JP and RJDP features.
    #[serde(rename = "fcnet")]
    FcNet,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::TwoStream,
        Architecture::JpStream,
        Architecture::RjdpStream,
        Architecture::FcNet,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            Architecture::TwoStream => "2s-cnn",
            Architecture::JpStream => "3djp-cnn",
            Architecture::RjdpStream => "3drjdp-cnn",
            Architecture::FcNet => "fcnet",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Architecture::TwoStream => "2s-CNN",
            Architecture::JpStream => "3DJP-CNN",
            Architecture::RjdpStream => "3DRJDP-CNN",
            Architecture::FcNet => "FCNet",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.cli_name() == s)
    }

    pub fn uses_jp(self) -> bool {
        matches!(self, Architecture::TwoStream | Architecture::JpStream)
    }

    pub fn uses_rjdp(self) -> bool {
        matches!(self, Architecture::TwoStream | Architecture::RjdpStream)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

/// Layers between the fused stream features and the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadVariant {
    /// Two convolutions, adaptive max pooling, dense.
    Full,
    /// Pooling straight on the fused features, then dense.
    NoCnn,
    /// Two convolutions, dense over everything.
    #[serde(rename = "no-maxp")]
    NoMaxP,
    /// One convolution, pooling, dense.
    SinCnn,
}

impl HeadVariant {
    pub const ALL: [HeadVariant; 4] = [
        HeadVariant::NoCnn,
        HeadVariant::NoMaxP,
        HeadVariant::SinCnn,
        HeadVariant::Full,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            HeadVariant::Full => "full",
            HeadVariant::NoCnn => "no-cnn",
            HeadVariant::NoMaxP => "no-maxp",
            HeadVariant::SinCnn => "sin-cnn",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            HeadVariant::Full => "Ours (2 CNN + MaxP)",
            HeadVariant::NoCnn => "No-CNN",
            HeadVariant::NoMaxP => "No-MaxP",
            HeadVariant::SinCnn => "SinCNN",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.cli_name() == s)
    }

    pub fn conv_layers(self) -> usize {
        match self {
            HeadVariant::Full | HeadVariant::NoMaxP => 2,
            HeadVariant::SinCnn => 1,
            HeadVariant::NoCnn => 0,
        }
    }

    pub fn pools(self) -> bool {
        !matches!(self, HeadVariant::NoMaxP)
    }
}

impl fmt::Display for HeadVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub frames: usize,
    pub joints: usize,
    /// Output channels of each stream convolution.
    pub stream_channels: usize,
    pub head_channels: usize,
    pub head_variant: HeadVariant,
    pub pool_out: [usize; 2],
    pub attention: bool,
    pub num_classes: usize,
    pub fcnet_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            architecture: Architecture::TwoStream,
            frames: DEFAULT_FRAMES,
            joints: NUM_JOINTS,
            stream_channels: 3,
            head_channels: 16,
            head_variant: HeadVariant::Full,
            pool_out: [1, 1],
            attention: false,
            num_classes: NUM_CLASSES,
            fcnet_hidden: vec![256, 128, 64],
            activation: Activation::Relu,
        }
    }
}

impl ModelConfig {
    pub fn pairs(&self) -> usize {
        self.joints * self.joints.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.joints < 2 {
            return bad(format!("need at least 2 joints, got {}", self.joints));
        }
        if self.frames < 3 {
            return bad(format!("need at least 3 frames, got {}", self.frames));
        }
        if self.stream_channels == 0 || self.head_channels == 0 {
            return bad("channel widths must be positive".into());
        }
        if self.num_classes < 2 {
            return bad("need at least 2 classes".into());
        }
        if self.fcnet_hidden.contains(&0) {
            return bad("FCNet hidden widths must be positive".into());
        }
        Ok(())
    }
}
