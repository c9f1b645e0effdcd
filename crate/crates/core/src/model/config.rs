use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Residual block used for each stacked module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockDesign {
    /// conv3x3 -> ReLU -> conv3x3 plus skip, no attention.
    Standard,
    /// Three parallel 3x3 convolutions, concatenated and fused.
    TripleSquare,
    /// Parallel 5x1, 1x5 and 3x3 convolutions, concatenated and fused.
    Orientation,
}

/// Which channel-attention gates take part in feature fusion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FusionMode {
    /// Plain ReLU + convolution on concatenated features.
    NoAttention,
    /// Gate inside each block only.
    LocalOnly,
    /// Gate inside each block and on the concatenated hierarchy.
    LocalGlobal,
}

/// Where the gate sits relative to the fusion ReLU and squeeze convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GatePlacement {
    AfterReluConv,
    Between,
    BeforeReluConv,
}

macro_rules! tagged_enum {
    ($ty:ident { $($variant:ident => $tag:literal $(| $alias:literal)*),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn tag(self) -> &'static str {
                match self {
                    $($ty::$variant => $tag),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.tag())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($tag $(| $alias)* => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"),
                        other
                    ))),
                }
            }
        }
    };
}

tagged_enum!(BlockDesign {
    Standard => "standard" | "a",
    TripleSquare => "triple3x3" | "b",
    Orientation => "orientation" | "c",
});

tagged_enum!(FusionMode {
    NoAttention => "none" | "expa",
    LocalOnly => "lca" | "expb",
    LocalGlobal => "lca_gca" | "expc",
});

tagged_enum!(GatePlacement {
    AfterReluConv => "after" | "a",
    Between => "between" | "b",
    BeforeReluConv => "before" | "c",
});

/// Architecture of one network.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NetworkConfig {
    /// Upscaling factor R.
    pub scale: usize,
    /// Number of stacked modules N.
    pub oam_count: usize,
    /// Feature width C.
    pub width: usize,
    /// Gate bottleneck reduction s.
    pub ca_reduction: usize,
    pub block_design: BlockDesign,
    pub fusion_mode: FusionMode,
    pub ca_placement: GatePlacement,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::light()
    }
}

impl NetworkConfig {
    /// Ten modules of width 64: the light-weight profile.
    pub fn light() -> Self {
        Self {
            scale: 2,
            oam_count: 10,
            width: 64,
            ca_reduction: 16,
            block_design: BlockDesign::Orientation,
            fusion_mode: FusionMode::LocalGlobal,
            ca_placement: GatePlacement::BeforeReluConv,
            seed: 0,
        }
    }

    /// 64 stacked modules. Constructible, but far too large to train on a CPU.
    pub fn enhanced() -> Self {
        Self {
            oam_count: 64,
            ..Self::light()
        }
    }

    /// Whether each block carries its own gate.
    pub fn has_local_gate(&self) -> bool {
        self.block_design != BlockDesign::Standard && self.fusion_mode != FusionMode::NoAttention
    }

    pub fn has_global_gate(&self) -> bool {
        self.fusion_mode == FusionMode::LocalGlobal
    }

    /// Channel count seen by the block gate.
    pub fn local_gate_width(&self) -> usize {
        match self.ca_placement {
            GatePlacement::AfterReluConv => self.width,
            _ => 3 * self.width,
        }
    }

    /// Channel count seen by the hierarchical gate.
    pub fn global_gate_width(&self) -> usize {
        match self.ca_placement {
            GatePlacement::AfterReluConv => self.width,
            _ => self.oam_count * self.width,
        }
    }

    /// True when `other` describes the same body and differs at most in scale and seed.
    pub fn same_body(&self, other: &Self) -> bool {
        Self {
            scale: other.scale,
            seed: other.seed,
            ..self.clone()
        } == *other
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(2..=4).contains(&self.scale) {
            return fail(format!("scale must be 2, 3 or 4, got {}", self.scale));
        }
        if self.oam_count == 0 {
            return fail("oam_count must be >= 1".into());
        }
        if self.width < 8 {
            return fail(format!("width must be >= 8, got {}", self.width));
        }
        if self.ca_reduction == 0 {
            return fail("ca_reduction must be >= 1".into());
        }
        let s = self.ca_reduction;
        if self.has_local_gate() && self.local_gate_width() % s != 0 {
            return fail(format!(
                "block gate width {} is not divisible by ca_reduction {s}",
                self.local_gate_width()
            ));
        }
        if self.has_global_gate() && self.global_gate_width() % s != 0 {
            return fail(format!(
                "hierarchical gate width {} is not divisible by ca_reduction {s}",
                self.global_gate_width()
            ));
        }
        Ok(())
    }
}
