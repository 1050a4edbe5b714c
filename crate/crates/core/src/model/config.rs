use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of hierarchical stages in the extractor.
pub const STAGES: usize = 4;
/// Hidden width of the transformer MLP relative to the stage width.
pub const MLP_RATIO: usize = 4;
/// Spatial ratio between the stage-2 (shallow) and stage-4 (deep) maps.
pub const DEEP_TO_SHALLOW: usize = 4;
/// Kernel size of the deformable convolution and its offset predictor.
pub const DEFORM_KERNEL: usize = 3;

/// Architecture of the difficulty network. The four boolean switches are the
/// ablation axes: PixelShuffle alignment, weight-shared (Siamese) extraction,
/// temporal-difference features and the auxiliary perceptual loss.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpaConfig {
    pub patch_size: usize,
    pub embed_dim: usize,
    pub depths: [usize; STAGES],
    pub heads: [usize; STAGES],
    pub window: usize,
    pub input_size: usize,
    /// Hidden channels of the score and attention heads.
    pub head_channels: usize,
    pub pixelshuffle_enabled: bool,
    pub image_difference_enabled: bool,
    pub aux_loss_enabled: bool,
    pub siamese_enabled: bool,
}

impl Default for DpaConfig {
    fn default() -> Self {
        DpaConfig {
            patch_size: 4,
            embed_dim: 16,
            depths: [1, 1, 1, 1],
            heads: [1, 2, 4, 8],
            window: 4,
            input_size: 64,
            head_channels: 16,
            pixelshuffle_enabled: true,
            image_difference_enabled: true,
            aux_loss_enabled: true,
            siamese_enabled: true,
        }
    }
}

/// Resolved geometry of one extractor stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageGeometry {
    pub resolution: usize,
    pub dim: usize,
    pub heads: usize,
    pub depth: usize,
    /// Window actually used: the configured window clipped to the resolution.
    pub window: usize,
}

impl StageGeometry {
    /// Shift applied by block `block` of this stage: odd blocks shift by half
    /// a window unless a single window already covers the whole map.
    pub fn shift_for_block(&self, block: usize) -> usize {
        if block % 2 == 1 && self.window < self.resolution {
            self.window / 2
        } else {
            0
        }
    }
}

impl DpaConfig {
    /// A 16×16 configuration small enough for whole-model finite differences.
    pub fn micro() -> Self {
        DpaConfig {
            patch_size: 2,
            embed_dim: 4,
            depths: [2, 1, 1, 1],
            heads: [1, 1, 2, 2],
            window: 2,
            input_size: 16,
            head_channels: 3,
            ..DpaConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("patch_size", self.patch_size),
            ("embed_dim", self.embed_dim),
            ("window", self.window),
            ("input_size", self.input_size),
            ("head_channels", self.head_channels),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.depths.iter().chain(&self.heads).any(|&v| v == 0) {
            return Err(Error::Config("depths and heads must be positive".into()));
        }
        if self.input_size % self.patch_size != 0 {
            return Err(Error::Config(format!(
                "input_size {} not divisible by patch_size {}",
                self.input_size, self.patch_size
            )));
        }
        let grid = self.input_size / self.patch_size;
        if grid % (1 << (STAGES - 1)) != 0 {
            return Err(Error::Config(format!(
                "patch grid {grid} must be divisible by {} for three 2x2 merges",
                1 << (STAGES - 1)
            )));
        }
        for (i, st) in self.stages_unchecked().iter().enumerate() {
            if st.resolution % st.window != 0 {
                return Err(Error::Config(format!(
                    "stage {} resolution {} not divisible by window {}",
                    i + 1,
                    st.resolution,
                    st.window
                )));
            }
            if st.dim % st.heads != 0 {
                return Err(Error::Config(format!(
                    "stage {} width {} not divisible by {} heads",
                    i + 1,
                    st.dim,
                    st.heads
                )));
            }
        }
        if self.pixelshuffle_enabled
            && self.deep_channels() % (DEEP_TO_SHALLOW * DEEP_TO_SHALLOW) != 0
        {
            return Err(Error::Config(format!(
                "deep width {} not divisible by {} for pixel shuffle",
                self.deep_channels(),
                DEEP_TO_SHALLOW * DEEP_TO_SHALLOW
            )));
        }
        Ok(())
    }

    fn stages_unchecked(&self) -> Vec<StageGeometry> {
        let grid = self.input_size / self.patch_size;
        (0..STAGES)
            .map(|s| {
                let resolution = grid >> s;
                StageGeometry {
                    resolution,
                    dim: self.embed_dim << s,
                    heads: self.heads[s],
                    depth: self.depths[s],
                    window: self.window.min(resolution),
                }
            })
            .collect()
    }

    pub fn stages(&self) -> Result<Vec<StageGeometry>> {
        self.validate()?;
        Ok(self.stages_unchecked())
    }

    /// Stage-2 width.
    pub fn shallow_channels(&self) -> usize {
        self.embed_dim * 2
    }

    /// Stage-4 width.
    pub fn deep_channels(&self) -> usize {
        self.embed_dim * 8
    }

    pub fn shallow_resolution(&self) -> usize {
        self.input_size / self.patch_size / 2
    }

    /// Channels of the deep map after upsampling to the shallow resolution.
    pub fn upsampled_deep_channels(&self) -> usize {
        if self.pixelshuffle_enabled {
            self.deep_channels() / (DEEP_TO_SHALLOW * DEEP_TO_SHALLOW)
        } else {
            self.deep_channels()
        }
    }

    /// Width of the fused representation fed to the heads.
    pub fn fused_channels(&self) -> usize {
        self.shallow_channels()
    }

    /// Input channels of the final fusion convolution: the two per-frame
    /// spatial features plus, optionally, their temporal difference.
    pub fn fusion_input_channels(&self) -> usize {
        let spatial = 2 * self.shallow_channels();
        if self.image_difference_enabled {
            3 * spatial
        } else {
            2 * spatial
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_and_micro_validate() {
        DpaConfig::default().validate().unwrap();
        DpaConfig::micro().validate().unwrap();
    }

    #[test]
    fn default_stage_geometry() {
        let st = DpaConfig::default().stages().unwrap();
        let res: Vec<_> = st.iter().map(|s| s.resolution).collect();
        let dims: Vec<_> = st.iter().map(|s| s.dim).collect();
        let wins: Vec<_> = st.iter().map(|s| s.window).collect();
        assert_eq!(res, vec![16, 8, 4, 2]);
        assert_eq!(dims, vec![16, 32, 64, 128]);
        assert_eq!(wins, vec![4, 4, 4, 2]);
    }

    #[test]
    fn bad_sizes_fail_validation() {
        let cfg = DpaConfig {
            input_size: 60,
            ..DpaConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = DpaConfig {
            input_size: 48,
            ..DpaConfig::default()
        };
        // grid 12 is not divisible by 8
        assert!(cfg.validate().is_err());
        let cfg = DpaConfig {
            heads: [3, 2, 4, 8],
            ..DpaConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
