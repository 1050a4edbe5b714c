use std::path::Path;

use serde::Deserialize;

use super::train::TrainHyper;
use crate::error::{Error, Result};
use crate::model::{DpaConfig, STAGES};

/// Flat `key = value` training configuration (TOML syntax). Every key is
/// optional and overrides the corresponding default; unknown keys are
/// rejected.
///
/// ```toml
/// steps = 300
/// lr = 1e-3
/// embed_dim = 8
/// depths = [1, 1, 1, 1]
/// aux_loss_enabled = false
/// ```
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub lr: Option<f64>,
    pub steps: Option<usize>,
    pub batch: Option<usize>,
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
    pub log_every: Option<usize>,
    pub augment: Option<bool>,

    pub patch_size: Option<usize>,
    pub embed_dim: Option<usize>,
    pub depths: Option<[usize; STAGES]>,
    pub heads: Option<[usize; STAGES]>,
    pub window: Option<usize>,
    pub input_size: Option<usize>,
    pub head_channels: Option<usize>,
    pub pixelshuffle_enabled: Option<bool>,
    pub image_difference_enabled: Option<bool>,
    pub aux_loss_enabled: Option<bool>,
    pub siamese_enabled: Option<bool>,
}

macro_rules! apply {
    ($src:expr, $dst:expr, $($f:ident),*) => {
        $( if let Some(v) = $src.$f { $dst.$f = v; } )*
    };
}

impl TrainFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply_hyper(&self, h: &mut TrainHyper) {
        apply!(self, h, lr, steps, batch, seed, lambda, log_every, augment);
    }

    pub fn apply_model(&self, c: &mut DpaConfig) {
        apply!(
            self,
            c,
            patch_size,
            embed_dim,
            depths,
            heads,
            window,
            input_size,
            head_channels,
            pixelshuffle_enabled,
            image_difference_enabled,
            aux_loss_enabled,
            siamese_enabled
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply() {
        let f = TrainFile::parse("steps = 300\nlr = 1e-3\nembed_dim = 8\ndepths = [2, 1, 1, 1]\naux_loss_enabled = false\n").unwrap();
        let mut h = TrainHyper::default();
        let mut c = DpaConfig::default();
        f.apply_hyper(&mut h);
        f.apply_model(&mut c);
        assert_eq!(
            (h.steps, h.lr, h.batch),
            (300, 1e-3, TrainHyper::default().batch)
        );
        assert_eq!(
            (c.embed_dim, c.depths, c.aux_loss_enabled),
            (8, [2, 1, 1, 1], false)
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(TrainFile::parse("learning_rate = 0.1").is_err());
        assert!(TrainFile::parse("steps = \"many\"").is_err());
    }
}
