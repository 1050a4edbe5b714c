//! Interpolation backends and latency accounting.
//!
//! Two stand-ins span the quality/latency trade-off: [`interpolate_fast`]
//! blends the frames, [`interpolate_accurate`] compensates motion estimated
//! by block matching. Both are pure functions of their inputs. Further
//! backends can be added to a [`BackendRegistry`] by name.

mod accurate;
mod fast;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use accurate::{interpolate_accurate, AccurateConfig, AccurateOutput};
pub use fast::interpolate_fast;

use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Fast,
    Accurate,
}

impl BackendKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendKind::Fast => "fast",
            BackendKind::Accurate => "accurate",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fast" => Ok(BackendKind::Fast),
            "accurate" => Ok(BackendKind::Accurate),
            _ => Err(Error::InvalidArgument(format!(
                "unknown backend kind `{s}` (expected fast or accurate)"
            ))),
        }
    }
}

pub trait Interpolator: Send + Sync {
    fn name(&self) -> &str;
    fn kind(&self) -> BackendKind;
    fn interpolate(&self, frame0: &Frame, frame1: &Frame) -> Result<Frame>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FastBackend;

impl Interpolator for FastBackend {
    fn name(&self) -> &str {
        "fast"
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Fast
    }

    fn interpolate(&self, frame0: &Frame, frame1: &Frame) -> Result<Frame> {
        interpolate_fast(frame0, frame1)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AccurateBackend {
    pub config: AccurateConfig,
}

impl Interpolator for AccurateBackend {
    fn name(&self) -> &str {
        "accurate"
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Accurate
    }

    fn interpolate(&self, frame0: &Frame, frame1: &Frame) -> Result<Frame> {
        let out = interpolate_accurate(frame0, frame1, self.config)?;
        if out.fell_back {
            log::warn!(
                "{}x{} frames are smaller than the {}px block; used the fast blend",
                frame0.width(),
                frame0.height(),
                self.config.block
            );
        }
        Ok(out.frame)
    }
}

/// Backends addressable by name.
#[derive(Clone)]
pub struct BackendRegistry {
    backends: BTreeMap<String, Arc<dyn Interpolator>>,
}

impl Default for BackendRegistry {
    /// `fast` and `accurate` with default settings.
    fn default() -> Self {
        let mut r = BackendRegistry {
            backends: BTreeMap::new(),
        };
        r.register(Arc::new(FastBackend));
        r.register(Arc::new(AccurateBackend::default()));
        r
    }
}

impl BackendRegistry {
    /// Adds or replaces the backend stored under `backend.name()`.
    pub fn register(&mut self, backend: Arc<dyn Interpolator>) {
        self.backends.insert(backend.name().to_string(), backend);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Interpolator>> {
        self.backends.get(name).cloned().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown backend `{name}` (registered: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.backends.keys().map(String::as_str)
    }
}

/// Wall-clock latency samples for one backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendProfile {
    pub name: String,
    pub kind: BackendKind,
    samples: Vec<f64>,
}

impl BackendProfile {
    pub fn new(name: impl Into<String>, kind: BackendKind) -> Self {
        BackendProfile {
            name: name.into(),
            kind,
            samples: Vec::new(),
        }
    }

    pub fn for_backend(backend: &dyn Interpolator) -> Self {
        BackendProfile::new(backend.name(), backend.kind())
    }

    pub fn record(&mut self, seconds: f64) {
        self.samples.push(seconds);
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Mean seconds per frame pair; `None` before the first sample.
    pub fn measured_latency(&self) -> Option<f64> {
        if self.samples.is_empty() {
            None
        } else {
            Some(self.samples.iter().sum::<f64>() / self.samples.len() as f64)
        }
    }

    /// Times one call and records it.
    pub fn measure(
        &mut self,
        backend: &dyn Interpolator,
        frame0: &Frame,
        frame1: &Frame,
    ) -> Result<(Frame, f64)> {
        let (out, secs) = measure_latency(backend, frame0, frame1)?;
        self.record(secs);
        Ok((out, secs))
    }
}

/// Smallest latency ever reported, so timings are always positive.
pub const MIN_LATENCY: f64 = 1e-9;

/// Wall-clock seconds around one `interpolate` call.
pub fn measure_latency(
    backend: &dyn Interpolator,
    frame0: &Frame,
    frame1: &Frame,
) -> Result<(Frame, f64)> {
    let start = Instant::now();
    let out = backend.interpolate(frame0, frame1)?;
    Ok((out, start.elapsed().as_secs_f64().max(MIN_LATENCY)))
}
