//! Diagonal-covariance Gaussian mixture phrase models.
//!
//! A [`PhraseModel`] is the unit that gets sealed into vault blocks. Models
//! are trained by seeded k-means++ followed by expectation-maximization, and
//! compared with a weighted mean absolute z-score between component means
//! (see [`model_distance`]).

mod codec;
mod distance;
mod train;

pub use codec::MODEL_MAGIC;
pub use distance::{choose_closer, closest_index, model_distance, Choice};
pub use train::{train_model, train_model_traced};

use std::cmp::Ordering;

use thiserror::Error;

/// Default floor applied to every variance entry.
pub const VARIANCE_FLOOR: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmmError {
    #[error("{frames} training frames, need at least {needed}")]
    TooFewFrames { frames: usize, needed: usize },
    #[error("non-finite feature value in frame {0}")]
    NonFinite(usize),
    #[error("feature dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("log-likelihood decreased at EM iteration {iteration}: {previous} -> {current}")]
    LikelihoodDecreased {
        iteration: usize,
        previous: f64,
        current: f64,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model decode failed: {0}")]
    Decode(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Diagonal of the covariance matrix.
    pub variance: Vec<f64>,
}

impl GaussianComponent {
    /// Log density of `x` under this component (weight excluded).
    pub fn log_density(&self, x: &[f64]) -> f64 {
        const LN_2PI: f64 = 1.837_877_066_409_345_3;
        let mut acc = 0.0;
        for ((xi, mu), var) in x.iter().zip(&self.mean).zip(&self.variance) {
            let d = xi - mu;
            acc += LN_2PI + var.ln() + d * d / var;
        }
        -0.5 * acc
    }
}

/// Canonical component order: descending weight, then lexicographically
/// ascending mean.
pub(crate) fn canonical_order(a: &GaussianComponent, b: &GaussianComponent) -> Ordering {
    b.weight.total_cmp(&a.weight).then_with(|| {
        a.mean
            .iter()
            .zip(&b.mean)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// A trained phrase model together with the transcription it was trained
/// on.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseModel {
    components: Vec<GaussianComponent>,
    dim: usize,
    transcription: String,
    training_frame_count: u64,
}

impl PhraseModel {
    /// Validates the invariants and puts the components in canonical order.
    pub fn new(
        mut components: Vec<GaussianComponent>,
        transcription: impl Into<String>,
        training_frame_count: u64,
    ) -> Result<Self, GmmError> {
        let invalid = |m: String| Err(GmmError::InvalidModel(m));
        if components.is_empty() {
            return invalid("no components".into());
        }
        let dim = components[0].mean.len();
        if dim == 0 {
            return invalid("zero feature dimension".into());
        }
        let mut total = 0.0;
        for (i, c) in components.iter().enumerate() {
            if c.mean.len() != dim || c.variance.len() != dim {
                return invalid(format!("component {i} has the wrong dimension"));
            }
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return invalid(format!("component {i} weight {} outside (0, 1]", c.weight));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return invalid(format!("component {i} has a non-finite mean"));
            }
            if c.variance.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return invalid(format!("component {i} has a non-positive variance"));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-6 {
            return invalid(format!("weights sum to {total}"));
        }
        components.sort_by(canonical_order);
        Ok(Self {
            components,
            dim,
            transcription: transcription.into(),
            training_frame_count,
        })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn transcription(&self) -> &str {
        &self.transcription
    }

    pub fn training_frame_count(&self) -> u64 {
        self.training_frame_count
    }

    /// Log-likelihood of a single frame under the mixture.
    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.weight.ln() + c.log_density(x))
            .collect();
        log_sum_exp(&terms)
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub num_components: usize,
    pub em_iterations: usize,
    pub rng_seed: u64,
    pub variance_floor: f64,
    pub kmeans_init_iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_components: 8,
            em_iterations: 25,
            rng_seed: 0,
            variance_floor: VARIANCE_FLOOR,
            kmeans_init_iterations: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GmmError> {
        if self.num_components == 0 {
            return Err(GmmError::InvalidConfig("need at least one component".into()));
        }
        if self.em_iterations == 0 {
            return Err(GmmError::InvalidConfig("need at least one EM iteration".into()));
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(GmmError::InvalidConfig("variance floor must be positive".into()));
        }
        Ok(())
    }
}

/// Which model supplies the standard deviation in a z-score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScoreDirection {
    GalleryVariance,
    ProbeVariance,
}

impl ScoreDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreDirection::GalleryVariance => "gallery_variance",
            ScoreDirection::ProbeVariance => "probe_variance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ScoreDirection::GalleryVariance, ScoreDirection::ProbeVariance]
            .into_iter()
            .find(|d| d.as_str() == s)
    }
}

impl std::fmt::Display for ScoreDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
