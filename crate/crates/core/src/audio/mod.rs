//! PCM ingest and MFCC feature extraction.
//!
//! The front end is the usual speech pipeline: pre-emphasis, overlapping
//! Hamming-windowed frames, a radix-2 FFT of each zero-padded frame, a
//! triangular mel filterbank over the power spectrum, a floored log and an
//! orthonormal DCT-II. Everything here is a pure function of its inputs.

pub mod fft;
mod mel;
mod mfcc;
mod wav;

pub use mel::MelFilterbank;
pub use mfcc::{compute_mfcc, frame_count, mel_energies, power_spectra, LOG_FLOOR};
pub use wav::{read_wav, write_wav};

use thiserror::Error;

/// Lowest sample rate accepted for an [`AudioClip`].
pub const MIN_SAMPLE_RATE: u32 = 8000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AudioError {
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("truncated data chunk: header declares {declared} bytes, {available} available")]
    TruncatedData { declared: usize, available: usize },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("invalid MFCC configuration: {0}")]
    DegenerateConfig(String),
    #[error("clip too short: {samples} samples yields fewer than {needed} frames")]
    TooShort { samples: usize, needed: usize },
    #[error("invalid feature matrix: {0}")]
    InvalidFeatures(String),
}

/// Mono audio with samples normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if samples.is_empty() {
            return Err(AudioError::InvalidClip("no samples".into()));
        }
        if sample_rate < MIN_SAMPLE_RATE {
            return Err(AudioError::InvalidClip(format!(
                "sample rate {sample_rate} Hz below {MIN_SAMPLE_RATE} Hz"
            )));
        }
        if let Some(i) = samples
            .iter()
            .position(|s| !s.is_finite() || s.abs() > 1.0)
        {
            return Err(AudioError::InvalidClip(format!(
                "sample {i} = {} outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfccConfig {
    pub frame_length_ms: f64,
    /// Hop between frame starts; must be shorter than the frame.
    pub frame_shift_ms: f64,
    pub num_mel_filters: usize,
    pub num_coefficients: usize,
    /// First-order pre-emphasis coefficient in `[0, 1)`.
    pub pre_emphasis: f64,
    /// Append the log frame energy as an extra coefficient.
    pub include_log_energy: bool,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame_length_ms: 25.0,
            frame_shift_ms: 10.0,
            num_mel_filters: 26,
            num_coefficients: 13,
            pre_emphasis: 0.97,
            include_log_energy: true,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        let bad = |m: &str| Err(AudioError::DegenerateConfig(m.to_string()));
        if !(self.frame_length_ms > 0.0 && self.frame_shift_ms > 0.0) {
            return bad("frame length and shift must be positive");
        }
        if self.frame_shift_ms >= self.frame_length_ms {
            return bad("frame shift must be shorter than the frame length");
        }
        if self.num_mel_filters == 0 || self.num_coefficients == 0 {
            return bad("filter and coefficient counts must be positive");
        }
        if self.num_coefficients > self.num_mel_filters {
            return bad("more cepstral coefficients than mel filters");
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return bad("pre-emphasis must lie in [0, 1)");
        }
        Ok(())
    }

    /// Frame length and shift in samples at `sample_rate`.
    pub fn frame_geometry(&self, sample_rate: u32) -> Result<(usize, usize), AudioError> {
        self.validate()?;
        let len = (self.frame_length_ms * sample_rate as f64 / 1000.0).round() as usize;
        let shift = (self.frame_shift_ms * sample_rate as f64 / 1000.0).round() as usize;
        if shift == 0 || len < 2 || shift >= len {
            return Err(AudioError::DegenerateConfig(format!(
                "frame of {len} samples with shift {shift} at {sample_rate} Hz"
            )));
        }
        Ok((len, shift))
    }

    /// Dimension of each feature frame.
    pub fn feature_dim(&self) -> usize {
        self.num_coefficients + usize::from(self.include_log_energy)
    }
}

/// Sequence of equal-length feature frames extracted from one or more
/// utterances.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    frames: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    /// Minimum number of frames per matrix.
    pub const MIN_FRAMES: usize = 2;

    pub fn new(frames: Vec<Vec<f64>>) -> Result<Self, AudioError> {
        if frames.len() < Self::MIN_FRAMES {
            return Err(AudioError::InvalidFeatures(format!(
                "{} frames, need at least {}",
                frames.len(),
                Self::MIN_FRAMES
            )));
        }
        let dim = frames[0].len();
        if dim == 0 {
            return Err(AudioError::InvalidFeatures("zero-dimensional frames".into()));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.len() != dim {
                return Err(AudioError::InvalidFeatures(format!(
                    "frame {i} has dimension {}, expected {dim}",
                    f.len()
                )));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(AudioError::InvalidFeatures(format!(
                    "frame {i} has non-finite entries"
                )));
            }
        }
        Ok(Self { dim, frames })
    }

    /// Stacks the frames of several matrices with the same dimension.
    pub fn concat<'a, I>(parts: I) -> Result<Self, AudioError>
    where
        I: IntoIterator<Item = &'a FeatureMatrix>,
    {
        let mut frames = Vec::new();
        for p in parts {
            frames.extend(p.frames.iter().cloned());
        }
        Self::new(frames)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}
