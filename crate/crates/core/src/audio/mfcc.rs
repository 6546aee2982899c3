use std::f64::consts::PI;

use super::fft::{fft_size, power_spectrum};
use super::{AudioClip, AudioError, FeatureMatrix, MelFilterbank, MfccConfig};

/// Energies are clamped here before taking the log.
pub const LOG_FLOOR: f64 = 1e-10;

/// Number of whole frames in `len` samples; trailing partial frames are
/// dropped.
pub fn frame_count(len: usize, frame_len: usize, shift: usize) -> usize {
    if len < frame_len {
        0
    } else {
        (len - frame_len) / shift + 1
    }
}

fn hamming(n: usize) -> Vec<f64> {
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / denom).cos())
        .collect()
}

fn pre_emphasize(samples: &[f64], coeff: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    out.push(samples[0]);
    out.extend(samples.windows(2).map(|w| w[1] - coeff * w[0]));
    out
}

/// Pre-emphasized, un-windowed frames.
fn frames(clip: &AudioClip, cfg: &MfccConfig, min_frames: usize) -> Result<Vec<Vec<f64>>, AudioError> {
    let (len, shift) = cfg.frame_geometry(clip.sample_rate())?;
    let count = frame_count(clip.len(), len, shift);
    if count < min_frames {
        return Err(AudioError::TooShort {
            samples: clip.len(),
            needed: min_frames,
        });
    }
    let emphasized = pre_emphasize(clip.samples(), cfg.pre_emphasis);
    Ok((0..count)
        .map(|i| emphasized[i * shift..i * shift + len].to_vec())
        .collect())
}

fn windowed_power(frame: &[f64], window: &[f64], nfft: usize) -> Vec<f64> {
    let windowed: Vec<f64> = frame.iter().zip(window).map(|(x, w)| x * w).collect();
    power_spectrum(&windowed, nfft)
}

/// Per-frame power spectra `|X[k]|^2`, `k = 0..=nfft/2`, after
/// pre-emphasis and Hamming windowing. Accepts single-frame clips.
pub fn power_spectra(clip: &AudioClip, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>, AudioError> {
    let frames = frames(clip, cfg, 1)?;
    let window = hamming(frames[0].len());
    let nfft = fft_size(window.len());
    Ok(frames
        .iter()
        .map(|f| windowed_power(f, &window, nfft))
        .collect())
}

/// Per-frame mel filterbank energies (before the log).
pub fn mel_energies(clip: &AudioClip, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>, AudioError> {
    let spectra = power_spectra(clip, cfg)?;
    let nfft = (spectra[0].len() - 1) * 2;
    let bank = MelFilterbank::new(cfg.num_mel_filters, nfft, clip.sample_rate())?;
    Ok(spectra.iter().map(|p| bank.apply(p)).collect())
}

/// Orthonormal DCT-II basis, `num_coefficients x num_filters`.
fn dct_matrix(num_coefficients: usize, num_filters: usize) -> Vec<Vec<f64>> {
    let m = num_filters as f64;
    (0..num_coefficients)
        .map(|k| {
            let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            (0..num_filters)
                .map(|j| scale * (PI * k as f64 * (j as f64 + 0.5) / m).cos())
                .collect()
        })
        .collect()
}

/// MFCC features of one clip. Requires at least two whole frames.
pub fn compute_mfcc(clip: &AudioClip, cfg: &MfccConfig) -> Result<FeatureMatrix, AudioError> {
    let frames = frames(clip, cfg, FeatureMatrix::MIN_FRAMES)?;
    let window = hamming(frames[0].len());
    let nfft = fft_size(window.len());
    let bank = MelFilterbank::new(cfg.num_mel_filters, nfft, clip.sample_rate())?;
    let dct = dct_matrix(cfg.num_coefficients, cfg.num_mel_filters);

    let features = frames
        .iter()
        .map(|frame| {
            let power = windowed_power(frame, &window, nfft);
            let log_mel: Vec<f64> = bank
                .apply(&power)
                .into_iter()
                .map(|e| e.max(LOG_FLOOR).ln())
                .collect();
            let mut coeffs: Vec<f64> = dct
                .iter()
                .map(|basis| basis.iter().zip(&log_mel).map(|(b, l)| b * l).sum())
                .collect();
            if cfg.include_log_energy {
                let energy: f64 = frame.iter().map(|x| x * x).sum();
                coeffs.push(energy.max(LOG_FLOOR).ln());
            }
            coeffs
        })
        .collect();
    FeatureMatrix::new(features)
}
