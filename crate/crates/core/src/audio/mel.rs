use super::AudioError;

pub(crate) fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub(crate) fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale between 0 Hz and
/// Nyquist, evaluated at the centre frequency of each FFT bin.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Vec<Vec<f64>>,
    /// `num_filters + 2` band edges in Hz.
    edges_hz: Vec<f64>,
    bin_hz: f64,
}

impl MelFilterbank {
    pub fn new(num_filters: usize, nfft: usize, sample_rate: u32) -> Result<Self, AudioError> {
        if num_filters == 0 || nfft < 2 {
            return Err(AudioError::DegenerateConfig(
                "filterbank needs at least one filter and two FFT bins".into(),
            ));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges_hz: Vec<f64> = (0..num_filters + 2)
            .map(|i| mel_to_hz(top * i as f64 / (num_filters + 1) as f64))
            .collect();
        let bins = nfft / 2 + 1;
        let bin_hz = sample_rate as f64 / nfft as f64;

        let mut weights = Vec::with_capacity(num_filters);
        for m in 0..num_filters {
            let (lo, centre, hi) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
            let row: Vec<f64> = (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= centre {
                        (f - lo) / (centre - lo)
                    } else {
                        (hi - f) / (hi - centre)
                    }
                })
                .collect();
            if row.iter().sum::<f64>() <= 0.0 {
                return Err(AudioError::DegenerateConfig(format!(
                    "mel filter {m} ({lo:.1}-{hi:.1} Hz) covers no FFT bin; use fewer filters or longer frames"
                )));
            }
            weights.push(row);
        }
        Ok(Self {
            weights,
            edges_hz,
            bin_hz,
        })
    }

    pub fn num_filters(&self) -> usize {
        self.weights.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn edges_hz(&self) -> &[f64] {
        &self.edges_hz
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    /// Filter energies `E_m = sum_k w_mk P_k` for one power spectrum.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_round_trip() {
        for hz in [0.0, 100.0, 1000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 1000.0).abs() < 0.5);
    }

    #[test]
    fn rows_are_nonnegative_and_cover_the_band() {
        let fb = MelFilterbank::new(26, 512, 16000).unwrap();
        assert_eq!(fb.num_filters(), 26);
        for row in fb.rows() {
            assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
            assert!(row.iter().sum::<f64>() > 0.0);
        }
        // every bin strictly between the first and last centre is covered
        let first = fb.edges_hz()[1];
        let last = fb.edges_hz()[fb.num_filters()];
        for k in 0..=256 {
            let f = k as f64 * fb.bin_hz();
            if f > first && f < last {
                let total: f64 = fb.rows().iter().map(|r| r[k]).sum();
                assert!(total > 0.0, "dead bin at {f} Hz");
            }
        }
        // adjacent triangles overlap
        for pair in fb.rows().windows(2) {
            assert!(pair[0].iter().zip(&pair[1]).any(|(a, b)| *a > 0.0 && *b > 0.0));
        }
    }

    #[test]
    fn too_many_filters_is_degenerate() {
        assert!(matches!(
            MelFilterbank::new(200, 64, 16000),
            Err(AudioError::DegenerateConfig(_))
        ));
    }
}
