use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use vaulted_voice::audio::fft::{fft_in_place, fft_size};
use vaulted_voice::audio::{
    compute_mfcc, frame_count, mel_energies, power_spectra, AudioClip, MelFilterbank, MfccConfig,
};

fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * j % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

fn periodic(period: usize, harmonics: &[(f64, f64)], len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let phase = n as f64 / period as f64;
            harmonics
                .iter()
                .enumerate()
                .map(|(h, (amp, off))| amp * (2.0 * PI * (h + 1) as f64 * phase + off).sin())
                .sum()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_matches_naive_dft(exp in 0u32..=10, seed in any::<u64>()) {
        let n = 1usize << exp;
        let mut state = seed | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let x: Vec<Complex64> = (0..n).map(|_| Complex64::new(next(), next())).collect();
        let mut fast = x.clone();
        fft_in_place(&mut fast);
        let slow = naive_dft(&x);
        let tol = 1e-9 * n as f64;
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).norm() <= tol, "{a} vs {b}");
        }
    }

    #[test]
    fn fft_size_is_the_next_power_of_two(n in 0usize..100_000) {
        let s = fft_size(n);
        prop_assert!(s.is_power_of_two() && s >= n.max(1));
        prop_assert!(s == 1 || s / 2 < n);
    }

    #[test]
    fn frame_count_matches_feature_rows(len in 0usize..12_000, rate in prop::sample::select(vec![8000u32, 16000, 22050])) {
        let cfg = MfccConfig::default();
        let (flen, shift) = cfg.frame_geometry(rate).unwrap();
        let expected = if len < flen { 0 } else { (len - flen) / shift + 1 };
        prop_assert_eq!(frame_count(len, flen, shift), expected);
        if len == 0 {
            return Ok(());
        }
        let samples: Vec<f64> = (0..len).map(|n| (n as f64 * 0.37).sin() * 0.3).collect();
        let clip = AudioClip::new(samples, rate).unwrap();
        match compute_mfcc(&clip, &cfg) {
            Ok(m) => {
                prop_assert_eq!(m.len(), expected);
                prop_assert_eq!(m.dim(), cfg.feature_dim());
            }
            Err(_) => prop_assert!(expected < 2),
        }
    }

    #[test]
    fn mfcc_is_deterministic(seed in any::<u64>(), len in 800usize..4000) {
        let mut state = seed | 1;
        let samples: Vec<f64> = (0..len)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 0.8
            })
            .collect();
        let clip = AudioClip::new(samples, 16000).unwrap();
        let a = compute_mfcc(&clip, &MfccConfig::default()).unwrap();
        let b = compute_mfcc(&clip, &MfccConfig::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn mel_rows_are_nonnegative_and_overlap(
        filters in 4usize..40,
        exp in 8u32..=11,
        rate in prop::sample::select(vec![8000u32, 11025, 16000, 22050, 44100]),
    ) {
        let nfft = 1usize << exp;
        let Ok(bank) = MelFilterbank::new(filters, nfft, rate) else {
            return Ok(());
        };
        prop_assert_eq!(bank.rows().len(), filters);
        for row in bank.rows() {
            prop_assert_eq!(row.len(), nfft / 2 + 1);
            prop_assert!(row.iter().all(|w| (0.0..=1.0).contains(w)));
            prop_assert!(row.iter().sum::<f64>() > 0.0);
        }
        let edges = bank.edges_hz();
        prop_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        for m in 0..filters - 1 {
            prop_assert!(edges[m + 2] > edges[m + 1], "triangles {m} and {} do not overlap", m + 1);
        }
        let (first, last) = (edges[1], edges[filters]);
        for k in 0..=nfft / 2 {
            let f = k as f64 * bank.bin_hz();
            if f > first && f < last {
                let total: f64 = bank.rows().iter().map(|r| r[k]).sum();
                prop_assert!(total > 0.0, "dead bin at {f} Hz");
            }
        }
    }

    #[test]
    fn shifting_a_periodic_signal_by_one_period(
        period in 20usize..400,
        harmonics in prop::collection::vec((0.05f64..0.3, 0.0f64..std::f64::consts::TAU), 1..5),
    ) {
        let len = 8000;
        let x = periodic(period, &harmonics, len + period);
        let a = AudioClip::new(x[..len].to_vec(), 16000).unwrap();
        let b = AudioClip::new(x[period..].to_vec(), 16000).unwrap();
        let fa = compute_mfcc(&a, &MfccConfig::default()).unwrap();
        let fb = compute_mfcc(&b, &MfccConfig::default()).unwrap();
        prop_assert_eq!(fa.len(), fb.len());
        for (ra, rb) in fa.frames().iter().zip(fb.frames()) {
            for (u, v) in ra.iter().zip(rb) {
                prop_assert!((u - v).abs() <= 1e-6, "{u} vs {v}");
            }
        }
    }
}

fn hamming(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()).collect()
}

#[test]
fn hamming_frame_spectrum_matches_naive_dft() {
    let cfg = MfccConfig::default();
    let (len, _) = cfg.frame_geometry(16000).unwrap();
    let window = hamming(len);
    let clip = AudioClip::new(window.clone(), 16000).unwrap();
    let spectra = power_spectra(&clip, &cfg).unwrap();
    assert_eq!(spectra.len(), 1);

    let mut frame = vec![window[0]];
    frame.extend(window.windows(2).map(|w| w[1] - cfg.pre_emphasis * w[0]));
    let nfft = fft_size(len);
    let mut padded: Vec<Complex64> = frame.iter().zip(&window).map(|(x, w)| Complex64::new(x * w, 0.0)).collect();
    padded.resize(nfft, Complex64::new(0.0, 0.0));
    let expected: Vec<f64> = naive_dft(&padded)[..=nfft / 2].iter().map(|c| c.norm()).collect();
    let peak = expected.iter().cloned().fold(0.0, f64::max);
    for (got, want) in spectra[0].iter().zip(&expected) {
        assert!((got.sqrt() - want).abs() <= 1e-9 * peak, "{} vs {want}", got.sqrt());
    }
}

#[test]
fn doubling_amplitude_quadruples_mel_energies() {
    let cfg = MfccConfig::default();
    let tone: Vec<f64> = (0..16000).map(|n| 0.2 * (2.0 * PI * 440.0 * n as f64 / 16000.0).sin()).collect();
    let loud: Vec<f64> = tone.iter().map(|x| 2.0 * x).collect();
    let a = mel_energies(&AudioClip::new(tone, 16000).unwrap(), &cfg).unwrap();
    let b = mel_energies(&AudioClip::new(loud, 16000).unwrap(), &cfg).unwrap();
    for (ra, rb) in a.iter().zip(&b) {
        for (x, y) in ra.iter().zip(rb) {
            assert_eq!(*y, 4.0 * x);
        }
    }
}
