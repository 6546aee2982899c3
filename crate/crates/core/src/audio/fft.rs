//! Iterative radix-2 decimation-in-time FFT.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Smallest power of two `>= n` (and at least 1).
pub fn fft_size(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// In-place forward transform, `X[k] = sum_n x[n] e^{-2 pi i k n / N}`.
///
/// # Panics
/// If the buffer length is not a power of two.
pub fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
    if n == 1 {
        return;
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }

    // Twiddles are evaluated directly rather than by repeated
    // multiplication so the error does not grow with the stage length.
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
        .collect();

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Transforms a real frame zero-padded to `nfft` and returns `|X[k]|` for
/// `k = 0..=nfft/2`.
pub fn magnitude_spectrum(frame: &[f64], nfft: usize) -> Vec<f64> {
    let mut buf = padded(frame, nfft);
    fft_in_place(&mut buf);
    buf[..=nfft / 2].iter().map(|c| c.norm()).collect()
}

/// Like [`magnitude_spectrum`] but returns `|X[k]|^2`.
pub fn power_spectrum(frame: &[f64], nfft: usize) -> Vec<f64> {
    let mut buf = padded(frame, nfft);
    fft_in_place(&mut buf);
    buf[..=nfft / 2].iter().map(|c| c.norm_sqr()).collect()
}

fn padded(frame: &[f64], nfft: usize) -> Vec<Complex64> {
    assert!(frame.len() <= nfft, "frame longer than FFT size");
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for (b, &x) in buf.iter_mut().zip(frame) {
        b.re = x;
    }
    buf
}
