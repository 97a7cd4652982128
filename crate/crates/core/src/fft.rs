//! Minimal iterative radix-2 FFT.
//!
//! The smoothness metric always zero-pads its input to a power of two, so a
//! radix-2 transform is all that is needed. Checked against a direct DFT and
//! `rustfft` in the test suite.

use crate::scalar::Scalar;

/// In-place forward FFT on interleaved (re, im) pairs. `data.len() / 2` must
/// be a power of two.
pub fn fft_in_place<T: Scalar>(data: &mut [(T, T)]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }

    let mut len = 2usize;
    while len <= n {
        let ang = -T::TAU() / T::c(len as f64);
        let (ws, wc) = ang.sin_cos();
        for start in (0..n).step_by(len) {
            let mut w = (T::one(), T::zero());
            for k in 0..len / 2 {
                let (ur, ui) = data[start + k];
                let (vr, vi) = data[start + k + len / 2];
                let tr = vr * w.0 - vi * w.1;
                let ti = vr * w.1 + vi * w.0;
                data[start + k] = (ur + tr, ui + ti);
                data[start + k + len / 2] = (ur - tr, ui - ti);
                w = (w.0 * wc - w.1 * ws, w.0 * ws + w.1 * wc);
            }
        }
        len <<= 1;
    }
}

/// Magnitude spectrum of a real signal zero-padded to length `n` (a power of
/// two). Returns `n / 2 + 1` magnitudes, bins 0..=Nyquist.
pub fn real_magnitude_spectrum<T: Scalar>(signal: &[T], n: usize) -> Vec<T> {
    assert!(n.is_power_of_two() && n >= signal.len());
    let mut buf: Vec<(T, T)> = Vec::with_capacity(n);
    buf.extend(signal.iter().map(|&v| (v, T::zero())));
    buf.resize(n, (T::zero(), T::zero()));
    fft_in_place(&mut buf);
    buf[..=n / 2]
        .iter()
        .map(|&(re, im)| (re * re + im * im).sqrt())
        .collect()
}

pub fn next_power_of_two(n: usize) -> usize {
    n.next_power_of_two()
}
