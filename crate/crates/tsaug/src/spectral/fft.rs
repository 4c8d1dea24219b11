//! Discrete Fourier transform helpers for the periodogram. Radix-2 in-place
//! FFT on power-of-two lengths (windows are always powers of two), direct
//! summation otherwise.

use std::f64::consts::PI;

/// In-place complex FFT, decimation in time.
fn fft_radix2(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    debug_assert!(n.is_power_of_two());
    // bit-reversal permutation
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let (mut cr, mut ci) = (1.0, 0.0);
            for k in 0..len / 2 {
                let a = start + k;
                let b = a + len / 2;
                let tr = re[b] * cr - im[b] * ci;
                let ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                let ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
        len <<= 1;
    }
}

/// Squared magnitudes |X_k|^2 of the DFT of a real signal, k = 0..=T/2.
pub fn real_dft_power(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let half = n / 2;
    if n.is_power_of_two() {
        let mut re = signal.to_vec();
        let mut im = vec![0.0; n];
        fft_radix2(&mut re, &mut im);
        (0..=half).map(|k| re[k] * re[k] + im[k] * im[k]).collect()
    } else {
        (0..=half)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &x) in signal.iter().enumerate() {
                    let ang = -2.0 * PI * k as f64 * t as f64 / n as f64;
                    re += x * ang.cos();
                    im += x * ang.sin();
                }
                re * re + im * im
            })
            .collect()
    }
}
