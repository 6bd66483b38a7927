// Iterative radix-2 FFT, enough for the short power-of-two analysis frames
// used by the MFCC front end.

use alloc::vec::Vec;

use crate::math;

pub(crate) struct Fft {
    n: usize,
    twiddles: Vec<(f64, f64)>,
    bitrev: Vec<usize>,
}

impl Fft {
    pub(crate) fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "fft size must be a power of two");
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -core::f64::consts::TAU * k as f64 / n as f64;
                (math::cos(a), math::sin(a))
            })
            .collect();
        Self { n, twiddles, bitrev }
    }

    /// In-place forward transform of interleaved (re, im) pairs.
    pub(crate) fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(re.len(), n);
        for i in 0..n {
            let j = self.bitrev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let (wr, wi) = self.twiddles[k * step];
                    let a = start + k;
                    let b = a + len / 2;
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len <<= 1;
        }
    }

    /// Power spectrum `|X_k|^2` for `k = 0..=n/2` of a real frame (zero padded to `n`).
    pub(crate) fn power_spectrum(&self, frame: &[f64], re: &mut Vec<f64>, im: &mut Vec<f64>, out: &mut [f64]) {
        re.clear();
        re.extend_from_slice(frame);
        re.resize(self.n, 0.0);
        im.clear();
        im.resize(self.n, 0.0);
        self.forward(re, im);
        for (k, p) in out.iter_mut().enumerate().take(self.n / 2 + 1) {
            *p = re[k] * re[k] + im[k] * im[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold((0.0, 0.0), |(r, i), (t, v)| {
                    let a = -core::f64::consts::TAU * (k * t) as f64 / n as f64;
                    (r + v * a.cos(), i + v * a.sin())
                })
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for &n in &[1usize, 2, 4, 8, 64] {
            let x: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
            let mut re = x.clone();
            let mut im = alloc::vec![0.0; n];
            Fft::new(n).forward(&mut re, &mut im);
            for (k, (r, i)) in naive_dft(&x).into_iter().enumerate() {
                assert!((re[k] - r).abs() < 1e-9 && (im[k] - i).abs() < 1e-9, "n={n} k={k}");
            }
        }
    }
}
