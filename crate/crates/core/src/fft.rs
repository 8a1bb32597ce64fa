//! Multi-dimensional FFT on cubic row-major arrays, built on `rustfft`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

/// Transform direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// e^{−2πi k j / N} kernel, no normalization.
    Forward,
    /// e^{+2πi k j / N} kernel, no normalization.
    Inverse,
}

/// In-place unnormalized d-dimensional FFT of an N^d row-major array.
pub fn fft_nd(data: &mut [Complex64], dim: usize, n: usize, dir: Direction) {
    assert_eq!(data.len(), n.pow(dim as u32), "array length must be N^dim");
    let mut planner = FftPlanner::<f64>::new();
    let fft = match dir {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    };
    for axis in 0..dim {
        let inner = n.pow((dim - 1 - axis) as u32);
        let block = n * inner;
        if inner == 1 {
            data.par_chunks_mut(n * 64)
                .for_each(|chunk| fft.process(chunk));
            continue;
        }
        for blk in data.chunks_mut(block) {
            let view: &[Complex64] = blk;
            let lines: Vec<Vec<Complex64>> = (0..inner)
                .into_par_iter()
                .map(|i| {
                    let mut line: Vec<Complex64> = (0..n).map(|j| view[j * inner + i]).collect();
                    fft.process(&mut line);
                    line
                })
                .collect();
            blk.par_chunks_mut(inner).enumerate().for_each(|(j, row)| {
                for (i, v) in row.iter_mut().enumerate() {
                    *v = lines[i][j];
                }
            });
        }
    }
}

/// Signed frequency index of position `j` on an axis of length `n`
/// (the Nyquist index maps to −n/2).
#[inline]
pub fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Splits a flat row-major index into per-axis indices.
#[inline]
pub fn unflatten(mut idx: usize, dim: usize, n: usize, out: &mut [usize]) {
    for a in (0..dim).rev() {
        out[a] = idx % n;
        idx /= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip() {
        let n = 8;
        let mut data: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new((i as f64).sin(), 0.0))
            .collect();
        let orig = data.clone();
        fft_nd(&mut data, 3, n, Direction::Forward);
        fft_nd(&mut data, 3, n, Direction::Inverse);
        let scale = (n * n * n) as f64;
        for (a, b) in data.iter().zip(&orig) {
            assert!((a / scale - b).norm() < 1e-13);
        }
    }

    #[test]
    fn single_mode_lands_on_its_index() {
        let n = 16;
        let mut data: Vec<Complex64> = (0..n * n)
            .map(|i| {
                let (r, c) = (i / n, i % n);
                let ph = 2.0 * std::f64::consts::PI * (3.0 * r as f64 + 5.0 * c as f64) / n as f64;
                Complex64::new(ph.cos(), ph.sin())
            })
            .collect();
        fft_nd(&mut data, 2, n, Direction::Forward);
        assert!((data[3 * n + 5].re - (n * n) as f64).abs() < 1e-9);
        assert_eq!(signed_index(15, 16), -1);
        assert_eq!(signed_index(8, 16), -8);
    }
}
