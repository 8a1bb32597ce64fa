//! Parallel reductions whose floating-point results do not depend on thread scheduling.

use rayon::prelude::*;

/// Indices per work unit; partial sums are combined in chunk order.
const CHUNK: usize = 4096;

fn chunks(len: usize) -> impl IndexedParallelIterator<Item = std::ops::Range<usize>> {
    (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(move |c| c * CHUNK..((c + 1) * CHUNK).min(len))
}

/// Σ_{i < len} f(i), reproducible bit for bit across thread counts.
pub fn par_sum<F: Fn(usize) -> f64 + Sync>(len: usize, f: F) -> f64 {
    let parts: Vec<f64> = chunks(len).map(|r| r.map(&f).sum()).collect();
    parts.iter().sum()
}

/// Accumulates `f(acc, i)` into a vector of `width` entries for every i < len,
/// with the same reproducibility as [`par_sum`].
pub fn par_accumulate<F: Fn(&mut [f64], usize) + Sync>(len: usize, width: usize, f: F) -> Vec<f64> {
    let parts: Vec<Vec<f64>> = chunks(len)
        .map(|r| {
            let mut acc = vec![0.0; width];
            for i in r {
                f(&mut acc, i);
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; width];
    for p in &parts {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_match_sequential_order_of_chunks() {
        let f = |i: usize| 1.0 / (1.0 + i as f64);
        let a = par_sum(100_000, f);
        let b = par_sum(100_000, f);
        assert_eq!(a.to_bits(), b.to_bits());
        let s: f64 = (0..100_000).map(f).sum();
        assert!((a - s).abs() < 1e-10);
    }

    #[test]
    fn accumulate_adds_componentwise() {
        let v = par_accumulate(10_000, 2, |acc, i| {
            acc[0] += 1.0;
            acc[1] += i as f64;
        });
        assert_eq!(v, vec![10_000.0, 49_995_000.0]);
    }
}
