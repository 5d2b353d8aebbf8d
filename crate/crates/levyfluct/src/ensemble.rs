//! Reproducible parallel ensembles: per-chunk ChaCha streams and
//! order-preserving reductions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Paths per random stream. Stream `c` of seed `s` always covers paths
/// `c·CHUNK .. (c+1)·CHUNK`, whatever the thread count.
pub const CHUNK: usize = 4096;

pub(crate) fn chunks(n: usize) -> Vec<(u64, usize)> {
    (0..n.div_ceil(CHUNK))
        .map(|c| (c as u64, CHUNK.min(n - c * CHUNK)))
        .collect()
}

pub(crate) fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_sums(sum: f64, sum_sq: f64, n: usize) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            f64::NAN
        };
        Self {
            mean,
            std_err: (var / nf).sqrt(),
            n,
        }
    }

    /// `(mean - target)/std_err`; 0 when both the error and the gap vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_err
        }
    }

    pub fn within_sigmas(&self, target: f64, k: f64) -> bool {
        self.z_score(target).abs() <= k
    }
}

/// Runs `n` independent samples of `k` observables and returns their means.
///
/// `f` fills one sample's observables from the given stream. Sums are
/// reduced per chunk and then in chunk order, so results are bit-identical
/// for a fixed seed.
pub fn run_ensemble<F>(n: usize, k: usize, seed: u64, f: F) -> Vec<Estimate>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let parts: Vec<(Vec<f64>, Vec<f64>)> = chunks(n)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            let (mut s, mut s2, mut obs) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
            for _ in 0..len {
                obs.iter_mut().for_each(|v| *v = 0.0);
                f(&mut rng, &mut obs);
                for j in 0..k {
                    s[j] += obs[j];
                    s2[j] += obs[j] * obs[j];
                }
            }
            (s, s2)
        })
        .collect();
    let (mut s, mut s2) = (vec![0.0; k], vec![0.0; k]);
    for (a, b) in &parts {
        for j in 0..k {
            s[j] += a[j];
            s2[j] += b[j];
        }
    }
    (0..k)
        .map(|j| Estimate::from_sums(s[j], s2[j], n))
        .collect()
}

/// Maps `n` samples in parallel, keeping sample order.
pub fn map_ensemble<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    chunks(n)
        .into_par_iter()
        .flat_map_iter(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            (0..len).map(|_| f(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// Two-sided Kolmogorov–Smirnov distance between a sample and a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let f = cdf(y);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn ensembles_do_not_depend_on_threads() {
        let f = |rng: &mut ChaCha8Rng, o: &mut [f64]| o[0] = rng.random::<f64>();
        let a = run_ensemble(10_000, 1, 4, f);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| run_ensemble(10_000, 1, 4, f));
        assert_eq!(a, b);
        assert!(a[0].within_sigmas(0.5, 4.0));
        assert!((a[0].std_err - (1.0f64 / 12.0 / 1e4).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn ks_of_uniforms() {
        let mut u = map_ensemble(20_000, 2, |r| r.random::<f64>());
        assert!(ks_distance(&mut u, |x| x.clamp(0.0, 1.0)) < 0.015);
        let mut v = map_ensemble(20_000, 3, |r| r.random::<f64>());
        assert!(ks_two_sample(&mut u, &mut v) < 0.02);
        let mut w: Vec<f64> = u.iter().map(|x| x + 0.5).collect();
        assert!(ks_two_sample(&mut u, &mut w) > 0.4);
    }
}
