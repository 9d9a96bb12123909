//! Small numeric helpers shared across modules: seed derivation for
//! reproducible parallel sampling, a Gaussian sampler, and stable
//! log-domain averaging.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; used to derive independent substream seeds from a master
/// seed so that results do not depend on thread count or scheduling.
pub(crate) fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic RNG for substream `stream` of master seed `seed`.
pub(crate) fn derive_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

/// Standard normal via Box-Muller. Consumes exactly two uniforms.
pub(crate) fn standard_normal(rng: &mut impl Rng) -> (f64, f64) {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Mean and standard error of `exp(values)` computed in the log domain with a
/// max shift. Returns `(log_mean, stderr_of_log_mean)`. Entries of
/// `f64::NEG_INFINITY` contribute zero weight. Returns `None` if every entry
/// is -inf.
pub(crate) fn log_mean_exp(values: &[f64]) -> Option<(f64, f64)> {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let n = values.len() as f64;
    let mut sum = 0.0;
    for &v in values {
        sum += (v - m).exp();
    }
    let mean = sum / n;
    // Two passes: the one-pass sum-of-squares form loses the variance to
    // cancellation when all weights are nearly equal.
    let mut dev_sq = 0.0;
    for &v in values {
        let d = (v - m).exp() - mean;
        dev_sq += d * d;
    }
    let var = dev_sq / n;
    // Delta method: se(log c) = se(c)/c.
    let se_log = (var / n).sqrt() / mean;
    Some((m + mean.ln(), se_log))
}

/// Chunk size for parallel Monte Carlo loops. Fixed so that the stream of
/// random numbers per chunk, and hence every estimate, is identical for any
/// thread count.
pub(crate) const MC_CHUNK: usize = 4096;

/// FNV-1a over bytes; used for content fingerprints that must be stable
/// across runs and platforms (std's default hasher promises neither).
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Gauss-Legendre nodes and weights on [-1, 1]. Exact for polynomials of
/// degree 2*points - 1, which is how the band-operator integrals stay at
/// machine precision instead of some quadrature tolerance.
pub(crate) fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(points >= 1);
    let n = points;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            if n == 1 {
                p1 = x;
            }
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn_prev = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn_prev) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}
