//! Counter-based deterministic sampling.
//!
//! Every draw is a pure function of a key (a slice of `u64` words, typically
//! a seed plus structural indices such as row/column). Keyed draws make any
//! submatrix or sub-stream reproducible independently of evaluation order,
//! which the channel generators and the sweep drivers rely on.

use std::f64::consts::PI;

/// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a key made of several words into one well-mixed word.
pub fn mix(parts: &[u64]) -> u64 {
    let mut acc: u64 = 0x243f_6a88_85a3_08d3; // arbitrary non-zero start
    for &p in parts {
        acc = splitmix(acc ^ splitmix(p));
    }
    acc
}

/// Uniform draw on the open interval (0, 1).
pub fn uniform(parts: &[u64]) -> f64 {
    // 53 mantissa bits, offset by half an ulp so 0.0 is never produced.
    ((mix(parts) >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal via Box-Muller on two keyed uniforms.
pub fn std_normal(parts: &[u64]) -> f64 {
    let mut key = parts.to_vec();
    key.push(0);
    let u1 = uniform(&key);
    *key.last_mut().unwrap() = 1;
    let u2 = uniform(&key);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Exponential with unit rate.
pub fn exponential(parts: &[u64]) -> f64 {
    -uniform(parts).ln()
}

/// Nakagami amplitude with m = 2 and spread Ω = 1, sampled as the square
/// root of a Gamma(2, 1/2) variate so that E[A²] = Ω.
pub fn nakagami_m2(parts: &[u64]) -> f64 {
    let mut key = parts.to_vec();
    key.push(0);
    let u1 = uniform(&key);
    *key.last_mut().unwrap() = 1;
    let u2 = uniform(&key);
    (-0.5 * (u1.ln() + u2.ln())).sqrt()
}

/// Rayleigh amplitude normalized so that E[A²] = 1.
pub fn rayleigh_unit(parts: &[u64]) -> f64 {
    exponential(parts).sqrt()
}

/// Log-normal shadowing factor 10^(N(0, sigma_db)/20) in amplitude domain.
pub fn lognormal_db(sigma_db: f64, parts: &[u64]) -> f64 {
    10f64.powf(sigma_db * std_normal(parts) / 20.0)
}

/// Poisson count with the given mean. Multiplication method for small means,
/// rounded normal approximation beyond exp-underflow territory.
pub fn poisson(mean: f64, parts: &[u64]) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    if mean > 600.0 {
        let z = std_normal(parts);
        return (mean + mean.sqrt() * z).round().max(0.0) as usize;
    }
    let limit = (-mean).exp();
    let mut key = parts.to_vec();
    key.push(0);
    let mut prod = 1.0;
    let mut count = 0usize;
    loop {
        *key.last_mut().unwrap() = count as u64;
        prod *= uniform(&key);
        if prod < limit {
            return count;
        }
        count += 1;
    }
}

/// Point on the simplex {x >= 0, sum x = total} via normalized exponentials.
pub fn simplex_point(n: usize, total: f64, parts: &[u64]) -> Vec<f64> {
    let mut key = parts.to_vec();
    key.push(0);
    let draws: Vec<f64> = (0..n)
        .map(|i| {
            *key.last_mut().unwrap() = i as u64;
            exponential(&key)
        })
        .collect();
    let sum: f64 = draws.iter().sum();
    draws.iter().map(|d| d / sum * total).collect()
}
