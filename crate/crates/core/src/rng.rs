//! Counter-based splittable random number generation.
//!
//! Every draw is a pure function of a 64-bit key and a 64-bit counter, so
//! replicas, steps and modes can be sampled in any order (or in parallel)
//! and still produce bit-identical streams. Keys are derived from a base
//! seed with the SplitMix64 jump: `state_r = base + GAMMA * (r + 1)`, which
//! is injective in the replica index, followed by the SplitMix64 finalizer.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer (Vigna); bijective on u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable key for one replica stream. Distinct replicas under the same base
/// seed always yield distinct keys. Integer-only; identical on all targets.
#[inline]
pub fn replica_key(base_seed: u64, replica: u64) -> u64 {
    mix64(base_seed.wrapping_add(GAMMA.wrapping_mul(replica.wrapping_add(1))))
}

/// One uniform u64 at (key, counter).
#[inline]
pub fn next_u64(key: u64, counter: u64) -> u64 {
    mix64(mix64(key ^ counter.wrapping_mul(GAMMA)).wrapping_add(counter))
}

/// Uniform in (0, 1]: 53 random bits, never exactly zero.
#[inline]
pub fn uniform(key: u64, counter: u64) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    ((next_u64(key, counter) >> 11) + 1) as f64 * SCALE
}

/// Standard normal draw at (key, counter) via Box-Muller on two uniforms.
#[inline]
pub fn standard_normal(key: u64, counter: u64) -> f64 {
    let u1 = uniform(key, counter.wrapping_mul(2));
    let u2 = uniform(key, counter.wrapping_mul(2).wrapping_add(1));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Fill `out` with standard normals at counters `base_ctr..base_ctr + out.len()`.
pub fn fill_standard_normal(key: u64, base_ctr: u64, out: &mut [f64]) {
    for (i, x) in out.iter_mut().enumerate() {
        *x = standard_normal(key, base_ctr.wrapping_add(i as u64));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_distinct_across_replicas() {
        let base = 42;
        let keys: Vec<u64> = (0..1000).map(|r| replica_key(base, r)).collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), keys.len());
    }

    #[test]
    fn draws_are_deterministic() {
        for ctr in [0u64, 1, 17, u64::MAX / 2] {
            assert_eq!(next_u64(7, ctr), next_u64(7, ctr));
            assert_eq!(
                standard_normal(7, ctr).to_bits(),
                standard_normal(7, ctr).to_bits()
            );
        }
    }

    #[test]
    fn normal_moments_are_sane() {
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n {
            let z = standard_normal(99, i);
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean = {mean}");
        assert!((var - 1.0).abs() < 0.02, "var = {var}");
    }

    #[test]
    fn reference_vectors_stay_stable() {
        // Frozen outputs of the documented key derivation; these must never
        // change across versions or platforms.
        assert_eq!(replica_key(0, 0), mix64(GAMMA));
        for (base, replica, expect) in REFERENCE_KEYS {
            assert_eq!(replica_key(*base, *replica), *expect);
        }
    }

    // (base_seed, replica, key); regenerate only if the derivation changes.
    const REFERENCE_KEYS: &[(u64, u64, u64)] = &[
        (0, 1, 0x6e789e6aa1b965f4),
        (42, 0, 0xbdd732262feb6e95),
        (42, 1, 0x28efe333b266f103),
        (42, 1000, 0x5566dbe893f1b4ae),
        (u64::MAX, 7, 0x405da438a39e8064),
    ];
}
