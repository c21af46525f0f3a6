//! Seeding.
//!
//! Every stream is a `ChaCha8Rng` seeded through `seed_from_u64`. Uniforms
//! are `rng.gen::<f64>()` (53 random mantissa bits), Bernoulli(p) draws are
//! `uniform < p`, and standard normals use the ziggurat sampler from
//! `rand_distr`. Correlated normals are a lower Cholesky factor applied to
//! independent standard normals.
//!
//! Child seeds are derived from a master seed and a path of stream indices
//! with the splitmix64 finaliser, so replication `r` at sample size `n` gets
//! the same data no matter how the work is scheduled.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the stream at `path` below `master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(1))))
}
