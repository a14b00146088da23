//! Deterministic counter-based pseudo-random draws.
//!
//! Every random quantity in the toolkit is a pure function of a 64-bit seed
//! and a draw index — no hidden generator state, no platform entropy — so
//! results reproduce bit-for-bit everywhere and are easy to port: the
//! `index`-th draw is the SplitMix64 output function applied to
//! `seed + (index + 1) · 0x9E3779B97F4A7C15` (all arithmetic mod 2⁶⁴).
//!
//! Because draw `i` never depends on how many other draws were made, prefix
//! properties come for free: with the same seed, the first two generated
//! terminals are identical whether the scenario asks for 2 or for 6.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a bijective 64-bit mixer with full avalanche.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `index`-th 64-bit draw of the stream identified by `seed`.
pub fn draw(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

/// The `index`-th uniform draw in `[0, 1)`, using the top 53 bits.
pub fn unit(seed: u64, index: u64) -> f64 {
    (draw(seed, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Derives an independent sub-stream seed for a distinct purpose
/// (terminal generation, benchmark placement, ...), so different consumers
/// of the same user-facing seed never share draw indices.
pub fn stream(seed: u64, stream_id: u64) -> u64 {
    mix64(seed ^ mix64(stream_id.wrapping_add(GOLDEN)))
}

/// Stream tag for generated user terminals.
pub const STREAM_TERMINALS: u64 = 1;
/// Stream tag for the random-placement benchmark.
pub const STREAM_RANDOM_PLACEMENT: u64 = 2;
