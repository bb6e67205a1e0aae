//! Index rules of the bitonic network.
//!
//! Stage `i` (1-based) builds sorted runs of length `2^i` through steps
//! `j = i..=1`; step `j` pairs indices at distance `2^(j-1)`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascending,
    Descending,
}

/// Compare partner of `idx` at step `step`.
#[inline]
pub fn bitonic_partner(idx: u32, step: u32) -> u32 {
    idx ^ (1 << (step - 1))
}

/// Merge direction of the run containing `idx` during stage `stage`.
///
/// Ascending iff bit `stage` of `idx` is clear, so the last stage (whose bit
/// is zero for every index) leaves the whole sequence ascending.
#[inline]
pub fn bitonic_direction(idx: u32, stage: u32) -> Direction {
    if stage >= 32 || (idx >> stage) & 1 == 0 {
        Direction::Ascending
    } else {
        Direction::Descending
    }
}
