//! Benchmark-only package; see `benches/`.

use ris_stats::ChannelParams;

/// Small cascade power: every series converges here.
pub fn convergent() -> ChannelParams {
    ChannelParams::new(2, 2, 2, 0.1, 0.1, 1.0).expect("valid")
}

/// First point of the reference grid.
pub fn reference() -> ChannelParams {
    ChannelParams::unit_power(5, 1, 1).expect("valid")
}
