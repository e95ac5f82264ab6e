//! Deterministic random number streams.
//!
//! Every random decision in a campaign draws from a ChaCha stream whose
//! 64-bit stream id encodes (purpose, sweep point, snapshot, lane). Distinct
//! ids select disjoint keystreams of the same cipher, so any two consumers
//! with different keys are independent by construction and results do not
//! depend on scheduling order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What a stream is consumed for. The discriminant is part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Placement = 0,
    Shadowing = 1,
    PilotAssign = 2,
    Activations = 3,
    Channels = 4,
    PilotNoise = 5,
    Rcus = 6,
    Test = 7,
}

const POINT_BITS: u32 = 12;
const SNAPSHOT_BITS: u32 = 22;
const LANE_BITS: u32 = 24;

pub const MAX_POINTS: u32 = 1 << POINT_BITS;
pub const MAX_SNAPSHOTS: u32 = 1 << SNAPSHOT_BITS;
pub const MAX_LANES: u32 = 1 << LANE_BITS;

fn encode(purpose: Purpose, point: u32, snapshot: u32, lane: u32) -> u64 {
    assert!(point < MAX_POINTS, "sweep point index {point} out of stream range");
    assert!(snapshot < MAX_SNAPSHOTS, "snapshot index {snapshot} out of stream range");
    assert!(lane < MAX_LANES, "stream lane {lane} out of range");
    ((purpose as u64) << (POINT_BITS + SNAPSHOT_BITS + LANE_BITS))
        | ((point as u64) << (SNAPSHOT_BITS + LANE_BITS))
        | ((snapshot as u64) << LANE_BITS)
        | lane as u64
}

/// Stream factory scoped to one (sweep point, snapshot) pair.
#[derive(Debug, Clone, Copy)]
pub struct SnapshotRng {
    master_seed: u64,
    point: u32,
    snapshot: u32,
}

impl SnapshotRng {
    pub fn new(master_seed: u64, point: u32, snapshot: u32) -> Self {
        SnapshotRng { master_seed, point, snapshot }
    }

    /// Open the lane-0 stream for `purpose`.
    pub fn stream(&self, purpose: Purpose) -> ChaCha8Rng {
        self.lane(purpose, 0)
    }

    /// Open a numbered sub-stream, e.g. one per link or per frame.
    pub fn lane(&self, purpose: Purpose, lane: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(encode(purpose, self.point, self.snapshot, lane));
        rng
    }

    pub fn stream_id(&self, purpose: Purpose, lane: u32) -> u64 {
        encode(purpose, self.point, self.snapshot, lane)
    }
}

/// One draw of the standard circularly-symmetric complex Gaussian CN(0, 1):
/// real and imaginary parts are independent N(0, 1/2).
pub fn standard_cn<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
}
