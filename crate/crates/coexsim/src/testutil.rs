//! Hand-buildable fixtures shared by the unit tests of several modules.

use ndarray::Array2;

use crate::scenario::{LinkField, ScenarioSnapshot, Service, UserField};
use crate::C64;

/// Snapshot with arbitrary correlation matrices and trivial geometry; the
/// per-link gain is derived from the trace so the snapshot invariants hold
/// by construction. The first `k_urllc` users of each cell are low-latency.
pub fn synthetic_snapshot(
    cells: usize,
    users: usize,
    k_urllc: usize,
    corr_fn: impl Fn(usize, usize, usize) -> Array2<C64>,
) -> ScenarioSnapshot {
    let corr = LinkField::from_fn(cells, users, &corr_fn);
    let antennas = corr[(0, 0, 0)].nrows();
    let beta = LinkField::from_fn(cells, users, |j, l, k| {
        let r = &corr[(j, l, k)];
        (0..antennas).map(|i| r[[i, i]].re).sum::<f64>() / antennas as f64
    });
    ScenarioSnapshot {
        bs_positions: vec![[0.0, 0.0]; cells],
        user_positions: UserField::filled(cells, users, [0.0, 0.0]),
        service: UserField::from_fn(cells, users, |_, k| {
            if k < k_urllc {
                Service::Urllc
            } else {
                Service::Embb
            }
        }),
        beta,
        angle: LinkField::filled(cells, users, 0.0),
        corr,
    }
}

/// White (identity-proportional) correlation on every link.
pub fn white_snapshot(
    cells: usize,
    users: usize,
    k_urllc: usize,
    antennas: usize,
    beta: f64,
) -> ScenarioSnapshot {
    synthetic_snapshot(cells, users, k_urllc, |_, _, _| {
        Array2::<C64>::eye(antennas) * C64::new(beta, 0.0)
    })
}
