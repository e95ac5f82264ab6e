//! TDD frame structure: slot layout, random low-latency activations, the
//! per-slot coexistence coefficient, and pilot assignment.
//!
//! A frame spends `tau_p` channel uses on uplink training and divides the
//! remaining `tau_c − tau_p` into `slots` downlink slots of
//! `floor((tau_c − tau_p)/slots)` channel uses each. Low-latency users wake
//! up independently per slot; how their transmissions coexist with the
//! broadband ones is governed by [`CoexMode`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::UserField;
use crate::{Result, SimError};

/// How broadband and low-latency transmissions share a downlink slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoexMode {
    /// The broadband signal is blanked in every slot where the serving BS
    /// has at least one active low-latency user.
    #[serde(rename = "punc")]
    Puncturing,
    /// Broadband and low-latency signals are transmitted on top of each
    /// other and split the power budget.
    #[serde(rename = "spc")]
    Superposition,
}

impl std::fmt::Display for CoexMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoexMode::Puncturing => write!(f, "punc"),
            CoexMode::Superposition => write!(f, "spc"),
        }
    }
}

/// Frame-level parameters shared by every cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    /// Coherence block length in channel uses; training plus all slots
    /// must fit inside it.
    pub tau_c: usize,
    /// Channel uses spent on uplink training (number of orthogonal pilots).
    pub tau_p: usize,
    /// Number of downlink data slots per frame.
    pub slots: usize,
    /// Probability that a low-latency user is active in a given slot.
    pub activation_prob: f64,
    /// Coexistence mode applied network-wide.
    pub mode: CoexMode,
    /// Payload of one low-latency packet, information bits.
    pub payload_bits: u32,
    /// Set when `tau_p` was derived as reuse factor × users per cell;
    /// purely informative.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_reuse: Option<u32>,
}

impl Default for FrameConfig {
    /// Baseline frame: 580 channel uses, 80 pilots, 5 slots of 100 uses,
    /// activation probability 10^(−1/2), 160-bit packets, puncturing.
    fn default() -> Self {
        Self {
            tau_c: 580,
            tau_p: 80,
            slots: 5,
            activation_prob: 10f64.powf(-0.5),
            mode: CoexMode::Puncturing,
            payload_bits: 160,
            pilot_reuse: None,
        }
    }
}

impl FrameConfig {
    /// Channel uses per downlink slot, `floor((tau_c − tau_p)/slots)`.
    pub fn slot_len(&self) -> usize {
        (self.tau_c.saturating_sub(self.tau_p)) / self.slots.max(1)
    }

    /// Channel uses available for downlink data, `tau_c − tau_p`.
    pub fn data_channel_uses(&self) -> usize {
        self.tau_c - self.tau_p
    }

    /// Low-latency code rate in nats per channel use. All information
    /// density and error-exponent math downstream runs in nats.
    pub fn rate_nats(&self) -> f64 {
        f64::from(self.payload_bits) * std::f64::consts::LN_2 / self.slot_len() as f64
    }

    /// Low-latency code rate in bits per channel use, for reporting.
    pub fn rate_bits(&self) -> f64 {
        f64::from(self.payload_bits) / self.slot_len() as f64
    }

    /// Check every structural invariant, collecting all violations.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.slots < 1 {
            issues.push("slots must be at least 1".into());
        }
        if self.tau_p < 1 {
            issues.push("tau_p must be at least 1".into());
        }
        if self.payload_bits < 1 {
            issues.push("payload_bits must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.activation_prob) {
            issues.push(format!(
                "activation_prob must lie in [0, 1], got {}",
                self.activation_prob
            ));
        }
        if self.slots >= 1 && (self.tau_c <= self.tau_p || self.slot_len() < 1) {
            issues.push(format!(
                "tau_c ({}) minus tau_p ({}) leaves no room for {} slots of at \
                 least one channel use",
                self.tau_c, self.tau_p, self.slots
            ));
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(SimError::invalid_config(issues))
        }
    }
}

/// Per-slot activation pattern of the low-latency users, together with
/// the derived coexistence coefficient of each BS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationMatrix {
    slots: usize,
    cells: usize,
    k_urllc: usize,
    /// Row-major over (slot, cell, urllc user).
    active: Vec<bool>,
    /// Row-major over (slot, cell): 1 everywhere under superposition; under
    /// puncturing, 0 exactly when some low-latency user of the cell is
    /// active in the slot.
    coex: Vec<f64>,
}

impl ActivationMatrix {
    /// Build a pattern from an explicit predicate, evaluated once per
    /// (slot, cell, low-latency user) in that order; the coexistence
    /// coefficients follow from the mode.
    pub fn from_fn(
        slots: usize,
        cells: usize,
        k_urllc: usize,
        mode: CoexMode,
        mut is_on: impl FnMut(usize, usize, usize) -> bool,
    ) -> Self {
        let mut active = Vec::with_capacity(slots * cells * k_urllc);
        let mut coex = Vec::with_capacity(slots * cells);
        for slot in 0..slots {
            for cell in 0..cells {
                let mut any = false;
                for k in 0..k_urllc {
                    let on = is_on(slot, cell, k);
                    any |= on;
                    active.push(on);
                }
                let c = match mode {
                    CoexMode::Superposition => 1.0,
                    CoexMode::Puncturing => {
                        if any {
                            0.0
                        } else {
                            1.0
                        }
                    }
                };
                coex.push(c);
            }
        }
        ActivationMatrix { slots, cells, k_urllc, active, coex }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn k_urllc(&self) -> usize {
        self.k_urllc
    }

    /// Whether low-latency user `k` of `cell` transmits in `slot`.
    pub fn is_active(&self, slot: usize, cell: usize, k: usize) -> bool {
        debug_assert!(slot < self.slots && cell < self.cells && k < self.k_urllc);
        self.active[(slot * self.cells + cell) * self.k_urllc + k]
    }

    /// Broadband coefficient of `cell` in `slot` (0 or 1).
    pub fn coex(&self, slot: usize, cell: usize) -> f64 {
        debug_assert!(slot < self.slots && cell < self.cells);
        self.coex[slot * self.cells + cell]
    }

    /// Number of active low-latency users of `cell` in `slot`.
    pub fn active_count(&self, slot: usize, cell: usize) -> usize {
        (0..self.k_urllc).filter(|&k| self.is_active(slot, cell, k)).count()
    }

    /// Slots in which low-latency user `k` of `cell` transmits.
    pub fn active_slots(&self, cell: usize, k: usize) -> Vec<usize> {
        (0..self.slots).filter(|&t| self.is_active(t, cell, k)).collect()
    }

    /// Whether the broadband service of `cell` is blanked in every slot.
    pub fn blanked_everywhere(&self, cell: usize) -> bool {
        (0..self.slots).all(|t| self.coex(t, cell) == 0.0)
    }
}

/// Draw one frame's activation pattern: each (slot, cell, user) flag is an
/// independent Bernoulli(`activation_prob`) draw, in (slot, cell, user)
/// order on the given stream.
pub fn draw_activations(
    frame: &FrameConfig,
    cells: usize,
    k_urllc: usize,
    rng: &mut ChaCha8Rng,
) -> ActivationMatrix {
    ActivationMatrix::from_fn(frame.slots, cells, k_urllc, frame.mode, |_, _, _| {
        rng.random::<f64>() < frame.activation_prob
    })
}

/// Probability that, under puncturing, every slot of a frame is blanked
/// for a cell with `k_urllc` low-latency users:
/// `(1 − (1 − a)^{k_urllc})^slots`.
pub fn analytic_punc_outage(activation_prob: f64, k_urllc: usize, slots: usize) -> f64 {
    (1.0 - (1.0 - activation_prob).powi(k_urllc as i32)).powi(slots as i32)
}

/// Pilot assignment: which of the `tau_p` orthogonal pilots each user
/// sends, plus the induced co-pilot partition. Pilot waveforms are never
/// materialized; two users interact in training exactly when their
/// indices match (inner product `tau_p`), and not at all otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PilotPlan {
    tau_p: usize,
    index: UserField<usize>,
    /// For each pilot index, the (cell, user) pairs sending it, in
    /// lexicographic order. Users sharing an entry contaminate each other.
    groups: Vec<Vec<(usize, usize)>>,
}

impl PilotPlan {
    /// Build a plan from an explicit index map (replay, hand-crafted
    /// tests); the co-pilot partition is derived.
    pub fn from_indices(tau_p: usize, index: UserField<usize>) -> Self {
        let mut groups = vec![Vec::new(); tau_p];
        for ((cell, user), &p) in index.iter() {
            assert!(p < tau_p, "pilot index {p} out of range");
            groups[p].push((cell, user));
        }
        Self { tau_p, index, groups }
    }

    pub fn tau_p(&self) -> usize {
        self.tau_p
    }

    /// Pilot index of user `(cell, user)`.
    pub fn pilot(&self, cell: usize, user: usize) -> usize {
        self.index[(cell, user)]
    }

    /// All users sending the same pilot as `(cell, user)`, this user
    /// included.
    pub fn co_pilots(&self, cell: usize, user: usize) -> &[(usize, usize)] {
        &self.groups[self.index[(cell, user)]]
    }

    /// Users sending pilot `p`.
    pub fn group(&self, p: usize) -> &[(usize, usize)] {
        &self.groups[p]
    }

    /// Whether some other user shares this user's pilot.
    pub fn is_contaminated(&self, cell: usize, user: usize) -> bool {
        self.co_pilots(cell, user).len() > 1
    }
}

/// Assign pilots with low-latency priority.
///
/// Tiering, from most to least training budget:
/// 1. `tau_p ≥ cells·k_urllc + k_embb`: every low-latency user in the
///    network gets a unique pilot; the broadband users then get
///    network-unique pilots too if the leftover pool is large enough
///    (which happens exactly when `tau_p ≥ cells·users_per_cell`), and
///    otherwise each cell draws a random distinct subset of the leftover
///    pool, so broadband users are orthogonal within a cell and reuse
///    across cells.
/// 2. `tau_p ≥ users_per_cell`: each cell draws a random distinct subset
///    of all pilots for all its users — per-cell orthogonality with
///    cross-cell reuse, low-latency users contaminated like everyone.
/// 3. Otherwise every user draws a pilot uniformly at random; collisions
///    can occur even within a cell.
pub fn assign_pilots(
    frame: &FrameConfig,
    cells: usize,
    users_per_cell: usize,
    k_urllc: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PilotPlan> {
    frame.validate()?;
    assert!(k_urllc <= users_per_cell);
    let tau_p = frame.tau_p;
    let k_embb = users_per_cell - k_urllc;
    let mut index = UserField::filled(cells, users_per_cell, 0usize);

    if tau_p >= cells * k_urllc + k_embb {
        for cell in 0..cells {
            for k in 0..k_urllc {
                index[(cell, k)] = cell * k_urllc + k;
            }
        }
        let pool: Vec<usize> = (cells * k_urllc..tau_p).collect();
        if pool.len() >= cells * k_embb {
            for cell in 0..cells {
                for e in 0..k_embb {
                    index[(cell, k_urllc + e)] = cells * k_urllc + cell * k_embb + e;
                }
            }
        } else {
            for cell in 0..cells {
                let picks = rand::seq::index::sample(rng, pool.len(), k_embb);
                for (e, pick) in picks.into_iter().enumerate() {
                    index[(cell, k_urllc + e)] = pool[pick];
                }
            }
        }
    } else if tau_p >= users_per_cell {
        for cell in 0..cells {
            let picks = rand::seq::index::sample(rng, tau_p, users_per_cell);
            for (user, pick) in picks.into_iter().enumerate() {
                index[(cell, user)] = pick;
            }
        }
    } else {
        for cell in 0..cells {
            for user in 0..users_per_cell {
                index[(cell, user)] = rng.random_range(0..tau_p);
            }
        }
    }

    let mut groups = vec![Vec::new(); tau_p];
    for cell in 0..cells {
        for user in 0..users_per_cell {
            groups[index[(cell, user)]].push((cell, user));
        }
    }
    Ok(PilotPlan { tau_p, index, groups })
}
