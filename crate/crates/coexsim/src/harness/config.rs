//! Campaign configuration: sweep axes, scheme variants, and Monte Carlo depth.
//!
//! A campaign file is TOML. Every field has a default, so an empty file (or no
//! file at all) describes the stock scenario: a four-cell network with 20 users
//! per cell, 20 % of them on the low-latency service, swept over a single
//! operating point and evaluated for both coexistence modes, all three
//! precoders, and three power policies.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::frame::{CoexMode, FrameConfig};
use crate::power::PowerScheme;
use crate::precoding::Precoder;
use crate::rng::{MAX_LANES, MAX_POINTS, MAX_SNAPSHOTS};
use crate::scenario::{dbm_to_watts, NetworkConfig};

/// Radio-layer constants shared by every sweep point.
///
/// Power-like quantities are configured in dBm (the customary unit) and
/// converted to watts when a [`NetworkConfig`] is materialised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    /// Number of cells; must be a perfect square (torus grid).
    pub cells: usize,
    /// Antennas per base station.
    pub antennas: usize,
    /// Square cell side in metres.
    pub cell_side_m: f64,
    /// Minimum BS-to-user distance in metres.
    pub min_bs_dist_m: f64,
    /// Side of the square around each BS that holds its low-latency users.
    pub urllc_box_m: f64,
    /// Carrier frequency in GHz (enters the correlation model).
    pub carrier_ghz: f64,
    /// System bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Uplink noise power in dBm.
    pub noise_ul_dbm: f64,
    /// Downlink noise power in dBm.
    pub noise_dl_dbm: f64,
    /// Maximum BS transmit power in dBm.
    pub max_bs_power_dbm: f64,
    /// Per-user uplink pilot power in dBm.
    pub ul_power_dbm: f64,
    /// Log-normal shadowing standard deviation in dB.
    pub shadowing_std_db: f64,
    /// Angular standard deviation of the uniform local scattering in
    /// degrees (support ±√3·σ around the line-of-sight direction).
    pub angular_spread_deg: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        let net = NetworkConfig::default();
        Self {
            cells: net.cells,
            antennas: net.antennas,
            cell_side_m: net.cell_side_m,
            min_bs_dist_m: net.min_bs_dist_m,
            urllc_box_m: net.urllc_box_m,
            carrier_ghz: net.carrier_ghz,
            bandwidth_hz: net.bandwidth_hz,
            noise_ul_dbm: -94.0,
            noise_dl_dbm: -94.0,
            max_bs_power_dbm: 46.0,
            ul_power_dbm: 23.0,
            shadowing_std_db: net.shadowing_std_db,
            angular_spread_deg: net.angular_spread_deg,
        }
    }
}

/// Frame-level constants shared by every sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FramePolicy {
    /// Payload size of one low-latency packet, in bits.
    pub payload_bits: u32,
    /// Optional pilot-reuse override passed through to pilot assignment.
    pub pilot_reuse: Option<u32>,
}

impl Default for FramePolicy {
    fn default() -> Self {
        Self {
            payload_bits: 160,
            pilot_reuse: None,
        }
    }
}

/// Sweep axes. The campaign evaluates the Cartesian product of all lists,
/// iterated with `users_per_cell` outermost and `tau_c` innermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    /// Users per cell (K).
    pub users_per_cell: Vec<usize>,
    /// Fraction of users on the low-latency service (alpha).
    pub urllc_fraction: Vec<f64>,
    /// Per-slot activation probability of a low-latency user.
    pub activation_prob: Vec<f64>,
    /// Pilot sequence length in symbols.
    pub tau_p: Vec<usize>,
    /// Number of downlink slots per frame (T).
    pub slots: Vec<usize>,
    /// Coherence block length in symbols.
    pub tau_c: Vec<usize>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            users_per_cell: vec![20],
            urllc_fraction: vec![0.2],
            activation_prob: vec![10f64.powf(-0.5)],
            tau_p: vec![80],
            slots: vec![5],
            tau_c: vec![580],
        }
    }
}

/// Scheme variants evaluated at every sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariantLists {
    /// Coexistence modes ("punc" or "spc").
    pub modes: Vec<CoexMode>,
    /// Precoders ("mr", "rzf", "mmse").
    pub precoders: Vec<Precoder>,
    /// Power allocation policies.
    pub power: Vec<PowerScheme>,
}

impl Default for VariantLists {
    fn default() -> Self {
        Self {
            modes: vec![CoexMode::Puncturing, CoexMode::Superposition],
            precoders: vec![Precoder::Mr, Precoder::Rzf, Precoder::Mmse],
            power: vec![
                PowerScheme::Epa,
                PowerScheme::Fpa {
                    nu: 0.5,
                    omega: 0.6,
                },
                PowerScheme::Opa,
            ],
        }
    }
}

/// Full description of one simulation campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    /// Master seed; every random draw in the campaign derives from it.
    pub seed: u64,
    /// Independent network snapshots per sweep point.
    pub snapshots: u32,
    /// Small-scale channel realizations per snapshot.
    pub realizations: u32,
    /// Realizations processed per streaming chunk. Each chunk index owns a
    /// random stream, so this value is part of the sampling schedule:
    /// changing it redraws the ensemble (identically distributed, different
    /// numbers) while bounding peak memory.
    pub chunk_realizations: u32,
    /// Independent activation frames simulated per snapshot.
    pub frames_per_snapshot: u32,
    /// Error-probability threshold defining low-latency availability.
    pub epsilon_target: f64,
    /// Output directory (relative paths resolve under `COEXSIM_OUTPUT_ROOT`).
    pub output_dir: String,
    /// Radio-layer constants.
    pub network: RadioParams,
    /// Frame-level constants.
    pub frame: FramePolicy,
    /// Sweep axes (Cartesian product).
    pub sweep: SweepAxes,
    /// Scheme variants evaluated at each point.
    pub variants: VariantLists,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            snapshots: 200,
            realizations: 500,
            chunk_realizations: 50,
            frames_per_snapshot: 10,
            epsilon_target: 1e-5,
            output_dir: "campaign-out".to_string(),
            network: RadioParams::default(),
            frame: FramePolicy::default(),
            sweep: SweepAxes::default(),
            variants: VariantLists::default(),
        }
    }
}

/// One resolved sweep point: the values picked from each axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointAxes {
    /// Position in the campaign's point enumeration.
    pub index: usize,
    pub users_per_cell: usize,
    pub urllc_fraction: f64,
    pub activation_prob: f64,
    pub tau_p: usize,
    pub slots: usize,
    pub tau_c: usize,
}

impl PointAxes {
    /// Downlink symbols per slot at this point.
    pub fn slot_len(&self) -> usize {
        (self.tau_c - self.tau_p) / self.slots
    }
}

impl CampaignConfig {
    /// Parses a TOML document; an empty string yields the default campaign.
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Materialises the radio config for one sweep point.
    pub fn network_for(&self, point: &PointAxes) -> NetworkConfig {
        NetworkConfig {
            cells: self.network.cells,
            antennas: self.network.antennas,
            users_per_cell: point.users_per_cell,
            urllc_fraction: point.urllc_fraction,
            cell_side_m: self.network.cell_side_m,
            min_bs_dist_m: self.network.min_bs_dist_m,
            urllc_box_m: self.network.urllc_box_m,
            carrier_ghz: self.network.carrier_ghz,
            bandwidth_hz: self.network.bandwidth_hz,
            noise_ul_w: dbm_to_watts(self.network.noise_ul_dbm),
            noise_dl_w: dbm_to_watts(self.network.noise_dl_dbm),
            max_bs_power_w: dbm_to_watts(self.network.max_bs_power_dbm),
            ul_power_w: dbm_to_watts(self.network.ul_power_dbm),
            shadowing_std_db: self.network.shadowing_std_db,
            angular_spread_deg: self.network.angular_spread_deg,
            rng_seed: self.seed,
        }
    }

    /// Materialises the frame config for one sweep point and mode.
    pub fn frame_for(&self, point: &PointAxes, mode: CoexMode) -> FrameConfig {
        FrameConfig {
            tau_c: point.tau_c,
            tau_p: point.tau_p,
            slots: point.slots,
            activation_prob: point.activation_prob,
            mode,
            payload_bits: self.frame.payload_bits,
            pilot_reuse: self.frame.pilot_reuse,
        }
    }

    /// Enumerates the sweep points in deterministic order.
    pub fn points(&self) -> Vec<PointAxes> {
        let mut out = Vec::new();
        for &users_per_cell in &self.sweep.users_per_cell {
            for &urllc_fraction in &self.sweep.urllc_fraction {
                for &activation_prob in &self.sweep.activation_prob {
                    for &tau_p in &self.sweep.tau_p {
                        for &slots in &self.sweep.slots {
                            for &tau_c in &self.sweep.tau_c {
                                out.push(PointAxes {
                                    index: out.len(),
                                    users_per_cell,
                                    urllc_fraction,
                                    activation_prob,
                                    tau_p,
                                    slots,
                                    tau_c,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Validates the whole campaign, reporting every problem at once.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();

        if self.snapshots == 0 {
            issues.push("snapshots must be at least 1".to_string());
        }
        if self.snapshots > MAX_SNAPSHOTS {
            issues.push(format!(
                "snapshots = {} exceeds the stream-derivation limit {MAX_SNAPSHOTS}",
                self.snapshots
            ));
        }
        if self.realizations == 0 {
            issues.push("realizations must be at least 1".to_string());
        }
        if self.chunk_realizations == 0 {
            issues.push("chunk_realizations must be at least 1".to_string());
        }
        if self.frames_per_snapshot == 0 {
            issues.push("frames_per_snapshot must be at least 1".to_string());
        }
        if self.frames_per_snapshot > MAX_LANES {
            issues.push(format!(
                "frames_per_snapshot = {} exceeds the stream-derivation limit {MAX_LANES}",
                self.frames_per_snapshot
            ));
        }
        if self.chunk_realizations > 0 && self.realizations > 0 {
            let chunks = self.realizations.div_ceil(self.chunk_realizations);
            if chunks > MAX_LANES {
                issues.push(format!(
                    "realizations = {} in chunks of {} needs {chunks} streams, \
                     above the limit {MAX_LANES}",
                    self.realizations, self.chunk_realizations
                ));
            }
        }
        if !(self.epsilon_target > 0.0 && self.epsilon_target < 1.0) {
            issues.push(format!(
                "epsilon_target = {} must lie strictly between 0 and 1",
                self.epsilon_target
            ));
        }
        if self.output_dir.is_empty() {
            issues.push("output_dir must not be empty".to_string());
        }

        for (name, empty) in [
            ("sweep.users_per_cell", self.sweep.users_per_cell.is_empty()),
            ("sweep.urllc_fraction", self.sweep.urllc_fraction.is_empty()),
            ("sweep.activation_prob", self.sweep.activation_prob.is_empty()),
            ("sweep.tau_p", self.sweep.tau_p.is_empty()),
            ("sweep.slots", self.sweep.slots.is_empty()),
            ("sweep.tau_c", self.sweep.tau_c.is_empty()),
        ] {
            if empty {
                issues.push(format!("{name} must list at least one value"));
            }
        }

        let n_points = self.sweep.users_per_cell.len()
            * self.sweep.urllc_fraction.len()
            * self.sweep.activation_prob.len()
            * self.sweep.tau_p.len()
            * self.sweep.slots.len()
            * self.sweep.tau_c.len();
        if n_points as u64 > MAX_POINTS as u64 {
            issues.push(format!(
                "sweep enumerates {n_points} points, above the limit {MAX_POINTS}"
            ));
        }

        if self.variants.modes.is_empty() {
            issues.push("variants.modes must list at least one mode".to_string());
        }
        if self.variants.precoders.is_empty() {
            issues.push("variants.precoders must list at least one precoder".to_string());
        }
        if self.variants.power.is_empty() {
            issues.push("variants.power must list at least one policy".to_string());
        }
        for scheme in &self.variants.power {
            if let PowerScheme::Fpa { nu, omega } = scheme {
                if !nu.is_finite() {
                    issues.push(format!("fpa exponent nu = {nu} must be finite"));
                }
                if !(omega.is_finite() && *omega > 0.0 && *omega < 1.0) {
                    issues.push(format!(
                        "fpa share omega = {omega} must lie strictly between 0 and 1"
                    ));
                }
            }
        }

        // Network-side checks for every (K, alpha) pair.
        for &users in &self.sweep.users_per_cell {
            for &frac in &self.sweep.urllc_fraction {
                let probe = PointAxes {
                    index: 0,
                    users_per_cell: users,
                    urllc_fraction: frac,
                    activation_prob: 0.5,
                    tau_p: 1,
                    slots: 1,
                    tau_c: 2,
                };
                if let Err(SimError::InvalidConfig { issues: sub }) =
                    self.network_for(&probe).validate()
                {
                    for issue in sub {
                        issues.push(format!(
                            "network (users_per_cell = {users}, urllc_fraction = {frac}): {issue}"
                        ));
                    }
                }
            }
        }

        // Frame-side checks for every (tau_c, tau_p, T, a) combination. The
        // campaign additionally requires the downlink symbols to divide evenly
        // into slots so that every slot carries the same blocklength.
        for &tau_c in &self.sweep.tau_c {
            for &tau_p in &self.sweep.tau_p {
                for &slots in &self.sweep.slots {
                    if tau_p < tau_c && slots > 0 && (tau_c - tau_p) % slots != 0 {
                        issues.push(format!(
                            "tau_c = {tau_c}, tau_p = {tau_p}: the {} downlink symbols \
                             do not divide evenly into {slots} slots",
                            tau_c - tau_p
                        ));
                    }
                    for &a in &self.sweep.activation_prob {
                        let frame = FrameConfig {
                            tau_c,
                            tau_p,
                            slots,
                            activation_prob: a,
                            mode: CoexMode::Puncturing,
                            payload_bits: self.frame.payload_bits,
                            pilot_reuse: self.frame.pilot_reuse,
                        };
                        if let Err(SimError::InvalidConfig { issues: sub }) = frame.validate() {
                            for issue in sub {
                                let tagged = format!(
                                    "frame (tau_c = {tau_c}, tau_p = {tau_p}, slots = {slots}, \
                                     activation_prob = {a}): {issue}"
                                );
                                if !issues.contains(&tagged) {
                                    issues.push(tagged);
                                }
                            }
                        }
                    }
                }
            }
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(SimError::InvalidConfig { issues })
        }
    }

    /// Hex digest identifying the semantic content of this config.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical =
            toml::to_string(self).expect("campaign config is always TOML-serializable");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Applies one `key.path=value` override onto a parsed TOML table.
///
/// The value side is parsed as a TOML literal (so `true`, `3.5`, `[1, 2]`,
/// and `"text"` all work); if it does not parse as TOML it is taken as a
/// bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let Some((path, raw_value)) = assignment.split_once('=') else {
        return Err(SimError::invalid_config(vec![format!(
            "override '{assignment}' must have the form key.path=value"
        )]));
    };
    let path = path.trim();
    if path.is_empty() {
        return Err(SimError::invalid_config(vec![format!(
            "override '{assignment}' is missing the key path"
        )]));
    }
    let raw_value = raw_value.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw_value}")) {
        Ok(mut t) => t.remove("v").expect("literal was just inserted"),
        Err(_) => toml::Value::String(raw_value.to_string()),
    };

    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(SimError::invalid_config(vec![format!(
            "override key '{path}' contains an empty path segment"
        )]));
    }
    let mut cursor = table;
    for seg in &segments[..segments.len() - 1] {
        let entry = cursor
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry.as_table_mut().ok_or_else(|| {
            SimError::invalid_config(vec![format!(
                "override key '{path}': segment '{seg}' is not a table"
            )])
        })?;
    }
    cursor.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

/// Loads a campaign from optional TOML text plus dotted-path overrides.
pub fn load_campaign(text: &str, overrides: &[String]) -> Result<CampaignConfig> {
    let mut table: toml::Table = toml::from_str(text)?;
    for assignment in overrides {
        apply_override(&mut table, assignment)?;
    }
    let config: CampaignConfig = toml::Value::Table(table).try_into().map_err(|e| {
        SimError::invalid_config(vec![format!("configuration does not match the schema: {e}")])
    })?;
    Ok(config)
}
