//! Simplified mmWave channel model for synthesizing RSS tensors.
//!
//! APs sit at the cell centers of a square grid at height `ap_height_m`;
//! UEs move in the grid's square arena at height `ue_height_m`. The RSS of
//! AP `a` at UE `u` on beam `b` is
//!
//! `P_tx · G_b(az, el) · (λ / 4π)² · d^-γ · 10^(X/10) · L_block`
//!
//! with 3-D distance `d` (clamped to 1 m), lognormal shadowing `X ~ N(0, σ)`
//! drawn per (UE, AP) pair, and an extra blockage loss applied to each pair
//! independently with a fixed probability.
//!
//! Beams have a flat mainlobe over an azimuth × elevation rectangle and a
//! constant sidelobe floor. The mainlobe gain is `4π / Ω`, where `Ω` is the
//! solid angle of the rectangle.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::instance::{dbm_to_watts, Instance, RssTensor};
use crate::{Error, Result};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    InH,
    UMi,
    UMa,
    RMa,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "inh" => Ok(Self::InH),
            "umi" => Ok(Self::UMi),
            "uma" => Ok(Self::UMa),
            "rma" => Ok(Self::RMa),
            _ => Err(Error::Parse(format!("unknown scenario {s:?} (expected InH, UMi, UMa or RMa)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Side of the square arena covered by the AP grid.
    pub grid_edge_m: f64,
    pub carrier_ghz: f64,
    pub tx_power_dbm: f64,
    pub path_loss_exponent: f64,
    pub shadowing_sigma_db: f64,
    pub blockage_prob: f64,
    pub blockage_loss_db: f64,
    pub ap_height_m: f64,
    pub ue_height_m: f64,
}

impl Scenario {
    pub fn preset(kind: ScenarioKind) -> Self {
        let (grid_edge_m, path_loss_exponent, shadowing_sigma_db) = match kind {
            ScenarioKind::InH => (50.0, 2.0, 3.0),
            ScenarioKind::UMi => (100.0, 2.1, 4.0),
            ScenarioKind::UMa => (200.0, 2.8, 6.0),
            ScenarioKind::RMa => (500.0, 2.3, 5.0),
        };
        Self {
            kind,
            grid_edge_m,
            carrier_ghz: 60.0,
            tx_power_dbm: 30.0,
            path_loss_exponent,
            shadowing_sigma_db,
            blockage_prob: 0.1,
            blockage_loss_db: 20.0,
            ap_height_m: 10.0,
            ue_height_m: 1.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.grid_edge_m > 0.0
            && self.carrier_ghz > 0.0
            && self.tx_power_dbm.is_finite()
            && self.path_loss_exponent > 0.0
            && self.shadowing_sigma_db >= 0.0
            && (0.0..=1.0).contains(&self.blockage_prob)
            && self.blockage_loss_db >= 0.0
            && self.ap_height_m.is_finite()
            && self.ue_height_m.is_finite();
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid scenario {self:?}")));
        }
        Ok(())
    }

    /// Free-space gain at 1 m, `(λ / 4π)²`.
    pub fn reference_gain(&self) -> f64 {
        let lambda = SPEED_OF_LIGHT / (self.carrier_ghz * 1e9);
        (lambda / (4.0 * PI)).powi(2)
    }

    /// Distance-dependent gain, distance clamped to 1 m.
    pub fn path_gain(&self, distance_m: f64) -> f64 {
        self.reference_gain() * distance_m.max(1.0).powf(-self.path_loss_exponent)
    }
}

/// Beam codebook: `az_sectors × el_tiers` beams, beam `b` pointing at azimuth
/// sector `b % az_sectors` and elevation tier `b / az_sectors`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub az_sectors: usize,
    pub el_tiers: usize,
    pub az_width_deg: f64,
    pub el_width_deg: f64,
    /// Elevation of the first tier's center; tiers step down by the width.
    pub el_top_center_deg: f64,
    pub sidelobe_db: f64,
}

impl Default for Codebook {
    /// 36 beams: 12 azimuth sectors × 3 downtilt tiers, 20° × 20° each.
    fn default() -> Self {
        Self {
            az_sectors: 12,
            el_tiers: 3,
            az_width_deg: 20.0,
            el_width_deg: 20.0,
            el_top_center_deg: -10.0,
            sidelobe_db: -20.0,
        }
    }
}

impl Codebook {
    /// `n` azimuth sectors tiling the circle, each covering all elevations.
    pub fn sectors(n: usize) -> Self {
        Self {
            az_sectors: n,
            el_tiers: 1,
            az_width_deg: 360.0 / n.max(1) as f64,
            el_width_deg: 180.0,
            el_top_center_deg: 0.0,
            sidelobe_db: -20.0,
        }
    }

    pub fn n_beams(&self) -> usize {
        self.az_sectors * self.el_tiers
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.az_sectors > 0
            && self.el_tiers > 0
            && self.az_width_deg > 0.0
            && self.az_width_deg <= 360.0
            && self.el_width_deg > 0.0
            && self.el_width_deg <= 180.0
            && self.sidelobe_db <= 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid codebook {self:?}")));
        }
        Ok(())
    }

    /// Boresight `(azimuth, elevation)` of beam `b` in degrees.
    pub fn direction(&self, b: usize) -> (f64, f64) {
        let az = (b % self.az_sectors) as f64 * 360.0 / self.az_sectors as f64;
        let el = self.el_top_center_deg - (b / self.az_sectors) as f64 * self.el_width_deg;
        (az, el)
    }

    /// Mainlobe gain `4π / Ω` (linear).
    pub fn max_gain(&self) -> f64 {
        let half = self.el_width_deg / 2.0;
        let (lo, hi) = ((-half).max(-90.0), half.min(90.0));
        // Solid angle of the beam's rectangle, centered on the horizon; the
        // gain is a property of the beam shape, not its pointing.
        let omega = self.az_width_deg.to_radians() * (hi.to_radians().sin() - lo.to_radians().sin());
        4.0 * PI / omega
    }

    /// Gain of beam `b` towards `(az, el)` in degrees.
    pub fn gain(&self, b: usize, az_deg: f64, el_deg: f64) -> f64 {
        let (az0, el0) = self.direction(b);
        let daz = (az_deg - az0).rem_euclid(360.0);
        let daz = daz.min(360.0 - daz);
        if daz <= self.az_width_deg / 2.0 && (el_deg - el0).abs() <= self.el_width_deg / 2.0 {
            self.max_gain()
        } else {
            self.max_gain() * 10f64.powf(self.sidelobe_db / 10.0)
        }
    }
}

/// AP and UE positions in the arena `[0, edge]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub arena_edge_m: f64,
    pub ap_positions: Vec<[f64; 2]>,
    pub ue_positions: Vec<[f64; 2]>,
    pub codebook: Codebook,
}

/// Cell centers of a `k × k` grid (`k = ceil(sqrt(n))`), first `n` in
/// row-major order. A perfect square `n` fills the grid.
pub fn grid_positions(n_aps: usize, edge_m: f64) -> Vec<[f64; 2]> {
    let k = (n_aps as f64).sqrt().ceil() as usize;
    let cell = edge_m / k.max(1) as f64;
    (0..n_aps)
        .map(|i| [((i % k) as f64 + 0.5) * cell, ((i / k) as f64 + 0.5) * cell])
        .collect()
}

impl Topology {
    /// APs on the grid, UEs uniform in the arena.
    pub fn random<R: Rng + ?Sized>(
        scenario: &Scenario,
        codebook: Codebook,
        n_aps: usize,
        n_ues: usize,
        rng: &mut R,
    ) -> Result<Self> {
        scenario.validate()?;
        codebook.validate()?;
        if n_aps == 0 || n_ues == 0 {
            return Err(Error::InvalidParameter("need at least one AP and one UE".into()));
        }
        let edge = scenario.grid_edge_m;
        let ue_positions = (0..n_ues)
            .map(|_| [rng.random_range(0.0..=edge), rng.random_range(0.0..=edge)])
            .collect();
        Ok(Self {
            arena_edge_m: edge,
            ap_positions: grid_positions(n_aps, edge),
            ue_positions,
            codebook,
        })
    }
}

/// Draws shadowing and blockage for every (AP, UE) pair, AP-major, and
/// returns the RSS tensor in watts.
pub fn generate_rss<R: Rng + ?Sized>(scenario: &Scenario, topology: &Topology, rng: &mut R) -> Result<RssTensor> {
    scenario.validate()?;
    topology.codebook.validate()?;
    let na = topology.ap_positions.len();
    let nu = topology.ue_positions.len();
    let nb = topology.codebook.n_beams();
    let shadow = Normal::new(0.0, scenario.shadowing_sigma_db)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let block = 10f64.powf(-scenario.blockage_loss_db / 10.0);
    let p_tx = dbm_to_watts(scenario.tx_power_dbm);

    // Beam-independent part of each pair's gain and its arrival angles.
    let mut pair = vec![(0.0, 0.0, 0.0); na * nu];
    for (a, ap) in topology.ap_positions.iter().enumerate() {
        for (u, ue) in topology.ue_positions.iter().enumerate() {
            let (dx, dy) = (ue[0] - ap[0], ue[1] - ap[1]);
            let dz = scenario.ue_height_m - scenario.ap_height_m;
            let horizontal = dx.hypot(dy);
            let d = (horizontal * horizontal + dz * dz).sqrt();
            let az = dy.atan2(dx).to_degrees().rem_euclid(360.0);
            let el = dz.atan2(horizontal).to_degrees();
            let mut g = p_tx * scenario.path_gain(d) * 10f64.powf(shadow.sample(rng) / 10.0);
            if rng.random::<f64>() < scenario.blockage_prob {
                g *= block;
            }
            pair[a * nu + u] = (g, az, el);
        }
    }
    RssTensor::from_fn(na, nu, nb, |b, u, a| {
        let (g, az, el) = pair[a * nu + u];
        g * topology.codebook.gain(b, az, el)
    })
}

/// UE positions and per-slot step length.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityState {
    pub positions: Vec<[f64; 2]>,
    pub speed_m_per_slot: f64,
}

fn reflect(mut x: f64, edge: f64) -> f64 {
    if edge <= 0.0 {
        return 0.0;
    }
    loop {
        if x < 0.0 {
            x = -x;
        } else if x > edge {
            x = 2.0 * edge - x;
        } else {
            return x;
        }
    }
}

/// Moves every UE `speed` meters in a uniformly random direction,
/// reflecting at the arena boundary.
pub fn random_walk_step<R: Rng + ?Sized>(mobility: &MobilityState, arena_edge_m: f64, rng: &mut R) -> MobilityState {
    let s = mobility.speed_m_per_slot;
    let positions = mobility
        .positions
        .iter()
        .map(|p| {
            let theta = rng.random_range(0.0..2.0 * PI);
            [
                reflect(p[0] + s * theta.cos(), arena_edge_m),
                reflect(p[1] + s * theta.sin(), arena_edge_m),
            ]
        })
        .collect();
    MobilityState {
        positions,
        speed_m_per_slot: s,
    }
}

/// Thermal noise power in watts: `-174 dBm/Hz + 10 log10(B) + NF`.
pub fn thermal_noise_watts(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watts(-174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db)
}

/// Instance drawn from the channel model with normalized rates: noise is the
/// thermal noise of `system_bandwidth_hz`, and the instance bandwidth is
/// 1 Hz so rates are spectral efficiencies. Unit weights, no RSS threshold.
pub fn random_channel_instance<R: Rng + ?Sized>(
    scenario: &Scenario,
    codebook: Codebook,
    n_aps: usize,
    n_ues: usize,
    system_bandwidth_hz: f64,
    noise_figure_db: f64,
    rng: &mut R,
) -> Result<Instance> {
    let topo = Topology::random(scenario, codebook, n_aps, n_ues, rng)?;
    let rss = generate_rss(scenario, &topo, rng)?;
    Instance::new(
        rss,
        vec![1.0; n_ues],
        thermal_noise_watts(system_bandwidth_hz, noise_figure_db),
        1.0,
        0.0,
    )
}
