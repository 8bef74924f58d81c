use serde::{Deserialize, Serialize};

use super::config::PillowConfig;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Valve {
    Closed,
    Venting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pump {
    Off,
    Inflating,
}

/// Pneumatic state of one pillow.
///
/// `air` is the pressure of the trapped air with no load on the pillow.
/// `pressure` is what the barometric sensor sees: the trapped air plus the
/// compression caused by the body pressing the pillow into the shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PillowState {
    pub pressure: f64,
    pub air: f64,
    pub valve: Valve,
    pub pump: Pump,
    pub setpoint: f64,
    pub reinflate_target: f64,
}

impl PillowState {
    /// A fully inflated pillow at rest.
    pub fn inflated(cfg: &PillowConfig) -> Self {
        Self::at_rest(cfg, cfg.setpoint)
    }

    pub fn at_rest(cfg: &PillowConfig, air: f64) -> Self {
        let air = air.clamp(cfg.p_floor, cfg.setpoint);
        Self {
            pressure: air,
            air,
            valve: Valve::Closed,
            pump: Pump::Off,
            setpoint: cfg.setpoint,
            reinflate_target: cfg.reinflate_target,
        }
    }
}

/// The crush / vent / partial re-inflate state machine.
#[derive(Debug, Clone)]
pub struct PillowModel {
    cfg: PillowConfig,
}

impl PillowModel {
    pub fn new(cfg: &PillowConfig) -> Self {
        Self { cfg: cfg.clone() }
    }

    pub fn config(&self) -> &PillowConfig {
        &self.cfg
    }

    /// Crush above threshold opens the vent and the trapped air decays toward
    /// the floor with `tau_vent`. With no crush and air below the re-inflate
    /// target the pump refills toward that target with `tau_inflate`; the
    /// target sits below the setpoint so the pillow only partly recovers.
    /// Otherwise the pillow holds. Exponential steps are exact, so they never
    /// overshoot their target.
    ///
    /// A non-positive `dt` leaves the air untouched.
    pub fn update(&self, p: &PillowState, crush: f64, dt: f64) -> PillowState {
        let c = &self.cfg;
        let crush = if crush.is_finite() { crush.clamp(0.0, 1.0) } else { 0.0 };
        let dt = dt.max(0.0);
        let mut next = *p;

        if crush > c.crush_threshold {
            next.valve = Valve::Venting;
            next.pump = Pump::Off;
            next.air = c.p_floor + (p.air - c.p_floor) * (-dt / c.tau_vent).exp();
        } else if p.air < p.reinflate_target {
            next.valve = Valve::Closed;
            next.pump = Pump::Inflating;
            next.air = p.reinflate_target - (p.reinflate_target - p.air) * (-dt / c.tau_inflate).exp();
        } else {
            next.valve = Valve::Closed;
            next.pump = Pump::Off;
        }
        next.air = next.air.clamp(c.p_floor, p.setpoint);
        next.pressure = (next.air + c.crush_gain * crush).clamp(c.p_floor, c.p_max);
        next
    }
}

/// Zone-to-pillow assignment; always a bijection over `0..4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement([usize; 4]);

impl Placement {
    pub const IDENTITY: Placement = Placement([0, 1, 2, 3]);

    /// `zone_to_pillow[zone] = pillow`.
    pub fn new(zone_to_pillow: [usize; 4]) -> Result<Self, SimError> {
        let mut seen = [false; 4];
        for &p in &zone_to_pillow {
            if p >= 4 || seen[p] {
                return Err(SimError::InvalidPlacement(zone_to_pillow));
            }
            seen[p] = true;
        }
        Ok(Self(zone_to_pillow))
    }

    pub fn pillow_for(&self, zone: usize) -> usize {
        self.0[zone]
    }
}

/// Each zone presses its pillow against the shell: the crush on a pillow is
/// the expansion of the zone placed over it.
pub fn couple_body_to_pillows(expansions: [f64; 4], placement: &Placement) -> [f64; 4] {
    let mut crush = [0.0; 4];
    for (zone, e) in expansions.into_iter().enumerate() {
        crush[placement.pillow_for(zone)] = e.clamp(0.0, 1.0);
    }
    crush
}
