use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::config::{BreathConfig, FatigueConfig};
use super::SimError;

/// Torso regions whose expansion is sensed, ordered from lowest to highest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    LowerAbdominals,
    Ribcage,
    Sternum,
    ThoracolumbarFascia,
}

impl Zone {
    pub const ALL: [Zone; 4] = [
        Zone::LowerAbdominals,
        Zone::Ribcage,
        Zone::Sternum,
        Zone::ThoracolumbarFascia,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Nose or mouth breathing. Only colours the synthetic breath noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BreathMode {
    Nose,
    #[default]
    Mouth,
}

/// A probability vector over the four zones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneWeights([f64; 4]);

impl ZoneWeights {
    pub const UNIFORM: ZoneWeights = ZoneWeights([0.25; 4]);

    /// Normalizes a non-negative bias vector. An all-zero bias is rejected.
    pub fn from_bias(bias: [f64; 4]) -> Result<Self, SimError> {
        for &b in &bias {
            if !b.is_finite() || b < 0.0 {
                return Err(SimError::InvalidControl { field: "zone_bias", value: b });
            }
        }
        let sum: f64 = bias.iter().sum();
        if sum <= 0.0 {
            return Err(SimError::InvalidControl { field: "zone_bias", value: sum });
        }
        Ok(Self(bias.map(|b| b / sum)))
    }

    pub fn get(&self, zone: Zone) -> f64 {
        self.0[zone.index()]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    /// Index-weighted mean zone (0 = lower abdominals, 3 = highest).
    pub fn centroid(&self) -> f64 {
        self.0.iter().enumerate().map(|(i, w)| i as f64 * w).sum()
    }

    /// Moves weight upward as fatigue grows: a `shift_max * fatigue` share of
    /// the lower abdominals (and half that share of the ribcage) is handed to
    /// the sternum and thoracolumbar zones in equal parts.
    pub fn shifted_by_fatigue(&self, fatigue: f64, shift_max: f64) -> Self {
        let lambda = (shift_max * fatigue).clamp(0.0, 1.0);
        let [lower, rib, sternum, thoraco] = self.0;
        let from_lower = lambda * lower;
        let from_rib = 0.5 * lambda * rib;
        let moved = from_lower + from_rib;
        Self([
            lower - from_lower,
            rib - from_rib,
            sternum + 0.5 * moved,
            thoraco + 0.5 * moved,
        ])
    }
}

impl Default for ZoneWeights {
    fn default() -> Self {
        Self::UNIFORM
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreathControls {
    pub depth: f64,
    pub rate: f64,
    pub zone_bias: [f64; 4],
}

impl BreathControls {
    pub fn from_config(cfg: &BreathConfig) -> Self {
        Self { depth: cfg.depth, rate: cfg.rate_hz, zone_bias: cfg.zone_bias }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    /// Breath phase in `[0, 2π)`.
    pub phase: f64,
    /// Breaths per second.
    pub rate: f64,
    pub depth: f64,
    /// Performer's intended distribution, before fatigue.
    pub zone_bias: ZoneWeights,
    /// Effective distribution after the fatigue shift.
    pub zone_weights: ZoneWeights,
    pub fatigue: f64,
    pub mode: BreathMode,
}

impl BodyState {
    pub fn new(cfg: &BreathConfig) -> Result<Self, SimError> {
        let bias = ZoneWeights::from_bias(cfg.zone_bias)?;
        Ok(Self {
            phase: 0.0,
            rate: cfg.rate_hz,
            depth: cfg.depth.clamp(0.0, 1.0),
            zone_bias: bias,
            zone_weights: bias,
            fatigue: 0.0,
            mode: cfg.mode,
        })
    }
}

/// Asymmetric raised-cosine breath cycle: rises from 0 to 1 over the inhale
/// fraction of the cycle, falls back to 0 over the rest.
pub fn waveform(phase: f64, inhale_fraction: f64) -> f64 {
    let u = phase.rem_euclid(TAU) / TAU;
    if u < inhale_fraction {
        0.5 * (1.0 - (PI * u / inhale_fraction).cos())
    } else {
        0.5 * (1.0 + (PI * (u - inhale_fraction) / (1.0 - inhale_fraction)).cos())
    }
}

/// Breathing and fatigue dynamics for one performer.
#[derive(Debug, Clone)]
pub struct BodyModel {
    pub inhale_fraction: f64,
    pub fatigue: FatigueConfig,
}

impl BodyModel {
    pub fn new(breath: &BreathConfig, fatigue: &FatigueConfig) -> Self {
        Self { inhale_fraction: breath.inhale_fraction, fatigue: fatigue.clone() }
    }

    /// Advances the breath cycle by `dt` under the given controls and returns
    /// the new state with the per-zone expansions in `[0, 1]`.
    pub fn step_breathing(
        &self,
        body: &BodyState,
        dt: f64,
        controls: &BreathControls,
    ) -> Result<(BodyState, [f64; 4]), SimError> {
        if !(dt > 0.0) {
            return Err(SimError::InvalidTimestep(dt));
        }
        if !(0.0..=1.0).contains(&controls.depth) {
            return Err(SimError::InvalidControl { field: "depth", value: controls.depth });
        }
        if !(controls.rate > 0.0 && controls.rate <= 4.0) {
            return Err(SimError::InvalidControl { field: "rate", value: controls.rate });
        }
        let bias = ZoneWeights::from_bias(controls.zone_bias)?;

        let mut next = *body;
        next.depth = controls.depth;
        next.rate = controls.rate;
        next.zone_bias = bias;
        next.zone_weights = bias.shifted_by_fatigue(next.fatigue, self.fatigue.shift_max);
        next.phase = (body.phase + TAU * controls.rate * dt).rem_euclid(TAU);

        let wave = waveform(next.phase, self.inhale_fraction);
        let mut expansions = [0.0; 4];
        for zone in Zone::ALL {
            let i = zone.index();
            let depth_eff = next.depth * (1.0 - next.fatigue * self.fatigue.attenuation[i]);
            expansions[i] = (depth_eff * next.zone_weights.get(zone) * wave).clamp(0.0, 1.0);
        }
        Ok((next, expansions))
    }

    /// Accumulates fatigue and shifts zone weight upward accordingly.
    /// Inputs are clamped: effort to `[0, 1]`, acceleration to `≥ 1`.
    pub fn apply_fatigue(&self, body: &BodyState, dt: f64, effort: f64, acceleration: f64) -> BodyState {
        let mut next = *body;
        let dt = dt.max(0.0);
        let effort = effort.clamp(0.0, 1.0);
        let acceleration = acceleration.max(1.0);
        next.fatigue = (body.fatigue + self.fatigue.rate_per_s * acceleration * effort * dt).min(1.0);
        next.zone_weights = body.zone_bias.shifted_by_fatigue(next.fatigue, self.fatigue.shift_max);
        next
    }
}
