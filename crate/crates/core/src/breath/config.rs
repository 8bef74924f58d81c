use serde::{Deserialize, Serialize};

use super::body::BreathMode;

/// Simulator constants. Every field has a default so a scene file may omit
/// the whole block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub control_rate_hz: f64,
    pub noise_amplitude_hpa: f64,
    /// `placement[zone] = pillow index`.
    pub placement: [usize; 4],
    pub pillow: PillowConfig,
    pub breath: BreathConfig,
    pub fatigue: FatigueConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            control_rate_hz: 100.0,
            noise_amplitude_hpa: 0.05,
            placement: [0, 1, 2, 3],
            pillow: PillowConfig::default(),
            breath: BreathConfig::default(),
            fatigue: FatigueConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.control_rate_hz
    }
}

/// Pneumatic constants, in hPa and seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PillowConfig {
    pub p_floor: f64,
    pub setpoint: f64,
    pub p_max: f64,
    pub reinflate_target: f64,
    /// Sensed pressure rise per unit crush.
    pub crush_gain: f64,
    pub tau_vent: f64,
    pub tau_inflate: f64,
    pub crush_threshold: f64,
}

impl Default for PillowConfig {
    fn default() -> Self {
        Self {
            p_floor: 1000.0,
            setpoint: 1040.0,
            p_max: 1060.0,
            reinflate_target: 1024.0,
            crush_gain: 20.0,
            tau_vent: 0.8,
            tau_inflate: 4.0,
            crush_threshold: 0.05,
        }
    }
}

impl PillowConfig {
    pub fn span(&self) -> f64 {
        self.setpoint - self.p_floor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BreathConfig {
    /// Fraction of the cycle spent inhaling.
    pub inhale_fraction: f64,
    pub depth: f64,
    pub rate_hz: f64,
    pub zone_bias: [f64; 4],
    pub mode: BreathMode,
}

impl Default for BreathConfig {
    fn default() -> Self {
        Self {
            inhale_fraction: 0.4,
            depth: 0.8,
            rate_hz: 0.25,
            zone_bias: [0.25; 4],
            mode: BreathMode::Mouth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FatigueConfig {
    /// Fatigue gained per second at full effort and unit acceleration.
    pub rate_per_s: f64,
    /// How much faster the corset tires the performer than plain singing.
    pub acceleration: f64,
    /// Fraction of lower-zone weight moved upward at full fatigue.
    pub shift_max: f64,
    /// Per-zone depth attenuation at full fatigue.
    pub attenuation: [f64; 4],
}

impl Default for FatigueConfig {
    fn default() -> Self {
        Self {
            rate_per_s: 1.0 / 90.0,
            acceleration: 1.0,
            shift_max: 0.8,
            attenuation: [0.6, 0.3, 0.0, 0.0],
        }
    }
}
