//! Scene files: one JSON document describing a whole performance.
//!
//! Every block is optional; `{}` is a valid scene with all defaults. Paths
//! are resolved against the scene file's directory.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "sections": [
//!     { "id": "connection", "duration_s": 10 },
//!     { "id": "disconnection", "duration_s": 10, "assignment": [1, 0, 3, 2] },
//!     { "id": "questioning", "duration_s": 10, "advance": "timed" }
//!   ],
//!   "tape_lines": [{ "path": "lines/a.wav", "looping": true }],
//!   "audio": { "sample_rate": 48000, "wav_format": "i16", "channels": 2 }
//! }
//! ```

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SceneError;
use crate::breath::{Placement, SimConfig};
use crate::dsp::AudioConfig;
use crate::mapping::{MappingError, PressureRange, SectionId, SectionSpec, DEFAULT_MIN_SPAN_HPA};
use crate::osc::{DEFAULT_IN_PORT, DEFAULT_OUT_PORT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationPolicy {
    /// Deep breathing before measuring, while the pillows vent down from
    /// full inflation.
    pub settle_s: f64,
    /// Length of the measured deep-breathing sweep.
    pub sweep_s: f64,
    pub min_span_hpa: f64,
    /// One-pole smoothing applied after normalization.
    pub smoothing_alpha: f64,
    /// Fixed per-pillow ranges; skips the sweep when present.
    pub ranges: Option<[PressureRange; 4]>,
}

impl Default for CalibrationPolicy {
    fn default() -> Self {
        Self { settle_s: 10.0, sweep_s: 10.0, min_span_hpa: DEFAULT_MIN_SPAN_HPA, smoothing_alpha: 0.2, ranges: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapeLineRef {
    pub path: PathBuf,
    #[serde(default)]
    pub looping: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub osc_in_port: u16,
    pub osc_out: SocketAddr,
    pub osc_enabled: bool,
    pub websocket_port: u16,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            osc_in_port: DEFAULT_IN_PORT,
            osc_out: SocketAddr::from(([127, 0, 0, 1], DEFAULT_OUT_PORT)),
            osc_enabled: true,
            websocket_port: 8765,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub seed: u64,
    pub sim: SimConfig,
    pub calibration: CalibrationPolicy,
    /// Exactly three, in performance order.
    pub sections: Vec<SectionSpec>,
    /// Pre-recorded lines; four synthetic placeholders when empty.
    pub tape_lines: Vec<TapeLineRef>,
    /// WAV standing in for the live voice; a synthetic voice when absent.
    pub live_input: Option<PathBuf>,
    /// Pitch of the synthetic voice.
    pub voice_f0_hz: f64,
    pub audio: AudioConfig,
    pub io: IoConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sim: SimConfig::default(),
            calibration: CalibrationPolicy::default(),
            sections: SectionSpec::default_sections(),
            tape_lines: Vec::new(),
            live_input: None,
            voice_f0_hz: 196.0,
            audio: AudioConfig::default(),
            io: IoConfig::default(),
        }
    }
}

impl SceneConfig {
    /// Reads, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|e| SceneError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, SceneError> {
        let mut cfg: SceneConfig = serde_json::from_str(text).map_err(|e| SceneError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        for line in &mut cfg.tape_lines {
            line.path = base_dir.join(&line.path);
        }
        if let Some(p) = &mut cfg.live_input {
            *p = base_dir.join(&*p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let invalid = |field: &str, constraint: &str| SceneError::Validation { field: field.into(), constraint: constraint.into() };

        let order: Vec<SectionId> = self.sections.iter().map(SectionSpec::id).collect();
        if order != SectionId::ALL {
            return Err(invalid("sections", "exactly connection, disconnection, questioning in that order"));
        }
        for s in &self.sections {
            s.validate().map_err(|e| match e {
                MappingError::InvalidAssignment(m) => SceneError::InvalidAssignment(m),
                MappingError::InvalidParameter { field, constraint } => SceneError::Validation { field: format!("sections.{field}"), constraint },
                other => SceneError::Validation { field: "sections".into(), constraint: other.to_string() },
            })?;
        }

        let sim = &self.sim;
        if !(sim.control_rate_hz >= 10.0 && sim.control_rate_hz <= 1000.0) {
            return Err(invalid("sim.control_rate_hz", "in [10, 1000]"));
        }
        if !(sim.noise_amplitude_hpa >= 0.0) {
            return Err(invalid("sim.noise_amplitude_hpa", "must be >= 0"));
        }
        Placement::new(sim.placement).map_err(|_| SceneError::InvalidAssignment(format!("sim.placement {:?} must be a bijection over 0..4", sim.placement)))?;
        let p = &sim.pillow;
        if !(p.p_floor < p.reinflate_target && p.reinflate_target < p.setpoint && p.setpoint <= p.p_max) {
            return Err(invalid("sim.pillow", "p_floor < reinflate_target < setpoint <= p_max"));
        }
        if !(p.tau_vent > 0.0 && p.tau_inflate > 0.0 && p.crush_gain >= 0.0 && (0.0..1.0).contains(&p.crush_threshold)) {
            return Err(invalid("sim.pillow", "positive time constants, crush_gain >= 0, crush_threshold in [0, 1)"));
        }
        let b = &sim.breath;
        if !(b.inhale_fraction > 0.0 && b.inhale_fraction < 1.0) {
            return Err(invalid("sim.breath.inhale_fraction", "in (0, 1)"));
        }
        if !((0.0..=1.0).contains(&b.depth) && b.rate_hz > 0.0 && b.rate_hz <= 4.0) {
            return Err(invalid("sim.breath", "depth in [0, 1], rate_hz in (0, 4]"));
        }
        if b.zone_bias.iter().any(|w| !(*w >= 0.0)) || b.zone_bias.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("sim.breath.zone_bias", "non-negative with a positive sum"));
        }
        let f = &sim.fatigue;
        if !(f.rate_per_s >= 0.0 && f.acceleration >= 0.0 && (0.0..=1.0).contains(&f.shift_max)) {
            return Err(invalid("sim.fatigue", "rates >= 0, shift_max in [0, 1]"));
        }
        if f.attenuation.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(invalid("sim.fatigue.attenuation", "each in [0, 1]"));
        }

        let c = &self.calibration;
        if !(c.sweep_s > 0.0 && c.sweep_s <= 600.0) {
            return Err(invalid("calibration.sweep_s", "in (0, 600]"));
        }
        if !(c.settle_s >= 0.0 && c.settle_s <= 600.0) {
            return Err(invalid("calibration.settle_s", "in [0, 600]"));
        }
        if !(c.min_span_hpa > 0.0) {
            return Err(invalid("calibration.min_span_hpa", "must be > 0"));
        }
        if !(c.smoothing_alpha > 0.0 && c.smoothing_alpha <= 1.0) {
            return Err(invalid("calibration.smoothing_alpha", "in (0, 1]"));
        }
        if let Some(r) = &c.ranges {
            if r.iter().any(|r| !(r.raw_max - r.raw_min >= c.min_span_hpa)) {
                return Err(invalid("calibration.ranges", "raw_max - raw_min >= min_span_hpa"));
            }
        }

        if !(self.voice_f0_hz >= 50.0 && self.voice_f0_hz <= 1000.0) {
            return Err(invalid("voice_f0_hz", "in [50, 1000]"));
        }
        self.audio.validate().map_err(|e| invalid("audio", &e.to_string()))?;
        if self.tape_lines.len() > crate::mapping::MAX_TAPE_LINES {
            return Err(invalid("tape_lines", "at most 8"));
        }
        for path in self.tape_lines.iter().map(|l| &l.path).chain(&self.live_input) {
            if !path.is_file() {
                return Err(SceneError::MissingAsset(path.clone()));
            }
        }
        Ok(())
    }

    pub fn section(&self, id: SectionId) -> &SectionSpec {
        &self.sections[id.index()]
    }

    pub fn total_duration_s(&self) -> f64 {
        self.sections.iter().map(|s| s.duration_s).sum()
    }

    /// SHA-256 over the canonical JSON serialization, hex encoded.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scene serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
