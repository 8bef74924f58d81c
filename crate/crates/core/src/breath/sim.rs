use serde::{Deserialize, Serialize};

use super::body::{BodyModel, BodyState, BreathControls};
use super::config::SimConfig;
use super::pillow::{couple_body_to_pillows, Placement, PillowModel, PillowState};
use super::sensor::PressureSensor;
use super::SimError;

pub const PILLOWS: usize = 4;

/// One control-rate snapshot of the four pillow sensors, in hPa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureFrame {
    pub t: f64,
    pub seq: u64,
    pub values: [f64; PILLOWS],
}

/// Torso, pillows and sensors stepped together at the control rate.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: SimConfig,
    body_model: BodyModel,
    pillow_model: PillowModel,
    placement: Placement,
    body: BodyState,
    pillows: [PillowState; PILLOWS],
    sensor: PressureSensor,
    controls: BreathControls,
    crush_override: [Option<f64>; PILLOWS],
    effort_scale: f64,
    seq: u64,
}

impl Simulator {
    pub fn new(cfg: &SimConfig, seed: u64) -> Result<Self, SimError> {
        if !(cfg.control_rate_hz > 0.0) {
            return Err(SimError::InvalidTimestep(cfg.dt()));
        }
        let placement = Placement::new(cfg.placement)?;
        let body = BodyState::new(&cfg.breath)?;
        Ok(Self {
            body_model: BodyModel::new(&cfg.breath, &cfg.fatigue),
            pillow_model: PillowModel::new(&cfg.pillow),
            placement,
            body,
            pillows: [PillowState::inflated(&cfg.pillow); PILLOWS],
            sensor: PressureSensor::new(seed, cfg.noise_amplitude_hpa),
            controls: BreathControls::from_config(&cfg.breath),
            crush_override: [None; PILLOWS],
            effort_scale: 1.0,
            seq: 0,
            cfg: cfg.clone(),
        })
    }

    pub fn set_controls(&mut self, controls: BreathControls) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&controls.depth) {
            return Err(SimError::InvalidControl { field: "depth", value: controls.depth });
        }
        if !(controls.rate > 0.0 && controls.rate <= 4.0) {
            return Err(SimError::InvalidControl { field: "rate", value: controls.rate });
        }
        super::ZoneWeights::from_bias(controls.zone_bias)?;
        self.controls = controls;
        Ok(())
    }

    pub fn controls(&self) -> BreathControls {
        self.controls
    }

    /// Manual crush per pillow; the larger of body and manual crush wins.
    pub fn set_crush_override(&mut self, crush: [Option<f64>; PILLOWS]) {
        self.crush_override = crush.map(|c| c.map(|v| v.clamp(0.0, 1.0)));
    }

    /// Scales the effort fed to the fatigue model (0 freezes fatigue).
    pub fn set_effort_scale(&mut self, scale: f64) {
        self.effort_scale = scale.clamp(0.0, 1.0);
    }

    pub fn body(&self) -> &BodyState {
        &self.body
    }

    pub fn pillows(&self) -> &[PillowState; PILLOWS] {
        &self.pillows
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Advances one control tick and returns the sensor frame. The first
    /// frame has `seq = 0` and `t = 0`.
    pub fn tick(&mut self) -> PressureFrame {
        let dt = self.cfg.dt();
        let t = self.seq as f64 * dt;

        // Controls were validated on the way in.
        let (body, expansions) = self
            .body_model
            .step_breathing(&self.body, dt, &self.controls)
            .expect("validated breath controls");
        let effort = self.controls.depth * self.effort_scale;
        self.body = self.body_model.apply_fatigue(&body, dt, effort, self.cfg.fatigue.acceleration);

        let mut crush = couple_body_to_pillows(expansions, &self.placement);
        for (c, o) in crush.iter_mut().zip(self.crush_override) {
            if let Some(o) = o {
                *c = c.max(o);
            }
        }

        let mut values = [0.0; PILLOWS];
        for i in 0..PILLOWS {
            self.pillows[i] = self.pillow_model.update(&self.pillows[i], crush[i], dt);
            values[i] = self.sensor.sample(&self.pillows[i]);
        }

        let frame = PressureFrame { t, seq: self.seq, values };
        self.seq += 1;
        frame
    }

    /// Runs `n` ticks and collects the frames.
    pub fn run(&mut self, n: usize) -> Vec<PressureFrame> {
        (0..n).map(|_| self.tick()).collect()
    }
}
