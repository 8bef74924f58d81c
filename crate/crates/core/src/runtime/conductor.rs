//! The control tick: normalize, smooth, sequence, evaluate.

use super::scene::SceneConfig;
use super::session::{Keyframe, SessionEvent};
use super::timeline::{Position, Timeline, TimelineEvent};
use super::RuntimeError;
use crate::breath::{BreathControls, PressureFrame, Simulator, PILLOWS};
use crate::mapping::{calibrate, evaluate, CalibrationMap, NormalizedPressures, ParamFrame, SectionId, Smoother};
use crate::osc::Cue;

/// Keyframes are kept every this many ticks, plus on every boundary.
pub const KEYFRAME_EVERY: u64 = 50;

/// Calibration for a scene: the fixed ranges if given, otherwise a
/// deterministic deep-breathing sweep of the simulator.
pub fn scene_calibration(scene: &SceneConfig) -> Result<CalibrationMap, RuntimeError> {
    let policy = &scene.calibration;
    if let Some(ranges) = policy.ranges {
        return Ok(CalibrationMap::new(ranges, policy.min_span_hpa)?);
    }
    let mut sim = Simulator::new(&scene.sim, scene.seed)?;
    sim.set_controls(BreathControls { depth: 1.0, ..BreathControls::from_config(&scene.sim.breath) })?;
    sim.set_effort_scale(0.0);
    let rate = scene.sim.control_rate_hz;
    sim.run((policy.settle_s * rate).round() as usize);
    let frames = sim.run((policy.sweep_s * rate).round() as usize);
    Ok(calibrate(&frames, policy.min_span_hpa)?)
}

/// Calibration from a recorded track, skipping the settle period when the
/// track is long enough.
pub fn track_calibration(scene: &SceneConfig, frames: &[PressureFrame]) -> Result<CalibrationMap, RuntimeError> {
    let rate = scene.sim.control_rate_hz;
    let skip = (scene.calibration.settle_s * rate).round() as usize;
    let take = (scene.calibration.sweep_s * rate).round() as usize;
    let window = if frames.len() >= skip + take { &frames[skip..skip + take] } else { frames };
    Ok(calibrate(window, scene.calibration.min_span_hpa)?)
}

/// Simulated breath track of `duration_s` at the control rate.
pub fn simulate_track(scene: &SceneConfig, seed: u64, duration_s: f64) -> Result<Vec<PressureFrame>, RuntimeError> {
    let mut sim = Simulator::new(&scene.sim, seed)?;
    Ok(sim.run((duration_s * scene.sim.control_rate_hz).round() as usize))
}

#[derive(Debug, Clone)]
pub struct TickOutput {
    pub params: ParamFrame,
    pub normalized: NormalizedPressures,
    pub position: Position,
    pub events: Vec<TimelineEvent>,
}

/// Pure control pipeline for one performance. Owned by the control thread.
#[derive(Debug, Clone)]
pub struct Conductor {
    scene: SceneConfig,
    calibration: CalibrationMap,
    smoother: Smoother,
    timeline: Timeline,
    dt: f64,
    last_section: SectionId,
}

impl Conductor {
    pub fn new(scene: &SceneConfig, calibration: CalibrationMap, all_timed: bool) -> Result<Self, RuntimeError> {
        Ok(Self {
            smoother: Smoother::new(scene.calibration.smoothing_alpha)?,
            timeline: Timeline::new(&scene.sections, all_timed),
            dt: scene.sim.dt(),
            last_section: SectionId::Connection,
            calibration,
            scene: scene.clone(),
        })
    }

    pub fn calibration(&self) -> &CalibrationMap {
        &self.calibration
    }

    pub fn position(&self) -> Position {
        self.timeline.position()
    }

    /// Seconds since the current section began.
    pub fn t_in_section(&self) -> f64 {
        self.timeline.t_in_section()
    }

    pub fn time_of(&self, seq: u64) -> f64 {
        seq as f64 * self.dt
    }

    /// Tick `seq` runs at `seq · dt`. After the end every gain is 0.
    pub fn tick(&mut self, frame: &PressureFrame, seq: u64, cues: &[Cue]) -> TickOutput {
        let t = self.time_of(seq);
        let events = self.timeline.advance_to(t, cues);
        let raw = self.calibration.normalize(frame);
        let normalized = self.smoother.process(NormalizedPressures::new(t, raw.values));
        let params = match self.timeline.section() {
            Some(id) => {
                self.last_section = id;
                let mut p = evaluate(self.scene.section(id), &normalized, self.timeline.t_in_section())
                    .expect("scene validated at load");
                p.breath_level = (normalized.values.iter().sum::<f64>() / PILLOWS as f64).clamp(0.0, 1.0) as f32;
                p
            }
            None => ParamFrame::neutral(self.last_section),
        };
        TickOutput { params, normalized, position: self.timeline.position(), events }
    }
}

/// Accumulates what a session log needs while ticks go by.
#[derive(Debug, Default, Clone)]
pub struct Recorder {
    pub frames: Vec<PressureFrame>,
    pub events: Vec<SessionEvent>,
    pub keyframes: Vec<Keyframe>,
}

impl Recorder {
    pub fn record(&mut self, seq: u64, frame: &PressureFrame, out: &TickOutput) {
        self.frames.push(PressureFrame { seq, ..*frame });
        let boundary = out.events.iter().any(|e| matches!(e, TimelineEvent::Boundary { .. } | TimelineEvent::End { .. }));
        self.events.extend(out.events.iter().map(|e| SessionEvent::from_timeline(e, seq)));
        if seq % KEYFRAME_EVERY == 0 || boundary {
            self.keyframes.push(Keyframe { seq, t: out.normalized.t, params: out.params });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_scene() -> SceneConfig {
        let mut s = SceneConfig::default();
        for sec in &mut s.sections {
            sec.duration_s = 2.0;
        }
        s
    }

    #[test]
    fn sweep_is_deterministic_and_spans_breathing() {
        let scene = SceneConfig::default();
        let a = scene_calibration(&scene).unwrap();
        assert_eq!(a, scene_calibration(&scene).unwrap());
        for r in a.ranges {
            assert!(r.raw_max - r.raw_min > 3.0, "{r:?}");
            assert!(r.raw_max < scene.sim.pillow.setpoint);
        }
    }

    #[test]
    fn conductor_walks_all_sections_and_silences_after_end() {
        let scene = short_scene();
        let cal = scene_calibration(&scene).unwrap();
        let mut c = Conductor::new(&scene, cal, true).unwrap();
        let frames = simulate_track(&scene, 1, 7.0).unwrap();
        let mut seen = Vec::new();
        let mut rec = Recorder::default();
        for (k, f) in frames.iter().enumerate() {
            let out = c.tick(f, k as u64, &[]);
            assert!(out.params.validate().is_ok());
            if let Position::In(id) = out.position {
                if seen.last() != Some(&id) {
                    seen.push(id);
                }
                assert_eq!(out.params.section, id);
            } else {
                assert!(out.params.choir.iter().all(|v| v.gain == 0.0) && out.params.grain.gain == 0.0);
            }
            rec.record(k as u64, f, &out);
        }
        assert_eq!(seen, SectionId::ALL);
        assert_eq!(c.position(), Position::Ended);
        assert_eq!(rec.events.iter().filter(|e| e.is_boundary()).map(|e| e.t).collect::<Vec<_>>(), vec![2.0, 4.0]);
        assert_eq!(rec.frames.len(), 700);
        assert!(rec.keyframes.len() >= 14);
    }

    #[test]
    fn replay_with_same_inputs_repeats_params() {
        let scene = short_scene();
        let cal = scene_calibration(&scene).unwrap();
        let frames = simulate_track(&scene, 4, 6.0).unwrap();
        let run = || {
            let mut c = Conductor::new(&scene, cal, true).unwrap();
            frames
                .iter()
                .enumerate()
                .map(|(k, f)| c.tick(f, k as u64, if k == 50 { &[Cue::Next] } else { &[] }).params)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
