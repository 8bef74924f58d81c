use serde::{Deserialize, Serialize};

use super::buffer::{AudioBuffer, WavFormat, SUPPORTED_RATES};
use super::choir::Choir;
use super::granular::GranularEngine;
use super::mixer::{mix_and_meter, BusGains, Meters};
use super::sampler::{ramp, Sampler};
use super::DspError;
use crate::mapping::{ParamFrame, MAX_TAPE_LINES};

pub const BLOCK_SIZES: [usize; 3] = [64, 128, 256];
const MAX_BLOCK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioConfig {
    pub sample_rate: u32,
    pub block_size: usize,
    pub master_gain: f32,
    pub bus_gains: BusGains,
    /// Grain start jitter, ± ms.
    pub grain_jitter_ms: f64,
    /// Length of the live-voice history the granular stage reads from.
    pub capture_s: f64,
    pub wav_format: WavFormat,
    pub channels: u16,
}

impl Default for AudioConfig {
    fn default() -> Self {
        Self {
            sample_rate: 48_000,
            block_size: 128,
            master_gain: 0.8,
            bus_gains: BusGains::default(),
            grain_jitter_ms: 20.0,
            capture_s: 4.0,
            wav_format: WavFormat::F32,
            channels: 1,
        }
    }
}

impl AudioConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        if !SUPPORTED_RATES.contains(&self.sample_rate) {
            return Err(DspError::UnsupportedSampleRate(self.sample_rate));
        }
        if !BLOCK_SIZES.contains(&self.block_size) {
            return Err(DspError::InvalidBlockSize(self.block_size));
        }
        if !(1..=2).contains(&self.channels) {
            return Err(DspError::InvalidConfig("channels must be 1 or 2"));
        }
        if !(0.0..=4.0).contains(&self.master_gain) {
            return Err(DspError::InvalidConfig("master_gain must be in [0, 4]"));
        }
        let g = &self.bus_gains;
        if [g.tape, g.choir, g.grain, g.live].iter().any(|v| !(0.0..=4.0).contains(v)) {
            return Err(DspError::InvalidConfig("bus gains must be in [0, 4]"));
        }
        if !(self.capture_s > 0.0 && self.capture_s <= 30.0) {
            return Err(DspError::InvalidConfig("capture_s must be in (0, 30]"));
        }
        if !(0.0..=500.0).contains(&self.grain_jitter_ms) {
            return Err(DspError::InvalidConfig("grain_jitter_ms must be in [0, 500]"));
        }
        Ok(())
    }

    pub fn block_duration_s(&self) -> f64 {
        self.block_size as f64 / self.sample_rate as f64
    }
}

/// One pre-recorded line.
#[derive(Debug, Clone)]
pub struct TapeLine {
    pub buffer: AudioBuffer,
    pub looping: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockReport {
    pub meters: Meters,
    /// No live block was supplied; silence stood in for it.
    pub missing_live_input: bool,
}

/// Keeps the last `cap` samples contiguous by writing every sample twice.
#[derive(Debug, Clone)]
struct Capture {
    buf: Vec<f32>,
    cap: usize,
    written: u64,
}

impl Capture {
    fn new(cap: usize) -> Self {
        Self { buf: vec![0.0; 2 * cap], cap, written: 0 }
    }

    fn write(&mut self, x: &[f32]) {
        for &s in x {
            let p = (self.written % self.cap as u64) as usize;
            self.buf[p] = s;
            self.buf[p + self.cap] = s;
            self.written += 1;
        }
    }

    /// The newest `cap` samples, oldest first, and the absolute index of the
    /// first one.
    fn window(&self) -> (&[f32], f64) {
        let p = (self.written % self.cap as u64) as usize;
        (&self.buf[p..p + self.cap], self.written as f64 - self.cap as f64)
    }
}

/// Owns all render state. Only the rendering context touches it.
#[derive(Debug, Clone)]
pub struct Engine {
    cfg: AudioConfig,
    tape: Vec<Sampler>,
    choir: Choir,
    granular: GranularEngine,
    capture: Capture,
    live_gain: Option<f32>,
    live_in: [f32; MAX_BLOCK],
    line: [f32; MAX_BLOCK],
    tape_bus: [f32; MAX_BLOCK],
    choir_bus: [f32; MAX_BLOCK],
    grain_bus: [f32; MAX_BLOCK],
    live_bus: [f32; MAX_BLOCK],
    blocks: u64,
}

impl Engine {
    pub fn new(cfg: &AudioConfig, lines: Vec<TapeLine>, seed: u64) -> Result<Self, DspError> {
        cfg.validate()?;
        if lines.len() > MAX_TAPE_LINES {
            return Err(DspError::TooManyLines(lines.len()));
        }
        let tape = lines
            .into_iter()
            .map(|l| Ok(Sampler::new(l.buffer.resampled(cfg.sample_rate)?.into_samples(), l.looping)))
            .collect::<Result<_, DspError>>()?;
        let capture = (cfg.capture_s * cfg.sample_rate as f64).round() as usize;
        Ok(Self {
            tape,
            choir: Choir::new(cfg.sample_rate, seed),
            granular: GranularEngine::new(cfg.sample_rate, seed, cfg.grain_jitter_ms),
            capture: Capture::new(capture.max(MAX_BLOCK)),
            live_gain: None,
            live_in: [0.0; MAX_BLOCK],
            line: [0.0; MAX_BLOCK],
            tape_bus: [0.0; MAX_BLOCK],
            choir_bus: [0.0; MAX_BLOCK],
            grain_bus: [0.0; MAX_BLOCK],
            live_bus: [0.0; MAX_BLOCK],
            blocks: 0,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &AudioConfig {
        &self.cfg
    }

    pub fn tape_lines(&self) -> usize {
        self.tape.len()
    }

    pub fn grain_onsets(&self) -> u64 {
        self.granular.onset_count()
    }

    pub fn blocks_rendered(&self) -> u64 {
        self.blocks
    }

    /// Renders one block for `frame`. The live voice feeds the live bus, the
    /// choir and the grain capture. Without it, silence is used and the
    /// report says so. Allocation-free and lock-free.
    pub fn render_block(&mut self, frame: &ParamFrame, live: Option<&[f32]>, out: &mut [f32]) -> Result<BlockReport, DspError> {
        let n = out.len();
        if !BLOCK_SIZES.contains(&n) {
            return Err(DspError::InvalidBlockSize(n));
        }
        let live = live.filter(|l| l.len() == n);
        let missing_live_input = live.is_none();
        match live {
            Some(l) => self.live_in[..n].copy_from_slice(l),
            None => self.live_in[..n].fill(0.0),
        }
        self.capture.write(&self.live_in[..n]);

        self.tape_bus[..n].fill(0.0);
        for (sampler, p) in self.tape.iter_mut().zip(&frame.tape) {
            if !p.active && sampler.last_gain() == 0.0 {
                continue;
            }
            let gain = if p.active { p.gain } else { 0.0 };
            sampler.process(p.rate, gain, &mut self.line[..n]);
            for (b, x) in self.tape_bus[..n].iter_mut().zip(&self.line[..n]) {
                *b += *x;
            }
        }

        let target = frame.live_breath_gain.clamp(0.0, 1.0);
        let g0 = self.live_gain.unwrap_or(target);
        for i in 0..n {
            self.live_bus[i] = self.live_in[i] * ramp(g0, target, i, n);
        }
        self.live_gain = Some(target);

        self.choir.process(&self.live_in[..n], &frame.choir, &mut self.choir_bus[..n]);

        let (window, origin) = self.capture.window();
        self.granular.process_window(window, origin, &frame.grain, &mut self.grain_bus[..n]);

        let meters = mix_and_meter(
            &self.tape_bus[..n],
            &self.choir_bus[..n],
            &self.grain_bus[..n],
            &self.live_bus[..n],
            &self.cfg.bus_gains,
            self.cfg.master_gain,
            out,
        );
        self.blocks += 1;
        Ok(BlockReport { meters, missing_live_input })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{SectionId, TapeLineParams, VoiceParams};

    fn tone(n: usize) -> AudioBuffer {
        AudioBuffer::new((0..n).map(|i| (i as f32 * 0.02).sin() * 0.4).collect(), 48_000).unwrap()
    }

    fn engine() -> Engine {
        let lines = (0..4).map(|_| TapeLine { buffer: tone(48_000), looping: true }).collect();
        Engine::new(&AudioConfig::default(), lines, 1).unwrap()
    }

    #[test]
    fn rejects_odd_block_sizes() {
        let mut e = engine();
        let f = ParamFrame::neutral(SectionId::Connection);
        let mut out = vec![0.0; 100];
        assert!(matches!(e.render_block(&f, None, &mut out), Err(DspError::InvalidBlockSize(100))));
    }

    #[test]
    fn connection_without_tape_is_live_only() {
        let mut e = engine();
        let mut f = ParamFrame::neutral(SectionId::Connection);
        f.live_breath_gain = 0.5;
        let live: Vec<f32> = (0..128).map(|i| (i as f32 * 0.1).sin() * 0.3).collect();
        let mut out = [0.0f32; 128];
        for _ in 0..3 {
            let r = e.render_block(&f, Some(&live), &mut out).unwrap();
            assert!(!r.missing_live_input);
            assert_eq!(r.meters.tape, 0.0);
            assert_eq!(r.meters.choir, 0.0);
            assert_eq!(r.meters.grain, 0.0);
        }
        let expected = |i: usize| live[i] * 0.5 * AudioConfig::default().master_gain;
        assert!(out.iter().enumerate().all(|(i, &y)| (y - expected(i)).abs() < 1e-6));
    }

    #[test]
    fn identical_frames_leave_no_ramp_residue() {
        let mut e = engine();
        let mut f = ParamFrame::neutral(SectionId::Connection);
        f.tape[0] = TapeLineParams { active: true, rate: 1.3, gain: 0.6 };
        f.live_breath_gain = 0.4;
        let mut out = [0.0f32; 128];
        let mut g = f;
        g.tape[0].gain = 0.2;
        e.render_block(&g, None, &mut out).unwrap();
        e.render_block(&f, None, &mut out).unwrap();
        assert_eq!(e.tape[0].last_gain(), 0.6);
        let head = e.tape[0].head();
        e.render_block(&f, None, &mut out).unwrap();
        // Stable rate: the head moves exactly rate·N.
        let moved = (e.tape[0].head() - head).rem_euclid(48_000.0);
        assert!((moved - 1.3f32 as f64 * 128.0).abs() < 1e-6, "{moved}");
    }

    #[test]
    fn missing_live_input_is_flagged_not_fatal() {
        let mut e = engine();
        let mut f = ParamFrame::neutral(SectionId::Disconnection);
        f.choir[0] = VoiceParams { transpose_semitones: 0.0, delay_ms: 0.0, variation: 0.0, gain: 1.0 };
        let mut out = [1.0f32; 64];
        let r = e.render_block(&f, None, &mut out).unwrap();
        assert!(r.missing_live_input);
        assert!(out.iter().all(|&x| x == 0.0));
        let short = [0.1f32; 10];
        assert!(e.render_block(&f, Some(&short), &mut out).unwrap().missing_live_input);
    }

    #[test]
    fn capture_window_is_contiguous_history() {
        let mut c = Capture::new(5);
        c.write(&[1.0, 2.0, 3.0]);
        assert_eq!(c.window(), (&[0.0, 0.0, 1.0, 2.0, 3.0][..], -2.0));
        c.write(&[4.0, 5.0, 6.0, 7.0]);
        assert_eq!(c.window(), (&[3.0, 4.0, 5.0, 6.0, 7.0][..], 2.0));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = AudioConfig { block_size: 512, ..AudioConfig::default() };
        assert!(matches!(Engine::new(&cfg, vec![], 0), Err(DspError::InvalidBlockSize(512))));
        let lines = (0..9).map(|_| TapeLine { buffer: tone(10), looping: false }).collect();
        assert!(matches!(Engine::new(&AudioConfig::default(), lines, 0), Err(DspError::TooManyLines(9))));
    }
}
