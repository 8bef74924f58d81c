//! Granular engine with a stochastic grain clock.
//!
//! Onsets follow exponential inter-onset times with mean `1 / density`,
//! clamped to `[0.25, 4]` times the mean. Per onset the generator is drawn
//! twice, jitter first, then the next inter-onset time. Each grain is a
//! Hann-windowed read of the source at `speed`, starting from
//! `position * (len - span)` plus jitter; reads are clamped to the buffer.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::sampler::ramp;
use crate::mapping::GrainParams;

pub const MAX_GRAINS: usize = 256;
pub const IOI_CLAMP: (f64, f64) = (0.25, 4.0);

#[derive(Debug, Clone, Copy)]
struct Grain {
    start: f64,
    rate: f64,
    len: usize,
    age: usize,
}

/// Inter-onset time in samples for a uniform draw `u ∈ [0, 1)`.
pub fn inter_onset_samples(u: f64, density_hz: f64, sample_rate: f64) -> f64 {
    let mean = sample_rate / density_hz;
    (-(1.0 - u).ln() * mean).clamp(IOI_CLAMP.0 * mean, IOI_CLAMP.1 * mean)
}

#[derive(Debug, Clone)]
pub struct GranularEngine {
    grains: Vec<Grain>,
    rng: ChaCha8Rng,
    sample_rate: f64,
    jitter_samples: f64,
    countdown: f64,
    last_gain: Option<f32>,
    onsets: u64,
    dropped: u64,
}

impl GranularEngine {
    pub fn new(sample_rate: u32, seed: u64, jitter_ms: f64) -> Self {
        Self {
            grains: Vec::with_capacity(MAX_GRAINS),
            rng: crate::seeded_rng(seed, crate::streams::GRANULAR),
            sample_rate: sample_rate as f64,
            jitter_samples: jitter_ms.max(0.0) * sample_rate as f64 / 1000.0,
            countdown: 0.0,
            last_gain: None,
            onsets: 0,
            dropped: 0,
        }
    }

    pub fn onset_count(&self) -> u64 {
        self.onsets
    }

    /// Grains skipped because the pool was full.
    pub fn dropped_count(&self) -> u64 {
        self.dropped
    }

    pub fn active_grains(&self) -> usize {
        self.grains.len()
    }

    pub fn last_gain(&self) -> f32 {
        self.last_gain.unwrap_or(0.0)
    }

    fn spawn(&mut self, source_len: usize, origin: f64, p: &GrainParams) {
        let jitter = 2.0 * self.rng.random::<f64>() - 1.0;
        self.onsets += 1;
        if source_len == 0 {
            return;
        }
        if self.grains.len() == MAX_GRAINS {
            self.dropped += 1;
            return;
        }
        let len = ((p.size_ms as f64 * self.sample_rate / 1000.0).round() as usize).max(1);
        let rate = (p.speed as f64).max(0.0);
        let span = len as f64 * rate;
        let last = (source_len - 1) as f64;
        let room = (source_len as f64 - span).max(0.0);
        let start = (p.position.clamp(0.0, 1.0) as f64 * room + jitter * self.jitter_samples).clamp(0.0, last);
        self.grains.push(Grain { start: origin + start, rate, len, age: 0 });
    }

    /// Renders one block of grains read from `source` into `out`.
    /// Parameters latch at each onset; the output gain ramps.
    pub fn process(&mut self, source: &[f32], params: &GrainParams, out: &mut [f32]) {
        self.process_window(source, 0.0, params, out);
    }

    /// Like [`process`](Self::process) for a sliding source: `source[0]` sits
    /// at absolute sample `origin`, and grains keep absolute positions across
    /// blocks.
    pub fn process_window(&mut self, source: &[f32], origin: f64, params: &GrainParams, out: &mut [f32]) {
        let n = out.len();
        let density = params.density_hz.max(0.0) as f64;
        let gain = params.gain.clamp(0.0, 1.0);
        let g0 = self.last_gain.unwrap_or(gain);
        let last = source.len().saturating_sub(1);

        for (i, o) in out.iter_mut().enumerate() {
            if density > 0.0 {
                while self.countdown <= 0.0 {
                    self.spawn(source.len(), origin, params);
                    let u = self.rng.random::<f64>();
                    self.countdown += inter_onset_samples(u, density, self.sample_rate);
                }
            }
            self.countdown -= 1.0;

            let mut acc = 0.0f32;
            if source.is_empty() {
                self.grains.clear();
            }
            for g in &mut self.grains {
                let pos = (g.start + g.age as f64 * g.rate - origin).clamp(0.0, last as f64);
                let i0 = pos as usize;
                let frac = (pos - i0 as f64) as f32;
                let a = source[i0];
                let b = source[(i0 + 1).min(last)];
                let env = (PI * g.age as f64 / g.len as f64).sin().powi(2) as f32;
                acc += env * (a + (b - a) * frac);
                g.age += 1;
            }
            self.grains.retain(|g| g.age < g.len);
            *o = acc * ramp(g0, gain, i, n);
        }
        self.last_gain = Some(gain);
    }
}
