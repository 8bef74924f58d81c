//! Stand-in for the live voice when no microphone or WAV is wired.
//!
//! A breathy sung tone: a small harmonic stack with slow vibrato plus
//! low-passed noise, both scaled by the breath level.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::sampler::ramp;
use crate::breath::BreathMode;

const HARMONICS: [f64; 5] = [1.0, 0.5, 0.33, 0.2, 0.12];

#[derive(Debug, Clone)]
pub struct SyntheticVoice {
    sample_rate: f64,
    f0: f64,
    phase: f64,
    vibrato_phase: f64,
    noise_lp: f32,
    level: Option<f32>,
    rng: ChaCha8Rng,
}

impl SyntheticVoice {
    pub fn new(sample_rate: u32, seed: u64, f0: f64) -> Self {
        Self {
            sample_rate: sample_rate as f64,
            f0,
            phase: 0.0,
            vibrato_phase: 0.0,
            noise_lp: 0.0,
            level: None,
            rng: crate::seeded_rng(seed, crate::streams::VOICE),
        }
    }

    /// Nose breathing is darker and carries less tone.
    pub fn render(&mut self, breath_level: f32, mode: BreathMode, out: &mut [f32]) {
        let level = breath_level.clamp(0.0, 1.0);
        let l0 = self.level.unwrap_or(level);
        let (tone, noise, cutoff) = match mode {
            BreathMode::Mouth => (0.35f32, 0.12f32, 0.25f32),
            BreathMode::Nose => (0.2, 0.08, 0.08),
        };
        let n = out.len();
        for (i, o) in out.iter_mut().enumerate() {
            let vib = 1.0 + 0.006 * (TAU * self.vibrato_phase).sin();
            self.vibrato_phase = (self.vibrato_phase + 5.0 / self.sample_rate).fract();
            self.phase = (self.phase + self.f0 * vib / self.sample_rate).fract();
            let mut s = 0.0;
            for (k, a) in HARMONICS.iter().enumerate() {
                s += a * (TAU * (k + 1) as f64 * self.phase).sin();
            }
            let white: f32 = self.rng.random_range(-1.0..1.0);
            self.noise_lp += cutoff * (white - self.noise_lp);
            let g = ramp(l0, level, i, n);
            *o = g * (tone * (s as f32 / 2.15) + noise * self.noise_lp * 4.0);
        }
        self.level = Some(level);
    }
}

/// Synthetic stand-in for pre-recorded line `k`: a phrase of sung
/// syllables, each line a different pitch and pace, 6 s long.
pub fn placeholder_line(k: usize, sample_rate: u32) -> Vec<f32> {
    const ROOTS: [f64; 4] = [220.0, 261.63, 329.63, 196.0];
    let sr = sample_rate as f64;
    let f0 = ROOTS[k % ROOTS.len()] * if k >= ROOTS.len() { 0.5 } else { 1.0 };
    let syllable_s = 0.35 + 0.1 * (k % 4) as f64;
    let n = (6.0 * sr) as usize;
    let mut phase = 0.0f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let s = t / syllable_s;
            let env = (std::f64::consts::PI * s.fract()).sin().powi(2);
            // Gentle melodic steps per syllable.
            let step = [0.0, 2.0, 4.0, 2.0, 7.0, 5.0][s as usize % 6];
            phase = (phase + f0 * (step / 12.0f64).exp2() / sr).fract();
            let mut v = 0.0;
            for (h, a) in HARMONICS.iter().enumerate() {
                v += a * (TAU * (h + 1) as f64 * phase).sin();
            }
            (0.4 * env * v / 2.15) as f32
        })
        .collect()
}
