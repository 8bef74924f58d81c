//! Four-voice harmonizer.
//!
//! Each voice is a dual-head modulated delay line. The two read heads sweep
//! through a 40 ms window at a speed set by the pitch ratio and are
//! crossfaded with complementary `sin²` windows, so each head is silent when
//! it jumps back. Where a head lands after a jump is nudged by up to
//! `SEARCH_MS` to the lag that best correlates with the other head, which
//! keeps the phase continuous on periodic input. A static delay and a slow random wander of pitch and delay
//! (seeded, scaled by `variation`) sit on top.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::sampler::ramp;
use crate::mapping::{VoiceParams, CHOIR_VOICES};

pub const WINDOW_MS: f64 = 40.0;
pub const MAX_DELAY_MS: f64 = 250.0;
/// Range searched for a head's landing point after a jump.
pub const SEARCH_MS: f64 = 8.0;
/// Length of the segment compared during that search.
pub const MATCH_MS: f64 = 5.0;
/// Pitch wander at full variation, in cents.
pub const VARIATION_CENTS: f64 = 35.0;
/// Delay wander at full variation, in ms.
pub const VARIATION_DELAY_MS: f64 = 15.0;
/// A new wander target is drawn every segment.
pub const VARIATION_SEGMENT_MS: f64 = 100.0;

#[derive(Debug, Clone)]
struct DelayLine {
    buf: Vec<f32>,
    write: usize,
}

impl DelayLine {
    fn new(len: usize) -> Self {
        Self { buf: vec![0.0; len.max(2)], write: 0 }
    }

    #[inline]
    fn push(&mut self, x: f32) {
        self.buf[self.write] = x;
        self.write += 1;
        if self.write == self.buf.len() {
            self.write = 0;
        }
    }

    /// `delay = 0` returns the most recently pushed sample.
    #[inline]
    fn read(&self, delay: f64) -> f32 {
        let len = self.buf.len();
        let pos = (self.write as f64 - 1.0 - delay).rem_euclid(len as f64);
        let mut i0 = pos as usize;
        if i0 >= len {
            i0 = 0;
        }
        let frac = (pos - i0 as f64) as f32;
        let a = self.buf[i0];
        let b = self.buf[if i0 + 1 == len { 0 } else { i0 + 1 }];
        a + (b - a) * frac
    }

    /// Lag in `0..=search` at which the `len` samples behind `from` best match
    /// (normalized cross-correlation) the `len` samples behind `target`.
    /// Scans every `COARSE`-th lag, then every lag around the coarse winner.
    fn best_match(&self, target: f64, from: f64, search: usize, len: usize) -> usize {
        const COARSE: usize = 4;
        let n = self.buf.len() as isize;
        let at = |d: isize| self.buf[(self.write as isize - 1 - d).rem_euclid(n) as usize];
        let (t0, f0) = (target.round() as isize, from.round() as isize);
        let target_energy: f32 = (0..len as isize).map(|j| at(t0 + j).powi(2)).sum();
        let score = |s: usize| {
            let (mut dot, mut energy) = (0.0f32, 0.0f32);
            for j in 0..len as isize {
                let x = at(f0 + s as isize + j);
                dot += at(t0 + j) * x;
                energy += x * x;
            }
            dot / (target_energy * energy).sqrt().max(1e-12)
        };
        let pick = |lags: &mut dyn Iterator<Item = usize>| {
            let (mut best, mut best_score) = (0, f32::NEG_INFINITY);
            for s in lags {
                let v = score(s);
                if v > best_score + 1e-6 {
                    best = s;
                    best_score = v;
                }
            }
            best
        };
        let coarse = pick(&mut (0..=search).step_by(COARSE));
        pick(&mut (coarse.saturating_sub(COARSE - 1)..=(coarse + COARSE - 1).min(search)))
    }
}

#[derive(Debug, Clone)]
struct Wander {
    pitch: (f64, f64),
    delay: (f64, f64),
    pos: usize,
}

#[derive(Debug, Clone)]
struct ShifterVoice {
    line: DelayLine,
    /// Sweep position in `[0, 1)`; 0.5 parks head A at full gain.
    phase: f64,
    /// Extra delay of each head, chosen when it last jumped.
    landing: [f64; 2],
    wander: Wander,
    last: Option<VoiceParams>,
}

#[derive(Debug, Clone)]
pub struct Choir {
    voices: [ShifterVoice; CHOIR_VOICES],
    rng: ChaCha8Rng,
    sample_rate: f64,
    window: f64,
    segment: usize,
    search: usize,
    match_len: usize,
}

impl Choir {
    pub fn new(sample_rate: u32, seed: u64) -> Self {
        let sr = sample_rate as f64;
        let window = (WINDOW_MS * sr / 1000.0).round();
        let capacity =
            ((MAX_DELAY_MS + VARIATION_DELAY_MS + WINDOW_MS + 2.0 * SEARCH_MS + MATCH_MS) * sr / 1000.0).ceil() as usize + 4;
        let voice = ShifterVoice {
            line: DelayLine::new(capacity),
            phase: 0.5,
            landing: [0.0; 2],
            wander: Wander { pitch: (0.0, 0.0), delay: (0.0, 0.0), pos: 0 },
            last: None,
        };
        Self {
            voices: std::array::from_fn(|_| voice.clone()),
            rng: crate::seeded_rng(seed, crate::streams::CHOIR),
            sample_rate: sr,
            window,
            segment: (VARIATION_SEGMENT_MS * sr / 1000.0).round() as usize,
            search: (SEARCH_MS * sr / 1000.0).round() as usize,
            match_len: (MATCH_MS * sr / 1000.0).round() as usize,
        }
    }

    /// Fixed latency of a neutral voice: the parked head sits half a window
    /// back.
    pub fn latency_samples(&self) -> usize {
        (self.window * 0.5) as usize
    }

    /// Renders one block of the summed choir into `out`. When the squared
    /// gains sum above 1 the mix is scaled by `1 / sqrt(Σ gain²)`.
    pub fn process(&mut self, input: &[f32], params: &[VoiceParams; CHOIR_VOICES], out: &mut [f32]) {
        let n = out.len().min(input.len());
        let ms = self.sample_rate / 1000.0;
        let window = self.window;
        let segment = self.segment;
        let starts: [VoiceParams; CHOIR_VOICES] = std::array::from_fn(|v| self.voices[v].last.unwrap_or(params[v]));

        for i in 0..n {
            let x = input[i];
            let mut sum = 0.0f32;
            let mut gain_sq = 0.0f32;
            for (v, voice) in self.voices.iter_mut().enumerate() {
                let (a, b) = (&starts[v], &params[v]);
                let transpose = ramp(a.transpose_semitones, b.transpose_semitones, i, n) as f64;
                let delay_ms = ramp(a.delay_ms, b.delay_ms, i, n).max(0.0) as f64;
                let variation = ramp(a.variation, b.variation, i, n).clamp(0.0, 1.0) as f64;
                let gain = ramp(a.gain, b.gain, i, n).clamp(0.0, 1.0);

                voice.line.push(x);

                let w = &mut voice.wander;
                if w.pos == 0 {
                    w.pitch.0 = w.pitch.1;
                    w.delay.0 = w.delay.1;
                    if variation > 0.0 {
                        w.pitch.1 = 2.0 * self.rng.random::<f64>() - 1.0;
                        w.delay.1 = self.rng.random::<f64>();
                    } else {
                        w.pitch.1 = 0.0;
                        w.delay.1 = 0.0;
                    }
                }
                let frac = w.pos as f64 / segment as f64;
                let pitch_dev = w.pitch.0 + (w.pitch.1 - w.pitch.0) * frac;
                let delay_dev = w.delay.0 + (w.delay.1 - w.delay.0) * frac;
                w.pos += 1;
                if w.pos == segment {
                    w.pos = 0;
                }

                let cents = variation * VARIATION_CENTS * pitch_dev;
                let ratio = ((transpose + cents / 100.0) / 12.0).exp2();
                let before = [voice.phase, (voice.phase + 0.5).rem_euclid(1.0)];
                voice.phase = (voice.phase + (1.0 - ratio) / window).rem_euclid(1.0);
                let phases = [voice.phase, (voice.phase + 0.5).rem_euclid(1.0)];

                let base = (delay_ms + variation * VARIATION_DELAY_MS * delay_dev) * ms;
                for h in 0..2 {
                    if (phases[h] - before[h]).abs() > 0.5 {
                        let other = base + phases[1 - h] * window + voice.landing[1 - h];
                        let lag = voice.line.best_match(other, base + phases[h] * window, self.search, self.match_len);
                        voice.landing[h] = lag as f64;
                    }
                }
                let g_a = (PI * phases[0]).sin().powi(2);
                let y = g_a * voice.line.read(base + phases[0] * window + voice.landing[0]) as f64
                    + (1.0 - g_a) * voice.line.read(base + phases[1] * window + voice.landing[1]) as f64;

                sum += gain * y as f32;
                gain_sq += gain * gain;
            }
            out[i] = if gain_sq > 1.0 { sum / gain_sq.sqrt() } else { sum };
        }
        out[n..].iter_mut().for_each(|o| *o = 0.0);
        for (voice, p) in self.voices.iter_mut().zip(params) {
            voice.last = Some(*p);
        }
    }
}
