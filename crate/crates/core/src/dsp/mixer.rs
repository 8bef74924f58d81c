use serde::{Deserialize, Serialize};

/// Linear below 0.5, tanh knee above, asymptotic to ±1.
#[inline]
pub fn soft_clip(x: f32) -> f32 {
    let a = x.abs();
    if a <= 0.5 {
        x
    } else {
        x.signum() * (0.5 + 0.5 * ((a - 0.5) / 0.5).tanh())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BusGains {
    pub tape: f32,
    pub choir: f32,
    pub grain: f32,
    pub live: f32,
}

impl Default for BusGains {
    fn default() -> Self {
        Self { tape: 1.0, choir: 1.0, grain: 1.0, live: 1.0 }
    }
}

/// Per-bus RMS over one block. Bus order matches the OSC meter names.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Meters {
    pub tape: f32,
    pub choir: f32,
    pub grain: f32,
    pub live: f32,
    pub master: f32,
}

impl Meters {
    pub fn as_array(&self) -> [f32; 5] {
        [self.tape, self.choir, self.grain, self.live, self.master]
    }
}

pub(crate) fn rms(x: &[f32]) -> f32 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f32>() / x.len() as f32).sqrt()
}

/// Weighted sum of the four buses through the limiter. Buses shorter than
/// `out` are treated as silent past their end.
pub fn mix_and_meter(
    tape: &[f32],
    choir: &[f32],
    grain: &[f32],
    live: &[f32],
    gains: &BusGains,
    master_gain: f32,
    out: &mut [f32],
) -> Meters {
    let at = |b: &[f32], i: usize| b.get(i).copied().unwrap_or(0.0);
    for (i, o) in out.iter_mut().enumerate() {
        let sum = gains.tape * at(tape, i) + gains.choir * at(choir, i) + gains.grain * at(grain, i) + gains.live * at(live, i);
        *o = soft_clip(master_gain * sum);
    }
    Meters { tape: rms(tape), choir: rms(choir), grain: rms(grain), live: rms(live), master: rms(out) }
}
