use serde::{Deserialize, Serialize};

use super::MappingError;
use crate::breath::{PressureFrame, PILLOWS};

pub const DEFAULT_MIN_SPAN_HPA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureRange {
    pub raw_min: f64,
    pub raw_max: f64,
}

/// Per-pillow linear map from hPa to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMap {
    pub ranges: [PressureRange; PILLOWS],
}

/// Four channels in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPressures {
    pub t: f64,
    pub values: [f64; PILLOWS],
}

impl NormalizedPressures {
    pub fn new(t: f64, values: [f64; PILLOWS]) -> Self {
        Self { t, values: values.map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 }) }
    }
}

impl CalibrationMap {
    pub fn new(ranges: [PressureRange; PILLOWS], min_span: f64) -> Result<Self, MappingError> {
        for (pillow, r) in ranges.iter().enumerate() {
            let span = r.raw_max - r.raw_min;
            if !(span >= min_span) {
                return Err(MappingError::DegenerateRange { pillow, span });
            }
        }
        Ok(Self { ranges })
    }

    pub fn normalize(&self, frame: &PressureFrame) -> NormalizedPressures {
        let mut values = [0.0; PILLOWS];
        for (i, v) in values.iter_mut().enumerate() {
            let r = self.ranges[i];
            *v = (frame.values[i] - r.raw_min) / (r.raw_max - r.raw_min);
        }
        NormalizedPressures::new(frame.t, values)
    }
}

/// Per-pillow min/max over a calibration window.
pub fn calibrate(frames: &[PressureFrame], min_span: f64) -> Result<CalibrationMap, MappingError> {
    if frames.len() < 2 {
        return Err(MappingError::InsufficientData(frames.len()));
    }
    let mut ranges = [PressureRange { raw_min: f64::INFINITY, raw_max: f64::NEG_INFINITY }; PILLOWS];
    for f in frames {
        for (r, &v) in ranges.iter_mut().zip(&f.values) {
            r.raw_min = r.raw_min.min(v);
            r.raw_max = r.raw_max.max(v);
        }
    }
    CalibrationMap::new(ranges, min_span)
}

/// One-pole low-pass step: `alpha * x + (1 - alpha) * prev`.
pub fn smooth(x: f64, prev: f64, alpha: f64) -> f64 {
    alpha * x + (1.0 - alpha) * prev
}

/// Four one-pole smoothers; the first sample initializes the state.
#[derive(Debug, Clone)]
pub struct Smoother {
    alpha: f64,
    state: Option<[f64; PILLOWS]>,
}

impl Smoother {
    pub fn new(alpha: f64) -> Result<Self, MappingError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(MappingError::InvalidSmoothing(alpha));
        }
        Ok(Self { alpha, state: None })
    }

    pub fn process(&mut self, np: NormalizedPressures) -> NormalizedPressures {
        let next = match self.state {
            None => np.values,
            Some(prev) => {
                let mut out = [0.0; PILLOWS];
                for i in 0..PILLOWS {
                    out[i] = smooth(np.values[i], prev[i], self.alpha);
                }
                out
            }
        };
        self.state = Some(next);
        NormalizedPressures::new(np.t, next)
    }
}
