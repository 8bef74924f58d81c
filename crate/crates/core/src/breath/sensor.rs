use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::pillow::PillowState;

/// Barometric sensor with uniform reading noise of `±amplitude` hPa.
#[derive(Debug, Clone)]
pub struct PressureSensor {
    rng: ChaCha8Rng,
    amplitude: f64,
}

impl PressureSensor {
    pub fn new(seed: u64, amplitude: f64) -> Self {
        Self { rng: crate::seeded_rng(seed, crate::streams::SENSOR), amplitude: amplitude.abs() }
    }

    /// One reading. Noise is drawn only when the amplitude is non-zero, so a
    /// noiseless sensor reports the internal pressure exactly.
    pub fn sample(&mut self, p: &PillowState) -> f64 {
        if self.amplitude == 0.0 {
            return p.pressure;
        }
        p.pressure + self.rng.random_range(-self.amplitude..=self.amplitude)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::breath::PillowConfig;

    #[test]
    fn noiseless_reading_is_exact() {
        let p = PillowState::at_rest(&PillowConfig::default(), 1012.345);
        let mut s = PressureSensor::new(9, 0.0);
        for _ in 0..10 {
            assert_eq!(s.sample(&p), 1012.345);
        }
    }

    #[test]
    fn same_seed_same_readings() {
        let p = PillowState::inflated(&PillowConfig::default());
        let mut a = PressureSensor::new(42, 0.05);
        let mut b = PressureSensor::new(42, 0.05);
        let ra: Vec<f64> = (0..100).map(|_| a.sample(&p)).collect();
        let rb: Vec<f64> = (0..100).map(|_| b.sample(&p)).collect();
        assert_eq!(ra, rb);
        let mut c = PressureSensor::new(43, 0.05);
        assert_ne!(ra, (0..100).map(|_| c.sample(&p)).collect::<Vec<_>>());
    }

    #[test]
    fn noise_is_zero_mean() {
        let p = PillowState::inflated(&PillowConfig::default());
        let amp = 0.05;
        let n = 100_000;
        let mut s = PressureSensor::new(7, amp);
        let mut sum = 0.0;
        for _ in 0..n {
            let r = s.sample(&p);
            assert!((r - p.pressure).abs() <= amp);
            sum += r - p.pressure;
        }
        let mean = sum / n as f64;
        // Uniform on ±a has σ = a/√3.
        let sigma = amp / 3f64.sqrt();
        assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "mean offset {mean}");
    }
}
