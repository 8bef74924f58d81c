use crate::mapping::RATE_RANGE;

/// Block-local linear ramp. The last sample of the block lands exactly on
/// `to`, so a repeated target leaves no residue.
#[inline]
pub(crate) fn ramp(from: f32, to: f32, i: usize, n: usize) -> f32 {
    let t = (i + 1) as f32 / n as f32;
    from * (1.0 - t) + to * t
}

/// Variable-rate (varispeed) player for one pre-recorded line.
#[derive(Debug, Clone)]
pub struct Sampler {
    source: Vec<f32>,
    looping: bool,
    head: f64,
    last_rate: Option<f32>,
    last_gain: Option<f32>,
    finished: bool,
}

impl Sampler {
    pub fn new(source: Vec<f32>, looping: bool) -> Self {
        Self { finished: source.is_empty(), source, looping, head: 0.0, last_rate: None, last_gain: None }
    }

    pub fn head(&self) -> f64 {
        self.head
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Gain applied at the end of the previous block, if any.
    pub fn last_gain(&self) -> f32 {
        self.last_gain.unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    #[inline]
    fn read(&self) -> f32 {
        let i0 = self.head as usize;
        let frac = (self.head - i0 as f64) as f32;
        let a = self.source[i0];
        let b = match self.source.get(i0 + 1) {
            Some(&b) => b,
            None if self.looping => self.source[0],
            None => 0.0,
        };
        a + (b - a) * frac
    }

    /// Fills `out` with the next block. Rate and gain ramp linearly from the
    /// previous block's values; the first block starts at the targets. The
    /// head advances even when the gain is zero.
    pub fn process(&mut self, rate: f32, gain: f32, out: &mut [f32]) {
        let rate = rate.clamp(RATE_RANGE.0, RATE_RANGE.1);
        let gain = gain.clamp(0.0, 1.0);
        let r0 = self.last_rate.unwrap_or(rate);
        let g0 = self.last_gain.unwrap_or(gain);
        let n = out.len();
        let len = self.source.len();
        for (i, o) in out.iter_mut().enumerate() {
            if self.finished {
                *o = 0.0;
                continue;
            }
            let g = ramp(g0, gain, i, n);
            *o = self.read() * g;
            self.head += ramp(r0, rate, i, n) as f64;
            if self.head >= len as f64 {
                if self.looping {
                    self.head %= len as f64;
                } else {
                    self.finished = true;
                }
            }
        }
        self.last_rate = Some(rate);
        self.last_gain = Some(gain);
    }
}
