//! Second-order IIR sections and the Butterworth band-pass used for
//! band-limited noise stimuli.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

/// Normalized biquad, `a0 == 1`, evaluated in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
    s1: f64,
    s2: f64,
}

impl Biquad {
    pub fn new(b0: f64, b1: f64, b2: f64, a1: f64, a2: f64) -> Self {
        Self {
            b0,
            b1,
            b2,
            a1,
            a2,
            s1: 0.0,
            s2: 0.0,
        }
    }

    /// Band-pass with unit gain at `center_hz` (constant 0 dB peak form).
    ///
    /// Poles lie strictly inside the unit circle whenever `q > 0` and
    /// `0 < center_hz < sample_rate / 2`.
    pub fn resonator(center_hz: f64, q: f64, sample_rate: f64) -> Self {
        let w0 = 2.0 * PI * center_hz / sample_rate;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self::new(
            alpha / a0,
            0.0,
            -alpha / a0,
            -2.0 * w0.cos() / a0,
            (1.0 - alpha) / a0,
        )
    }

    pub fn reset(&mut self) {
        self.s1 = 0.0;
        self.s2 = 0.0;
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.s1;
        self.s1 = self.b1 * x - self.a1 * y + self.s2;
        self.s2 = self.b2 * x - self.a2 * y;
        y
    }

    /// Runs the section over `input` from a zeroed state.
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let mut section = *self;
        section.reset();
        input.iter().map(|&x| section.process(x)).collect()
    }

    /// Complex response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, sample_rate: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / sample_rate;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b0 + z1 * self.b1 + z2 * self.b2) / (1.0 + z1 * self.a1 + z2 * self.a2)
    }

    pub fn is_stable(&self) -> bool {
        // Jury conditions for a monic quadratic denominator.
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }
}

/// Digital Butterworth band-pass from a second-order analog low-pass
/// prototype, returned as two cascaded sections (fourth order overall).
///
/// Edges are pre-warped so that the -3 dB points land on `low_hz` and
/// `high_hz` after the bilinear transform.
pub fn butterworth_bandpass(low_hz: f64, high_hz: f64, sample_rate: f64) -> Vec<Biquad> {
    const PROTOTYPE_ORDER: usize = 2;
    let fs2 = 2.0 * sample_rate;
    // tan() diverges at Nyquist; an edge at Nyquist is designed just below it.
    let high_hz = high_hz.min(0.495 * sample_rate);
    let w_low = fs2 * (PI * low_hz / sample_rate).tan();
    let w_high = fs2 * (PI * high_hz / sample_rate).tan();
    let w0_sq = w_low * w_high;
    let bandwidth = w_high - w_low;

    let mut poles = Vec::with_capacity(2 * PROTOTYPE_ORDER);
    for k in 0..PROTOTYPE_ORDER {
        let theta = PI * (2 * k + PROTOTYPE_ORDER + 1) as f64 / (2 * PROTOTYPE_ORDER) as f64;
        let p = Complex64::from_polar(1.0, theta) * bandwidth;
        let disc = (p * p - 4.0 * w0_sq).sqrt();
        poles.push((p + disc) / 2.0);
        poles.push((p - disc) / 2.0);
    }

    let center_digital = 2.0 * (w0_sq.sqrt() / fs2).atan();
    let z_center = Complex64::from_polar(1.0, -center_digital);

    poles
        .into_iter()
        .map(|s| (fs2 + s) / (fs2 - s))
        .filter(|z| z.im > 0.0)
        .map(|z| {
            let a1 = -2.0 * z.re;
            let a2 = z.norm_sqr();
            // Zeros at z = +1 and z = -1: numerator 1 - z^-2.
            let num = 1.0 - z_center * z_center;
            let den = 1.0 + z_center * a1 + z_center * z_center * a2;
            let gain = (den / num).norm();
            Biquad::new(gain, 0.0, -gain, a1, a2)
        })
        .collect()
}

/// Forward pass through every section, then the same cascade over the
/// time-reversed result. Magnitude response is squared; phase cancels.
pub fn filtfilt(sections: &[Biquad], input: &[f64]) -> Vec<f64> {
    let mut data = input.to_vec();
    for section in sections {
        data = section.filter(&data);
    }
    data.reverse();
    for section in sections {
        data = section.filter(&data);
    }
    data.reverse();
    data
}
