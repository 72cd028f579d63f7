//! Discrete-time building blocks shared by the observers and the simulation
//! harness: a ring-buffer delay line, a first-order lag, a pseudo
//! differentiator, the squared band-pass resonator, the constrained notch
//! filter, and fixed-frequency amplitude / RMS analysis.
//!
//! All filters own their state and are advanced one sample at a time.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{require, Error, Result};

/// Nyquist frequency in rad/s for a sample time in seconds.
pub fn nyquist(sample_time: f64) -> f64 {
    PI / sample_time
}

/// `e^{-jωT}`, the one-sample delay evaluated on the unit circle.
pub(crate) fn unit_delay(omega: f64, sample_time: f64) -> Complex64 {
    Complex64::from_polar(1.0, -omega * sample_time)
}

/// Fixed-capacity ring buffer holding the most recent samples.
///
/// `read(n)` returns the sample pushed exactly `n` pushes ago, so `read(1)` is
/// the latest sample. History is zero before the first pushes.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine {
    buffer: Vec<f64>,
    write_index: usize,
}

impl DelayLine {
    pub fn new(capacity: usize) -> Result<Self> {
        require(capacity >= 1, "capacity", capacity as f64, "capacity >= 1")?;
        Ok(Self {
            buffer: vec![0.0; capacity],
            write_index: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.buffer.len()
    }

    pub fn push(&mut self, x: f64) {
        self.buffer[self.write_index] = x;
        self.write_index += 1;
        if self.write_index == self.buffer.len() {
            self.write_index = 0;
        }
    }

    /// Sample pushed `offset` pushes ago.
    ///
    /// # Panics
    ///
    /// Panics unless `1 <= offset <= capacity`.
    pub fn read(&self, offset: usize) -> f64 {
        let capacity = self.buffer.len();
        assert!(
            (1..=capacity).contains(&offset),
            "delay offset {offset} outside 1..={capacity}"
        );
        self.buffer[(self.write_index + capacity - offset) % capacity]
    }

    pub fn reset(&mut self) {
        self.buffer.fill(0.0);
        self.write_index = 0;
    }
}

/// Coefficients of the backward-difference first-order lag
/// `y(k) = beta * y(k-1) + alpha * x(k)` with `alpha + beta == 1`.
///
/// Constructing these does not validate the cutoff; a negative cutoff yields
/// an unstable pole, which is occasionally useful for exercising detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPassCoefficients {
    pub alpha: f64,
    pub beta: f64,
}

impl LowPassCoefficients {
    pub fn backward_difference(cutoff: f64, sample_time: f64) -> Self {
        let beta = 1.0 / (1.0 + cutoff * sample_time);
        Self {
            alpha: 1.0 - beta,
            beta,
        }
    }

    /// Frequency response `alpha / (1 - beta e^{-jωT})`.
    pub fn response(&self, omega: f64, sample_time: f64) -> Complex64 {
        Complex64::new(self.alpha, 0.0) / (1.0 - self.beta * unit_delay(omega, sample_time))
    }

    /// Pole of the recursion; the filter is stable iff `|pole| < 1`.
    pub fn pole(&self) -> f64 {
        self.beta
    }
}

/// First-order lag `g / (s + g)` discretized with the backward difference.
///
/// A non-finite input poisons the filter: the offending call and every later
/// call fail until [`FirstOrderLowPass::reset`].
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderLowPass {
    cutoff: f64,
    sample_time: f64,
    coefficients: LowPassCoefficients,
    state: f64,
    poisoned: bool,
}

impl FirstOrderLowPass {
    pub fn new(cutoff: f64, sample_time: f64) -> Result<Self> {
        require(cutoff > 0.0 && cutoff.is_finite(), "cutoff", cutoff, "0 < g < inf")?;
        require(
            sample_time > 0.0 && sample_time.is_finite(),
            "sample_time",
            sample_time,
            "T_k > 0",
        )?;
        Ok(Self {
            cutoff,
            sample_time,
            coefficients: LowPassCoefficients::backward_difference(cutoff, sample_time),
            state: 0.0,
            poisoned: false,
        })
    }

    /// Same filter with its output (and internal state) preset to `value`.
    pub fn seeded(mut self, value: f64) -> Self {
        self.state = value;
        self
    }

    pub fn step(&mut self, x: f64) -> Result<f64> {
        if self.poisoned {
            return Err(Error::Poisoned);
        }
        if !x.is_finite() {
            self.poisoned = true;
            return Err(Error::NonFinite { value: x });
        }
        let c = self.coefficients;
        self.state = c.beta * self.state + c.alpha * x;
        Ok(self.state)
    }

    pub fn output(&self) -> f64 {
        self.state
    }

    /// Overwrite the internal state without touching the coefficients.
    pub fn set_output(&mut self, value: f64) {
        self.state = value;
    }

    pub fn reset(&mut self) {
        self.state = 0.0;
        self.poisoned = false;
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn coefficients(&self) -> LowPassCoefficients {
        self.coefficients
    }

    pub fn response(&self, omega: f64) -> Complex64 {
        self.coefficients.response(omega, self.sample_time)
    }
}

/// Backward difference `(1 - z^-1) / T` followed by a first-order lag.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoDifferentiator {
    lag: FirstOrderLowPass,
    previous: f64,
}

impl PseudoDifferentiator {
    pub fn new(cutoff: f64, sample_time: f64) -> Result<Self> {
        Ok(Self {
            lag: FirstOrderLowPass::new(cutoff, sample_time)?,
            previous: 0.0,
        })
    }

    pub fn step(&mut self, x: f64) -> Result<f64> {
        let slope = (x - self.previous) / self.lag.sample_time();
        self.previous = x;
        self.lag.step(slope)
    }

    pub fn output(&self) -> f64 {
        self.lag.output()
    }

    pub fn response(&self, omega: f64) -> Complex64 {
        let t = self.lag.sample_time();
        (1.0 - unit_delay(omega, t)) / t * self.lag.response(omega)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct SectionState {
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ResonatorCoefficients {
    b0: f64,
    a1: f64,
    a2: f64,
}

impl ResonatorCoefficients {
    /// Bilinear map of `g_b s / (s^2 + g_b s + w0^2)`, prewarped at `w0`.
    fn prewarped(center: f64, width: f64, sample_time: f64) -> Self {
        let k = center / (0.5 * center * sample_time).tan();
        let k2 = k * k;
        let w2 = center * center;
        let a0 = k2 + width * k + w2;
        Self {
            b0: width * k / a0,
            a1: 2.0 * (w2 - k2) / a0,
            a2: (k2 - width * k + w2) / a0,
        }
    }
}

/// Squared second-order band-pass centred on `ω̂₀`:
/// `{ jω g_b / ((ω̂₀² - ω²) + jω g_b) }²`.
///
/// Realized as two identical direct-form-I sections so that
/// [`retune`](Self::retune) can swap coefficients while keeping the signal
/// history.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPassResonator {
    center: f64,
    width: f64,
    sample_time: f64,
    coefficients: ResonatorCoefficients,
    sections: [SectionState; 2],
}

impl BandPassResonator {
    pub fn new(center: f64, width: f64, sample_time: f64) -> Result<Self> {
        require(
            sample_time > 0.0 && sample_time.is_finite(),
            "sample_time",
            sample_time,
            "T_k > 0",
        )?;
        require(width > 0.0 && width.is_finite(), "bandpass_width", width, "g_b > 0")?;
        check_center(center, sample_time)?;
        Ok(Self {
            center,
            width,
            sample_time,
            coefficients: ResonatorCoefficients::prewarped(center, width, sample_time),
            sections: [SectionState::default(); 2],
        })
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let c = self.coefficients;
        let mut signal = x;
        for s in &mut self.sections {
            let y = c.b0 * (signal - s.x2) - c.a1 * s.y1 - c.a2 * s.y2;
            s.x2 = s.x1;
            s.x1 = signal;
            s.y2 = s.y1;
            s.y1 = y;
            signal = y;
        }
        signal
    }

    /// Move the centre frequency, keeping the filter history.
    pub fn retune(&mut self, center: f64) -> Result<()> {
        check_center(center, self.sample_time)?;
        if center != self.center {
            self.center = center;
            self.coefficients =
                ResonatorCoefficients::prewarped(center, self.width, self.sample_time);
        }
        Ok(())
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn reset(&mut self) {
        self.sections = [SectionState::default(); 2];
    }

    /// Response of the discrete realization at `omega`.
    pub fn response(&self, omega: f64) -> Complex64 {
        let c = self.coefficients;
        let z1 = unit_delay(omega, self.sample_time);
        let z2 = z1 * z1;
        let section = c.b0 * (1.0 - z2) / (1.0 + c.a1 * z1 + c.a2 * z2);
        section * section
    }
}

fn check_center(center: f64, sample_time: f64) -> Result<()> {
    require(center > 0.0 && center.is_finite(), "center", center, "center > 0")?;
    let limit = nyquist(sample_time);
    if center >= limit {
        return Err(Error::AboveNyquist {
            omega: center,
            nyquist: limit,
        });
    }
    Ok(())
}

/// One sample of the notch filter together with its regression terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotchOutput {
    /// Regressor multiplying the adaptive coefficient.
    pub alpha: f64,
    /// Coefficient-free part of the output.
    pub beta: f64,
    /// Notch output `alpha * xi + beta`.
    pub eta_hat: f64,
}

/// Constrained notch `(1 + ξz⁻¹ + z⁻²) / (1 + rξz⁻¹ + r²z⁻²)` written in the
/// linear-regression form used by the adaptive estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct NotchFilter {
    radius: f64,
    xi: f64,
    input: [f64; 2],
    output: [f64; 2],
}

impl NotchFilter {
    pub fn new(radius: f64, xi: f64) -> Result<Self> {
        require(radius > 0.0 && radius < 1.0, "notch_radius", radius, "0 < r < 1")?;
        require(xi.abs() < 2.0, "xi", xi, "|xi| < 2")?;
        Ok(Self {
            radius,
            xi,
            input: [0.0; 2],
            output: [0.0; 2],
        })
    }

    /// Notch coefficient placing the zeros at `omega`.
    pub fn coefficient_for(omega: f64, sample_time: f64) -> f64 {
        -2.0 * (omega * sample_time).cos()
    }

    pub fn step(&mut self, d: f64) -> Result<NotchOutput> {
        if !d.is_finite() {
            return Err(Error::NonFinite { value: d });
        }
        let r = self.radius;
        let alpha = -r * self.output[0] + self.input[0];
        let beta = -r * r * self.output[1] + d + self.input[1];
        let eta_hat = alpha * self.xi + beta;
        self.input = [d, self.input[0]];
        self.output = [eta_hat, self.output[0]];
        Ok(NotchOutput {
            alpha,
            beta,
            eta_hat,
        })
    }

    /// Replace the coefficient used from the next sample on. No range check:
    /// the adaptive estimator may push it transiently past ±2.
    pub fn set_coefficient(&mut self, xi: f64) {
        self.xi = xi;
    }

    pub fn coefficient(&self) -> f64 {
        self.xi
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn reset(&mut self) {
        self.input = [0.0; 2];
        self.output = [0.0; 2];
    }

    pub fn response(&self, omega: f64, sample_time: f64) -> Complex64 {
        let z1 = unit_delay(omega, sample_time);
        let z2 = z1 * z1;
        let r = self.radius;
        (1.0 + self.xi * z1 + z2) / (1.0 + r * self.xi * z1 + r * r * z2)
    }
}

/// Amplitudes at a set of requested frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl Spectrum {
    pub fn magnitude_at(&self, omega: f64) -> Option<f64> {
        self.frequencies
            .iter()
            .position(|&w| w == omega)
            .map(|i| self.magnitudes[i])
    }
}

/// Sample indices `[start, end)` covered by a time window.
pub fn window_indices(len: usize, sample_time: f64, window: (f64, f64)) -> Result<(usize, usize)> {
    let (t_start, t_end) = window;
    if !(t_start >= 0.0 && t_end.is_finite()) {
        return Err(Error::WindowOutOfRange {
            start: t_start,
            end: t_end,
            len,
        });
    }
    let start = (t_start / sample_time).round() as usize;
    let end = (t_end / sample_time).round() as usize;
    if end <= start {
        return Err(Error::EmptyWindow);
    }
    if end > len {
        return Err(Error::WindowOutOfRange {
            start: t_start,
            end: t_end,
            len,
        });
    }
    Ok((start, end))
}

/// Single-bin correlation amplitude of `trace` at each requested frequency,
/// restricted to a time window. Sample `k` sits at time `k * sample_time`.
pub fn dft_magnitude(
    trace: &[f64],
    sample_time: f64,
    window: (f64, f64),
    freqs: &[f64],
) -> Result<Spectrum> {
    require(sample_time > 0.0, "sample_time", sample_time, "T_k > 0")?;
    let (start, end) = window_indices(trace.len(), sample_time, window)?;
    let limit = nyquist(sample_time);
    if let Some(&omega) = freqs.iter().find(|&&w| !(0.0..limit).contains(&w)) {
        return Err(Error::AboveNyquist {
            omega,
            nyquist: limit,
        });
    }
    let count = (end - start) as f64;
    let magnitudes = freqs
        .iter()
        .map(|&omega| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &x) in trace.iter().enumerate().take(end).skip(start) {
                let phase = omega * sample_time * k as f64;
                re += x * phase.cos();
                im -= x * phase.sin();
            }
            let scale = if omega == 0.0 { 1.0 } else { 2.0 };
            scale * re.hypot(im) / count
        })
        .collect();
    Ok(Spectrum {
        frequencies: freqs.to_vec(),
        magnitudes,
    })
}

pub fn rmse(trace: &[f64], reference: &[f64]) -> Result<f64> {
    if trace.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: trace.len(),
            right: reference.len(),
        });
    }
    if trace.is_empty() {
        return Err(Error::Empty("trace"));
    }
    let sum: f64 = trace
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / trace.len() as f64).sqrt())
}

/// Root mean square of a trace (error against an all-zero reference).
pub fn rms(trace: &[f64]) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::Empty("trace"));
    }
    Ok((trace.iter().map(|x| x * x).sum::<f64>() / trace.len() as f64).sqrt())
}
