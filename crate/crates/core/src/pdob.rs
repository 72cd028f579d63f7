//! Periodic-disturbance observer.
//!
//! The Q-filter is `Q = q(z⁻¹)·{1 − γ(1 − z⁻ᴺ)}` with `q` a first-order lag.
//! Sensitivity is `S = 1 − Q·z⁻¹` and complementary sensitivity `T = Q·z⁻¹`,
//! the extra `z⁻¹` being the one-sample loop delay that makes the observer
//! causal.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{require, Error, Result};
use crate::signal::{nyquist, unit_delay, DelayLine, FirstOrderLowPass, LowPassCoefficients};

/// Corrected and uncorrected one-period delays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayDesign {
    /// Rounded delay that places the notches on the harmonics once the phase
    /// lag of `q` is taken into account.
    pub corrected: usize,
    pub corrected_raw: f64,
    /// Plain period `2π/(T ω₀)`, rounded.
    pub uncorrected: usize,
    pub uncorrected_raw: f64,
}

/// Delay `N = round((2πgγ − ω₀) / (T g ω₀ γ))`.
pub fn compute_delay_n(omega0: f64, cutoff: f64, gamma: f64, sample_time: f64) -> Result<DelayDesign> {
    require(omega0 > 0.0 && omega0.is_finite(), "omega0", omega0, "omega0 > 0")?;
    require(cutoff > 0.0 && cutoff.is_finite(), "g", cutoff, "g > 0")?;
    require(gamma > 0.0 && gamma <= 1.0, "gamma", gamma, "0 < gamma <= 1")?;
    require(
        sample_time > 0.0 && sample_time.is_finite(),
        "Tk",
        sample_time,
        "Tk > 0",
    )?;
    let bound = 2.0 * PI * cutoff * gamma;
    let corrected_raw = (bound - omega0) / (sample_time * cutoff * omega0 * gamma);
    if bound <= omega0 || corrected_raw.round() < 1.0 {
        return Err(Error::NonPositiveDelay { bound, omega0 });
    }
    let uncorrected_raw = 2.0 * PI / (sample_time * omega0);
    Ok(DelayDesign {
        corrected: corrected_raw.round() as usize,
        corrected_raw,
        uncorrected: uncorrected_raw.round().max(1.0) as usize,
        uncorrected_raw,
    })
}

/// How the low-pass factor `q` of the Q-filter is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowPassModel {
    /// `q ≡ 1`, used to isolate the delay term in design studies.
    Unity,
    /// Backward-difference first-order lag at the configured cutoff.
    Discrete,
}

/// Design parameters of one observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdobConfig {
    pub omega0: f64,
    pub gamma: f64,
    pub cutoff: f64,
    pub sample_time: f64,
    pub delay: usize,
    pub lowpass: LowPassModel,
}

impl PdobConfig {
    /// Config with the corrected delay for `omega0`.
    pub fn new(omega0: f64, gamma: f64, cutoff: f64, sample_time: f64) -> Result<Self> {
        let design = compute_delay_n(omega0, cutoff, gamma, sample_time)?;
        Ok(Self {
            omega0,
            gamma,
            cutoff,
            sample_time,
            delay: design.corrected,
            lowpass: LowPassModel::Discrete,
        })
    }

    /// Override the delay, e.g. with the uncorrected period.
    pub fn with_delay(mut self, delay: usize) -> Result<Self> {
        require(delay >= 1, "delay", delay as f64, "N >= 1")?;
        self.delay = delay;
        Ok(self)
    }

    pub fn with_unity_lowpass(mut self) -> Self {
        self.lowpass = LowPassModel::Unity;
        self
    }

    pub fn design(&self) -> Result<DelayDesign> {
        compute_delay_n(self.omega0, self.cutoff, self.gamma, self.sample_time)
    }

    pub fn lowpass_coefficients(&self) -> LowPassCoefficients {
        match self.lowpass {
            LowPassModel::Unity => LowPassCoefficients {
                alpha: 1.0,
                beta: 0.0,
            },
            LowPassModel::Discrete => {
                LowPassCoefficients::backward_difference(self.cutoff, self.sample_time)
            }
        }
    }

    /// Frequencies `2πn/(N T)` where the delay term makes `|1 − Q|` vanish
    /// when `q ≡ 1`.
    pub fn notch_frequency(&self, n: usize) -> f64 {
        2.0 * PI * n as f64 / (self.delay as f64 * self.sample_time)
    }

    /// Frequencies `(2n+1)π/(N T)` halfway between adjacent notches.
    pub fn half_harmonic_frequency(&self, n: usize) -> f64 {
        (2 * n + 1) as f64 * PI / (self.delay as f64 * self.sample_time)
    }
}

/// Whether the one-sample loop delay is part of an evaluated response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopDelay {
    /// `S = 1 − Q z⁻¹`, the response of the running loop.
    Included,
    /// `S = 1 − Q`, the idealized form used for design formulas.
    Neglected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyResponsePoint {
    pub omega: f64,
    pub sensitivity: Complex64,
    pub complementary: Complex64,
}

impl FrequencyResponsePoint {
    pub fn sensitivity_mag(&self) -> f64 {
        self.sensitivity.norm()
    }

    pub fn complementary_mag(&self) -> f64 {
        self.complementary.norm()
    }
}

/// `q(e^{−jωT})·{1 − γ(1 − e^{−jωTN})}`.
pub fn q_filter_response(config: &PdobConfig, omega: f64) -> Complex64 {
    let t = config.sample_time;
    let q = config.lowpass_coefficients().response(omega, t);
    let delayed = Complex64::from_polar(1.0, -omega * t * config.delay as f64);
    q * (1.0 - config.gamma * (1.0 - delayed))
}

pub fn frequency_response(config: &PdobConfig, omega: f64, loop_delay: LoopDelay) -> FrequencyResponsePoint {
    let q = q_filter_response(config, omega);
    let complementary = match loop_delay {
        LoopDelay::Included => q * unit_delay(omega, config.sample_time),
        LoopDelay::Neglected => q,
    };
    FrequencyResponsePoint {
        omega,
        sensitivity: 1.0 - complementary,
        complementary,
    }
}

/// Response of the conventional observer, whose filter is the plain low-pass.
pub fn dob_frequency_response(
    cutoff: f64,
    sample_time: f64,
    omega: f64,
    loop_delay: LoopDelay,
) -> FrequencyResponsePoint {
    let q = LowPassCoefficients::backward_difference(cutoff, sample_time).response(omega, sample_time);
    let complementary = match loop_delay {
        LoopDelay::Included => q * unit_delay(omega, sample_time),
        LoopDelay::Neglected => q,
    };
    FrequencyResponsePoint {
        omega,
        sensitivity: 1.0 - complementary,
        complementary,
    }
}

/// `|1 − Q(e^{−jωT}) e^{−jωT}|`.
pub fn sensitivity_gain(config: &PdobConfig, omega: f64) -> f64 {
    frequency_response(config, omega, LoopDelay::Included).sensitivity_mag()
}

/// Closed-form residual gain at the fundamental for the continuous
/// first-order `q`, a function of `μ = ω₀/g` only.
pub fn fundamental_suppression_gain(omega0: f64, cutoff: f64) -> Result<f64> {
    require(cutoff > 0.0, "g", cutoff, "g > 0")?;
    require(omega0 >= 0.0, "omega0", omega0, "omega0 >= 0")?;
    let mu = omega0 / cutoff;
    let numerator = (1.0 - (2.0 * mu).cos()) + 2.0 * mu * (mu - (2.0 * mu).sin());
    Ok((numerator / (2.0 * (1.0 + mu * mu))).max(0.0).sqrt())
}

/// Small-gain check of `‖W·Q·z⁻¹‖∞ < 1` over a frequency grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginReport {
    /// `min 1/(|W|·|Q z⁻¹|)`; infinite when the product vanishes everywhere.
    pub margin: f64,
    /// Largest `|W|·|Q z⁻¹|` on the grid and where it occurs.
    pub peak_weighted_gain: f64,
    pub peak_omega: f64,
    pub robustly_stable: bool,
    /// `|q| < 1/|W|` on the whole grid, ignoring the delay term.
    pub sufficient_condition: bool,
}

pub fn robust_stability_margin(
    config: &PdobConfig,
    weight: impl Fn(f64) -> f64,
    grid: &[f64],
) -> Result<MarginReport> {
    if grid.is_empty() {
        return Err(Error::Empty("frequency grid"));
    }
    let limit = nyquist(config.sample_time);
    let q = config.lowpass_coefficients();
    let mut peak = 0.0_f64;
    let mut peak_omega = grid[0];
    let mut sufficient = true;
    for &omega in grid {
        if !(0.0..limit).contains(&omega) {
            return Err(Error::AboveNyquist {
                omega,
                nyquist: limit,
            });
        }
        let w = weight(omega).abs();
        let product = w * frequency_response(config, omega, LoopDelay::Included).complementary_mag();
        if product > peak {
            peak = product;
            peak_omega = omega;
        }
        if w * q.response(omega, config.sample_time).norm() >= 1.0 {
            sufficient = false;
        }
    }
    Ok(MarginReport {
        margin: if peak > 0.0 { 1.0 / peak } else { f64::INFINITY },
        peak_weighted_gain: peak,
        peak_omega,
        robustly_stable: peak < 1.0,
        sufficient_condition: sufficient,
    })
}

/// Running observer. Feed it the previous plant input and the
/// inverse-plant-filtered output; it returns the filtered disturbance image
/// `Q·ε` with `ε = y_inv − u(k−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdob {
    config: PdobConfig,
    line: DelayLine,
    lowpass: FirstOrderLowPass,
    raw: f64,
    estimate: f64,
}

impl Pdob {
    pub fn new(config: PdobConfig) -> Result<Self> {
        Self::with_capacity(config, config.delay)
    }

    /// Observer whose delay line can later hold delays up to `capacity`.
    pub fn with_capacity(config: PdobConfig, capacity: usize) -> Result<Self> {
        require(
            config.gamma > 0.0 && config.gamma <= 1.0,
            "gamma",
            config.gamma,
            "0 < gamma <= 1",
        )?;
        require(config.delay >= 1, "delay", config.delay as f64, "N >= 1")?;
        if config.delay > capacity {
            return Err(Error::DelayExceedsCapacity {
                capacity,
                delay: config.delay,
            });
        }
        Ok(Self {
            config,
            line: DelayLine::new(capacity)?,
            lowpass: FirstOrderLowPass::new(config.cutoff, config.sample_time)?,
            raw: 0.0,
            estimate: 0.0,
        })
    }

    pub fn step(&mut self, u_prev: f64, y_inv: f64) -> Result<f64> {
        self.step_raw(y_inv - u_prev)
    }

    /// Advance with a precomputed `ε`.
    pub fn step_raw(&mut self, eps: f64) -> Result<f64> {
        if !eps.is_finite() {
            return Err(Error::NonFinite { value: eps });
        }
        let gamma = self.config.gamma;
        let mixed = (1.0 - gamma) * eps + gamma * self.line.read(self.config.delay);
        self.line.push(eps);
        self.raw = eps;
        self.estimate = match self.config.lowpass {
            LowPassModel::Unity => mixed,
            LowPassModel::Discrete => self.lowpass.step(mixed)?,
        };
        Ok(self.estimate)
    }

    /// Change `N` keeping the stored history.
    pub fn set_delay(&mut self, delay: usize) -> Result<()> {
        if delay == 0 || delay > self.line.capacity() {
            return Err(Error::DelayExceedsCapacity {
                capacity: self.line.capacity(),
                delay,
            });
        }
        self.config.delay = delay;
        Ok(())
    }

    pub fn set_omega0(&mut self, omega0: f64) {
        self.config.omega0 = omega0;
    }

    pub fn config(&self) -> &PdobConfig {
        &self.config
    }

    pub fn capacity(&self) -> usize {
        self.line.capacity()
    }

    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    pub fn raw(&self) -> f64 {
        self.raw
    }

    pub fn reset(&mut self) {
        self.line.reset();
        self.lowpass.reset();
        self.raw = 0.0;
        self.estimate = 0.0;
    }
}

/// Stable first-order nominal plant `y(k) = pole·y(k−1) + gain·τ(k−1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderPlant {
    pub pole: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayProbe {
    pub delay: usize,
    pub samples: usize,
    pub max_amplitude: f64,
    pub tail_max: f64,
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub probes: Vec<DelayProbe>,
}

impl ProbeReport {
    pub fn bounded(&self) -> bool {
        self.probes.iter().all(|p| p.bounded)
    }
}

/// Impulse response of the nominal loop (no modeling error) for each delay.
///
/// The loop is the plant under proportional feedback `u = −k·y` plus the
/// observer compensation; the disturbance input receives a unit impulse.
/// A run counts as bounded when every sample is finite and the largest
/// amplitude over the final 20% does not exceed the largest before it.
pub fn nominal_stability_probe(
    config: &PdobConfig,
    plant: &FirstOrderPlant,
    feedback_gain: f64,
    delays: &[usize],
) -> Result<ProbeReport> {
    nominal_stability_probe_with_q(config, config.lowpass_coefficients(), plant, feedback_gain, delays)
}

/// Same as [`nominal_stability_probe`] with explicit `q` coefficients, which
/// may describe an unstable filter.
pub fn nominal_stability_probe_with_q(
    config: &PdobConfig,
    q: LowPassCoefficients,
    plant: &FirstOrderPlant,
    feedback_gain: f64,
    delays: &[usize],
) -> Result<ProbeReport> {
    require(plant.gain != 0.0, "plant_gain", plant.gain, "nonzero gain")?;
    if delays.is_empty() {
        return Err(Error::Empty("delay list"));
    }
    let mut probes = Vec::with_capacity(delays.len());
    for &delay in delays {
        require(delay >= 1, "delay", delay as f64, "N >= 1")?;
        let samples = (5 * delay).max(2000);
        let mut line = DelayLine::new(delay)?;
        let (mut y, mut y_prev, mut u_prev, mut q_state) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
        let mut disturbance_prev = 0.0;
        let mut amplitudes = Vec::with_capacity(samples);
        for k in 0..samples {
            y = plant.pole * y + plant.gain * (u_prev - disturbance_prev);
            disturbance_prev = if k == 0 { 1.0 } else { 0.0 };
            let y_inv = (y - plant.pole * y_prev) / plant.gain;
            y_prev = y;
            let eps = y_inv - u_prev;
            let mixed = (1.0 - config.gamma) * eps + config.gamma * line.read(delay);
            line.push(eps);
            q_state = q.beta * q_state + q.alpha * mixed;
            let u = -feedback_gain * y - q_state;
            u_prev = u;
            amplitudes.push(y.abs().max(u.abs()));
        }
        let split = samples * 4 / 5;
        let head = amplitudes[..split].iter().fold(0.0_f64, |m, &a| m.max(a));
        let tail = amplitudes[split..].iter().fold(0.0_f64, |m, &a| m.max(a));
        let finite = amplitudes.iter().all(|a| a.is_finite());
        probes.push(DelayProbe {
            delay,
            samples,
            max_amplitude: head.max(tail),
            tail_max: tail,
            bounded: finite && tail <= head,
        });
    }
    Ok(ProbeReport { probes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig_config() -> PdobConfig {
        PdobConfig::new(100.0, 0.5, 1000.0, 1e-5).unwrap()
    }

    #[test]
    fn delay_examples() {
        let d = compute_delay_n(100.0, 1000.0, 0.5, 1e-5).unwrap();
        assert_eq!(d.corrected, 6083);
        assert!((d.corrected_raw - 6083.185).abs() < 1e-2);
        assert_eq!(d.uncorrected, 6283);
        assert!((d.uncorrected_raw - 6283.185).abs() < 1e-2);
    }

    #[test]
    fn delay_approaches_period_for_fast_lowpass() {
        let d = compute_delay_n(100.0, 1e9, 0.5, 1e-5).unwrap();
        assert!((d.corrected_raw - d.uncorrected_raw).abs() / d.uncorrected_raw < 1e-3);
    }

    #[test]
    fn delay_rejects_nonpositive_numerator() {
        let err = compute_delay_n(1000.0, 100.0, 0.5, 1e-4).unwrap_err();
        assert!(matches!(err, Error::NonPositiveDelay { .. }));
        assert!(err.to_string().contains("2*pi*g*gamma > omega0"));
    }

    #[test]
    fn simulation_delay() {
        assert_eq!(compute_delay_n(10.0, 1000.0, 0.7, 1e-4).unwrap().corrected, 6269);
    }

    #[test]
    fn q_filter_dc_is_unity() {
        let q = q_filter_response(&fig_config(), 0.0);
        assert!((q - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn unity_q_half_harmonic_gains() {
        for &(gamma, expected) in &[(0.5, 0.0), (0.7, 0.4)] {
            let cfg = PdobConfig::new(100.0, gamma, 1000.0, 1e-5)
                .unwrap()
                .with_unity_lowpass();
            let w = cfg.half_harmonic_frequency(0);
            assert!((q_filter_response(&cfg, w).norm() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn unity_q_notches_and_peaks() {
        let cfg = fig_config().with_unity_lowpass();
        for n in 1..4 {
            let p = frequency_response(&cfg, cfg.notch_frequency(n), LoopDelay::Neglected);
            assert!(p.sensitivity_mag() < 1e-9);
        }
        let p = frequency_response(&cfg, cfg.half_harmonic_frequency(2), LoopDelay::Neglected);
        assert!((p.sensitivity_mag() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn neglected_sensitivity_matches_sine_formula() {
        let cfg = PdobConfig::new(100.0, 0.3, 1000.0, 1e-5)
            .unwrap()
            .with_unity_lowpass();
        for &w in &[1.0, 37.0, 150.0, 2000.0] {
            let s = frequency_response(&cfg, w, LoopDelay::Neglected).sensitivity_mag();
            let theta = cfg.delay as f64 * cfg.sample_time * w / 2.0;
            assert!((s - 2.0 * cfg.gamma * theta.sin().abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn fundamental_gain_values() {
        assert!((fundamental_suppression_gain(100.0, 1000.0).unwrap() - 0.00994).abs() < 1e-5);
        assert_eq!(fundamental_suppression_gain(0.0, 1000.0).unwrap(), 0.0);
        assert!(fundamental_suppression_gain(1e-3, 1e6).unwrap() < 1e-8);
        let direct = sensitivity_gain(&fig_config(), 100.0);
        let formula = fundamental_suppression_gain(100.0, 1000.0).unwrap();
        assert!((direct - formula).abs() / formula < 0.05);
    }

    #[test]
    fn margin_examples() {
        let cfg = fig_config();
        let grid: Vec<f64> = (0..2000).map(|i| i as f64 * 5.0).collect();
        let none = robust_stability_margin(&cfg, |_| 0.0, &grid).unwrap();
        assert!(none.margin.is_infinite() && none.robustly_stable && none.sufficient_condition);

        let unity = cfg.with_unity_lowpass();
        let big = robust_stability_margin(&unity, |_| 2.0, &grid).unwrap();
        assert!(!big.robustly_stable);
        assert!((big.peak_weighted_gain - 2.0).abs() < 1e-9);

        let small = robust_stability_margin(&cfg, |_| 0.9, &grid).unwrap();
        let brute = grid
            .iter()
            .map(|&w| 0.9 * frequency_response(&cfg, w, LoopDelay::Included).complementary_mag())
            .fold(0.0_f64, f64::max);
        assert_eq!(small.robustly_stable, brute < 1.0);
        assert!((small.peak_weighted_gain - brute).abs() < 1e-15);
        assert!(small.sufficient_condition);

        assert_eq!(
            robust_stability_margin(&cfg, |_| 1.0, &[]),
            Err(Error::Empty("frequency grid"))
        );
    }

    #[test]
    fn observer_zero_and_constant() {
        let mut pdob = Pdob::new(PdobConfig::new(100.0, 0.5, 1000.0, 1e-4).unwrap()).unwrap();
        assert!((0..1000).all(|_| pdob.step(0.0, 0.0).unwrap() == 0.0));
        let mut d = 0.0;
        for _ in 0..20_000 {
            d = pdob.step(1.0, 3.5).unwrap();
        }
        assert!((d - 2.5).abs() < 1e-9);
    }

    #[test]
    fn observer_residual_matches_sensitivity() {
        let cfg = PdobConfig::new(100.0, 0.5, 1000.0, 1e-5).unwrap();
        let mut pdob = Pdob::new(cfg).unwrap();
        let steps = 20 * cfg.delay;
        let mut previous = 0.0;
        let mut peak = 0.0_f64;
        for k in 0..steps {
            let eps = (100.0 * 1e-5 * k as f64).sin();
            if k >= steps - 2 * cfg.delay {
                peak = peak.max((eps - previous).abs());
            }
            previous = pdob.step_raw(eps).unwrap();
        }
        let predicted = sensitivity_gain(&cfg, 100.0);
        assert!((peak - predicted).abs() / predicted < 0.05, "{peak} vs {predicted}");
    }

    #[test]
    fn observer_delay_bounds() {
        let cfg = PdobConfig::new(100.0, 0.5, 1000.0, 1e-4).unwrap();
        assert!(matches!(
            Pdob::with_capacity(cfg, cfg.delay - 1),
            Err(Error::DelayExceedsCapacity { .. })
        ));
        let mut pdob = Pdob::with_capacity(cfg, 1000).unwrap();
        assert!(pdob.set_delay(1001).is_err());
        assert!(pdob.set_delay(0).is_err());
        pdob.set_delay(700).unwrap();
        assert_eq!(pdob.config().delay, 700);
    }

    #[test]
    fn observer_rejects_non_finite() {
        let mut pdob = Pdob::new(PdobConfig::new(100.0, 0.5, 1000.0, 1e-4).unwrap()).unwrap();
        assert!(matches!(pdob.step_raw(f64::NAN), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn probe_bounded_for_stable_components() {
        let plant = FirstOrderPlant { pole: 0.99, gain: 0.01 };
        let report = nominal_stability_probe(&fig_config(), &plant, 1.0, &[10, 1000, 6083]).unwrap();
        assert!(report.bounded(), "{report:?}");
        assert_eq!(report.probes[2].samples, 5 * 6083);
    }

    #[test]
    fn probe_detects_unstable_q() {
        let plant = FirstOrderPlant { pole: 0.99, gain: 0.01 };
        let cfg = PdobConfig::new(100.0, 0.5, 1000.0, 1e-4).unwrap();
        let unstable = LowPassCoefficients::backward_difference(-100.0, 1e-4);
        let report = nominal_stability_probe_with_q(&cfg, unstable, &plant, 1.0, &[10, 100]).unwrap();
        assert!(!report.bounded());
    }
}
