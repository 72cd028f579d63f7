//! Observer whose period delay follows an online frequency estimate.
//!
//! The raw disturbance image `ε` is band-passed around the current estimate,
//! handed to the adaptive notch filter, and every new raw estimate is
//! smoothed by a first-order lag, clamped to the configured bounds and used
//! to retune both the band-pass centre and the observer delay.

use crate::anf::{Anf, AnfConfig};
use crate::error::{require, Error, Result};
use crate::pdob::{compute_delay_n, Pdob, PdobConfig};
use crate::signal::{nyquist, BandPassResonator, FirstOrderLowPass};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptivePdobConfig {
    /// Observer parameters; `omega0` is the starting frequency estimate.
    pub pdob: PdobConfig,
    pub anf: AnfConfig,
    /// Cutoff `g_a` of the lag that smooths raw frequency estimates.
    pub smoothing_cutoff: f64,
    /// Width `g_b` of the band-pass feeding the estimator.
    pub bandpass_width: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl AdaptivePdobConfig {
    /// Bounds default to `[0.5, 2]` times the starting frequency. The notch
    /// estimator inherits the observer's start frequency and sample time.
    pub fn new(pdob: PdobConfig, anf: AnfConfig, smoothing_cutoff: f64, bandpass_width: f64) -> Self {
        Self {
            pdob,
            anf: AnfConfig {
                initial_omega: pdob.omega0,
                sample_time: pdob.sample_time,
                ..anf
            },
            smoothing_cutoff,
            bandpass_width,
            omega_min: 0.5 * pdob.omega0,
            omega_max: 2.0 * pdob.omega0,
        }
    }

    pub fn with_bounds(mut self, omega_min: f64, omega_max: f64) -> Self {
        self.omega_min = omega_min;
        self.omega_max = omega_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.pdob.sample_time;
        require(self.omega_min > 0.0, "omega_min", self.omega_min, "omega_min > 0")?;
        require(
            self.omega_max < nyquist(t),
            "omega_max",
            self.omega_max,
            "omega_max < pi/Tk",
        )?;
        require(
            self.omega_max > self.omega_min,
            "omega_max",
            self.omega_max,
            "omega_max > omega_min",
        )?;
        let initial = self.pdob.omega0;
        if !(self.omega_min..=self.omega_max).contains(&initial) {
            return Err(Error::InitialFrequencyOutOfBounds {
                initial,
                min: self.omega_min,
                max: self.omega_max,
            });
        }
        require(
            self.smoothing_cutoff > 0.0,
            "g_a",
            self.smoothing_cutoff,
            "g_a > 0",
        )?;
        self.anf.validate()?;
        // Every frequency in range must give a valid delay.
        compute_delay_n(self.omega_max, self.pdob.cutoff, self.pdob.gamma, t)?;
        Ok(())
    }

    /// Delay-line length covering the slowest admissible fundamental.
    pub fn capacity(&self) -> Result<usize> {
        let p = &self.pdob;
        Ok(compute_delay_n(self.omega_min, p.cutoff, p.gamma, p.sample_time)?.corrected)
    }
}

/// One fast-rate step of the frequency tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerOutput {
    /// Band-pass output fed to the notch estimator.
    pub d_tilde: f64,
    /// Raw estimate, present only on slow-rate steps.
    pub omega_tilde: Option<f64>,
    /// Smoothed and clamped estimate after this step.
    pub omega_hat: f64,
    /// Set when the smoothed value had to be clamped on this step.
    pub clamped: bool,
}

/// Band-pass, notch estimator and smoother, without the observer.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTracker {
    bandpass: BandPassResonator,
    anf: Anf,
    smoother: FirstOrderLowPass,
    omega_hat: f64,
    omega_min: f64,
    omega_max: f64,
    clamp_events: u64,
}

impl FrequencyTracker {
    /// The smoother runs at the fast sample time but is stepped only when a
    /// raw estimate arrives, i.e. once every `κ` samples.
    pub fn new(
        anf: AnfConfig,
        smoothing_cutoff: f64,
        bandpass_width: f64,
        omega_min: f64,
        omega_max: f64,
    ) -> Result<Self> {
        let start = anf.initial_omega;
        if !(omega_min..=omega_max).contains(&start) {
            return Err(Error::InitialFrequencyOutOfBounds {
                initial: start,
                min: omega_min,
                max: omega_max,
            });
        }
        Ok(Self {
            bandpass: BandPassResonator::new(start, bandpass_width, anf.sample_time)?,
            anf: Anf::new(anf)?,
            smoother: FirstOrderLowPass::new(smoothing_cutoff, anf.sample_time)?.seeded(start),
            omega_hat: start,
            omega_min,
            omega_max,
            clamp_events: 0,
        })
    }

    pub fn step(&mut self, eps: f64) -> Result<TrackerOutput> {
        let d_tilde = self.bandpass.step(eps);
        let omega_tilde = self.anf.step(d_tilde)?;
        let mut clamped = false;
        if let Some(raw) = omega_tilde {
            let smoothed = self.smoother.step(raw)?;
            let (omega, hit) = self.bound(smoothed);
            if hit {
                // Anti-windup: keep the smoother on the bound.
                self.smoother.set_output(omega);
                clamped = true;
            }
            self.set_omega(omega)?;
        }
        Ok(TrackerOutput {
            d_tilde,
            omega_tilde,
            omega_hat: self.omega_hat,
            clamped,
        })
    }

    /// Force the estimate, clamping it into the bounds.
    pub fn retune(&mut self, omega: f64) -> Result<(f64, bool)> {
        let (omega, hit) = self.bound(omega);
        self.smoother.set_output(omega);
        self.set_omega(omega)?;
        Ok((omega, hit))
    }

    fn bound(&mut self, omega: f64) -> (f64, bool) {
        let bounded = omega.clamp(self.omega_min, self.omega_max);
        let hit = bounded != omega;
        if hit {
            self.clamp_events += 1;
        }
        (bounded, hit)
    }

    fn set_omega(&mut self, omega: f64) -> Result<()> {
        self.omega_hat = omega;
        self.bandpass.retune(omega)
    }

    pub fn omega_hat(&self) -> f64 {
        self.omega_hat
    }

    pub fn anf(&self) -> &Anf {
        &self.anf
    }

    pub fn bandpass(&self) -> &BandPassResonator {
        &self.bandpass
    }

    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOutput {
    /// Filtered disturbance image `Q·ε`.
    pub estimate: f64,
    pub omega_hat: f64,
    pub omega_tilde: Option<f64>,
    pub delay: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetuneOutcome {
    pub omega: f64,
    pub delay: usize,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptivePdob {
    config: AdaptivePdobConfig,
    pdob: Pdob,
    tracker: FrequencyTracker,
}

impl AdaptivePdob {
    pub fn new(config: AdaptivePdobConfig) -> Result<Self> {
        config.validate()?;
        let capacity = config.capacity()?;
        Ok(Self {
            pdob: Pdob::with_capacity(config.pdob, capacity)?,
            tracker: FrequencyTracker::new(
                config.anf,
                config.smoothing_cutoff,
                config.bandpass_width,
                config.omega_min,
                config.omega_max,
            )?,
            config,
        })
    }

    pub fn step(&mut self, u_prev: f64, y_inv: f64) -> Result<AdaptiveOutput> {
        let estimate = self.pdob.step(u_prev, y_inv)?;
        let tracked = self.tracker.step(self.pdob.raw())?;
        if tracked.omega_tilde.is_some() {
            self.apply_delay(tracked.omega_hat)?;
        }
        Ok(AdaptiveOutput {
            estimate,
            omega_hat: tracked.omega_hat,
            omega_tilde: tracked.omega_tilde,
            delay: self.pdob.config().delay,
        })
    }

    /// Move the estimate to `omega` (clamped), updating delay and band-pass
    /// while keeping all stored history.
    pub fn retune(&mut self, omega: f64) -> Result<RetuneOutcome> {
        let (omega, clamped) = self.tracker.retune(omega)?;
        let delay = self.apply_delay(omega)?;
        Ok(RetuneOutcome {
            omega,
            delay,
            clamped,
        })
    }

    fn apply_delay(&mut self, omega: f64) -> Result<usize> {
        let p = &self.config.pdob;
        let delay = compute_delay_n(omega, p.cutoff, p.gamma, p.sample_time)?.corrected;
        self.pdob.set_delay(delay)?;
        self.pdob.set_omega0(omega);
        Ok(delay)
    }

    pub fn config(&self) -> &AdaptivePdobConfig {
        &self.config
    }

    pub fn pdob(&self) -> &Pdob {
        &self.pdob
    }

    pub fn tracker(&self) -> &FrequencyTracker {
        &self.tracker
    }

    pub fn omega_hat(&self) -> f64 {
        self.tracker.omega_hat()
    }

    pub fn delay(&self) -> usize {
        self.pdob.config().delay
    }
}
