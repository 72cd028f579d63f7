//! Adaptive notch filter frequency estimator.
//!
//! A constrained notch runs at the fast sample rate and exposes its output
//! in regression form `η̂ = α ξ + β`. Every `κ` fast samples a scalar
//! recursive least-squares update moves `ξ` to drive `η̂` toward zero, and the
//! tone frequency is read back as `acos(−ξ/2)/T`.

use crate::error::{require, Error, Result};
use crate::signal::{nyquist, NotchFilter, NotchOutput};

/// Notch radius `r`, multi-rate ratio `κ`, forgetting factor `λ`,
/// regularization `δ`, starting frequency and fast sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnfConfig {
    pub radius: f64,
    pub kappa: usize,
    pub lambda: f64,
    pub delta: f64,
    pub initial_omega: f64,
    pub sample_time: f64,
}

impl AnfConfig {
    pub fn validate(&self) -> Result<()> {
        require(self.radius > 0.0 && self.radius < 1.0, "r", self.radius, "0 < r < 1")?;
        require(self.kappa >= 1, "kappa", self.kappa as f64, "0 < kappa")?;
        require(self.lambda > 0.0 && self.lambda < 1.0, "lambda", self.lambda, "0 << lambda < 1")?;
        require(self.delta > 0.0 && self.delta.is_finite(), "delta", self.delta, "0 < delta")?;
        require(
            self.sample_time > 0.0 && self.sample_time.is_finite(),
            "Tk",
            self.sample_time,
            "Tk > 0",
        )?;
        let limit = nyquist(self.sample_time);
        require(
            self.initial_omega > 0.0 && self.initial_omega < limit,
            "initial_omega",
            self.initial_omega,
            "0 < omega < pi/Tk",
        )
    }

    pub fn initial_xi(&self) -> f64 {
        NotchFilter::coefficient_for(self.initial_omega, self.sample_time)
    }
}

/// Fundamental frequency encoded by a notch coefficient, clamped so that
/// out-of-range coefficients still map to a finite frequency.
pub fn frequency_of_xi(xi: f64, sample_time: f64) -> f64 {
    const EDGE: f64 = 1e-9;
    (-0.5 * xi).clamp(-1.0 + EDGE, 1.0 - EDGE).acos() / sample_time
}

/// Result of one recursive least-squares update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsUpdate {
    pub gain: f64,
    pub error: f64,
    pub xi: f64,
    pub p: f64,
    /// `P` before the update, kept for checking the gain identity.
    pub p_prev: f64,
}

/// Scalar RLS with exponential forgetting and a regularized start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlsScalar {
    xi: f64,
    p: f64,
    lambda: f64,
}

impl RlsScalar {
    /// `λ` may be 1 here (no forgetting); `P(0) = 1/δ`.
    pub fn new(xi: f64, delta: f64, lambda: f64) -> Result<Self> {
        require(delta > 0.0 && delta.is_finite(), "delta", delta, "0 < delta")?;
        require(lambda > 0.0 && lambda <= 1.0, "lambda", lambda, "0 < lambda <= 1")?;
        Ok(Self {
            xi,
            p: 1.0 / delta,
            lambda,
        })
    }

    /// Update against a target, `error = target − α ξ`.
    pub fn update(&mut self, alpha: f64, target: f64) -> RlsUpdate {
        self.update_with_error(alpha, target - alpha * self.xi)
    }

    /// Update with an a-priori error computed by the caller.
    pub fn update_with_error(&mut self, alpha: f64, error: f64) -> RlsUpdate {
        let p_prev = self.p;
        let gain = p_prev * alpha / (self.lambda + p_prev * alpha * alpha);
        self.xi += gain * error;
        self.p = (p_prev - gain * alpha * p_prev) / self.lambda;
        RlsUpdate {
            gain,
            error,
            xi: self.xi,
            p: self.p,
            p_prev,
        }
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Output of a slow-rate step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnfEstimate {
    pub omega_tilde: f64,
    pub update: RlsUpdate,
    pub notch: NotchOutput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anf {
    config: AnfConfig,
    notch: NotchFilter,
    rls: RlsScalar,
    fast_count: u64,
    slow_count: u64,
    omega_tilde: f64,
    last_notch: Option<NotchOutput>,
}

impl Anf {
    pub fn new(config: AnfConfig) -> Result<Self> {
        config.validate()?;
        let xi = config.initial_xi();
        Ok(Self {
            config,
            notch: NotchFilter::new(config.radius, xi)?,
            rls: RlsScalar::new(xi, config.delta, config.lambda)?,
            fast_count: 0,
            slow_count: 0,
            omega_tilde: config.initial_omega,
            last_notch: None,
        })
    }

    /// Advance one fast sample; every `κ`-th call also returns a frequency.
    pub fn step(&mut self, d: f64) -> Result<Option<f64>> {
        Ok(self.step_detailed(d)?.map(|e| e.omega_tilde))
    }

    pub fn step_detailed(&mut self, d: f64) -> Result<Option<AnfEstimate>> {
        let notch = self.notch.step(d)?;
        self.last_notch = Some(notch);
        self.fast_count += 1;
        if !self.fast_count.is_multiple_of(self.config.kappa as u64) {
            return Ok(None);
        }
        let update = self.rls.update_with_error(notch.alpha, -notch.eta_hat);
        self.notch.set_coefficient(update.xi);
        self.slow_count += 1;
        self.omega_tilde = frequency_of_xi(update.xi, self.config.sample_time);
        Ok(Some(AnfEstimate {
            omega_tilde: self.omega_tilde,
            update,
            notch,
        }))
    }

    pub fn config(&self) -> &AnfConfig {
        &self.config
    }

    pub fn xi(&self) -> f64 {
        self.rls.xi()
    }

    pub fn p(&self) -> f64 {
        self.rls.p()
    }

    pub fn omega_tilde(&self) -> f64 {
        self.omega_tilde
    }

    pub fn fast_count(&self) -> u64 {
        self.fast_count
    }

    pub fn slow_count(&self) -> u64 {
        self.slow_count
    }

    pub fn last_notch(&self) -> Option<NotchOutput> {
        self.last_notch
    }
}

/// Closed-form weighted least-squares solutions used to check the recursion.
pub mod oracle {
    use super::*;

    /// `ξ(h) = P(h) Σ λ^{h−n} α(n) t(n)` with
    /// `P(h) = 1 / (Σ λ^{h−n} α(n)² + δ λ^h)`, for a zero prior.
    pub fn batch_xi_oracle(alphas: &[f64], targets: &[f64], lambda: f64, delta: f64, h: usize) -> Result<f64> {
        batch_xi_oracle_with_prior(alphas, targets, lambda, delta, h, 0.0)
    }

    /// Same minimizer when the regularizer pulls toward `prior` rather than 0.
    pub fn batch_xi_oracle_with_prior(
        alphas: &[f64],
        targets: &[f64],
        lambda: f64,
        delta: f64,
        h: usize,
        prior: f64,
    ) -> Result<f64> {
        if h == 0 {
            return Err(Error::Empty("oracle horizon"));
        }
        if alphas.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: alphas.len(),
                right: targets.len(),
            });
        }
        if h > alphas.len() {
            return Err(Error::LengthMismatch {
                left: h,
                right: alphas.len(),
            });
        }
        let regularizer = delta * lambda.powi(h as i32);
        let mut numerator = regularizer * prior;
        let mut denominator = regularizer;
        for n in 1..=h {
            let weight = lambda.powi((h - n) as i32);
            numerator += weight * alphas[n - 1] * targets[n - 1];
            denominator += weight * alphas[n - 1] * alphas[n - 1];
        }
        Ok(if denominator == 0.0 { 0.0 } else { numerator / denominator })
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;

    fn standard(initial_omega: f64) -> AnfConfig {
        AnfConfig {
            radius: 0.7,
            kappa: 10,
            lambda: 0.999,
            delta: 1000.0,
            initial_omega,
            sample_time: 1e-4,
        }
    }

    #[test]
    fn initialization() {
        let anf = Anf::new(standard(100.0)).unwrap();
        assert!((anf.xi() - (-1.999_900_000_833_3)).abs() < 1e-12);
        assert_eq!(anf.p(), 0.001);
        let quarter = Anf::new(standard(std::f64::consts::FRAC_PI_2 / 1e-4 * 0.999_999_999)).unwrap();
        assert!(quarter.xi().abs() < 1e-8);
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        for cfg in [
            AnfConfig { radius: 1.0, ..standard(100.0) },
            AnfConfig { kappa: 0, ..standard(100.0) },
            AnfConfig { lambda: 1.0, ..standard(100.0) },
            AnfConfig { delta: 0.0, ..standard(100.0) },
            AnfConfig { initial_omega: 40_000.0, ..standard(100.0) },
        ] {
            assert!(matches!(Anf::new(cfg), Err(Error::InvalidParameter { .. })), "{cfg:?}");
        }
    }

    #[test]
    fn zero_input_freezes_estimate() {
        let mut anf = Anf::new(standard(100.0)).unwrap();
        let xi0 = anf.xi();
        for k in 1..=1000 {
            let out = anf.step(0.0).unwrap();
            assert_eq!(out.is_some(), k % 10 == 0);
            if let Some(w) = out {
                assert!((w - 100.0).abs() < 1e-6);
            }
        }
        assert_eq!(anf.xi(), xi0);
        assert_eq!(anf.slow_count(), 100);
    }

    #[test]
    fn matched_tone_stays_put() {
        let mut anf = Anf::new(standard(100.0)).unwrap();
        let xi0 = anf.xi();
        for k in 0..30_000 {
            anf.step((100.0 * 1e-4 * k as f64).sin()).unwrap();
            assert!((anf.xi() - xi0).abs() < 1e-4);
        }
    }

    #[test]
    fn tracks_frequency_step() {
        let mut anf = Anf::new(standard(100.0)).unwrap();
        let mut last = 100.0;
        for k in 0..60_000 {
            let t = 1e-4 * k as f64;
            let w = if t < 3.0 { 100.0 } else { 110.0 };
            if let Some(est) = anf.step((w * t).sin()).unwrap() {
                assert!(est.is_finite());
                last = est;
            }
        }
        assert!((last - 110.0).abs() < 1.0, "{last}");
    }

    #[test]
    fn frequency_readout() {
        assert!((frequency_of_xi(-2.0 * (0.011_f64).cos(), 1e-4) - 110.0).abs() < 1e-6);
        assert!((frequency_of_xi(0.0, 1e-4) - std::f64::consts::FRAC_PI_2 / 1e-4).abs() < 1e-9);
        let clamped = frequency_of_xi(-2.5, 1e-4);
        assert!(clamped.is_finite());
        assert!((clamped - (1.0_f64 - 1e-9).acos() / 1e-4).abs() < 1e-9);
        assert!(frequency_of_xi(2.5, 1e-4).is_finite());
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(batch_xi_oracle(&[0.0; 5], &[1.0; 5], 0.999, 1000.0, 5).unwrap(), 0.0);
        assert_eq!(batch_xi_oracle(&[1.0], &[1.0], 1.0, 0.0, 1).unwrap(), 1.0);
        assert!(batch_xi_oracle(&[1.0], &[1.0], 1.0, 0.0, 0).is_err());
        assert!(batch_xi_oracle(&[1.0], &[1.0], 1.0, 0.0, 2).is_err());
    }

    #[test]
    fn recursion_matches_oracle() {
        let alphas: Vec<f64> = (0..100).map(|n| (0.37 * n as f64).sin() + 0.1).collect();
        let targets: Vec<f64> = (0..100).map(|n| (0.11 * n as f64).cos()).collect();
        let mut rls = RlsScalar::new(0.0, 1000.0, 0.999).unwrap();
        for h in 1..=100 {
            rls.update(alphas[h - 1], targets[h - 1]);
            let batch = batch_xi_oracle(&alphas, &targets, 0.999, 1000.0, h).unwrap();
            assert!((rls.xi() - batch).abs() <= 1e-9 * batch.abs().max(1e-12));
        }
    }

    #[test]
    fn gain_identity_and_freeze() {
        let mut rls = RlsScalar::new(-1.5, 10.0, 0.99).unwrap();
        let u = rls.update(0.3, -1.5 * 0.3);
        assert_eq!(u.error, 0.0);
        assert_eq!(u.xi, -1.5);
        assert!((u.gain * (0.99 + u.p_prev * 0.09) - u.p_prev * 0.3).abs() < 1e-15);
    }
}
