//! Closed-loop simulation harness: a double-integrator plant under PD
//! control, harmonic disturbance generators, baseline compensators and the
//! scripted experiments.
//!
//! Sign convention: the plant torque is `u(k−1) − d_p(k)`, so the observers'
//! disturbance image `ε = y_inv − u(k−1)` approximates `−d_p`. Observer
//! outputs are therefore negated before they are applied as compensation.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::adaptive::{AdaptivePdob, AdaptivePdobConfig, FrequencyTracker};
use crate::anf::AnfConfig;
use crate::error::{require, Error, Result};
use crate::pdob::{Pdob, PdobConfig};
use crate::signal::{
    dft_magnitude, rms, unit_delay, window_indices, DelayLine, FirstOrderLowPass,
    LowPassCoefficients, PseudoDifferentiator, Spectrum,
};

/// Double integrator `x = (1/J)(T/(1−z⁻¹))²[u z⁻¹ − d_p]` with
/// `u = K_t I + d̂_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantDoubleIntegrator {
    inertia: f64,
    torque_constant: f64,
    sample_time: f64,
    velocity: f64,
    position: f64,
    pending_input: f64,
}

impl PlantDoubleIntegrator {
    pub fn new(inertia: f64, torque_constant: f64, sample_time: f64) -> Result<Self> {
        require(inertia > 0.0, "J", inertia, "J > 0")?;
        require(torque_constant > 0.0, "Kt", torque_constant, "Kt > 0")?;
        require(sample_time > 0.0, "Tk", sample_time, "Tk > 0")?;
        Ok(Self {
            inertia,
            torque_constant,
            sample_time,
            velocity: 0.0,
            position: 0.0,
            pending_input: 0.0,
        })
    }

    /// Start from a nonzero position at rest.
    pub fn with_position(mut self, position: f64) -> Self {
        self.position = position;
        self
    }

    /// Advance one sample using the input stored by the previous
    /// [`apply`](Self::apply) and the current disturbance.
    pub fn advance(&mut self, disturbance: f64) -> f64 {
        let torque = self.pending_input - disturbance;
        self.velocity += self.sample_time * torque / self.inertia;
        self.position += self.sample_time * self.velocity;
        self.position
    }

    /// Store `K_t I + d̂_p`, which reaches the plant on the next sample.
    pub fn apply(&mut self, current: f64, compensation: f64) {
        self.pending_input = self.torque_constant * current + compensation;
    }

    /// `apply` followed by `advance`.
    pub fn step(&mut self, current: f64, compensation: f64, disturbance: f64) -> f64 {
        self.apply(current, compensation);
        self.advance(disturbance)
    }

    /// Input applied on the most recent `advance`, i.e. `u(k−1)`.
    pub fn applied_input(&self) -> f64 {
        self.pending_input
    }

    pub fn position(&self) -> f64 {
        self.position
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }
}

/// Piecewise-constant fundamental schedule plus per-harmonic amplitudes:
/// `d_p(k) = Σ a_n sin(n ω₀(k) T k)`, optionally with an aperiodic step.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceGenerator {
    amplitudes: Vec<f64>,
    /// `(start time, fundamental)` pairs sorted by start time.
    schedule: Vec<(f64, f64)>,
    aperiodic: Option<(f64, f64)>,
    sample_time: f64,
}

impl DisturbanceGenerator {
    pub fn new(harmonics: usize, omega0: f64, sample_time: f64) -> Result<Self> {
        require(sample_time > 0.0, "Tk", sample_time, "Tk > 0")?;
        require(omega0 >= 0.0, "omega0", omega0, "omega0 >= 0")?;
        Ok(Self {
            amplitudes: vec![1.0; harmonics],
            schedule: vec![(0.0, omega0)],
            aperiodic: None,
            sample_time,
        })
    }

    /// Switch the fundamental to `omega0` from time `at` on.
    pub fn with_step(mut self, at: f64, omega0: f64) -> Self {
        self.schedule.push((at, omega0));
        self.schedule.sort_by(|a, b| a.0.total_cmp(&b.0));
        self
    }

    pub fn with_amplitudes(mut self, amplitudes: Vec<f64>) -> Self {
        self.amplitudes = amplitudes;
        self
    }

    /// Add a constant `magnitude` from time `at` on.
    pub fn with_aperiodic_step(mut self, at: f64, magnitude: f64) -> Self {
        self.aperiodic = Some((at, magnitude));
        self
    }

    pub fn harmonics(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn fundamental_at(&self, k: usize) -> f64 {
        let t = self.sample_time * k as f64;
        self.schedule
            .iter()
            .rev()
            .find(|(start, _)| t >= *start)
            .map_or(self.schedule[0].1, |&(_, w)| w)
    }

    pub fn value(&self, k: usize) -> f64 {
        let t = self.sample_time * k as f64;
        let phase = self.fundamental_at(k) * t;
        let periodic: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(n, a)| a * ((n + 1) as f64 * phase).sin())
            .sum();
        match self.aperiodic {
            Some((at, magnitude)) if t >= at => periodic + magnitude,
            _ => periodic,
        }
    }
}

/// `I = −(J/K_t)(k_p + k_d D(z))·e` with `D` a pseudo differentiator.
#[derive(Debug, Clone, PartialEq)]
pub struct PdController {
    scale: f64,
    kp: f64,
    kd: f64,
    differentiator: PseudoDifferentiator,
}

impl PdController {
    pub fn new(inertia: f64, torque_constant: f64, kp: f64, kd: f64, diff_cutoff: f64, sample_time: f64) -> Result<Self> {
        Ok(Self {
            scale: inertia / torque_constant,
            kp,
            kd,
            differentiator: PseudoDifferentiator::new(diff_cutoff, sample_time)?,
        })
    }

    pub fn step(&mut self, x: f64) -> Result<f64> {
        let derivative = self.differentiator.step(x)?;
        Ok(-self.scale * (self.kp * x + self.kd * derivative))
    }
}

/// Causal inverse of the nominal double integrator: `J·D(D(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct InversePlant {
    inertia: f64,
    first: PseudoDifferentiator,
    second: PseudoDifferentiator,
}

impl InversePlant {
    pub fn new(inertia: f64, cutoff: f64, sample_time: f64) -> Result<Self> {
        Ok(Self {
            inertia,
            first: PseudoDifferentiator::new(cutoff, sample_time)?,
            second: PseudoDifferentiator::new(cutoff, sample_time)?,
        })
    }

    pub fn step(&mut self, x: f64) -> Result<f64> {
        let velocity = self.first.step(x)?;
        Ok(self.inertia * self.second.step(velocity)?)
    }
}

/// Classical observer with `Q` the first-order lag alone.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineDob {
    lowpass: FirstOrderLowPass,
}

impl BaselineDob {
    pub fn new(cutoff: f64, sample_time: f64) -> Result<Self> {
        Ok(Self {
            lowpass: FirstOrderLowPass::new(cutoff, sample_time)?,
        })
    }

    /// Filtered disturbance image `q·(y_inv − u(k−1))`.
    pub fn step(&mut self, u_prev: f64, y_inv: f64) -> Result<f64> {
        self.lowpass.step(y_inv - u_prev)
    }
}

/// Plug-in repetitive controller. The internal model stores
/// `w = v + k_r·e` and replays it one period later through the lag `q`:
/// `v(k) = q(w(k − N + m))`. The lead `m` offsets the phase lag of `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRc {
    line: DelayLine,
    lowpass: FirstOrderLowPass,
    gain: f64,
    lead: usize,
    output: f64,
}

impl BaselineRc {
    pub fn new(period: usize, cutoff: f64, gain: f64, lead: usize, sample_time: f64) -> Result<Self> {
        require(lead < period, "rc_lead", lead as f64, "lead < period")?;
        require(gain > 0.0 && gain <= 1.0, "rc_gain", gain, "0 < k_r <= 1")?;
        Ok(Self {
            line: DelayLine::new(period)?,
            lowpass: FirstOrderLowPass::new(cutoff, sample_time)?,
            gain,
            lead,
            output: 0.0,
        })
    }

    /// Lead that cancels the group delay `1/g` of the lag.
    pub fn default_lead(cutoff: f64, sample_time: f64) -> usize {
        (1.0 / (cutoff * sample_time)).round() as usize
    }

    /// Advance with the tracking error; returns the correction `v(k)` added
    /// to the command seen by the feedback controller.
    pub fn step(&mut self, error: f64) -> Result<f64> {
        let replay = self.line.read(self.line.capacity() - self.lead);
        self.output = self.lowpass.step(replay)?;
        self.line.push(self.output + self.gain * error);
        Ok(self.output)
    }

    /// Gain around the internal-model loop at `omega`, given the
    /// complementary sensitivity `T_c` of the feedback loop it wraps:
    /// `|q·z^{−(N−m)}·(1 − k_r T_c)|`.
    pub fn loop_gain(&self, omega: f64, complementary: Complex64) -> f64 {
        let t = self.lowpass.sample_time();
        let q = self.lowpass.response(omega);
        let delay = Complex64::from_polar(1.0, -omega * t * (self.line.capacity() - self.lead) as f64);
        (q * delay * (1.0 - self.gain * complementary)).norm()
    }
}

/// Complementary sensitivity of the PD loop around the double integrator,
/// using the discrete realizations above.
pub fn pd_complementary_sensitivity(params: &SimParams, omega: f64) -> Complex64 {
    if omega == 0.0 {
        // Double integrator: infinite loop gain at DC.
        return Complex64::new(1.0, 0.0);
    }
    let t = params.sample_time;
    let z1 = unit_delay(omega, t);
    let lag = LowPassCoefficients::backward_difference(params.diff_cutoff, t).response(omega, t);
    let derivative = (1.0 - z1) / t * lag;
    let integrators = t * t * z1 / ((1.0 - z1) * (1.0 - z1));
    let open = integrators * (params.kp + params.kd * derivative);
    open / (1.0 + open)
}

/// Disturbance compensation scheme applied in a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    NoCompensation,
    Dob,
    Rc,
    RcWithDob,
    Pdob,
    AdaptivePdob,
    /// Feeds the true upcoming disturbance as compensation.
    OracleFeed,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::NoCompensation => "none",
            Method::Dob => "dob",
            Method::Rc => "rc",
            Method::RcWithDob => "rc_dob",
            Method::Pdob => "pdob",
            Method::AdaptivePdob => "adaptive_pdob",
            Method::OracleFeed => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Parameters shared by the closed-loop experiments. Defaults follow the
/// simulation table: `T = 0.1 ms`, `J = 0.0028`, `K_t = 1.18`, `ω₀ = 10`,
/// `γ = 0.7`, `g = 1000`, `r = 0.7`, `κ = 10`, `λ = 0.999`, `δ = 1000`,
/// `g_a = g_b = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub sample_time: f64,
    pub inertia: f64,
    pub torque_constant: f64,
    pub omega0: f64,
    pub gamma: f64,
    pub cutoff: f64,
    pub radius: f64,
    pub kappa: usize,
    pub lambda: f64,
    pub delta: f64,
    pub smoothing_cutoff: f64,
    pub bandpass_width: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub harmonics: usize,
    pub duration: f64,
    pub dob_cutoff: f64,
    pub rc_cutoff: f64,
    pub rc_gain: f64,
    /// `None` selects [`BaselineRc::default_lead`].
    pub rc_lead: Option<usize>,
    pub kp: f64,
    pub kd: f64,
    pub diff_cutoff: f64,
    /// Standard deviation of additive position-measurement noise.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            sample_time: 1e-4,
            inertia: 0.0028,
            torque_constant: 1.18,
            omega0: 10.0,
            gamma: 0.7,
            cutoff: 1000.0,
            radius: 0.7,
            kappa: 10,
            lambda: 0.999,
            delta: 1000.0,
            smoothing_cutoff: 1.0,
            bandpass_width: 1.0,
            omega_min: 5.0,
            omega_max: 20.0,
            harmonics: 20,
            duration: 100.0,
            dob_cutoff: 1000.0,
            rc_cutoff: 1000.0,
            rc_gain: 0.5,
            rc_lead: None,
            kp: 2500.0,
            kd: 100.0,
            diff_cutoff: 1000.0,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn steps(&self) -> usize {
        (self.duration / self.sample_time).round() as usize
    }

    pub fn pdob_config(&self) -> Result<PdobConfig> {
        PdobConfig::new(self.omega0, self.gamma, self.cutoff, self.sample_time)
    }

    pub fn anf_config(&self) -> AnfConfig {
        AnfConfig {
            radius: self.radius,
            kappa: self.kappa,
            lambda: self.lambda,
            delta: self.delta,
            initial_omega: self.omega0,
            sample_time: self.sample_time,
        }
    }

    pub fn adaptive_config(&self) -> Result<AdaptivePdobConfig> {
        Ok(AdaptivePdobConfig::new(
            self.pdob_config()?,
            self.anf_config(),
            self.smoothing_cutoff,
            self.bandpass_width,
        )
        .with_bounds(self.omega_min, self.omega_max))
    }

    /// Repetitive controller with period `2π/(T ω₀)`.
    pub fn baseline_rc(&self) -> Result<BaselineRc> {
        let period = (2.0 * PI / (self.sample_time * self.omega0)).round() as usize;
        let lead = self
            .rc_lead
            .unwrap_or_else(|| BaselineRc::default_lead(self.rc_cutoff, self.sample_time));
        BaselineRc::new(period, self.rc_cutoff, self.rc_gain, lead, self.sample_time)
    }
}

/// Time-indexed traces of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub label: String,
    pub sample_time: f64,
    pub time: Vec<f64>,
    /// Plant output, or the estimator input for open-loop studies.
    pub x_res: Vec<f64>,
    /// Applied compensation, or the band-pass output for open-loop studies.
    pub d_hat: Vec<f64>,
    /// Frequency estimate; constant at the design value for fixed schemes.
    pub omega_hat: Vec<f64>,
    pub params: SimParams,
}

impl ExperimentRecord {
    fn with_capacity(label: String, params: SimParams, samples: usize) -> Self {
        Self {
            label,
            sample_time: params.sample_time,
            time: Vec::with_capacity(samples),
            x_res: Vec::with_capacity(samples),
            d_hat: Vec::with_capacity(samples),
            omega_hat: Vec::with_capacity(samples),
            params,
        }
    }

    fn push(&mut self, k: usize, x: f64, d: f64, omega: f64) {
        self.time.push(self.sample_time * k as f64);
        self.x_res.push(x);
        self.d_hat.push(d);
        self.omega_hat.push(omega);
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// RMS of the output over `[start, end)` seconds.
    pub fn rms_over(&self, window: (f64, f64)) -> Result<f64> {
        let (a, b) = window_indices(self.len(), self.sample_time, window)?;
        rms(&self.x_res[a..b])
    }

    pub fn spectrum(&self, window: (f64, f64), freqs: &[f64]) -> Result<Spectrum> {
        dft_magnitude(&self.x_res, self.sample_time, window, freqs)
    }
}

enum Compensator {
    None,
    Dob(BaselineDob),
    Rc(BaselineRc, Option<BaselineDob>),
    Pdob(Pdob),
    Adaptive(Box<AdaptivePdob>),
    Oracle,
}

/// One closed-loop run of `method` against `disturbance`.
pub fn run_closed_loop(
    method: Method,
    params: &SimParams,
    disturbance: &DisturbanceGenerator,
) -> Result<ExperimentRecord> {
    run_closed_loop_from(method, params, disturbance, 0.0)
}

/// Closed-loop run starting from a nonzero position at rest.
pub fn run_closed_loop_from(
    method: Method,
    params: &SimParams,
    disturbance: &DisturbanceGenerator,
    initial_position: f64,
) -> Result<ExperimentRecord> {
    let t = params.sample_time;
    let mut plant = PlantDoubleIntegrator::new(params.inertia, params.torque_constant, t)?
        .with_position(initial_position);
    let mut controller = PdController::new(
        params.inertia,
        params.torque_constant,
        params.kp,
        params.kd,
        params.diff_cutoff,
        t,
    )?;
    let mut inverse = InversePlant::new(params.inertia, params.diff_cutoff, t)?;
    let mut compensator = match method {
        Method::NoCompensation => Compensator::None,
        Method::Dob => Compensator::Dob(BaselineDob::new(params.dob_cutoff, t)?),
        Method::Rc => Compensator::Rc(params.baseline_rc()?, None),
        Method::RcWithDob => Compensator::Rc(
            params.baseline_rc()?,
            Some(BaselineDob::new(params.dob_cutoff, t)?),
        ),
        Method::Pdob => Compensator::Pdob(Pdob::new(params.pdob_config()?)?),
        Method::AdaptivePdob => {
            Compensator::Adaptive(Box::new(AdaptivePdob::new(params.adaptive_config()?)?))
        }
        Method::OracleFeed => Compensator::Oracle,
    };
    let mut noise = if params.noise_std > 0.0 {
        let normal = Normal::new(0.0, params.noise_std).map_err(|_| Error::InvalidParameter {
            name: "noise_std",
            value: params.noise_std,
            constraint: "finite noise_std >= 0",
        })?;
        Some((ChaCha8Rng::seed_from_u64(params.seed), normal))
    } else {
        None
    };

    let steps = params.steps();
    let mut record = ExperimentRecord::with_capacity(method.label().to_string(), *params, steps);
    let mut omega = params.omega0;
    for k in 0..steps {
        let x = plant.advance(disturbance.value(k));
        let measured = match noise.as_mut() {
            Some((rng, normal)) => x + normal.sample(rng),
            None => x,
        };
        let u_prev = plant.applied_input();
        let mut reference = 0.0;
        let compensation = match &mut compensator {
            Compensator::None => 0.0,
            Compensator::Dob(dob) => -dob.step(u_prev, inverse.step(measured)?)?,
            Compensator::Rc(rc, inner) => {
                reference = rc.step(-measured)?;
                match inner {
                    Some(dob) => -dob.step(u_prev, inverse.step(measured)?)?,
                    None => 0.0,
                }
            }
            Compensator::Pdob(pdob) => -pdob.step(u_prev, inverse.step(measured)?)?,
            Compensator::Adaptive(adaptive) => {
                let out = adaptive.step(u_prev, inverse.step(measured)?)?;
                omega = out.omega_hat;
                -out.estimate
            }
            Compensator::Oracle => disturbance.value(k + 1),
        };
        let current = controller.step(measured - reference)?;
        plant.apply(current, compensation);
        record.push(k, x, compensation, omega);
    }
    Ok(record)
}

/// Runs each method on its own thread and returns the records in order.
pub fn run_methods(
    methods: &[Method],
    params: &SimParams,
    disturbance: &DisturbanceGenerator,
) -> Result<Vec<ExperimentRecord>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = methods
            .iter()
            .map(|&m| scope.spawn(move || run_closed_loop(m, params, disturbance)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

/// Per-method summary of a closed-loop experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub label: String,
    pub steady_rms: f64,
    pub final_rms: f64,
    pub first_period_rms: f64,
    pub spectrum: Spectrum,
    pub final_omega_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub records: Vec<ExperimentRecord>,
    pub summaries: Vec<MethodSummary>,
    /// Window used for the steady-state RMS and spectra.
    pub steady_window: (f64, f64),
    pub final_window: (f64, f64),
}

impl ExperimentOutcome {
    pub fn summary(&self, label: &str) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.label == label)
    }

    pub fn record(&self, label: &str) -> Option<&ExperimentRecord> {
        self.records.iter().find(|r| r.label == label)
    }
}

fn summarize(
    records: Vec<ExperimentRecord>,
    params: &SimParams,
    steady_window: (f64, f64),
    final_window: (f64, f64),
) -> Result<ExperimentOutcome> {
    let freqs: Vec<f64> = (1..=params.harmonics)
        .map(|n| n as f64 * params.omega0)
        .filter(|&w| w < PI / params.sample_time)
        .collect();
    let period = (2.0 * PI / params.omega0).min(params.duration);
    let summaries = records
        .iter()
        .map(|r| {
            Ok(MethodSummary {
                label: r.label.clone(),
                steady_rms: r.rms_over(steady_window)?,
                final_rms: r.rms_over(final_window)?,
                first_period_rms: r.rms_over((0.0, period))?,
                spectrum: r.spectrum(steady_window, &freqs)?,
                final_omega_hat: *r.omega_hat.last().ok_or(Error::Empty("record"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutcome {
        records,
        summaries,
        steady_window,
        final_window,
    })
}

/// `[start, duration)`, with `start` pulled back to mid-run for short runs.
fn window_from(duration: f64, start: f64) -> (f64, f64) {
    (start.clamp(0.0, 0.5 * duration), duration)
}

/// Last 10 s, or the second half of runs shorter than 20 s.
fn final_window(duration: f64) -> (f64, f64) {
    ((duration - 10.0).max(0.5 * duration), duration)
}

/// Constant fundamental; compares the repetitive controller, the classical
/// observer and the periodic observer. Steady state is 20 s to the end.
pub fn run_simulation_1(params: &SimParams) -> Result<ExperimentOutcome> {
    let disturbance = DisturbanceGenerator::new(params.harmonics, params.omega0, params.sample_time)?;
    let records = run_methods(&[Method::Rc, Method::Dob, Method::Pdob], params, &disturbance)?;
    summarize(
        records,
        params,
        window_from(params.duration, 20.0),
        final_window(params.duration),
    )
}

/// Fundamental step for the second experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyStep {
    pub at: f64,
    pub omega: f64,
}

impl FrequencyStep {
    /// 10 % step at 40 s.
    pub fn standard(params: &SimParams) -> Self {
        Self {
            at: 40.0,
            omega: 1.1 * params.omega0,
        }
    }
}

/// Fundamental steps during the run; compares the fixed-delay observer with
/// the adaptive one. The final window is the last 10 s.
pub fn run_simulation_2(params: &SimParams, step: FrequencyStep) -> Result<ExperimentOutcome> {
    let disturbance = DisturbanceGenerator::new(params.harmonics, params.omega0, params.sample_time)?
        .with_step(step.at, step.omega);
    let records = run_methods(&[Method::Pdob, Method::AdaptivePdob], params, &disturbance)?;
    summarize(
        records,
        params,
        window_from(params.duration, 0.5 * step.at),
        final_window(params.duration),
    )
}

/// Estimator input for the open-loop step studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInput {
    pub harmonics: usize,
    pub omega_before: f64,
    pub omega_after: f64,
    pub step_time: f64,
    pub duration: f64,
}

impl StepInput {
    /// Single tone stepping 100 → 110 rad/s at 3 s.
    pub fn tone() -> Self {
        Self {
            harmonics: 1,
            omega_before: 100.0,
            omega_after: 110.0,
            step_time: 3.0,
            duration: 10.0,
        }
    }

    /// Ten equal harmonics stepping 100 → 110 rad/s at 3 s.
    pub fn harmonic() -> Self {
        Self {
            harmonics: 10,
            ..Self::tone()
        }
    }

    pub fn generator(&self, sample_time: f64) -> Result<DisturbanceGenerator> {
        Ok(DisturbanceGenerator::new(self.harmonics, self.omega_before, sample_time)?
            .with_step(self.step_time, self.omega_after))
    }
}

/// Parameters of the band-pass and estimator chain in an open-loop study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerParams {
    pub anf: AnfConfig,
    pub smoothing_cutoff: f64,
    pub bandpass_width: f64,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl TrackerParams {
    /// `r = 0.7`, `κ = 10`, `λ = 0.999`, `δ = 1000`, `g_a = g_b = 1000`,
    /// starting at 100 rad/s with `T = 0.1 ms` and bounds `[50, 200]`.
    pub fn standard() -> Self {
        Self {
            anf: AnfConfig {
                radius: 0.7,
                kappa: 10,
                lambda: 0.999,
                delta: 1000.0,
                initial_omega: 100.0,
                sample_time: 1e-4,
            },
            smoothing_cutoff: 1000.0,
            bandpass_width: 1000.0,
            omega_min: 50.0,
            omega_max: 200.0,
        }
    }

    pub fn tracker(&self) -> Result<FrequencyTracker> {
        FrequencyTracker::new(
            self.anf,
            self.smoothing_cutoff,
            self.bandpass_width,
            self.omega_min,
            self.omega_max,
        )
    }
}

/// Single parameter changed from the base setting in a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StudyVariant {
    Base,
    Radius(f64),
    Kappa(usize),
    Lambda(f64),
    Delta(f64),
    SmoothingCutoff(f64),
    BandpassWidth(f64),
    Smoothing(f64, f64),
}

impl StudyVariant {
    pub fn apply(&self, base: TrackerParams) -> TrackerParams {
        let mut p = base;
        match *self {
            StudyVariant::Base => {}
            StudyVariant::Radius(r) => p.anf.radius = r,
            StudyVariant::Kappa(k) => p.anf.kappa = k,
            StudyVariant::Lambda(l) => p.anf.lambda = l,
            StudyVariant::Delta(d) => p.anf.delta = d,
            StudyVariant::SmoothingCutoff(g) => p.smoothing_cutoff = g,
            StudyVariant::BandpassWidth(g) => p.bandpass_width = g,
            StudyVariant::Smoothing(ga, gb) => {
                p.smoothing_cutoff = ga;
                p.bandpass_width = gb;
            }
        }
        p
    }

    pub fn label(&self) -> String {
        match *self {
            StudyVariant::Base => "base".to_string(),
            StudyVariant::Radius(r) => format!("r={r}"),
            StudyVariant::Kappa(k) => format!("kappa={k}"),
            StudyVariant::Lambda(l) => format!("lambda={l}"),
            StudyVariant::Delta(d) => format!("delta={d}"),
            StudyVariant::SmoothingCutoff(g) => format!("g_a={g}"),
            StudyVariant::BandpassWidth(g) => format!("g_b={g}"),
            StudyVariant::Smoothing(ga, gb) => format!("g_a={ga},g_b={gb}"),
        }
    }
}

/// Open-loop run of the band-pass and estimator on a scripted input.
/// `x_res` holds the input, `d_hat` the band-pass output.
pub fn run_tracker(label: String, tracker: TrackerParams, input: &StepInput) -> Result<ExperimentRecord> {
    let t = tracker.anf.sample_time;
    let generator = input.generator(t)?;
    let mut chain = tracker.tracker()?;
    let params = SimParams {
        sample_time: t,
        omega0: tracker.anf.initial_omega,
        radius: tracker.anf.radius,
        kappa: tracker.anf.kappa,
        lambda: tracker.anf.lambda,
        delta: tracker.anf.delta,
        smoothing_cutoff: tracker.smoothing_cutoff,
        bandpass_width: tracker.bandpass_width,
        omega_min: tracker.omega_min,
        omega_max: tracker.omega_max,
        harmonics: input.harmonics,
        duration: input.duration,
        ..SimParams::default()
    };
    let steps = params.steps();
    let mut record = ExperimentRecord::with_capacity(label, params, steps);
    for k in 0..steps {
        let x = generator.value(k);
        let out = chain.step(x)?;
        record.push(k, x, out.d_tilde, out.omega_hat);
    }
    Ok(record)
}

/// Runs each variant of `base` in parallel on the same input.
pub fn run_step_frequency_study(
    base: TrackerParams,
    input: &StepInput,
    variants: &[StudyVariant],
) -> Result<Vec<ExperimentRecord>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = variants
            .iter()
            .map(|v| scope.spawn(move || run_tracker(v.label(), v.apply(base), input)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("study thread panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(duration: f64) -> SimParams {
        SimParams {
            duration,
            ..SimParams::default()
        }
    }

    #[test]
    fn plant_rests_without_input() {
        let mut plant = PlantDoubleIntegrator::new(0.0028, 1.18, 1e-4).unwrap();
        assert!((0..1000).all(|_| plant.step(0.0, 0.0, 0.0) == 0.0));
    }

    #[test]
    fn plant_constant_torque() {
        let (j, t, tau) = (0.0028, 1e-4, 0.5);
        let mut plant = PlantDoubleIntegrator::new(j, 1.18, t).unwrap();
        plant.apply(0.0, tau);
        let mut x = 0.0;
        for k in 1..=2000 {
            x = plant.advance(0.0);
            plant.apply(0.0, tau);
            if k >= 1000 {
                let expected = tau * (t * k as f64).powi(2) / (2.0 * j);
                assert!((x - expected).abs() < 0.01 * expected);
            }
        }
        assert!(x > 0.0);
    }

    #[test]
    fn plant_cancellation() {
        let mut plant = PlantDoubleIntegrator::new(0.0028, 1.18, 1e-4).unwrap();
        for k in 0..1000 {
            let d = (k as f64 * 0.01).sin();
            plant.advance(d);
            plant.apply(0.3, (k as f64 * 0.01 + 0.01).sin() - 1.18 * 0.3);
        }
        assert!(plant.position().abs() < 1e-12);
    }

    #[test]
    fn controller_examples() {
        let mut pd = PdController::new(0.0028, 1.18, 2500.0, 100.0, 1000.0, 1e-4).unwrap();
        assert!((0..100).all(|_| pd.step(0.0).unwrap() == 0.0));
        let mut i = 0.0;
        for _ in 0..5000 {
            i = pd.step(0.2).unwrap();
        }
        assert!((i + 0.0028 / 1.18 * 2500.0 * 0.2).abs() < 1e-12);
    }

    #[test]
    fn controller_regulates_initial_position() {
        let p = short(5.0);
        let quiet = DisturbanceGenerator::new(0, 10.0, p.sample_time).unwrap();
        let rec = run_closed_loop_from(Method::NoCompensation, &p, &quiet, 0.01).unwrap();
        assert!(rec.x_res.iter().all(|x| x.is_finite() && x.abs() < 0.02));
        assert!(rec.x_res.last().unwrap().abs() < 1e-6);
    }

    #[test]
    fn disturbance_follows_schedule() {
        let g = DisturbanceGenerator::new(3, 10.0, 1e-3)
            .unwrap()
            .with_step(1.0, 11.0)
            .with_aperiodic_step(2.0, 0.5);
        for &k in &[10usize, 999, 1000, 2500] {
            let t = k as f64 * 1e-3;
            let w = if t < 1.0 { 10.0 } else { 11.0 };
            let mut expected: f64 = (1..=3).map(|n| (n as f64 * w * t).sin()).sum();
            if t >= 2.0 {
                expected += 0.5;
            }
            assert_eq!(g.value(k), expected);
        }
    }

    #[test]
    fn dob_converges_on_constant() {
        let (g, t) = (1000.0, 1e-5);
        let mut dob = BaselineDob::new(g, t).unwrap();
        let steps = (5.0 / g / t) as usize;
        let mut d = 0.0;
        for _ in 0..steps {
            d = dob.step(0.0, 1.0).unwrap();
        }
        assert!((d - 1.0).abs() < 0.01);
        for _ in 0..steps * 4 {
            d = dob.step(0.0, 1.0).unwrap();
        }
        assert!((d - 1.0).abs() < 1e-6);
    }

    fn dob_residual(omega: f64, g: f64, t: f64) -> f64 {
        let mut dob = BaselineDob::new(g, t).unwrap();
        let period = (2.0 * PI / (omega * t)) as usize;
        let steps = (20.0 / (g * t)) as usize + 20 * period;
        let mut peak = 0.0_f64;
        for k in 0..steps {
            let x = (omega * t * k as f64).sin();
            let d = dob.step(0.0, x).unwrap();
            if k + 2 * period >= steps {
                peak = peak.max((x - d).abs());
            }
        }
        peak
    }

    #[test]
    fn dob_residuals() {
        let at_cutoff = dob_residual(1000.0, 1000.0, 1e-6);
        assert!((at_cutoff - 0.5_f64.sqrt()).abs() < 0.02 * 0.5_f64.sqrt(), "{at_cutoff}");
        let high = dob_residual(1000.0, 10.0, 1e-5);
        assert!((high - 1.0).abs() < 0.02, "{high}");
    }

    #[test]
    fn rc_zero_error_zero_output() {
        let mut rc = SimParams::default().baseline_rc().unwrap();
        assert!((0..20_000).all(|_| rc.step(0.0).unwrap() == 0.0));
    }

    #[test]
    fn rc_internal_loop_gain_below_one_at_dc() {
        let p = SimParams::default();
        let rc = p.baseline_rc().unwrap();
        let tc = pd_complementary_sensitivity(&p, 0.0);
        assert!((tc - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((rc.loop_gain(0.0, tc) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rc_reduces_periodic_error() {
        let p = short(20.0);
        let d = DisturbanceGenerator::new(3, p.omega0, p.sample_time).unwrap();
        let plain = run_closed_loop(Method::NoCompensation, &p, &d).unwrap();
        let rc = run_closed_loop(Method::Rc, &p, &d).unwrap();
        let w = (15.0, 20.0);
        assert!(rc.rms_over(w).unwrap() < 0.2 * plain.rms_over(w).unwrap());
        let v_early = rc.x_res[..6283].iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(v_early > rc.rms_over(w).unwrap());
    }

    #[test]
    fn rc_amplifies_half_harmonic() {
        let p = short(20.0);
        let d = DisturbanceGenerator::new(1, 15.0, p.sample_time).unwrap();
        let plain = run_closed_loop(Method::NoCompensation, &p, &d).unwrap();
        let rc = run_closed_loop(Method::Rc, &p, &d).unwrap();
        let w = (15.0, 20.0);
        let ratio = rc.rms_over(w).unwrap() / plain.rms_over(w).unwrap();
        assert!(ratio >= 1.0, "{ratio}");
    }

    #[test]
    fn oracle_feed_matches_quiet_run() {
        let p = short(3.0);
        let d = DisturbanceGenerator::new(20, p.omega0, p.sample_time).unwrap();
        let quiet = DisturbanceGenerator::new(0, p.omega0, p.sample_time).unwrap();
        let fed = run_closed_loop_from(Method::OracleFeed, &p, &d, 1e-3).unwrap();
        let reference = run_closed_loop_from(Method::NoCompensation, &p, &quiet, 1e-3).unwrap();
        for (a, b) in fed.x_res.iter().zip(&reference.x_res) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn quiet_runs_stay_at_rest() {
        let p = short(2.0);
        let quiet = DisturbanceGenerator::new(20, 0.0, p.sample_time).unwrap();
        for m in [Method::Rc, Method::Dob, Method::Pdob, Method::AdaptivePdob] {
            let rec = run_closed_loop(m, &p, &quiet).unwrap();
            assert!(rms(&rec.x_res).unwrap() < 1e-9, "{m}");
        }
    }

    #[test]
    fn records_are_deterministic() {
        let p = SimParams {
            noise_std: 1e-6,
            seed: 7,
            ..short(1.0)
        };
        let d = DisturbanceGenerator::new(20, p.omega0, p.sample_time).unwrap();
        let a = run_closed_loop(Method::AdaptivePdob, &p, &d).unwrap();
        let b = run_closed_loop(Method::AdaptivePdob, &p, &d).unwrap();
        assert_eq!(a, b);
        let c = run_closed_loop(Method::AdaptivePdob, &SimParams { seed: 8, ..p }, &d).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn record_traces_share_length() {
        let rec = run_closed_loop(Method::Dob, &short(0.5), &DisturbanceGenerator::new(2, 10.0, 1e-4).unwrap()).unwrap();
        assert_eq!(rec.len(), 5000);
        assert!(rec.x_res.len() == rec.len() && rec.d_hat.len() == rec.len() && rec.omega_hat.len() == rec.len());
    }

    #[test]
    fn study_labels_and_overrides() {
        let base = TrackerParams::standard();
        assert_eq!(StudyVariant::Radius(0.9).apply(base).anf.radius, 0.9);
        assert_eq!(StudyVariant::Smoothing(1.0, 10.0).label(), "g_a=1,g_b=10");
        let input = StepInput { duration: 0.5, ..StepInput::tone() };
        let recs = run_step_frequency_study(base, &input, &[StudyVariant::Base, StudyVariant::Kappa(2)]).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].label, "kappa=2");
        assert_eq!(recs[0].len(), 5000);
    }
}
