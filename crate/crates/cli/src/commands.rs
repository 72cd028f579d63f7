use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pdob_core::adaptive::FrequencyTracker;
use pdob_core::pdob::{
    dob_frequency_response, frequency_response, fundamental_suppression_gain,
    robust_stability_margin, sensitivity_gain, FrequencyResponsePoint, LoopDelay, PdobConfig,
};
use pdob_core::signal::nyquist;
use pdob_core::sim::{
    run_simulation_1, run_simulation_2, run_step_frequency_study, ExperimentOutcome,
    ExperimentRecord, FrequencyStep, StepInput, StudyVariant, TrackerParams,
};

use crate::config::{Experiment, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{create_dir, file_stem, write_text, CsvFile};

pub const TRACE_HEADER: [&str; 4] = ["time_s", "x_res", "d_hat", "omega_hat"];
pub const RESPONSE_HEADER: [&str; 3] = ["omega_rad_s", "sensitivity_mag", "complementary_mag"];
pub const DFT_HEADER: [&str; 3] = ["method", "omega_rad_s", "magnitude"];
pub const ESTIMATE_HEADER: [&str; 3] = ["time_s", "omega_tilde", "omega_hat"];
pub const WEIGHT_HEADER: [&str; 2] = ["omega_rad_s", "weight_mag"];

/// Named check evaluated against a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl SimulateOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn prepare(config: &RunConfig) -> Result<PathBuf> {
    create_dir(&config.outdir)?;
    config.echo()
}

/// Zero, a 400-point log grid from 0.1 rad/s to 0.9 of Nyquist and the
/// disturbance harmonics, sorted without duplicates.
pub fn frequency_grid(config: &RunConfig) -> Vec<f64> {
    let top = 0.9 * nyquist(config.tk);
    let (lo, hi) = (0.1f64.log10(), top.log10());
    let points = 400;
    let mut grid = vec![0.0];
    grid.extend((0..points).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64)));
    grid.extend(
        (1..=config.harmonics.max(1))
            .map(|n| n as f64 * config.omega0)
            .filter(|&w| w < top),
    );
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Cutoffs of the conventional observers drawn next to the periodic one:
/// one at the fundamental and one at the configured observer cutoff.
pub fn dob_cutoffs(config: &RunConfig) -> Vec<f64> {
    let mut cutoffs = vec![config.omega0, config.dob_cutoff];
    cutoffs.sort_by(f64::total_cmp);
    cutoffs.dedup();
    cutoffs
}

fn write_response(
    path: PathBuf,
    grid: &[f64],
    point: impl Fn(f64) -> FrequencyResponsePoint,
) -> Result<PathBuf> {
    let mut csv = CsvFile::create(path, &RESPONSE_HEADER)?;
    for &omega in grid {
        let p = point(omega);
        csv.row(&[omega, p.sensitivity_mag(), p.complementary_mag()])?;
    }
    csv.finish()
}

/// Writes `freq_pdob.csv` and one `freq_dob_g<cutoff>.csv` per observer
/// cutoff. Responses include the one-sample loop delay.
pub fn freq_response(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let pdob = PdobConfig::new(config.omega0, config.gamma, config.g, config.tk)?;
    let grid = frequency_grid(config);
    let mut files = vec![prepare(config)?];
    files.push(write_response(config.outdir.join("freq_pdob.csv"), &grid, |w| {
        frequency_response(&pdob, w, LoopDelay::Included)
    })?);
    for cutoff in dob_cutoffs(config) {
        let name = format!("freq_dob_g{cutoff}.csv");
        files.push(write_response(config.outdir.join(name), &grid, |w| {
            dob_frequency_response(cutoff, config.tk, w, LoopDelay::Included)
        })?);
    }
    Ok(files)
}

fn write_trace(path: PathBuf, record: &ExperimentRecord, decimate: usize) -> Result<PathBuf> {
    let mut csv = CsvFile::create(path, &TRACE_HEADER)?;
    for k in (0..record.len()).step_by(decimate.max(1)) {
        csv.row(&[record.time[k], record.x_res[k], record.d_hat[k], record.omega_hat[k]])?;
    }
    csv.finish()
}

fn write_closed_loop(
    config: &RunConfig,
    outcome: &ExperimentOutcome,
    decimate: usize,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    for record in &outcome.records {
        let name = format!("trace_{}.csv", file_stem(&record.label));
        files.push(write_trace(config.outdir.join(name), record, decimate)?);
    }
    let mut dft = CsvFile::create(config.outdir.join("dft.csv"), &DFT_HEADER)?;
    for s in &outcome.summaries {
        for (omega, mag) in s.spectrum.frequencies.iter().zip(&s.spectrum.magnitudes) {
            dft.text_row(&[s.label.clone(), omega.to_string(), mag.to_string()])?;
        }
    }
    files.push(dft.finish()?);
    Ok(())
}

fn rms_table(outcome: &ExperimentOutcome) -> String {
    let mut out = format!(
        "steady window = {} s to {} s\nfinal window = {} s to {} s\n",
        outcome.steady_window.0, outcome.steady_window.1, outcome.final_window.0, outcome.final_window.1
    );
    out += "method,steady_rmse,final_rmse,first_period_rmse,final_omega_hat\n";
    for s in &outcome.summaries {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.label, s.steady_rms, s.final_rms, s.first_period_rms, s.final_omega_hat
        );
    }
    out
}

fn steady(outcome: &ExperimentOutcome, label: &str) -> Result<f64> {
    Ok(outcome
        .summary(label)
        .ok_or(pdob_core::Error::Empty("method summary"))?
        .steady_rms)
}

fn sim1_checks(outcome: &ExperimentOutcome) -> Result<Vec<Check>> {
    let (pdob, rc, dob) = (steady(outcome, "pdob")?, steady(outcome, "rc")?, steady(outcome, "dob")?);
    let mut checks = vec![Check::new(
        "steady rmse ordering pdob < rc < dob",
        pdob < rc && rc < dob,
        format!("pdob {pdob}, rc {rc}, dob {dob}"),
    )];
    if let (Some(p), Some(d)) = (outcome.summary("pdob"), outcome.summary("dob")) {
        let above: Vec<String> = p
            .spectrum
            .frequencies
            .iter()
            .zip(p.spectrum.magnitudes.iter().zip(&d.spectrum.magnitudes))
            .filter(|(_, (pm, dm))| pm >= dm)
            .map(|(w, _)| w.to_string())
            .collect();
        checks.push(Check::new(
            "pdob harmonics below dob",
            above.is_empty(),
            if above.is_empty() {
                format!("all {} harmonics", p.spectrum.frequencies.len())
            } else {
                format!("not below at {}", above.join(" "))
            },
        ));
    }
    Ok(checks)
}

fn sim2_checks(outcome: &ExperimentOutcome, step: FrequencyStep) -> Result<Vec<Check>> {
    let adaptive = outcome
        .summary("adaptive_pdob")
        .ok_or(pdob_core::Error::Empty("method summary"))?;
    let fixed = outcome.summary("pdob").ok_or(pdob_core::Error::Empty("method summary"))?;
    Ok(vec![
        Check::new(
            "final frequency estimate within 0.1 rad/s",
            (adaptive.final_omega_hat - step.omega).abs() <= 0.1,
            format!("estimate {} target {}", adaptive.final_omega_hat, step.omega),
        ),
        Check::new(
            "final rmse adaptive < fixed",
            adaptive.final_rms < fixed.final_rms,
            format!("adaptive {} fixed {}", adaptive.final_rms, fixed.final_rms),
        ),
    ])
}

fn window(record: &ExperimentRecord, from: f64, to: f64) -> &[f64] {
    let a = ((from / record.sample_time).round() as usize).min(record.len());
    let b = ((to / record.sample_time).round() as usize).clamp(a, record.len());
    &record.omega_hat[a..b]
}

fn variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

fn peak_deviation(v: &[f64], target: f64) -> f64 {
    v.iter().map(|w| (w - target).abs()).fold(0.0, f64::max)
}

pub const TONE_VARIANTS: [StudyVariant; 9] = [
    StudyVariant::Base,
    StudyVariant::Radius(0.9),
    StudyVariant::Radius(0.99),
    StudyVariant::Kappa(1),
    StudyVariant::Kappa(100),
    StudyVariant::Lambda(0.9),
    StudyVariant::Lambda(0.99),
    StudyVariant::Delta(1.0),
    StudyVariant::Delta(1e6),
];

pub const HARMONIC_VARIANTS: [StudyVariant; 4] = [
    StudyVariant::Smoothing(10.0, 10.0),
    StudyVariant::Smoothing(100.0, 10.0),
    StudyVariant::Smoothing(1000.0, 10.0),
    StudyVariant::Smoothing(1000.0, 1000.0),
];

/// Study base: the standard tracker with the configured notch and
/// estimator settings and sample time.
pub fn study_base(config: &RunConfig) -> TrackerParams {
    let mut base = TrackerParams::standard();
    base.anf.radius = config.r;
    base.anf.kappa = config.kappa;
    base.anf.lambda = config.lambda;
    base.anf.delta = config.delta;
    base.anf.sample_time = config.tk;
    base
}

fn step_study(config: &RunConfig, decimate: usize, files: &mut Vec<PathBuf>) -> Result<(String, Vec<Check>)> {
    let base = study_base(config);
    let tone = StepInput::tone();
    let harmonic = StepInput::harmonic();
    let tone_runs = run_step_frequency_study(base, &tone, &TONE_VARIANTS)?;
    let harmonic_runs = run_step_frequency_study(base, &harmonic, &HARMONIC_VARIANTS)?;

    let mut table = "input,variant,final_omega_hat,peak_deviation_after_step,variance_last_half\n".to_string();
    for (input, runs, script) in [("tone", &tone_runs, &tone), ("harmonic", &harmonic_runs, &harmonic)] {
        for record in runs.iter() {
            let name = format!("trace_{input}_{}.csv", file_stem(&record.label));
            files.push(write_trace(config.outdir.join(name), record, decimate)?);
            let after = window(record, script.step_time, script.duration);
            let last = window(record, 0.5 * (script.step_time + script.duration), script.duration);
            let _ = writeln!(
                table,
                "{input},{},{},{},{}",
                record.label,
                record.omega_hat.last().copied().unwrap_or(f64::NAN),
                peak_deviation(after, script.omega_after),
                variance(last)
            );
        }
    }

    let find = |runs: &[ExperimentRecord], v: StudyVariant| -> Result<ExperimentRecord> {
        runs.iter()
            .find(|r| r.label == v.label())
            .cloned()
            .ok_or(CliError::Core(pdob_core::Error::Empty("study run")))
    };
    let base_run = find(&tone_runs, StudyVariant::Base)?;
    let final_base = base_run.omega_hat.last().copied().unwrap_or(f64::NAN);
    let after = |r: &ExperimentRecord| peak_deviation(window(r, tone.step_time, tone.duration), tone.omega_after);
    let base_peak = after(&base_run);
    let wide_peak = after(&find(&tone_runs, StudyVariant::Radius(0.99))?);
    let short_peak = after(&find(&tone_runs, StudyVariant::Lambda(0.9))?);
    let half = 0.5 * (harmonic.step_time + harmonic.duration);
    let var = |v: StudyVariant| -> Result<f64> {
        Ok(variance(window(&find(&harmonic_runs, v)?, half, harmonic.duration)))
    };
    let (smooth, rough) = (var(HARMONIC_VARIANTS[0])?, var(HARMONIC_VARIANTS[2])?);
    let checks = vec![
        Check::new(
            "base tone settles within 1 rad/s",
            (final_base - tone.omega_after).abs() <= 1.0,
            format!("final {final_base}"),
        ),
        Check::new(
            "r=0.99 overshoots more than base",
            wide_peak > base_peak,
            format!("peak deviation {wide_peak} vs {base_peak}"),
        ),
        Check::new(
            "lambda=0.9 rougher than base",
            short_peak > base_peak,
            format!("peak deviation {short_peak} vs {base_peak}"),
        ),
        Check::new(
            "small g_a steadier on harmonic input",
            smooth < rough,
            format!("variance g_a=10 {smooth} vs g_a=1000 {rough}"),
        ),
    ];
    Ok((table, checks))
}

fn render_report(experiment: Experiment, body: &str, checks: &[Check]) -> String {
    let mut out = format!("experiment = {}\n\n{body}\n", experiment.name());
    for c in checks {
        let _ = writeln!(out, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let all = checks.iter().all(|c| c.pass);
    let _ = writeln!(out, "\nresult = {}", if all { "PASS" } else { "FAIL" });
    out
}

/// Runs the configured experiment and writes traces, spectra and
/// `report.txt` into the output directory.
pub fn simulate(config: &RunConfig, decimate: usize) -> Result<SimulateOutcome> {
    let experiment = config.experiment()?;
    let mut files = vec![prepare(config)?];
    let params = config.sim_params();
    let (body, checks) = match experiment {
        Experiment::Sim1 => {
            let outcome = run_simulation_1(&params)?;
            write_closed_loop(config, &outcome, decimate, &mut files)?;
            (rms_table(&outcome), sim1_checks(&outcome)?)
        }
        Experiment::Sim2 => {
            let step = FrequencyStep::standard(&params);
            let outcome = run_simulation_2(&params, step)?;
            write_closed_loop(config, &outcome, decimate, &mut files)?;
            let body = format!("frequency step = {} rad/s at {} s\n{}", step.omega, step.at, rms_table(&outcome));
            (body, sim2_checks(&outcome, step)?)
        }
        Experiment::StepStudy => step_study(config, decimate, &mut files)?,
    };
    let report = config.outdir.join("report.txt");
    write_text(&report, &render_report(experiment, &body, &checks))?;
    files.push(report);
    Ok(SimulateOutcome { files, checks })
}

/// Reads the `value` column of `input`; the reported line numbers count the
/// header as line 1.
pub fn read_samples(input: &Path) -> Result<Vec<f64>> {
    let file = std::fs::File::open(input).map_err(|e| CliError::io(input, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let csv_error = |e: csv::Error| CliError::Csv {
        path: input.to_path_buf(),
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.is_empty() {
        return Err(CliError::EmptyInput {
            path: input.to_path_buf(),
        });
    }
    let column = headers.iter().position(|h| h == "value").ok_or_else(|| CliError::InputRow {
        path: input.to_path_buf(),
        line: 1,
        message: "missing `value` column".to_string(),
    })?;
    let mut samples = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::InputRow {
                path: input.to_path_buf(),
                line,
                message: e.to_string(),
            }
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = row.get(column).unwrap_or("");
        let value: f64 = field.parse().map_err(|_| CliError::InputRow {
            path: input.to_path_buf(),
            line,
            message: format!("`{field}` is not a number"),
        })?;
        if !value.is_finite() {
            return Err(CliError::InputRow {
                path: input.to_path_buf(),
                line,
                message: format!("`{field}` is not finite"),
            });
        }
        samples.push(value);
    }
    if samples.is_empty() {
        return Err(CliError::EmptyInput {
            path: input.to_path_buf(),
        });
    }
    Ok(samples)
}

/// Runs the band-pass and estimator over the samples of `input`. The raw
/// estimate column holds its last value between updates.
pub fn estimate(config: &RunConfig, input: &Path, output: Option<&Path>) -> Result<PathBuf> {
    let samples = read_samples(input)?;
    let params = config.sim_params();
    let mut tracker = FrequencyTracker::new(
        params.anf_config(),
        config.g_a,
        config.g_b,
        params.omega_min,
        params.omega_max,
    )?;
    prepare(config)?;
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| config.outdir.join("estimate.csv"));
    let mut csv = CsvFile::create(path, &ESTIMATE_HEADER)?;
    let mut raw = config.omega0;
    for (k, &x) in samples.iter().enumerate() {
        let out = tracker.step(x)?;
        if let Some(w) = out.omega_tilde {
            raw = w;
        }
        csv.row(&[config.tk * k as f64, raw, out.omega_hat])?;
    }
    csv.finish()
}

/// Piecewise-linear weight table, held constant outside its range.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    points: Vec<(f64, f64)>,
}

impl WeightTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let mut points = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| CliError::Csv {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let parse = |i: usize| -> Result<f64> {
                row.get(i)
                    .and_then(|f| f.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::InputRow {
                        path: path.to_path_buf(),
                        line,
                        message: format!("expected columns {}", WEIGHT_HEADER.join(",")),
                    })
            };
            points.push((parse(0)?, parse(1)?));
        }
        if points.is_empty() {
            return Err(CliError::EmptyInput {
                path: path.to_path_buf(),
            });
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { points })
    }

    pub fn at(&self, omega: f64) -> f64 {
        let p = &self.points;
        if omega <= p[0].0 {
            return p[0].1;
        }
        for pair in p.windows(2) {
            let ((w0, m0), (w1, m1)) = (pair[0], pair[1]);
            if omega <= w1 {
                return if w1 > w0 { m0 + (m1 - m0) * (omega - w0) / (w1 - w0) } else { m1 };
            }
        }
        p[p.len() - 1].1
    }

    /// Table frequencies plus a log grid over their span, below Nyquist.
    pub fn grid(&self, sample_time: f64) -> Vec<f64> {
        let limit = nyquist(sample_time);
        let lo = self.points[0].0.max(1e-3);
        let hi = self.points[self.points.len() - 1].0.min(0.999 * limit);
        let mut grid: Vec<f64> = self.points.iter().map(|p| p.0).filter(|&w| (0.0..limit).contains(&w)).collect();
        if hi > lo {
            let n = 2000;
            grid.extend((0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)));
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }
}

/// Drops floating-point noise below 1e-12 relative so that exact design
/// values such as `|1 − 2·0.7|` print as `0.4`.
fn tidy(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(11 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

/// Design summary: delays, fundamental and half-harmonic gains, and the
/// small-gain margin when a weight table is given.
pub fn design_check(config: &RunConfig, weight: Option<&Path>) -> Result<String> {
    let pdob = PdobConfig::new(config.omega0, config.gamma, config.g, config.tk)?;
    let design = pdob.design()?;
    let mut out = String::new();
    let _ = writeln!(out, "N = {}", design.corrected);
    let _ = writeln!(out, "N_uncorrected = {}", design.uncorrected);
    let _ = writeln!(out, "N_raw = {}", design.corrected_raw);
    let _ = writeln!(
        out,
        "fundamental_gain_formula = {}",
        tidy(fundamental_suppression_gain(config.omega0, config.g)?)
    );
    let _ = writeln!(out, "fundamental_gain_discrete = {}", tidy(sensitivity_gain(&pdob, config.omega0)));
    let _ = writeln!(out, "half_harmonic_complementary = {}", tidy((1.0 - tidy(2.0 * config.gamma)).abs()));
    let _ = writeln!(out, "half_harmonic_sensitivity = {}", 2.0 * config.gamma);
    if let Some(path) = weight {
        let table = WeightTable::read(path)?;
        let report = robust_stability_margin(&pdob, |w| table.at(w), &table.grid(config.tk))?;
        let _ = writeln!(out, "margin = {}", tidy(report.margin));
        let _ = writeln!(out, "peak_weighted_gain = {}", tidy(report.peak_weighted_gain));
        let _ = writeln!(out, "peak_omega = {}", tidy(report.peak_omega));
        let _ = writeln!(out, "robustly_stable = {}", report.robustly_stable);
        let _ = writeln!(out, "sufficient_condition = {}", report.sufficient_condition);
    }
    Ok(out)
}
