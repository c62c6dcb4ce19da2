//! Monte Carlo harness: sweeps, per-trial records, summary statistics and CSV I/O.
//!
//! Every trial draws from its own ChaCha8 stream: the generator is seeded
//! with the master seed and the stream number is `point << 32 | trial`,
//! where `point` is the index of the sweep point in iteration order
//! (pattern, slot count, distance, velocity, method). Results therefore do
//! not depend on scheduling.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::channel::{
    presteered_shift, radar_attenuation, synthesize, CpPolicy, NoiseModel, RcsModel, Target,
};
use crate::crlb::{accuracy, bounds_from_fisher, fisher_uniform, AccuracyQuery, CrlbBounds};
use crate::error::{Error, Result};
use crate::estimators::{
    plain_ml_range, plain_ml_velocity, two_step_matched, EstimatorConfig, FrequencyEstimator,
    MatchedGrid,
};
use crate::params::{SystemConfig, SPEED_OF_LIGHT};
use crate::patterns::{PatternGrid, PatternSpec};

/// Range accuracy target at 90% confidence (m).
pub const KPI_RANGE_M: f64 = 10.0;
/// Velocity accuracy target at 90% confidence (m/s).
pub const KPI_VELOCITY_MPS: f64 = 5.0;

/// Per-trial RNG for sweep point `point` and trial `trial`.
pub fn trial_rng(master_seed: u64, point: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((point << 32) | (trial & 0xffff_ffff));
    rng
}

/// Placement of the receiver DFT window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReceiverWindow {
    Fixed {
        n_r: i64,
    },
    /// Shift by `floor(tau_d / T_s)` samples of the true delay.
    PreSteered,
}

impl Default for ReceiverWindow {
    fn default() -> Self {
        ReceiverWindow::Fixed { n_r: 0 }
    }
}

impl ReceiverWindow {
    pub fn shift(&self, range: f64, config: &SystemConfig) -> i64 {
        match *self {
            ReceiverWindow::Fixed { n_r } => n_r,
            ReceiverWindow::PreSteered => presteered_shift(2.0 * range / SPEED_OF_LIGHT, config),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TwoStep,
    /// Per-subcarrier velocity and per-symbol range periodograms, averaged.
    PlainMl,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::TwoStep => "two-step",
            Method::PlainMl => "plain-ml",
        }
    }
}

fn default_trials() -> usize {
    100
}
fn default_confidence() -> f64 {
    0.9
}
fn default_methods() -> Vec<Method> {
    vec![Method::TwoStep]
}
fn default_distances() -> Vec<f64> {
    (1..=22).map(|k| 20.0 * k as f64).collect()
}
fn default_velocities() -> Vec<f64> {
    vec![1.0 / 3.6, 10.0, 30.0, 50.0]
}
fn default_patterns() -> Vec<PatternSpec> {
    vec![PatternSpec::full_slot(1)]
}

/// A Monte Carlo sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_distances")]
    pub distances: Vec<f64>,
    #[serde(default = "default_velocities")]
    pub velocities: Vec<f64>,
    /// Overrides `n_slots` of every pattern when non-empty.
    #[serde(default)]
    pub slot_counts: Vec<usize>,
    #[serde(default = "default_patterns")]
    pub patterns: Vec<PatternSpec>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "NoiseModel::link_budget")]
    pub noise: NoiseModel,
    #[serde(default)]
    pub rcs: RcsModel,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub window: ReceiverWindow,
    #[serde(default = "warn_policy")]
    pub cp_policy: CpPolicy,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn warn_policy() -> CpPolicy {
    CpPolicy::Warn
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            distances: default_distances(),
            velocities: default_velocities(),
            slot_counts: Vec::new(),
            patterns: default_patterns(),
            methods: default_methods(),
            trials: default_trials(),
            master_seed: 0,
            noise: NoiseModel::link_budget(),
            rcs: RcsModel::default(),
            estimator: EstimatorConfig::default(),
            window: ReceiverWindow::default(),
            cp_policy: CpPolicy::Warn,
            confidence: default_confidence(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self, config: &SystemConfig) -> Result<()> {
        config.validate()?;
        self.estimator.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidConfig("confidence must be in (0, 1)".into()));
        }
        let (d_max, _) = crate::estimators::max_unambiguous(config, 0.0);
        if let Some(d) = self.distances.iter().find(|&&d| !(d > 0.0 && d < d_max)) {
            return Err(Error::InvalidConfig(format!(
                "distance {d} outside (0, {d_max})"
            )));
        }
        if self.slot_counts.contains(&0) {
            return Err(Error::InvalidConfig(
                "slot counts must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Pattern specs after applying `slot_counts`.
    pub fn expanded_patterns(&self) -> Vec<PatternSpec> {
        if self.slot_counts.is_empty() {
            return self.patterns.clone();
        }
        self.patterns
            .iter()
            .flat_map(|p| {
                self.slot_counts
                    .iter()
                    .map(move |&n| PatternSpec { n_slots: n, ..*p })
            })
            .collect()
    }
}

/// One Monte Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub pattern: String,
    pub comb: usize,
    pub n_slots: usize,
    pub distance: f64,
    pub velocity: f64,
    pub method: String,
    pub point: u64,
    pub trial: u64,
    pub n_r: i64,
    pub rcs: f64,
    pub snr_db: f64,
    /// `ok`, or the error that stopped the trial.
    pub status: String,
    pub range_est: f64,
    pub velocity_est: f64,
    pub range_err: f64,
    pub velocity_err: f64,
    pub coarse_range: f64,
    pub coarse_velocity: f64,
    pub crlb_var_range: f64,
    pub crlb_var_velocity: f64,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

struct SweepPoint<'a> {
    index: u64,
    spec: PatternSpec,
    grid: &'a PatternGrid,
    distance: f64,
    velocity: f64,
    method: Method,
    n_r: i64,
    /// Bounds at unit SNR; scale by 1/SNR.
    unit_bounds: Option<CrlbBounds>,
}

/// Runs every trial of the sweep. Failed trials are kept with their error in `status`.
pub fn run(spec: &ExperimentSpec, config: &SystemConfig) -> Result<Vec<TrialRecord>> {
    spec.validate(config)?;
    let patterns = spec.expanded_patterns();
    let grids = patterns
        .iter()
        .map(|p| p.generate(config))
        .collect::<Result<Vec<_>>>()?;
    let estimator = FrequencyEstimator::new(spec.estimator)?;

    let mut unit_cache: HashMap<(usize, i64), Option<CrlbBounds>> = HashMap::new();
    let mut points = Vec::new();
    for (pi, (p, grid)) in patterns.iter().zip(&grids).enumerate() {
        for &distance in &spec.distances {
            let n_r = spec.window.shift(distance, config);
            let unit = *unit_cache.entry((pi, n_r)).or_insert_with(|| {
                fisher_uniform(grid, config, n_r, 1.0)
                    .and_then(|f| bounds_from_fisher(&f))
                    .ok()
            });
            for &velocity in &spec.velocities {
                for &method in &spec.methods {
                    points.push(SweepPoint {
                        index: points.len() as u64,
                        spec: *p,
                        grid,
                        distance,
                        velocity,
                        method,
                        n_r,
                        unit_bounds: unit,
                    });
                }
            }
        }
    }

    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..spec.trials as u64).map(move |t| (p, t)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(p, t)| run_trial(spec, config, &points[p], t, &estimator))
        .collect();
    Ok(records)
}

fn run_trial(
    spec: &ExperimentSpec,
    config: &SystemConfig,
    point: &SweepPoint<'_>,
    trial: u64,
    estimator: &FrequencyEstimator,
) -> TrialRecord {
    let mut rng = trial_rng(spec.master_seed, point.index, trial);
    let rcs = spec.rcs.sample(&mut rng);
    let target = Target {
        range: point.distance,
        radial_velocity: point.velocity,
        scatter_phase: rng.gen_range(0.0..2.0 * PI),
        rcs,
    };
    let mut record = TrialRecord {
        pattern: point.spec.kind.label().to_string(),
        comb: point.grid.comb,
        n_slots: point.spec.n_slots,
        distance: point.distance,
        velocity: point.velocity,
        method: point.method.label().to_string(),
        point: point.index,
        trial,
        n_r: point.n_r,
        rcs,
        snr_db: f64::NAN,
        status: "ok".into(),
        range_est: f64::NAN,
        velocity_est: f64::NAN,
        range_err: f64::NAN,
        velocity_err: f64::NAN,
        coarse_range: f64::NAN,
        coarse_velocity: f64::NAN,
        crlb_var_range: f64::NAN,
        crlb_var_velocity: f64::NAN,
    };

    let outcome = (|| -> Result<()> {
        let rx = synthesize(
            point.grid,
            &target,
            &spec.noise,
            config,
            point.n_r,
            spec.cp_policy,
            &mut rng,
        )?;
        let snr = rx.snr();
        record.snr_db = 10.0 * snr.log10();
        if let Some(u) = point.unit_bounds {
            record.crlb_var_range = u.var_range / snr;
            record.crlb_var_velocity = u.var_velocity / snr;
        }
        let z = MatchedGrid::from_received(&rx);
        match point.method {
            Method::TwoStep => {
                let e = two_step_matched(&z, estimator)?;
                record.range_est = e.range;
                record.velocity_est = e.radial_velocity;
                record.coarse_range = e.coarse().range;
                record.coarse_velocity = e.coarse().velocity;
            }
            Method::PlainMl => {
                record.velocity_est = plain_ml_velocity(&z, estimator)?;
                record.range_est = plain_ml_range(&z, estimator)?;
            }
        }
        record.range_err = record.range_est - target.range;
        record.velocity_err = record.velocity_est - target.radial_velocity;
        Ok(())
    })();
    if let Err(e) = outcome {
        record.status = e.to_string();
    }
    record
}

/// One row of a CRLB sweep. Accuracy columns are at 90% confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrlbRow {
    pub pattern: String,
    #[serde(rename = "K_comb")]
    pub comb: usize,
    pub n_slots: usize,
    #[serde(rename = "d")]
    pub distance: f64,
    /// Per-element SNR (dB).
    #[serde(rename = "SNR")]
    pub snr_db: f64,
    pub var_d: f64,
    pub var_v: f64,
    #[serde(rename = "acc_d@90")]
    pub acc_d: f64,
    #[serde(rename = "acc_v@90")]
    pub acc_v: f64,
}

/// CRLB at every (pattern, slot count, distance) of the sweep, using the
/// expected RCS. Velocities and trial counts are ignored.
pub fn crlb_sweep(spec: &ExperimentSpec, config: &SystemConfig) -> Result<Vec<CrlbRow>> {
    spec.validate(config)?;
    let rcs = spec
        .rcs
        .sample(&mut ChaCha8Rng::seed_from_u64(spec.master_seed));
    let mut rows = Vec::new();
    for p in spec.expanded_patterns() {
        let grid = p.generate(config)?;
        for &distance in &spec.distances {
            let n_r = spec.window.shift(distance, config);
            let alpha = radar_attenuation(distance, config.carrier_frequency, rcs)?;
            let snr = spec.noise.snr(alpha, config);
            let b = bounds_from_fisher(&fisher_uniform(&grid, config, n_r, 1.0)?)?;
            let (var_d, var_v) = (b.var_range / snr, b.var_velocity / snr);
            let acc = |v: f64| {
                if v > 0.0 {
                    gaussian_accuracy(0.0, v, 0.9)
                } else {
                    Ok(0.0)
                }
            };
            rows.push(CrlbRow {
                pattern: p.kind.label().to_string(),
                comb: grid.comb,
                n_slots: p.n_slots,
                distance,
                snr_db: 10.0 * snr.log10(),
                var_d,
                var_v,
                acc_d: acc(var_d)?,
                acc_v: acc(var_v)?,
            });
        }
    }
    Ok(rows)
}

/// Aggregated statistics of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub pattern: String,
    pub comb: usize,
    pub n_slots: usize,
    pub distance: f64,
    pub velocity: f64,
    pub method: String,
    pub trials: usize,
    pub failed: usize,
    pub snr_db: f64,
    pub bias_range: f64,
    pub var_range: f64,
    pub rmse_range: f64,
    pub bias_velocity: f64,
    pub var_velocity: f64,
    pub rmse_velocity: f64,
    pub acc_range: f64,
    pub acc_velocity: f64,
    pub emp_acc_range: f64,
    pub emp_acc_velocity: f64,
    pub crlb_var_range: f64,
    pub crlb_var_velocity: f64,
    pub crlb_acc_range: f64,
    pub crlb_acc_velocity: f64,
    pub kpi_range_pass: bool,
    pub kpi_velocity_pass: bool,
}

/// Bias, population variance and RMSE of `errors`.
pub fn error_moments(errors: &[f64]) -> (f64, f64, f64) {
    let n = errors.len() as f64;
    let bias = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - bias).powi(2)).sum::<f64>() / n;
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    (bias, var, rmse)
}

/// `ceil(confidence * n)`-th smallest absolute error.
pub fn empirical_accuracy(errors: &[f64], confidence: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::InsufficientData("no errors to rank".into()));
    }
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    abs.sort_by(|a, b| a.total_cmp(b));
    let rank = ((confidence * abs.len() as f64).ceil() as usize).clamp(1, abs.len());
    Ok(abs[rank - 1])
}

/// Gaussian-model accuracy from measured bias and variance.
pub fn gaussian_accuracy(bias: f64, variance: f64, confidence: f64) -> Result<f64> {
    if variance == 0.0 {
        return Ok(bias.abs());
    }
    accuracy(&AccuracyQuery {
        variance,
        bias,
        confidence,
    })
}

/// Summarizes one sweep point; needs at least two successful trials.
pub fn summarize_point(records: &[TrialRecord], confidence: f64) -> Result<SummaryStats> {
    let first = records
        .first()
        .ok_or_else(|| Error::InsufficientData("no records for sweep point".into()))?;
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.is_ok()).collect();
    if ok.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} successful trials at {} {} slots d={} v={}",
            ok.len(),
            first.pattern,
            first.n_slots,
            first.distance,
            first.velocity
        )));
    }
    let er: Vec<f64> = ok.iter().map(|r| r.range_err).collect();
    let ev: Vec<f64> = ok.iter().map(|r| r.velocity_err).collect();
    let (bias_range, var_range, rmse_range) = error_moments(&er);
    let (bias_velocity, var_velocity, rmse_velocity) = error_moments(&ev);
    let acc_range = gaussian_accuracy(bias_range, var_range, confidence)?;
    let acc_velocity = gaussian_accuracy(bias_velocity, var_velocity, confidence)?;
    let emp_acc_range = empirical_accuracy(&er, confidence)?;
    let emp_acc_velocity = empirical_accuracy(&ev, confidence)?;
    let n = ok.len() as f64;
    let crlb_var_range = ok.iter().map(|r| r.crlb_var_range).sum::<f64>() / n;
    let crlb_var_velocity = ok.iter().map(|r| r.crlb_var_velocity).sum::<f64>() / n;
    let crlb_acc = |v: f64| {
        if v.is_finite() && v > 0.0 {
            gaussian_accuracy(0.0, v, confidence).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        }
    };
    Ok(SummaryStats {
        pattern: first.pattern.clone(),
        comb: first.comb,
        n_slots: first.n_slots,
        distance: first.distance,
        velocity: first.velocity,
        method: first.method.clone(),
        trials: records.len(),
        failed: records.len() - ok.len(),
        snr_db: ok.iter().map(|r| r.snr_db).sum::<f64>() / n,
        bias_range,
        var_range,
        rmse_range,
        bias_velocity,
        var_velocity,
        rmse_velocity,
        acc_range,
        acc_velocity,
        emp_acc_range,
        emp_acc_velocity,
        crlb_var_range,
        crlb_var_velocity,
        crlb_acc_range: crlb_acc(crlb_var_range),
        crlb_acc_velocity: crlb_acc(crlb_var_velocity),
        kpi_range_pass: acc_range <= KPI_RANGE_M && emp_acc_range <= KPI_RANGE_M,
        kpi_velocity_pass: acc_velocity <= KPI_VELOCITY_MPS && emp_acc_velocity <= KPI_VELOCITY_MPS,
    })
}

/// Groups records by sweep point (in order of first appearance) and
/// summarizes each. Points with fewer than two successful trials produce a
/// row with NaN statistics so that failures stay visible.
pub fn summarize(records: &[TrialRecord], confidence: f64) -> Result<Vec<SummaryStats>> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no trial records".into()));
    }
    let mut order: Vec<u64> = Vec::new();
    let mut groups: HashMap<u64, Vec<TrialRecord>> = HashMap::new();
    for r in records {
        groups
            .entry(r.point)
            .or_insert_with(|| {
                order.push(r.point);
                Vec::new()
            })
            .push(r.clone());
    }
    order
        .iter()
        .map(|p| {
            let g = &groups[p];
            match summarize_point(g, confidence) {
                Ok(s) => Ok(s),
                Err(Error::InsufficientData(_)) => Ok(failed_summary(g)),
                Err(e) => Err(e),
            }
        })
        .collect()
}

fn failed_summary(records: &[TrialRecord]) -> SummaryStats {
    let r = &records[0];
    let nan = f64::NAN;
    SummaryStats {
        pattern: r.pattern.clone(),
        comb: r.comb,
        n_slots: r.n_slots,
        distance: r.distance,
        velocity: r.velocity,
        method: r.method.clone(),
        trials: records.len(),
        failed: records.iter().filter(|r| !r.is_ok()).count(),
        snr_db: nan,
        bias_range: nan,
        var_range: nan,
        rmse_range: nan,
        bias_velocity: nan,
        var_velocity: nan,
        rmse_velocity: nan,
        acc_range: nan,
        acc_velocity: nan,
        emp_acc_range: nan,
        emp_acc_velocity: nan,
        crlb_var_range: nan,
        crlb_var_velocity: nan,
        crlb_acc_range: nan,
        crlb_acc_velocity: nan,
        kpi_range_pass: false,
        kpi_velocity_pass: false,
    }
}

/// Writes rows with a header. Floats use the shortest round-trip representation.
pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::io(path, e)))
        .collect()
}

/// Manifest written next to sweep results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub system: SystemConfig,
    pub experiment: ExperimentSpec,
    pub master_seed: u64,
    pub outputs: Vec<String>,
    pub created_unix_s: u64,
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::io(path, e))?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn small_config() -> SystemConfig {
        SystemConfig {
            n_rb: 27,
            ..SystemConfig::uav_reference()
        }
    }

    fn quick_spec() -> ExperimentSpec {
        ExperimentSpec {
            distances: vec![60.0],
            velocities: vec![12.0],
            trials: 3,
            master_seed: 42,
            noise: NoiseModel::explicit_db(0.0),
            ..Default::default()
        }
    }

    #[test]
    fn run_is_deterministic() {
        let spec = ExperimentSpec {
            trials: 1,
            ..quick_spec()
        };
        let a = run(&spec, &small_config()).unwrap();
        let b = run(&spec, &small_config()).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn noiseless_sweep_has_tiny_errors() {
        let spec = ExperimentSpec {
            distances: vec![30.0, 150.0],
            velocities: vec![-20.0, 45.0],
            noise: NoiseModel::noiseless(),
            estimator: EstimatorConfig {
                n_per: 65536,
                ..Default::default()
            },
            ..quick_spec()
        };
        for r in run(&spec, &small_config()).unwrap() {
            assert!(r.is_ok(), "{}", r.status);
            assert!(
                r.range_err.abs() < 1e-3 && r.velocity_err.abs() < 1e-3,
                "{r:?}"
            );
        }
    }

    #[test]
    fn cp_violations_are_recorded() {
        let spec = ExperimentSpec {
            distances: vec![500.0],
            cp_policy: CpPolicy::Error,
            ..quick_spec()
        };
        let recs = run(&spec, &small_config()).unwrap();
        assert!(recs
            .iter()
            .all(|r| !r.is_ok() && r.status.contains("cyclic prefix window")));
        let stats = summarize(&recs, 0.9).unwrap();
        assert_eq!(stats[0].failed, 3);
        assert!(stats[0].rmse_range.is_nan());
        assert!(matches!(
            summarize_point(&recs, 0.9),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn presteered_window_avoids_cp_violation() {
        let spec = ExperimentSpec {
            distances: vec![500.0],
            window: ReceiverWindow::PreSteered,
            ..quick_spec()
        };
        assert!(run(&spec, &small_config())
            .unwrap()
            .iter()
            .all(TrialRecord::is_ok));
    }

    fn synthetic(errors_v: &[f64], errors_d: &[f64]) -> Vec<TrialRecord> {
        errors_d
            .iter()
            .zip(errors_v)
            .enumerate()
            .map(|(i, (&ed, &ev))| TrialRecord {
                pattern: "full-slot".into(),
                comb: 1,
                n_slots: 1,
                distance: 100.0,
                velocity: 10.0,
                method: "two-step".into(),
                point: 0,
                trial: i as u64,
                n_r: 0,
                rcs: 1.0,
                snr_db: 0.0,
                status: "ok".into(),
                range_est: 100.0 + ed,
                velocity_est: 10.0 + ev,
                range_err: ed,
                velocity_err: ev,
                coarse_range: f64::NAN,
                coarse_velocity: f64::NAN,
                crlb_var_range: 1.0,
                crlb_var_velocity: 1.0,
            })
            .collect()
    }

    #[test]
    fn normal_errors_give_normal_quantile() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e: Vec<f64> = (0..100_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let s = summarize_point(&synthetic(&e, &e), 0.9).unwrap();
        assert!((s.acc_range - 1.645).abs() < 0.02, "{}", s.acc_range);
        assert!(
            (s.emp_acc_range - 1.645).abs() < 0.02,
            "{}",
            s.emp_acc_range
        );
        assert!(s.kpi_range_pass && s.kpi_velocity_pass);
    }

    #[test]
    fn zero_errors_give_zero_accuracy() {
        let z = vec![0.0; 10];
        let s = summarize_point(&synthetic(&z, &z), 0.9).unwrap();
        assert_eq!(s.acc_range, 0.0);
        assert_eq!(s.emp_acc_velocity, 0.0);
    }

    #[test]
    fn biased_errors_use_two_sided_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let e: Vec<f64> = (0..200_000)
            .map(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                1.0 + x
            })
            .collect();
        let s = summarize_point(&synthetic(&e, &e), 0.9).unwrap();
        let oracle = accuracy(&AccuracyQuery {
            variance: s.var_range,
            bias: s.bias_range,
            confidence: 0.9,
        })
        .unwrap();
        assert_eq!(s.acc_range, oracle);
        assert!(s.acc_range > 1.6449 && s.acc_range < 2.65);
    }

    #[test]
    fn empirical_accuracy_order_statistic() {
        let e = [0.5, -3.0, 1.0, 2.0, -0.1, 0.2, 0.3, 0.4, 0.6, 0.7];
        // ceil(0.9 * 10) = 9th smallest |e| = 2.0
        assert_eq!(empirical_accuracy(&e, 0.9).unwrap(), 2.0);
        assert!(empirical_accuracy(&[], 0.9).is_err());
    }

    #[test]
    fn crlb_sweep_reference_point() {
        let spec = ExperimentSpec {
            distances: vec![100.0],
            patterns: vec![PatternSpec::full_slot(1)],
            noise: NoiseModel::explicit_db(0.0),
            ..Default::default()
        };
        let rows = crlb_sweep(&spec, &SystemConfig::uav_reference()).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(
            (rows[0].var_d.sqrt() - 2.78e-3).abs() < 0.01e-3,
            "{:?}",
            rows[0]
        );
        assert!((rows[0].acc_d / rows[0].var_d.sqrt() - 1.6448536).abs() < 1e-6);
    }

    #[test]
    fn crlb_csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec {
            distances: vec![100.0],
            ..Default::default()
        };
        let rows = crlb_sweep(&spec, &small_config()).unwrap();
        let p = dir.path().join("crlb.csv");
        write_csv(&rows, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("pattern,K_comb,n_slots,d,SNR,var_d,var_v,acc_d@90,acc_v@90\n"));
        assert_eq!(read_csv::<CrlbRow>(&p).unwrap(), rows);
    }

    #[test]
    fn csv_round_trip_and_header_errors() {
        let dir = tempfile::tempdir().unwrap();
        let recs = run(&quick_spec(), &small_config()).unwrap();
        let p = dir.path().join("trials.csv");
        write_csv(&recs, &p).unwrap();
        let back: Vec<TrialRecord> = read_csv(&p).unwrap();
        assert_eq!(format!("{recs:?}"), format!("{back:?}"));

        let bad = dir.path().join("bad.csv");
        let text = std::fs::read_to_string(&p)
            .unwrap()
            .replacen("range_err", "range_error", 1);
        std::fs::write(&bad, text).unwrap();
        let err = read_csv::<TrialRecord>(&bad).unwrap_err().to_string();
        assert!(
            err.contains("range_err") && err.contains("bad.csv"),
            "{err}"
        );
    }
}
