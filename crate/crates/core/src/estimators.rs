//! Range and radial-velocity estimators operating on matched observations
//! `Z = conj(Y) X`.
//!
//! The main entry point is [`two_step`]: frequency-averaged coarse velocity,
//! Doppler-compensated coarse range, then a second pass that removes the
//! range phase before re-estimating velocity (which removes the Dirichlet
//! amplitude loss of the first average) and finally range again.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::channel::ReceivedGrid;
use crate::error::{Error, Result};
use crate::params::{SystemConfig, SPEED_OF_LIGHT};
use crate::patterns::PatternGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefineMethod {
    /// Successive parabolic interpolation with golden-section fallback.
    #[default]
    Parabolic,
    GoldenSection,
}

fn default_n_per() -> usize {
    4096
}
fn default_tol() -> f64 {
    1e-12
}
fn default_iterations() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Periodogram DFT size.
    #[serde(default = "default_n_per")]
    pub n_per: usize,
    /// Target width of the refinement bracket, in normalized frequency.
    #[serde(default = "default_tol")]
    pub refine_tol: f64,
    #[serde(default)]
    pub refine_method: RefineMethod,
    /// Number of velocity/range passes; 2 is the two-step algorithm.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            n_per: default_n_per(),
            refine_tol: default_tol(),
            refine_method: RefineMethod::default(),
            iterations: default_iterations(),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_per must be >= 2, got {}",
                self.n_per
            )));
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::InvalidConfig("refine_tol must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Normalized-frequency interval searched by the periodogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencySpan {
    /// `[-1/2, 1/2)`
    Symmetric,
    /// `[0, 1)`
    Positive,
}

impl FrequencySpan {
    fn wrap(self, f: f64) -> f64 {
        match self {
            FrequencySpan::Symmetric => {
                let w = (f + 0.5).rem_euclid(1.0) - 0.5;
                if w >= 0.5 {
                    w - 1.0
                } else {
                    w
                }
            }
            FrequencySpan::Positive => {
                let w = f.rem_euclid(1.0);
                if w >= 1.0 {
                    0.0
                } else {
                    w
                }
            }
        }
    }
}

/// Result of a periodogram search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub frequency: f64,
    /// `|sum x_n exp(-j 2 pi f n)|^2` at `frequency`.
    pub power: f64,
}

/// DFT periodogram with local refinement of the maximum. Cheap to clone and
/// shareable across threads.
#[derive(Clone)]
pub struct FrequencyEstimator {
    cfg: EstimatorConfig,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FrequencyEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrequencyEstimator")
            .field("cfg", &self.cfg)
            .finish()
    }
}

impl FrequencyEstimator {
    pub fn new(cfg: EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.n_per);
        Ok(Self { cfg, fft })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    /// Maximizer of `|sum_n seq[n] exp(-j 2 pi f n)|^2` over `span`.
    ///
    /// Zero entries are treated as missing samples. Ties between DFT bins
    /// resolve to the lowest frequency.
    pub fn peak(&self, seq: &[Complex64], span: FrequencySpan) -> Result<Peak> {
        let n_per = self.cfg.n_per;
        if seq.len() < 2 {
            return Err(Error::Precondition(
                "periodogram needs at least two samples".into(),
            ));
        }
        if seq.len() > n_per {
            return Err(Error::Precondition(format!(
                "sequence of length {} exceeds n_per = {n_per}",
                seq.len()
            )));
        }
        let samples: Vec<(f64, Complex64)> = seq
            .iter()
            .enumerate()
            .filter(|(_, x)| x.norm_sqr() > 0.0)
            .map(|(n, x)| (n as f64, *x))
            .collect();
        if samples.is_empty() {
            return Err(Error::DegenerateInput("all samples are zero".into()));
        }

        let mut buf = vec![Complex64::new(0.0, 0.0); n_per];
        buf[..seq.len()].copy_from_slice(seq);
        self.fft.process(&mut buf);

        let bins: Box<dyn Iterator<Item = i64>> = match span {
            FrequencySpan::Symmetric => Box::new(-(n_per as i64 / 2)..(n_per - n_per / 2) as i64),
            FrequencySpan::Positive => Box::new(0..n_per as i64),
        };
        let mut best = (0i64, f64::NEG_INFINITY);
        for k in bins {
            let p = buf[k.rem_euclid(n_per as i64) as usize].norm_sqr();
            if p > best.1 {
                best = (k, p);
            }
        }

        let power = |f: f64| periodogram_at(&samples, f);
        let step = 1.0 / n_per as f64;
        let center = best.0 as f64 * step;
        let (f, p) = maximize(
            power,
            center - step,
            center + step,
            center,
            self.cfg.refine_tol,
            self.cfg.refine_method,
        );
        let (f, p) = if p >= best.1 {
            (f, p)
        } else {
            (center, power(center))
        };
        Ok(Peak {
            frequency: span.wrap(f),
            power: p,
        })
    }
}

/// `|sum x_n exp(-j 2 pi f n)|^2` over `(n, x_n)` pairs.
pub fn periodogram_at(samples: &[(f64, Complex64)], f: f64) -> f64 {
    let w = -2.0 * PI * f;
    let mut acc = Complex64::new(0.0, 0.0);
    for &(n, x) in samples {
        let (s, c) = (w * n).sin_cos();
        acc += x * Complex64::new(c, s);
    }
    acc.norm_sqr()
}

/// Convenience wrapper around [`FrequencyEstimator::peak`].
pub fn periodogram_peak(
    seq: &[Complex64],
    span: FrequencySpan,
    cfg: &EstimatorConfig,
) -> Result<Peak> {
    FrequencyEstimator::new(*cfg)?.peak(seq, span)
}

const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Derivative-free maximization of `f` on `[a, b]` starting from `x0`.
fn maximize<F: Fn(f64) -> f64>(
    f: F,
    mut a: f64,
    mut b: f64,
    x0: f64,
    tol: f64,
    method: RefineMethod,
) -> (f64, f64) {
    let g = |x: f64| -f(x);
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let mut fx = g(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let mid = 0.5 * (a + b);
        let tol1 = tol + 4.0 * f64::EPSILON * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if method == RefineMethod::Parabolic && e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if mid >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = g(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, -fx)
}

/// Matched observations `Z = conj(Y) X` on the pattern elements.
#[derive(Debug, Clone)]
pub struct MatchedGrid<'a> {
    pub pattern: &'a PatternGrid,
    pub config: SystemConfig,
    pub n_r: i64,
    pub values: Vec<Complex64>,
}

impl<'a> MatchedGrid<'a> {
    pub fn from_received(rx: &ReceivedGrid<'a>) -> Self {
        let values = rx
            .observations
            .iter()
            .zip(&rx.pilots)
            .map(|(y, x)| y.conj() * x)
            .collect();
        Self {
            pattern: rx.pattern,
            config: rx.config,
            n_r: rx.n_r,
            values,
        }
    }

    pub fn window_shift(&self) -> f64 {
        self.n_r as f64 * self.config.sampling_period()
    }
}

/// Largest unambiguous range (for window shift `tau_r`) and radial velocity.
pub fn max_unambiguous(config: &SystemConfig, tau_r: f64) -> (f64, f64) {
    let df = config.subcarrier_spacing;
    let d_max = SPEED_OF_LIGHT / 2.0 * (1.0 / df + tau_r);
    let v_max = SPEED_OF_LIGHT * config.fft_size as f64 * df
        / (4.0 * config.carrier_frequency * config.symbol_len() as f64);
    (d_max, v_max)
}

/// DFT-grid resolutions `(delta_d, delta_v)` for an `n_per`-point periodogram.
pub fn resolutions(config: &SystemConfig, n_per: usize) -> (f64, f64) {
    let df = config.subcarrier_spacing;
    let np = n_per as f64;
    let dd = SPEED_OF_LIGHT / (2.0 * np * df);
    let dv = SPEED_OF_LIGHT * config.fft_size as f64 * df
        / (2.0 * config.carrier_frequency * np * config.symbol_len() as f64);
    (dd, dv)
}

/// Per-pass intermediate values of [`two_step`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassDiagnostics {
    pub velocity: f64,
    pub range: f64,
    pub velocity_freq: f64,
    pub range_freq: f64,
    pub velocity_peak_power: f64,
    pub range_peak_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub range: f64,
    pub radial_velocity: f64,
    /// One entry per pass; the first is the coarse stage.
    pub passes: Vec<PassDiagnostics>,
    /// The coarse velocity fell outside `[-v_max, v_max)`.
    pub velocity_out_of_range: bool,
}

impl Estimate {
    pub fn coarse(&self) -> &PassDiagnostics {
        &self.passes[0]
    }
}

/// Layout of a pattern whose symbols all carry the same subcarrier set.
struct RegularLayout {
    symbols: Vec<usize>,
    subcarriers: Vec<i64>,
    time_index: Vec<f64>,
    mean_q: f64,
}

impl RegularLayout {
    fn new(pattern: &PatternGrid, config: &SystemConfig, n_r: i64) -> Result<Self> {
        let subcarriers = pattern.uniform_subcarriers().ok_or_else(|| {
            Error::Precondition(
                "two-step estimation needs the same subcarriers in every symbol".into(),
            )
        })?;
        let symbols: Vec<usize> = pattern.symbol_indices().collect();
        if symbols.len() < 2 || subcarriers.len() < 2 {
            return Err(Error::Precondition(
                "two-step estimation needs at least two symbols and two subcarriers".into(),
            ));
        }
        let time_index = symbols
            .iter()
            .map(|&m| config.symbol_time_index(m, n_r))
            .collect();
        let mean_q = subcarriers.iter().sum::<i64>() as f64 / subcarriers.len() as f64;
        Ok(Self {
            symbols,
            subcarriers,
            time_index,
            mean_q,
        })
    }

    fn width(&self) -> usize {
        self.subcarriers.len()
    }

    /// Dense sequence over symbol offsets `m - m_first`, zero where unused.
    fn symbol_sequence(&self, values: &[Complex64]) -> Vec<Complex64> {
        let m0 = self.symbols[0];
        let len = self.symbols[self.symbols.len() - 1] - m0 + 1;
        let mut seq = vec![Complex64::new(0.0, 0.0); len];
        for (&m, v) in self.symbols.iter().zip(values) {
            seq[m - m0] = *v;
        }
        seq
    }

    /// Dense sequence over subcarrier offsets `q - q_first`.
    fn subcarrier_sequence(&self, values: &[Complex64]) -> Vec<Complex64> {
        let q0 = self.subcarriers[0];
        let len = (self.subcarriers[self.subcarriers.len() - 1] - q0 + 1) as usize;
        let mut seq = vec![Complex64::new(0.0, 0.0); len];
        for (&q, v) in self.subcarriers.iter().zip(values) {
            seq[(q - q0) as usize] = *v;
        }
        seq
    }
}

#[inline]
fn cis(cycles: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * cycles).sin_cos();
    Complex64::new(c, s)
}

fn velocity_from_freq(f: f64, carrier: f64, config: &SystemConfig) -> f64 {
    f * SPEED_OF_LIGHT / (2.0 * carrier * config.symbol_len() as f64 * config.sampling_period())
}

fn range_from_freq(f: f64, tau_r: f64, config: &SystemConfig) -> f64 {
    SPEED_OF_LIGHT / 2.0 * (f / config.subcarrier_spacing + tau_r)
}

/// Two-step iterative range and radial-velocity estimation.
pub fn two_step(rx: &ReceivedGrid<'_>, est: &FrequencyEstimator) -> Result<Estimate> {
    two_step_matched(&MatchedGrid::from_received(rx), est)
}

/// [`two_step`] on precomputed matched observations.
pub fn two_step_matched(z: &MatchedGrid<'_>, est: &FrequencyEstimator) -> Result<Estimate> {
    let config = &z.config;
    let layout = RegularLayout::new(z.pattern, config, z.n_r)?;
    let width = layout.width();
    let tau_r = z.window_shift();
    let ts = config.sampling_period();
    let df = config.subcarrier_spacing;
    let fc = config.carrier_frequency;
    // The phase slope over m of a frequency average is set by the mean subcarrier
    // frequency; for the full band this is f_c - df/2.
    let effective_carrier = fc + df * layout.mean_q;
    let (_, v_max) = max_unambiguous(config, tau_r);

    // Frequency average of Z, optionally after removing a range phase.
    let symbol_average = |range_delay: Option<f64>| -> Vec<Complex64> {
        let rot: Option<Vec<Complex64>> = range_delay.map(|tau| {
            layout
                .subcarriers
                .iter()
                .map(|&q| cis(-df * q as f64 * (tau - tau_r)))
                .collect()
        });
        z.values
            .chunks_exact(width)
            .map(|row| {
                let sum: Complex64 = match &rot {
                    Some(r) => row.iter().zip(r).map(|(a, b)| a * b).sum(),
                    None => row.iter().sum(),
                };
                sum / width as f64
            })
            .collect()
    };

    // Time average of Doppler-compensated Z for every subcarrier.
    let subcarrier_average = |velocity: f64| -> Vec<Complex64> {
        let k = 2.0 * velocity / SPEED_OF_LIGHT * ts;
        let mut acc = vec![Complex64::new(0.0, 0.0); width];
        for (row, &delta) in z.values.chunks_exact(width).zip(&layout.time_index) {
            for ((a, &q), v) in acc.iter_mut().zip(&layout.subcarriers).zip(row) {
                *a += v * cis(-(fc + df * q as f64) * k * delta);
            }
        }
        let m = layout.symbols.len() as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        acc
    };

    let mut passes = Vec::with_capacity(est.config().iterations);
    let mut range_delay: Option<f64> = None;
    for _ in 0..est.config().iterations {
        let zbar = symbol_average(range_delay);
        let vpeak = est.peak(&layout.symbol_sequence(&zbar), FrequencySpan::Symmetric)?;
        let velocity = velocity_from_freq(vpeak.frequency, effective_carrier, config);

        let hbar = subcarrier_average(velocity);
        let dpeak = est.peak(&layout.subcarrier_sequence(&hbar), FrequencySpan::Positive)?;
        let range = range_from_freq(dpeak.frequency, tau_r, config);
        range_delay = Some(2.0 * range / SPEED_OF_LIGHT);

        passes.push(PassDiagnostics {
            velocity,
            range,
            velocity_freq: vpeak.frequency,
            range_freq: dpeak.frequency,
            velocity_peak_power: vpeak.power,
            range_peak_power: dpeak.power,
        });
    }
    let last = passes[passes.len() - 1];
    Ok(Estimate {
        range: last.range,
        radial_velocity: last.velocity,
        velocity_out_of_range: passes[0].velocity.abs() >= v_max,
        passes,
    })
}

/// Per-subcarrier periodogram velocity estimates averaged over subcarriers.
pub fn plain_ml_velocity(z: &MatchedGrid<'_>, est: &FrequencyEstimator) -> Result<f64> {
    let config = &z.config;
    let mut by_q: std::collections::BTreeMap<i64, Vec<(usize, Complex64)>> = Default::default();
    for (e, v) in z.pattern.elements().iter().zip(&z.values) {
        by_q.entry(e.q).or_default().push((e.m, *v));
    }
    let mut sum = 0.0;
    for (&q, samples) in &by_q {
        if samples.len() < 2 {
            return Err(Error::Precondition(format!(
                "subcarrier {q} is used in fewer than two symbols"
            )));
        }
        let m0 = samples[0].0;
        let mut seq = vec![Complex64::new(0.0, 0.0); samples[samples.len() - 1].0 - m0 + 1];
        for &(m, v) in samples {
            seq[m - m0] = v;
        }
        let f = est.peak(&seq, FrequencySpan::Symmetric)?.frequency;
        let carrier = config.carrier_frequency + config.subcarrier_spacing * q as f64;
        sum += velocity_from_freq(f, carrier, config);
    }
    Ok(sum / by_q.len() as f64)
}

/// Per-symbol periodogram range estimates averaged over symbols.
pub fn plain_ml_range(z: &MatchedGrid<'_>, est: &FrequencyEstimator) -> Result<f64> {
    let config = &z.config;
    let tau_r = z.window_shift();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (m, els) in z.pattern.per_symbol() {
        let range = z.pattern.symbol_range(m).expect("symbol present");
        let q0 = els[0].q;
        let mut seq = vec![Complex64::new(0.0, 0.0); (els[els.len() - 1].q - q0 + 1) as usize];
        for (e, v) in els.iter().zip(&z.values[range]) {
            seq[(e.q - q0) as usize] = *v;
        }
        let f = est.peak(&seq, FrequencySpan::Positive)?.frequency;
        sum += range_from_freq(f, tau_r, config);
        count += 1;
    }
    Ok(sum / count as f64)
}
