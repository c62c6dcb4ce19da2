//! Fisher information and Cramér–Rao bounds for range and radial velocity.
//!
//! Parameters are ordered `(tau_d, v, psi)`. Matrix entries omit the common
//! `8 pi^2` factor, which is reapplied when the bounds are formed.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::params::{SystemConfig, SPEED_OF_LIGHT};
use crate::patterns::{PatternGrid, ResourceElement};

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        iter.into_iter().for_each(|x| acc.add(x));
        acc
    }
}

/// Symmetric 3x3 Fisher information matrix over `(tau_d, v, psi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherMatrix(pub [[f64; 3]; 3]);

impl FisherMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn determinant(&self) -> f64 {
        let a = &self.0;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    /// Condition number in the Frobenius norm, `||I|| ||I^-1||`.
    pub fn condition_number(&self) -> f64 {
        let det = self.determinant();
        if det == 0.0 {
            return f64::INFINITY;
        }
        let frob = |m: &[[f64; 3]; 3]| m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        let a = &self.0;
        let mut inv = [[0.0; 3]; 3];
        for (i, row) in inv.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                // adjugate: cofactor of (j, i)
                let (r0, r1) = others(j);
                let (c0, c1) = others(i);
                let minor = a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                *v = sign * minor / det;
            }
        }
        frob(a) * frob(&inv)
    }
}

fn others(i: usize) -> (usize, usize) {
    match i {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Fisher information of `pattern` with per-element SNR from `snr`.
pub fn fisher<F>(
    pattern: &PatternGrid,
    config: &SystemConfig,
    n_r: i64,
    snr: F,
) -> Result<FisherMatrix>
where
    F: Fn(&ResourceElement) -> f64,
{
    if pattern.is_empty() {
        return Err(Error::DegeneratePattern("pattern has no elements".into()));
    }
    let df = config.subcarrier_spacing;
    let fc = config.carrier_frequency;
    let k = 2.0 * config.sampling_period() / SPEED_OF_LIGHT;
    let mut s = [CompensatedSum::default(); 6];
    for e in pattern.elements() {
        let w = snr(e);
        if !(w > 0.0) {
            return Err(Error::Domain(format!("SNR must be positive, got {w}")));
        }
        let fq = df * e.q as f64;
        let delta = config.symbol_time_index(e.m, n_r);
        let carrier = fc + fq;
        s[0].add(w * fq * fq);
        s[1].add(w * fq * carrier * delta);
        s[2].add(w * fq);
        s[3].add(w * carrier * carrier * delta * delta);
        s[4].add(w * carrier * delta);
        s[5].add(w);
    }
    let i11 = s[0].value();
    let i12 = k * s[1].value();
    let i13 = s[2].value();
    let i22 = k * k * s[3].value();
    let i23 = k * s[4].value();
    let i33 = s[5].value();
    Ok(FisherMatrix([
        [i11, i12, i13],
        [i12, i22, i23],
        [i13, i23, i33],
    ]))
}

/// Fisher information with the same SNR on every element.
pub fn fisher_uniform(
    pattern: &PatternGrid,
    config: &SystemConfig,
    n_r: i64,
    snr: f64,
) -> Result<FisherMatrix> {
    fisher(pattern, config, n_r, |_| snr)
}

/// Lower bounds on the range and radial-velocity variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrlbBounds {
    /// m^2
    pub var_range: f64,
    /// (m/s)^2
    pub var_velocity: f64,
}

impl CrlbBounds {
    pub fn std_range(&self) -> f64 {
        self.var_range.sqrt()
    }

    pub fn std_velocity(&self) -> f64 {
        self.var_velocity.sqrt()
    }
}

/// Bounds from the cofactors of the Fisher matrix.
pub fn bounds_from_fisher(f: &FisherMatrix) -> Result<CrlbBounds> {
    let det = f.determinant();
    let a = &f.0;
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::SingularMatrix(det));
    }
    let cof_tau = a[1][1] * a[2][2] - a[1][2] * a[1][2];
    let cof_v = a[0][0] * a[2][2] - a[0][2] * a[0][2];
    let var_range = SPEED_OF_LIGHT.powi(2) / (32.0 * PI * PI) * cof_tau / det;
    let var_velocity = 1.0 / (8.0 * PI * PI) * cof_v / det;
    if !(var_range > 0.0 && var_velocity > 0.0) {
        return Err(Error::SingularMatrix(det));
    }
    Ok(CrlbBounds {
        var_range,
        var_velocity,
    })
}

/// Population variance of `xs`, two-pass.
pub fn population_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    xs.iter()
        .map(|x| (x - mean).powi(2))
        .collect::<CompensatedSum>()
        .value()
        / n
}

/// Closed-form bounds assuming uniform SNR, `f_c >> df q` and identical
/// subcarrier sets in every used symbol.
pub fn bounds_compact(
    config: &SystemConfig,
    snr: f64,
    pattern: &PatternGrid,
) -> Result<CrlbBounds> {
    let k = pattern.uniform_subcarriers().ok_or_else(|| {
        Error::Precondition("compact bound requires the same subcarrier set in every symbol".into())
    })?;
    if !(snr > 0.0) {
        return Err(Error::Domain(format!("SNR must be positive, got {snr}")));
    }
    let m_count = pattern.num_symbols() as f64;
    let gamma = SPEED_OF_LIGHT.powi(2) / (32.0 * PI * PI * snr * m_count * k.len() as f64);
    let var_q = population_variance(&k.iter().map(|&q| q as f64).collect::<Vec<_>>());
    // The time-index offset n_R + N_cp + (N-1)/2 does not change the variance.
    let deltas: Vec<f64> = pattern
        .symbol_indices()
        .map(|m| config.symbol_time_index(m, 0))
        .collect();
    let var_delta = population_variance(&deltas);
    if var_q == 0.0 || var_delta == 0.0 {
        return Err(Error::DegeneratePattern(
            "compact bound needs at least two subcarriers and two symbols".into(),
        ));
    }
    let df = config.subcarrier_spacing;
    let n = config.fft_size as f64;
    let var_range = gamma / (df * df) / var_q;
    let var_velocity = gamma * (n * n * df * df) / config.carrier_frequency.powi(2) / var_delta;
    Ok(CrlbBounds {
        var_range,
        var_velocity,
    })
}

/// Accuracy request: find the half-width reached with probability `confidence`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyQuery {
    pub variance: f64,
    pub bias: f64,
    pub confidence: f64,
}

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `P(|e| <= delta)` for `e ~ N(bias, variance)`.
pub fn coverage(delta: f64, variance: f64, bias: f64) -> f64 {
    let sigma = variance.sqrt();
    1.0 - q_function((delta - bias) / sigma) - q_function((delta + bias) / sigma)
}

/// Solves `confidence = 1 - Q((D - B)/s) - Q((D + B)/s)` for `D`.
pub fn accuracy(query: &AccuracyQuery) -> Result<f64> {
    let AccuracyQuery {
        variance,
        bias,
        confidence,
    } = *query;
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::Domain(format!(
            "variance must be positive, got {variance}"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!(
            "confidence must be in (0, 1), got {confidence}"
        )));
    }
    let sigma = variance.sqrt();
    let bias = bias.abs();
    let mut lo = 0.0;
    let mut hi = bias + 8.0 * sigma;
    while coverage(hi, variance, bias) < confidence {
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if coverage(mid, variance, bias) < confidence {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
