//! Post-FFT observation model for a single moving point target.
//!
//! Observations follow `Y = sqrt(alpha_T) X exp(-j 2 pi phi) + W` on the
//! pattern's resource elements. Doppler-induced ICI is not modelled.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{SystemConfig, SPEED_OF_LIGHT};
use crate::patterns::PatternGrid;

/// Point target seen by the monostatic receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// Range (m).
    pub range: f64,
    /// Signed radial velocity (m/s).
    pub radial_velocity: f64,
    /// Scattering phase (rad).
    pub scatter_phase: f64,
    /// Radar cross section (m^2).
    pub rcs: f64,
}

impl Target {
    /// Round-trip delay `2 d / c0`.
    pub fn delay(&self) -> f64 {
        2.0 * self.range / SPEED_OF_LIGHT
    }

    /// Nuisance phase `f_c tau_d - phi_S / (2 pi)` in cycles.
    pub fn nuisance_phase(&self, config: &SystemConfig) -> f64 {
        config.carrier_frequency * self.delay() - self.scatter_phase / (2.0 * PI)
    }
}

/// Two-way free-space attenuation from the radar equation.
pub fn radar_attenuation(range: f64, carrier_frequency: f64, rcs: f64) -> Result<f64> {
    if !(range > 0.0) {
        return Err(Error::Domain(format!(
            "range must be positive, got {range}"
        )));
    }
    Ok(SPEED_OF_LIGHT.powi(2) * rcs
        / ((4.0 * PI).powi(3) * range.powi(4) * carrier_frequency.powi(2)))
}

fn default_mean_dbsm() -> f64 {
    -12.81
}
fn default_angular() -> f64 {
    1.0
}
fn default_shadow_std() -> f64 {
    3.74
}

/// RCS as the product of a deterministic term, an angular factor and a
/// log-normal shadowing term whose dB mean is `-(ln 10 / 20) std^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcsModel {
    #[serde(default = "default_mean_dbsm")]
    pub mean_dbsm: f64,
    #[serde(default = "default_angular")]
    pub angular_factor: f64,
    #[serde(default = "default_shadow_std")]
    pub shadowing_std_db: f64,
    /// Use the expected shadowing instead of random draws.
    #[serde(default = "default_deterministic")]
    pub deterministic: bool,
}

impl Default for RcsModel {
    fn default() -> Self {
        Self {
            mean_dbsm: default_mean_dbsm(),
            angular_factor: default_angular(),
            shadowing_std_db: default_shadow_std(),
            deterministic: true,
        }
    }
}

impl RcsModel {
    /// Mean of `10 log10(sigma_S)`.
    pub fn shadowing_mean_db(&self) -> f64 {
        -(10f64.ln() / 20.0) * self.shadowing_std_db.powi(2)
    }

    /// `E[sigma_S]`; equals one under the mean/variance relation.
    pub fn expected_shadowing(&self) -> f64 {
        let k = 10f64.ln() / 10.0;
        (k * self.shadowing_mean_db() + 0.5 * (k * self.shadowing_std_db).powi(2)).exp()
    }

    fn deterministic_part(&self) -> f64 {
        10f64.powf(self.mean_dbsm / 10.0) * self.angular_factor
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.deterministic {
            return self.deterministic_part() * self.expected_shadowing();
        }
        self.deterministic_part() * self.sample_shadowing(rng)
    }

    /// Draws `sigma_S`.
    pub fn sample_shadowing<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.shadowing_std_db == 0.0 {
            return 1.0;
        }
        let normal = Normal::new(self.shadowing_mean_db(), self.shadowing_std_db)
            .expect("finite shadowing std");
        10f64.powf(normal.sample(rng) / 10.0)
    }
}

/// How the per-element SNR is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SnrSpec {
    /// No noise.
    Noiseless,
    /// Fixed per-element SNR, independent of range.
    Explicit { snr_db: f64 },
    /// SNR from a link budget and the radar equation.
    LinkBudget {
        #[serde(default = "LinkBudget::default_tx_power")]
        tx_power_dbm: f64,
        #[serde(default)]
        tx_gain_dbi: f64,
        #[serde(default)]
        rx_gain_dbi: f64,
        #[serde(default = "LinkBudget::default_nf")]
        noise_figure_db: f64,
        #[serde(default = "LinkBudget::default_density")]
        noise_density_dbm_hz: f64,
    },
}

/// Default link budget values.
pub struct LinkBudget;

impl LinkBudget {
    pub const TX_POWER_DBM: f64 = 55.0;
    pub const NOISE_FIGURE_DB: f64 = 5.0;
    pub const NOISE_DENSITY_DBM_HZ: f64 = -174.0;

    fn default_tx_power() -> f64 {
        Self::TX_POWER_DBM
    }
    fn default_nf() -> f64 {
        Self::NOISE_FIGURE_DB
    }
    fn default_density() -> f64 {
        Self::NOISE_DENSITY_DBM_HZ
    }

    pub fn default_spec() -> SnrSpec {
        SnrSpec::LinkBudget {
            tx_power_dbm: Self::TX_POWER_DBM,
            tx_gain_dbi: 0.0,
            rx_gain_dbi: 0.0,
            noise_figure_db: Self::NOISE_FIGURE_DB,
            noise_density_dbm_hz: Self::NOISE_DENSITY_DBM_HZ,
        }
    }
}

fn default_deterministic() -> bool {
    true
}

fn unit_energy() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub snr: SnrSpec,
    /// Constellation symbol energy `E_X`.
    #[serde(default = "unit_energy")]
    pub symbol_energy: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            snr: SnrSpec::Noiseless,
            symbol_energy: 1.0,
        }
    }

    pub fn explicit_db(snr_db: f64) -> Self {
        Self {
            snr: SnrSpec::Explicit { snr_db },
            symbol_energy: 1.0,
        }
    }

    pub fn link_budget() -> Self {
        Self {
            snr: LinkBudget::default_spec(),
            symbol_energy: 1.0,
        }
    }

    /// Linear per-element SNR `alpha_T E_X / sigma_w^2`; infinite when noiseless.
    pub fn snr(&self, alpha_t: f64, config: &SystemConfig) -> f64 {
        match self.snr {
            SnrSpec::Noiseless => f64::INFINITY,
            SnrSpec::Explicit { snr_db } => db_to_linear(snr_db),
            SnrSpec::LinkBudget {
                tx_power_dbm,
                tx_gain_dbi,
                rx_gain_dbi,
                noise_figure_db,
                noise_density_dbm_hz,
            } => {
                // Transmit power is split evenly over the active subcarriers.
                let per_re_dbm = tx_power_dbm - linear_to_db(config.active_subcarriers() as f64);
                let rx_dbm = per_re_dbm + tx_gain_dbi + rx_gain_dbi + linear_to_db(alpha_t);
                let noise_dbm = noise_density_dbm_hz
                    + linear_to_db(config.subcarrier_spacing)
                    + noise_figure_db;
                db_to_linear(rx_dbm - noise_dbm)
            }
        }
    }

    /// Noise variance `sigma_w^2` giving the configured SNR.
    pub fn noise_variance(&self, alpha_t: f64, config: &SystemConfig) -> f64 {
        alpha_t * self.symbol_energy / self.snr(alpha_t, config)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Phase `phi_{q,m}` in cycles.
pub fn phase_phi(
    q: i64,
    m: usize,
    delay: f64,
    radial_velocity: f64,
    nuisance: f64,
    config: &SystemConfig,
    n_r: i64,
) -> f64 {
    let df = config.subcarrier_spacing;
    let ts = config.sampling_period();
    let tau_r = n_r as f64 * ts;
    let fq = df * q as f64;
    nuisance
        + fq * (delay - tau_r)
        + (config.carrier_frequency + fq)
            * (2.0 * radial_velocity / SPEED_OF_LIGHT)
            * config.symbol_time_index(m, n_r)
            * ts
}

/// DFT-window shift that brings the residual delay into `[0, T_s)`.
pub fn presteered_shift(delay: f64, config: &SystemConfig) -> i64 {
    (delay / config.sampling_period()).floor() as i64
}

/// Behaviour when the residual delay is not covered by the cyclic prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CpPolicy {
    #[default]
    Error,
    Warn,
}

/// Checks `0 <= tau_d - tau_R <= N_cp T_s`.
pub fn check_cp(delay: f64, config: &SystemConfig, n_r: i64) -> Result<()> {
    let residual = delay - n_r as f64 * config.sampling_period();
    let cp = config.cp_duration();
    if residual < 0.0 || residual > cp {
        return Err(Error::CpViolation {
            residual_s: residual,
            cp_s: cp,
        });
    }
    Ok(())
}

/// Received observations on a pattern.
#[derive(Debug, Clone)]
pub struct ReceivedGrid<'a> {
    pub pattern: &'a PatternGrid,
    pub config: SystemConfig,
    /// Pilot symbols, aligned with `pattern.elements()`.
    pub pilots: Vec<Complex64>,
    /// Observations, aligned with `pattern.elements()`.
    pub observations: Vec<Complex64>,
    pub target: Target,
    pub n_r: i64,
    pub attenuation: f64,
    pub noise_variance: f64,
    pub symbol_energy: f64,
    pub cp_violation: bool,
}

impl ReceivedGrid<'_> {
    /// Per-element SNR.
    pub fn snr(&self) -> f64 {
        self.attenuation * self.symbol_energy / self.noise_variance
    }

    /// Receiver DFT-window shift `tau_R` (s).
    pub fn window_shift(&self) -> f64 {
        self.n_r as f64 * self.config.sampling_period()
    }

    /// CSV rows `slot,m,q,re_x,im_x,re_y,im_y`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("slot,m,q,re_x,im_x,re_y,im_y\n");
        for ((e, x), y) in self
            .pattern
            .elements()
            .iter()
            .zip(&self.pilots)
            .zip(&self.observations)
        {
            let _ = writeln!(
                out,
                "{},{},{},{:e},{:e},{:e},{:e}",
                e.m / self.pattern.symbols_per_slot,
                e.m,
                e.q,
                x.re,
                x.im,
                y.re,
                y.im
            );
        }
        out
    }
}

/// Unit-circle QPSK symbol scaled to energy `energy`.
fn qpsk<R: Rng + ?Sized>(rng: &mut R, energy: f64) -> Complex64 {
    let a = (energy / 2.0).sqrt();
    let bits: u8 = rng.gen_range(0..4);
    Complex64::new(
        if bits & 1 == 0 { a } else { -a },
        if bits & 2 == 0 { a } else { -a },
    )
}

/// Draws pilots and noise and forms the observations for `target`.
pub fn synthesize<'a, R: Rng + ?Sized>(
    pattern: &'a PatternGrid,
    target: &Target,
    noise: &NoiseModel,
    config: &SystemConfig,
    n_r: i64,
    cp_policy: CpPolicy,
    rng: &mut R,
) -> Result<ReceivedGrid<'a>> {
    config.validate()?;
    let delay = target.delay();
    let cp_violation = match check_cp(delay, config, n_r) {
        Ok(()) => false,
        Err(e) => match cp_policy {
            CpPolicy::Error => return Err(e),
            CpPolicy::Warn => {
                log::warn!("{e}");
                true
            }
        },
    };
    let attenuation = radar_attenuation(target.range, config.carrier_frequency, target.rcs)?;
    let noise_variance = noise.noise_variance(attenuation, config);
    let amplitude = attenuation.sqrt();
    let nuisance = target.nuisance_phase(config);
    let sigma = (noise_variance / 2.0).sqrt();

    let mut pilots = Vec::with_capacity(pattern.len());
    let mut observations = Vec::with_capacity(pattern.len());
    for e in pattern.elements() {
        let x = qpsk(rng, noise.symbol_energy);
        let phi = phase_phi(
            e.q,
            e.m,
            delay,
            target.radial_velocity,
            nuisance,
            config,
            n_r,
        );
        let clean = x * amplitude * Complex64::from_polar(1.0, -2.0 * PI * phi.rem_euclid(1.0));
        let w = if sigma > 0.0 {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * sigma
        } else {
            Complex64::new(0.0, 0.0)
        };
        pilots.push(x);
        observations.push(clean + w);
    }
    Ok(ReceivedGrid {
        pattern,
        config: *config,
        pilots,
        observations,
        target: *target,
        n_r,
        attenuation,
        noise_variance,
        symbol_energy: noise.symbol_energy,
        cp_violation,
    })
}
