//! NR numerology, physical constants and derived timing quantities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Subcarriers per resource block.
pub const SUBCARRIERS_PER_RB: usize = 12;

/// OFDM symbols per slot with normal cyclic prefix.
pub const SYMBOLS_PER_SLOT: usize = 14;

fn default_symbols_per_slot() -> usize {
    SYMBOLS_PER_SLOT
}

/// Carrier configuration shared by every other module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Numerology index.
    pub numerology: u8,
    /// Carrier frequency (Hz).
    pub carrier_frequency: f64,
    /// Subcarrier spacing (Hz).
    pub subcarrier_spacing: f64,
    /// FFT size in subcarriers.
    pub fft_size: usize,
    /// Cyclic prefix length in samples.
    pub cp_len: usize,
    /// Active resource blocks.
    pub n_rb: usize,
    #[serde(default = "default_symbols_per_slot")]
    pub symbols_per_slot: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::uav_reference()
    }
}

/// Quantities derived from a [`SystemConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    /// Sampling period `1 / (N * df)` (s).
    pub sampling_period: f64,
    /// Samples per OFDM symbol including the cyclic prefix.
    pub symbol_len: usize,
    /// Active subcarriers, `12 * N_RB`.
    pub active_subcarriers: usize,
    /// Slot duration (s).
    pub slot_duration: f64,
}

impl SystemConfig {
    /// The 100 MHz, 30 kHz SCS carrier at 4 GHz used for the UAV sensing use case.
    pub fn uav_reference() -> Self {
        Self {
            numerology: 1,
            carrier_frequency: 4.0e9,
            subcarrier_spacing: 30.0e3,
            fft_size: 4096,
            cp_len: 288,
            n_rb: 273,
            symbols_per_slot: SYMBOLS_PER_SLOT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.fft_size == 0 {
            return fail("fft_size must be positive".into());
        }
        if !(self.subcarrier_spacing > 0.0 && self.subcarrier_spacing.is_finite()) {
            return fail(format!(
                "subcarrier_spacing must be positive, got {}",
                self.subcarrier_spacing
            ));
        }
        if !(self.carrier_frequency > 0.0 && self.carrier_frequency.is_finite()) {
            return fail(format!(
                "carrier_frequency must be positive, got {}",
                self.carrier_frequency
            ));
        }
        if self.n_rb == 0 {
            return fail("n_rb must be positive".into());
        }
        if self.symbols_per_slot == 0 {
            return fail("symbols_per_slot must be positive".into());
        }
        let active = self.n_rb * SUBCARRIERS_PER_RB;
        if active > self.fft_size {
            return fail(format!(
                "{active} active subcarriers exceed the FFT size {}",
                self.fft_size
            ));
        }
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        self.validate()?;
        let sampling_period = self.sampling_period();
        let symbol_len = self.symbol_len();
        Ok(DerivedParams {
            sampling_period,
            symbol_len,
            active_subcarriers: self.active_subcarriers(),
            slot_duration: self.symbols_per_slot as f64 * symbol_len as f64 * sampling_period,
        })
    }

    #[inline]
    pub fn active_subcarriers(&self) -> usize {
        self.n_rb * SUBCARRIERS_PER_RB
    }

    #[inline]
    pub fn sampling_period(&self) -> f64 {
        1.0 / (self.fft_size as f64 * self.subcarrier_spacing)
    }

    #[inline]
    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    /// Effective time index of symbol `m` for a DFT-window shift of `n_r` samples:
    /// `n_r + N_cp + (N - 1)/2 + m L`.
    #[inline]
    pub fn symbol_time_index(&self, m: usize, n_r: i64) -> f64 {
        n_r as f64
            + self.cp_len as f64
            + (self.fft_size as f64 - 1.0) / 2.0
            + m as f64 * self.symbol_len() as f64
    }

    /// Cyclic prefix duration (s).
    #[inline]
    pub fn cp_duration(&self) -> f64 {
        self.cp_len as f64 * self.sampling_period()
    }
}
