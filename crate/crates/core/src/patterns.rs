//! Time-frequency index sets of the sensing patterns.
//!
//! Three families are generated: the full slot (every active subcarrier of
//! every symbol), the NR positioning reference signal with `M_PRS = K_comb`,
//! and the regular DDRS comb. Subcarrier indices are centered, i.e. they lie
//! in `[-N_A/2, N_A/2 - 1]`, and symbol indices are global (`m_local + 14 *
//! slot`). Elements are kept sorted by `(m, q)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemConfig;

/// Comb sizes allowed for PRS when `M_PRS = K_comb`.
pub const PRS_COMBS: [usize; 4] = [2, 4, 6, 12];

/// `{M_DDRS, K_comb}` configurations; all have `M_DDRS = K_comb`.
pub const DDRS_COMBS: [usize; 6] = [2, 4, 6, 7, 12, 14];

const Q_PRIME: [(usize, [usize; 12]); 4] = [
    (2, [0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1]),
    (4, [0, 2, 1, 3, 0, 2, 1, 3, 0, 2, 1, 3]),
    (6, [0, 3, 1, 4, 2, 5, 0, 3, 1, 4, 2, 5]),
    (12, [0, 6, 3, 9, 1, 7, 4, 10, 2, 8, 5, 11]),
];

/// PRS frequency stagger `q'` for a comb size and symbol index relative to `m_start`.
pub fn q_prime(comb: usize, rel_m: usize) -> Result<usize> {
    let row = Q_PRIME
        .iter()
        .find(|(k, _)| *k == comb)
        .ok_or(Error::InvalidComb {
            pattern: "PRS",
            comb,
        })?;
    row.1
        .get(rel_m)
        .copied()
        .ok_or_else(|| Error::Domain(format!("relative symbol index {rel_m} outside 0..=11")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    FullSlot,
    Prs,
    Ddrs,
}

impl PatternKind {
    pub fn label(self) -> &'static str {
        match self {
            PatternKind::FullSlot => "full-slot",
            PatternKind::Prs => "prs",
            PatternKind::Ddrs => "ddrs",
        }
    }
}

fn one() -> usize {
    1
}

/// Parameters of one sensing pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    pub kind: PatternKind,
    /// Frequency comb size; ignored for the full slot.
    #[serde(default)]
    pub comb: usize,
    #[serde(default)]
    pub m_start: usize,
    /// PRS only.
    #[serde(default)]
    pub q_offset: usize,
    #[serde(default = "one")]
    pub n_slots: usize,
}

impl PatternSpec {
    pub fn full_slot(n_slots: usize) -> Self {
        Self {
            kind: PatternKind::FullSlot,
            comb: 1,
            m_start: 0,
            q_offset: 0,
            n_slots,
        }
    }

    pub fn prs(comb: usize, n_slots: usize) -> Self {
        Self {
            kind: PatternKind::Prs,
            comb,
            m_start: 0,
            q_offset: 0,
            n_slots,
        }
    }

    pub fn ddrs(comb: usize, n_slots: usize) -> Self {
        Self {
            kind: PatternKind::Ddrs,
            comb,
            m_start: 0,
            q_offset: 0,
            n_slots,
        }
    }

    /// Builds the grid described by this spec.
    pub fn generate(&self, config: &SystemConfig) -> Result<PatternGrid> {
        if self.n_slots == 0 {
            return Err(Error::InvalidConfig("n_slots must be at least 1".into()));
        }
        let slot = match self.kind {
            PatternKind::FullSlot => full_slot(config)?,
            PatternKind::Prs => prs(self, config)?,
            PatternKind::Ddrs => ddrs(self, config)?,
        };
        Ok(extend_multislot(&slot, self.n_slots))
    }
}

/// One sensing resource element: centered subcarrier `q`, global symbol `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceElement {
    pub m: usize,
    pub q: i64,
}

/// The set of sensing resource elements over one or more slots.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternGrid {
    pub kind: PatternKind,
    pub comb: usize,
    pub n_slots: usize,
    pub symbols_per_slot: usize,
    pub active_subcarriers: usize,
    elements: Vec<ResourceElement>,
    /// `m -> index range into elements`.
    symbols: BTreeMap<usize, std::ops::Range<usize>>,
}

impl PatternGrid {
    /// Arbitrary single-slot grid, for toy configurations and tests.
    /// Subcarriers must lie in `[-active/2, active - active/2)` and symbols
    /// in `[0, symbols_per_slot)`.
    pub fn custom(
        symbols_per_slot: usize,
        active_subcarriers: usize,
        elements: Vec<ResourceElement>,
    ) -> Result<Self> {
        let q_lo = -(active_subcarriers as i64 / 2);
        let q_hi = active_subcarriers as i64 + q_lo;
        if let Some(e) = elements
            .iter()
            .find(|e| e.m >= symbols_per_slot || e.q < q_lo || e.q >= q_hi)
        {
            return Err(Error::InvalidConfig(format!(
                "element {e:?} outside the slot grid"
            )));
        }
        Ok(Self::from_elements(
            PatternKind::FullSlot,
            1,
            1,
            symbols_per_slot,
            active_subcarriers,
            elements,
        ))
    }

    fn from_elements(
        kind: PatternKind,
        comb: usize,
        n_slots: usize,
        symbols_per_slot: usize,
        active_subcarriers: usize,
        mut elements: Vec<ResourceElement>,
    ) -> Self {
        elements.sort_unstable();
        elements.dedup();
        let mut symbols = BTreeMap::new();
        let mut start = 0;
        while start < elements.len() {
            let m = elements[start].m;
            let end = start + elements[start..].iter().take_while(|e| e.m == m).count();
            symbols.insert(m, start..end);
            start = end;
        }
        Self {
            kind,
            comb,
            n_slots,
            symbols_per_slot,
            active_subcarriers,
            elements,
            symbols,
        }
    }

    pub fn elements(&self) -> &[ResourceElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Number of distinct symbols carrying sensing resources.
    pub fn num_symbols(&self) -> usize {
        self.symbols.len()
    }

    /// Distinct symbol indices in increasing order.
    pub fn symbol_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.symbols.keys().copied()
    }

    /// Iterates `(m, elements of symbol m)`.
    pub fn per_symbol(&self) -> impl Iterator<Item = (usize, &[ResourceElement])> + '_ {
        self.symbols
            .iter()
            .map(|(&m, r)| (m, &self.elements[r.clone()]))
    }

    /// Element index range belonging to symbol `m`.
    pub fn symbol_range(&self, m: usize) -> Option<std::ops::Range<usize>> {
        self.symbols.get(&m).cloned()
    }

    /// Subcarrier set `K(m)`.
    pub fn subcarriers(&self, m: usize) -> Vec<i64> {
        self.symbol_range(m)
            .map(|r| self.elements[r].iter().map(|e| e.q).collect())
            .unwrap_or_default()
    }

    /// Fraction of the resource elements of all spanned slots used for sensing.
    pub fn overhead(&self) -> f64 {
        let total = self.active_subcarriers * self.symbols_per_slot * self.n_slots;
        self.elements.len() as f64 / total as f64
    }

    /// Returns the common subcarrier set when every used symbol carries the same `K(m)`.
    pub fn uniform_subcarriers(&self) -> Option<Vec<i64>> {
        let mut iter = self.per_symbol();
        let (_, first) = iter.next()?;
        let reference: Vec<i64> = first.iter().map(|e| e.q).collect();
        for (_, els) in iter {
            if els.len() != reference.len() || els.iter().zip(&reference).any(|(e, q)| e.q != *q) {
                return None;
            }
        }
        Some(reference)
    }

    /// CSV rows `slot,m,q` with a header; `m` is the global symbol index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot,m,q\n");
        for e in &self.elements {
            let _ = writeln!(out, "{},{},{}", e.m / self.symbols_per_slot, e.m, e.q);
        }
        out
    }

    /// Text map of one slot over the lowest `n_rb` resource blocks. Rows are
    /// subcarriers (highest on top), columns are symbols; `#` marks sensing
    /// elements.
    pub fn slot_map(&self, slot: usize, n_rb: usize) -> String {
        let rows = (n_rb * 12).min(self.active_subcarriers);
        let q_low = -(self.active_subcarriers as i64 / 2);
        let m0 = slot * self.symbols_per_slot;
        let mut out = String::new();
        for r in (0..rows as i64).rev() {
            let q = q_low + r;
            let _ = write!(out, "{q:>6} ");
            for m in m0..m0 + self.symbols_per_slot {
                let used = self
                    .symbol_range(m)
                    .map(|rg| {
                        self.elements[rg]
                            .binary_search(&ResourceElement { m, q })
                            .is_ok()
                    })
                    .unwrap_or(false);
                out.push(if used { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

fn centered_range(active: usize) -> impl Iterator<Item = i64> {
    let half = active as i64 / 2;
    -half..active as i64 - half
}

/// All active subcarriers in all symbols of one slot.
pub fn full_slot(config: &SystemConfig) -> Result<PatternGrid> {
    config.validate()?;
    let elements = (0..config.symbols_per_slot)
        .flat_map(|m| {
            centered_range(config.active_subcarriers()).map(move |q| ResourceElement { m, q })
        })
        .collect();
    Ok(PatternGrid::from_elements(
        PatternKind::FullSlot,
        1,
        1,
        config.symbols_per_slot,
        config.active_subcarriers(),
        elements,
    ))
}

fn check_comb(pattern: &'static str, comb: usize, allowed: &[usize], active: usize) -> Result<()> {
    if !allowed.contains(&comb) {
        return Err(Error::InvalidComb { pattern, comb });
    }
    if active % comb != 0 {
        return Err(Error::NonDivisible { comb, active });
    }
    Ok(())
}

/// Single-slot PRS grid with `M_PRS = K_comb`.
pub fn prs(spec: &PatternSpec, config: &SystemConfig) -> Result<PatternGrid> {
    config.validate()?;
    let comb = spec.comb;
    let active = config.active_subcarriers();
    check_comb("PRS", comb, &PRS_COMBS, active)?;
    if spec.q_offset >= comb {
        return Err(Error::InvalidConfig(format!(
            "q_offset {} must be below the comb size {comb}",
            spec.q_offset
        )));
    }
    if spec.m_start + comb > config.symbols_per_slot {
        return Err(Error::InvalidConfig(format!(
            "PRS with m_start {} and {comb} symbols does not fit in a slot",
            spec.m_start
        )));
    }
    let half = active as i64 / 2;
    let repetitions = active / comb;
    let mut elements = Vec::with_capacity(active);
    for rel_m in 0..comb {
        let stagger = (spec.q_offset + q_prime(comb, rel_m)?) % comb;
        let m = spec.m_start + rel_m;
        elements.extend((0..repetitions).map(|l| ResourceElement {
            m,
            q: (l * comb + stagger) as i64 - half,
        }));
    }
    Ok(PatternGrid::from_elements(
        PatternKind::Prs,
        comb,
        1,
        config.symbols_per_slot,
        config.active_subcarriers(),
        elements,
    ))
}

/// Single-slot DDRS grid with `M_DDRS = K_comb` symbols spaced by `floor(14 / K_comb)`.
pub fn ddrs(spec: &PatternSpec, config: &SystemConfig) -> Result<PatternGrid> {
    config.validate()?;
    let comb = spec.comb;
    let active = config.active_subcarriers();
    check_comb("DDRS", comb, &DDRS_COMBS, active)?;
    let spacing = config.symbols_per_slot / comb;
    if spacing == 0 || spec.m_start + (comb - 1) * spacing >= config.symbols_per_slot {
        return Err(Error::InvalidConfig(format!(
            "DDRS with m_start {} and {comb} symbols does not fit in a slot",
            spec.m_start
        )));
    }
    let half = active as i64 / 2;
    let repetitions = active / comb;
    let elements = (0..comb)
        .flat_map(|ell| {
            let m = spec.m_start + ell * spacing;
            (0..repetitions).map(move |l| ResourceElement {
                m,
                q: (l * comb) as i64 - half,
            })
        })
        .collect();
    Ok(PatternGrid::from_elements(
        PatternKind::Ddrs,
        comb,
        1,
        config.symbols_per_slot,
        config.active_subcarriers(),
        elements,
    ))
}

/// Repeats `grid` `n_slots` times; copy `k` is shifted by `k` times the
/// grid's span in symbols.
pub fn extend_multislot(grid: &PatternGrid, n_slots: usize) -> PatternGrid {
    let n_slots = n_slots.max(1);
    let period = grid.symbols_per_slot * grid.n_slots;
    let elements = (0..n_slots)
        .flat_map(|k| {
            grid.elements.iter().map(move |e| ResourceElement {
                m: e.m + k * period,
                q: e.q,
            })
        })
        .collect();
    PatternGrid::from_elements(
        grid.kind,
        grid.comb,
        grid.n_slots * n_slots,
        grid.symbols_per_slot,
        grid.active_subcarriers,
        elements,
    )
}
