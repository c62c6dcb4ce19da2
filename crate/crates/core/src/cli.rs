//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::estimators::{max_unambiguous, resolutions};
use crate::experiments::{self, Manifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "nr-sensing",
    version,
    about = "5G NR monostatic UAV sensing simulator"
)]
pub struct Cli {
    /// Configuration file (TOML or JSON). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output` in the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed; overrides `experiment.master_seed`.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print derived parameters, unambiguous limits and resolutions.
    Info,
    /// Write each pattern as CSV plus a text slot map.
    Patterns,
    /// Write the CRLB sweep.
    Crlb,
    /// Run the Monte Carlo sweep.
    Simulate,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidComb { .. } | Error::NonDivisible { .. } => {
            EXIT_CONFIG
        }
        _ => EXIT_RUNTIME,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.experiment.master_seed = seed;
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    match cli.command {
        Command::Info => {
            print!("{}", cmd_info(&cfg)?);
            Ok(())
        }
        Command::Patterns => report(cmd_patterns(&cfg)?),
        Command::Crlb => report(cmd_crlb(&cfg)?),
        Command::Simulate => report(cmd_simulate(&cfg)?),
    }
}

fn report(paths: Vec<PathBuf>) -> Result<()> {
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_info(cfg: &RunConfig) -> Result<String> {
    let c = &cfg.system;
    let d = c.derive()?;
    let mut s = String::new();
    let _ = writeln!(s, "numerology              {}", c.numerology);
    let _ = writeln!(s, "carrier frequency       {} Hz", c.carrier_frequency);
    let _ = writeln!(s, "subcarrier spacing      {} Hz", c.subcarrier_spacing);
    let _ = writeln!(s, "FFT size                {}", c.fft_size);
    let _ = writeln!(s, "cyclic prefix           {} samples", c.cp_len);
    let _ = writeln!(s, "resource blocks         {}", c.n_rb);
    let _ = writeln!(s, "active subcarriers      {}", d.active_subcarriers);
    let _ = writeln!(
        s,
        "sampling period         {:.4} ns",
        d.sampling_period * 1e9
    );
    let _ = writeln!(s, "symbol length           {} samples", d.symbol_len);
    let _ = writeln!(s, "slot duration           {:.2} us", d.slot_duration * 1e6);
    let (d_max, v_max) = max_unambiguous(c, cfg.info.tau_r);
    let _ = writeln!(s, "\nmaximum unambiguous values");
    let _ = writeln!(s, "d_max                   {d_max:.1} m");
    let _ = writeln!(s, "v_max                   {v_max:.1} m/s");
    let _ = writeln!(s, "\nresolution");
    let _ = writeln!(s, "{:>8} {:>12} {:>12}", "N_per", "dd (m)", "dv (m/s)");
    for &n in &cfg.info.n_per {
        let (dd, dv) = resolutions(c, n);
        let _ = writeln!(s, "{n:>8} {dd:>12.4} {dv:>12.4}");
    }
    Ok(s)
}

pub fn cmd_patterns(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_dir(&cfg.output)?;
    let mut out = Vec::new();
    for p in cfg.experiment_spec().expanded_patterns() {
        let grid = p.generate(&cfg.system)?;
        let stem = format!("pattern_{}_K{}_S{}", p.kind.label(), grid.comb, p.n_slots);
        let csv = cfg.output.join(format!("{stem}.csv"));
        std::fs::write(&csv, grid.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let map_path = cfg.output.join(format!("{stem}.txt"));
        let mut map = String::new();
        for slot in 0..p.n_slots {
            let _ = writeln!(map, "slot {slot}");
            map.push_str(&grid.slot_map(slot, cfg.system.n_rb.min(4)));
        }
        std::fs::write(&map_path, map).map_err(|e| Error::io(&map_path, e))?;
        out.extend([csv, map_path]);
    }
    Ok(out)
}

pub fn cmd_crlb(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_dir(&cfg.output)?;
    let rows = experiments::crlb_sweep(&cfg.experiment_spec(), &cfg.system)?;
    let path = cfg.output.join("crlb.csv");
    experiments::write_csv(&rows, &path)?;
    Ok(vec![path])
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_dir(&cfg.output)?;
    let spec = cfg.experiment_spec();
    let records = experiments::run(&spec, &cfg.system)?;
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        log::warn!("{failed} of {} trials failed", records.len());
    }
    let stats = experiments::summarize(&records, spec.confidence)?;
    let trials = cfg.output.join("trials.csv");
    let summary = cfg.output.join("summary.csv");
    let manifest = cfg.output.join("manifest.json");
    experiments::write_csv(&records, &trials)?;
    experiments::write_csv(&stats, &summary)?;
    let created_unix_s = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    experiments::write_manifest(
        &Manifest {
            system: cfg.system,
            master_seed: spec.master_seed,
            experiment: spec,
            outputs: vec!["trials.csv".into(), "summary.csv".into()],
            created_unix_s,
        },
        &manifest,
    )?;
    Ok(vec![trials, summary, manifest])
}
