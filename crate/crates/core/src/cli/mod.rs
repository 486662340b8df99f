//! Command-line front end: subcommand dispatch and artifact emission.

pub mod config;
pub mod output;

use crate::acceptance::{self, PARITY_PAIRS};
use crate::control::{close_loop, FeedbackLaw, LawKind};
use crate::error::{Error, Result};
use crate::materials::{coefficient_rows, CompositeSpec};
use crate::models::{assemble, DiscreteSystem};
use crate::operators::Grid;
use crate::simulate::{self, fit_decay};
use crate::spectral::resonance::{
    coupled_resonance_search, random_state, resonance_search, smooth_random_state, ResonanceOutcome, SearchOptions,
};
use crate::spectral;
use clap::{Parser, Subcommand};
use config::{parse_entries, Entry, Feedback, Origin, RunConfig};
use output::{fmt_f64, write_csv, write_pairs, write_trace};
use rayon::prelude::*;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "smartbeam", version, about = "Layered piezoelectric beam models under boundary feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// full, rn-dynamic, rn-static, mm-dynamic or mm-static.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Number of elements.
    #[arg(long = "N", global = true)]
    pub n: Option<String>,
    /// Time horizon.
    #[arg(long = "T", global = true)]
    pub t: Option<String>,
    #[arg(long, global = true)]
    pub dt: Option<String>,
    /// Comma-separated gains, one per active channel.
    #[arg(long, global = true)]
    pub gains: Option<String>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write trace.svg.
    #[arg(long, global = true)]
    pub plot: bool,
    /// knob:lo:hi:count
    #[arg(long, global = true)]
    pub sweep: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Derived model constants (coefficients.csv).
    Derive,
    /// Assembled system summary (system.meta.csv).
    Assemble,
    /// Energy trace of a time integration (trace.csv).
    Simulate,
    /// Generalized eigenvalues (spectrum.csv, scan.csv for rn-static).
    Spectrum,
    /// Undamped-mode search for the dynamic M-M loop (resonance.csv).
    Resonance,
    /// Acceptance suite.
    Verify,
    /// Closed-loop stability summary (table.csv).
    Table,
}

impl Cli {
    fn flag_entries(&self) -> Vec<Entry> {
        let mut out = vec![];
        let mut push = |key: &str, value: Option<String>| {
            if let Some(value) = value {
                out.push(Entry { key: key.into(), value, origin: Origin::Flag });
            }
        };
        push("model", self.model.clone());
        push("grid.N", self.n.clone());
        push("time.T", self.t.clone());
        push("time.dt", self.dt.clone());
        push("feedback.gains", self.gains.clone());
        push("output.dir", self.out.as_ref().map(|p| p.display().to_string()));
        push("output.plot", self.plot.then(|| "true".to_string()));
        push("sweep", self.sweep.clone());
        out
    }

    /// File entries first, flags override them.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut entries = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                parse_entries(&text)?
            }
            None => vec![],
        };
        entries.extend(self.flag_entries());
        RunConfig::from_entries(&entries)
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.run_config().and_then(|c| run(cli.command, &c)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one subcommand; the returned code is nonzero when a check fails.
pub fn run(command: Command, c: &RunConfig) -> Result<i32> {
    if c.sweep.is_some() && !matches!(command, Command::Derive | Command::Simulate | Command::Spectrum) {
        return Err(Error::Config("sweep is supported by derive, simulate and spectrum only".into()));
    }
    match command {
        Command::Derive => derive(c),
        Command::Assemble => assemble_meta(c),
        Command::Simulate => simulate_cmd(c),
        Command::Spectrum => spectrum_cmd(c),
        Command::Resonance => resonance_cmd(c),
        Command::Verify => verify(c),
        Command::Table => table(c),
    }
}

fn out_path(c: &RunConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&c.out)?;
    Ok(c.out.join(name))
}

fn announce(p: &Path) {
    println!("wrote {}", p.display());
}

/// Open-loop system and the system to run (closed when feedback is on).
pub fn build(c: &RunConfig, spec: &CompositeSpec) -> Result<(DiscreteSystem, DiscreteSystem)> {
    let grid = Grid::new(spec.length, c.n)?;
    let mut open = assemble(c.model, spec, &grid)?;
    let kind = match &c.feedback {
        Feedback::Open => {
            if c.gains.is_some() {
                return Err(Error::Config("feedback.gains given with feedback.law = none".into()));
            }
            return Ok((open.clone(), open));
        }
        Feedback::Default => LawKind::default_for(c.model),
        Feedback::Law(k) => *k,
    };
    if kind == LawKind::InertialSliding {
        open = open.inertial_sliding_subsystem()?;
    }
    let law = match &c.gains {
        Some(g) => FeedbackLaw::new(kind, g.clone())?,
        None => FeedbackLaw::unit(kind),
    };
    let closed = close_loop(&open, &law)?;
    Ok((open, closed))
}

/// Knob values paired with their results, sorted by knob value.
fn sweep_rows<F>(c: &RunConfig, f: F) -> Result<Vec<(f64, Vec<String>)>>
where
    F: Fn(&CompositeSpec) -> Result<Vec<String>> + Sync,
{
    let sw = c.sweep.expect("caller checked");
    let mut rows: Vec<(f64, Vec<String>)> = sw
        .points()
        .par_iter()
        .map(|&v| Ok((v, f(&c.spec.with_knob(sw.knob, v))?)))
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rows)
}

fn write_sweep(c: &RunConfig, columns: &[&str], rows: Vec<(f64, Vec<String>)>) -> Result<()> {
    let sw = c.sweep.expect("caller checked");
    let mut header = vec![sw.knob.name()];
    header.extend_from_slice(columns);
    let rows: Vec<Vec<String>> = rows
        .into_iter()
        .map(|(v, r)| std::iter::once(fmt_f64(v)).chain(r).collect())
        .collect();
    let p = out_path(c, "sweep.csv")?;
    write_csv(&p, &header, &rows)?;
    announce(&p);
    Ok(())
}

fn derive(c: &RunConfig) -> Result<i32> {
    if c.sweep.is_some() {
        let names: Vec<&str> = coefficient_rows(&c.spec)?.iter().map(|r| r.0).collect();
        let rows = sweep_rows(c, |s| Ok(coefficient_rows(s)?.iter().map(|r| fmt_f64(r.1)).collect()))?;
        write_sweep(c, &names, rows)?;
        return Ok(0);
    }
    let rows: Vec<(String, f64)> = coefficient_rows(&c.spec)?.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let p = out_path(c, "coefficients.csv")?;
    write_pairs(&p, ["name", "value"], &rows)?;
    announce(&p);
    Ok(0)
}

fn assemble_meta(c: &RunConfig) -> Result<i32> {
    let (_, sys) = build(c, &c.spec)?;
    let p = out_path(c, "system.meta.csv")?;
    write_pairs(&p, ["name", "value"], &sys.meta_rows()?)?;
    announce(&p);
    Ok(0)
}

/// Initial state: a seeded mix of the lowest open-loop modes, or a nodal
/// random vector when `init.modes = 0`.
pub fn initial_state(c: &RunConfig, open: &DiscreteSystem) -> Result<Vec<f64>> {
    if c.init_modes == 0 {
        Ok(random_state(open.dim(), c.seed))
    } else {
        smooth_random_state(open, c.init_modes, c.seed)
    }
}

fn run_trace(c: &RunConfig, spec: &CompositeSpec) -> Result<simulate::EnergyTrace> {
    let (open, sys) = build(c, spec)?;
    let x0 = initial_state(c, &open)?;
    let dt = c.dt.unwrap_or_else(|| simulate::default_dt(&sys));
    Ok(simulate::integrate(&sys, &x0, c.t_end, dt, c.stride)?.0)
}

fn simulate_cmd(c: &RunConfig) -> Result<i32> {
    if c.sweep.is_some() {
        let rows = sweep_rows(c, |s| {
            let tr = run_trace(c, s)?;
            let (e0, e1) = (tr.total[0], tr.total[tr.len() - 1]);
            let rate = fit_decay(&tr.t, &tr.total, (0.0, f64::INFINITY)).map(|f| f.rate).unwrap_or(f64::NAN);
            Ok(vec![fmt_f64(e0), fmt_f64(e1), fmt_f64(e1 / e0), fmt_f64(rate)])
        })?;
        write_sweep(c, &["E0", "E_T", "ratio", "decay_rate"], rows)?;
        return Ok(0);
    }
    let trace = run_trace(c, &c.spec)?;
    let p = out_path(c, "trace.csv")?;
    write_trace(&p, &trace)?;
    announce(&p);
    if c.plot {
        let p = out_path(c, "trace.svg")?;
        std::fs::write(&p, output::trace_svg(&trace))?;
        announce(&p);
    }
    Ok(0)
}

fn spectrum_cmd(c: &RunConfig) -> Result<i32> {
    if c.sweep.is_some() {
        let rows = sweep_rows(c, |s| {
            let sp = spectral::spectrum(&build(c, s)?.1)?;
            Ok(vec![
                fmt_f64(sp.abscissa()),
                fmt_f64(sp.min_modulus()),
                fmt_f64(sp.scale()),
                sp.axis_count().to_string(),
            ])
        })?;
        write_sweep(c, &["abscissa", "min_modulus", "max_modulus", "axis_count"], rows)?;
        return Ok(0);
    }
    let (_, sys) = build(c, &c.spec)?;
    let sp = spectral::spectrum(&sys)?;
    let rows: Vec<Vec<String>> = sp.eigenvalues.iter().map(|l| vec![fmt_f64(l.re), fmt_f64(l.im)]).collect();
    let p = out_path(c, "spectrum.csv")?;
    write_csv(&p, &["re", "im"], &rows)?;
    announce(&p);
    println!("abscissa {}", fmt_f64(sp.abscissa()));
    if c.model == crate::models::ModelKind::RnStatic {
        let grid = Grid::new(c.spec.length, c.n)?;
        let freqs = spectral::scan_frequencies(&c.spec, &grid, 10, 40)?;
        let prof = spectral::overdetermined_scan(&c.spec, &grid, &freqs)?;
        let rows: Vec<Vec<String>> = prof.iter().map(|(w, s)| vec![fmt_f64(*w), fmt_f64(*s)]).collect();
        let p = out_path(c, "scan.csv")?;
        write_csv(&p, &["mu", "sigma_min"], &rows)?;
        announce(&p);
    }
    Ok(0)
}

const RESONANCE_HEADER: [&str; 9] =
    ["kind", "n", "m", "knob", "knob_value", "frequency", "residual", "tip_charge", "status"];

fn resonance_cmd(c: &RunConfig) -> Result<i32> {
    let value = c.spec.knob(c.resonance_knob);
    let opts = SearchOptions {
        interval: c.resonance_interval.unwrap_or((value * 1e-8, value * 1e8)),
        samples: c.resonance_samples,
        log: true,
        check_points: 10 * c.n,
    };
    let outcomes: Vec<((u32, u32), ResonanceOutcome)> = PARITY_PAIRS
        .par_iter()
        .map(|&(a, b)| Ok(((a, b), resonance_search(&c.spec, a, b, c.resonance_knob, &opts)?)))
        .collect::<Result<_>>()?;
    let mut rows = vec![];
    for ((a, b), out) in &outcomes {
        let mut r = vec!["continuum".to_string(), a.to_string(), b.to_string(), c.resonance_knob.name().to_string()];
        match out {
            ResonanceOutcome::Certified(cert) => r.extend([
                fmt_f64(cert.knob_value),
                fmt_f64(cert.tau),
                fmt_f64(cert.ode_residual),
                fmt_f64(cert.p_tip),
                "certified".to_string(),
            ]),
            ResonanceOutcome::Infeasible(inf) => r.extend([
                fmt_f64(inf.at),
                String::new(),
                fmt_f64(inf.min_mismatch),
                String::new(),
                "infeasible".to_string(),
            ]),
        }
        rows.push(r);
    }
    let grid = Grid::new(c.spec.length, c.n)?;
    let coupled = coupled_resonance_search(
        &c.spec,
        &grid,
        6,
        &SearchOptions { interval: (1e-9, 1e3), samples: 300, log: true, check_points: 0 },
    )?;
    for cert in &coupled {
        rows.push(vec![
            "coupled".to_string(),
            (cert.branch + 1).to_string(),
            String::new(),
            "mu".to_string(),
            fmt_f64(cert.mu),
            fmt_f64(cert.frequency),
            String::new(),
            fmt_f64(cert.tip_charge),
            "certified".to_string(),
        ]);
    }
    let p = out_path(c, "resonance.csv")?;
    write_csv(&p, &RESONANCE_HEADER, &rows)?;
    announce(&p);
    for ((a, b), out) in &outcomes {
        if let ResonanceOutcome::Infeasible(inf) = out {
            println!("({a},{b}) infeasible on [{}, {}]: {}", fmt_f64(inf.interval.0), fmt_f64(inf.interval.1), inf.reason);
        }
    }
    println!("{} coupled undamped modes at N={}", coupled.len(), c.n);
    Ok(0)
}

fn verify(c: &RunConfig) -> Result<i32> {
    let results = acceptance::run_all(&c.spec);
    for r in &results {
        println!("{}", r.line());
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria pass", results.len());
    Ok(if passed == results.len() { 0 } else { 3 })
}

fn table(c: &RunConfig) -> Result<i32> {
    let rows = acceptance::stability_table(&c.spec)?;
    for r in &rows {
        println!("{:<45} {:<38} {:<11} {}", r.model, r.feedback, r.verdict, r.evidence);
    }
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.model.into(), r.feedback.into(), r.expected.into(), r.verdict.clone(), r.evidence.clone()])
        .collect();
    let p = out_path(c, "table.csv")?;
    write_csv(&p, &["model", "feedback", "expected", "verdict", "evidence"], &csv_rows)?;
    announce(&p);
    Ok(if rows.iter().all(|r| r.verdict == r.expected) { 0 } else { 3 })
}
