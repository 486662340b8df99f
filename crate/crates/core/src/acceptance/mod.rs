//! The acceptance suite: one check per criterion, each with its pinned
//! tolerance and runtime budget. Shared by the `verify`/`table` commands
//! and the `acceptance` test target.

pub mod exact;

use crate::control::{close_loop, FeedbackLaw, LawKind};
use crate::error::{Error, Result};
use crate::linalg;
use crate::materials::{derive_mm, CompositeSpec};
use crate::models::{assemble, DiscreteSystem, ModelKind};
use crate::operators::{EllipticSolver, Grid};
use crate::simulate::{self, fit_decay};
use crate::spectral::resonance::{
    self, coupled_resonance_search, random_state, smooth_random_state, verify_certificate, verify_coupled,
    CoupledVerification, ResonanceOutcome, SearchOptions,
};
use crate::spectral::{self, Spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

/// Criteria that cannot pass for physically admissible parameters; see the
/// detail line printed for them.
pub const KNOWN_UNATTAINABLE: &[u8] = &[6];

pub const CRITERIA: [(u8, &str, u64); 11] = [
    (1, "open-loop energy conservation", 60),
    (2, "skew-adjointness of the open-loop generator", 5),
    (3, "electrostatic R-N exponential stability", 120),
    (4, "electrostatic M-M exponential stability", 60),
    (5, "inertial-sliding strong stability", 30),
    (6, "dynamic M-M resonance certificate", 120),
    (7, "nonlocal operator J symmetric and nonpositive", 10),
    (8, "overdetermined boundary problem has only the trivial solution", 60),
    (9, "M-M constants match the exact rational oracle", 5),
    (10, "core-inertia perturbation converges", 120),
    (11, "stability table reproduction", 600),
];

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {} ({:.1} s / {} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs(),
            self.detail
        )
    }
}

/// Outcome of one evidence computation.
#[derive(Clone, Debug)]
pub struct Evidence {
    pub passed: bool,
    pub detail: String,
}

fn evidence(passed: bool, detail: String) -> Result<Evidence> {
    Ok(Evidence { passed, detail })
}

fn grid(spec: &CompositeSpec, n: usize) -> Result<Grid> {
    Grid::new(spec.length, n)
}

pub fn run(id: u8, spec: &CompositeSpec) -> CriterionResult {
    let (_, name, budget) = CRITERIA[(id - 1) as usize];
    let start = Instant::now();
    let out = match id {
        1 => conservation(spec),
        2 => skew(spec),
        3 => rn_static_stability(spec),
        4 => mm_static_stability(spec),
        5 => inertial_sliding(spec),
        6 => resonance_certificate(spec),
        7 => nonlocal_operator(spec),
        8 => overdetermined(spec),
        9 => coefficient_oracle(),
        10 => perturbation(spec),
        11 => table_evidence(spec),
        _ => Err(Error::Validation(format!("no criterion {id}"))),
    };
    finish(id, name, budget, start, out)
}

fn finish(id: u8, name: &'static str, budget: u64, start: Instant, out: Result<Evidence>) -> CriterionResult {
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget);
    let (passed, detail) = match out {
        Ok(e) => (e.passed && elapsed <= budget, e.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let detail = if elapsed > budget { format!("{detail}; over runtime budget") } else { detail };
    CriterionResult { id, name, passed, detail, elapsed, budget }
}

/// Runs every criterion; the table row reuses the stability evidence.
pub fn run_all(spec: &CompositeSpec) -> Vec<CriterionResult> {
    let mut out: Vec<CriterionResult> = (1..=10).map(|id| run(id, spec)).collect();
    let start = Instant::now();
    let rows = stability_table_from(spec, &out);
    let ev = rows.and_then(|rows| table_check(&rows));
    let mut r = finish(11, CRITERIA[10].1, CRITERIA[10].2, start, ev);
    let spent: Duration = out.iter().map(|r| r.elapsed).sum();
    r.elapsed += spent;
    r.passed = r.passed && r.elapsed <= r.budget;
    out.push(r);
    out
}

// 1
pub fn conservation(spec: &CompositeSpec) -> Result<Evidence> {
    let g = grid(spec, 64)?;
    let drifts: Vec<(ModelKind, f64)> = ModelKind::ALL
        .par_iter()
        .map(|&kind| {
            let sys = assemble(kind, spec, &g)?;
            let x0 = random_state(sys.dim(), 11);
            let dt = simulate::default_dt(&sys);
            let (trace, _) = simulate::integrate(&sys, &x0, 10_000.0 * dt, dt, 10_000)?;
            let (e0, e1) = (trace.total[0], trace.total[trace.len() - 1]);
            Ok((kind, (e1 - e0).abs() / e0))
        })
        .collect::<Result<_>>()?;
    let worst = drifts.iter().map(|d| d.1).fold(0.0, f64::max);
    let detail = drifts.iter().map(|(k, d)| format!("{} {d:.1e}", k.name())).collect::<Vec<_>>().join(", ");
    evidence(worst < 1e-10, format!("N=64, 10^4 steps, |dE|/E0: {detail}"))
}

// 2
pub fn skew(spec: &CompositeSpec) -> Result<Evidence> {
    let g = grid(spec, 64)?;
    let mut worst: f64 = 0.0;
    let mut parts = vec![];
    for kind in ModelKind::ALL {
        let sys = assemble(kind, spec, &g)?;
        let d = sys.skew_defect();
        worst = worst.max(d);
        parts.push(format!("{} {d:.1e}", kind.name()));
    }
    evidence(worst < 1e-12, format!("N=64, ||A^T G + G A||/||G A||: {}", parts.join(", ")))
}

fn closed(kind: ModelKind, law: LawKind, spec: &CompositeSpec, n: usize) -> Result<DiscreteSystem> {
    close_loop(&assemble(kind, spec, &grid(spec, n)?)?, &FeedbackLaw::unit(law))
}

fn abscissae(kind: ModelKind, law: LawKind, spec: &CompositeSpec) -> Result<Vec<(usize, Spectrum)>> {
    [32usize, 64, 128]
        .par_iter()
        .map(|&n| Ok((n, spectral::spectrum(&closed(kind, law, spec, n)?)?)))
        .collect()
}

fn abscissa_text(sp: &[(usize, Spectrum)]) -> String {
    sp.iter().map(|(n, s)| format!("N={n} {:.3e}", s.abscissa())).collect::<Vec<_>>().join(", ")
}

/// Decay rate of the energy started from the least damped mode, fitted on
/// 100 periods of that mode.
pub fn dominant_mode_decay(sys: &DiscreteSystem) -> Result<(f64, f64, f64)> {
    let sp = spectral::spectrum_with_vectors(sys)?;
    let lead = sp.eigenvalues[0];
    let v = sp.vector(0).expect("vectors requested");
    let x0: Vec<f64> = v.iter().map(|z| z.re).collect();
    let omega = lead.im.abs();
    if !(omega > 0.0) {
        return Err(Error::Numerical("least damped mode is not oscillatory".into()));
    }
    let period = 2.0 * PI / omega;
    let (trace, _) = simulate::integrate(sys, &x0, 100.0 * period, period / 64.0, 1)?;
    let fit = fit_decay(&trace.t, &trace.total, (0.0, 100.0 * period))?;
    Ok((fit.rate, lead.re, fit.r_squared))
}

// 3
pub fn rn_static_stability(spec: &CompositeSpec) -> Result<Evidence> {
    let sp = abscissae(ModelKind::RnStatic, LawKind::RnStaticReduced, spec)?;
    let all_negative = sp.iter().all(|(_, s)| s.abscissa() < 0.0);
    let sys = closed(ModelKind::RnStatic, LawKind::RnStaticReduced, spec, 32)?;
    let (rate, re, r2) = dominant_mode_decay(&sys)?;
    let ratio = rate / re.abs();
    evidence(
        all_negative && (1.6..=2.4).contains(&ratio),
        format!(
            "abscissa {}; N=32 dominant-mode decay rate {rate:.4e} = {ratio:.4}|abscissa| (R^2 {r2:.4})",
            abscissa_text(&sp)
        ),
    )
}

// 4
pub fn mm_static_stability(spec: &CompositeSpec) -> Result<Evidence> {
    let sp = abscissae(ModelKind::MmStatic, LawKind::MmStaticAngular, spec)?;
    let all_negative = sp.iter().all(|(_, s)| s.abscissa() < 0.0);
    let sys = closed(ModelKind::MmStatic, LawKind::MmStaticAngular, spec, 64)?;
    let x0 = random_state(sys.dim(), 13);
    let dt = simulate::default_dt(&sys);
    let (trace, _) = simulate::integrate(&sys, &x0, 2000.0 * dt, dt, 1)?;
    let e0 = trace.total[0];
    let worst_rise = trace.total.windows(2).map(|w| (w[1] - w[0]) / e0).fold(f64::NEG_INFINITY, f64::max);
    evidence(
        all_negative && worst_rise <= 1e-12,
        format!(
            "abscissa {}; N=64 2000 steps, largest per-step rise {worst_rise:.2e} E0, E(T)/E0 {:.6}",
            abscissa_text(&sp),
            trace.total[trace.len() - 1] / e0
        ),
    )
}

// 5
pub fn inertial_sliding(spec: &CompositeSpec) -> Result<Evidence> {
    let scale = spec.max_wave_speed() / spec.length;
    let sp: Vec<(usize, Spectrum)> = [32usize, 64, 128]
        .par_iter()
        .map(|&n| Ok((n, spectral::inertial_sliding_abscissa(spec, &grid(spec, n)?, [1.0, 1.0])?)))
        .collect::<Result<_>>()?;
    let ok = sp.iter().all(|(_, s)| s.abscissa() < 0.0 && s.min_modulus() > 1e-6 * scale);
    let mins = sp
        .iter()
        .map(|(n, s)| format!("N={n} {:.4e} ({:.1e} of spectral radius)", s.min_modulus(), s.min_modulus() / s.scale()))
        .collect::<Vec<_>>()
        .join(", ");
    evidence(
        ok,
        format!("abscissa {}; smallest |lambda| vs 1e-6 c_max/L = {:.3e}: {mins}", abscissa_text(&sp), 1e-6 * scale),
    )
}

/// Quarter-wave index pairs with equal parity, the only ones with p(L) = 0.
pub const PARITY_PAIRS: [(u32, u32); 4] = [(1, 3), (2, 4), (1, 5), (3, 5)];

// 6
pub fn resonance_certificate(spec: &CompositeSpec) -> Result<Evidence> {
    let n = 64;
    let opts = SearchOptions {
        interval: (spec.mu * 1e-8, spec.mu * 1e8),
        samples: 400,
        log: true,
        check_points: 10 * n,
    };
    let outcomes: Vec<((u32, u32), ResonanceOutcome)> = PARITY_PAIRS
        .par_iter()
        .map(|&(a, b)| Ok(((a, b), resonance::resonance_search(spec, a, b, crate::materials::Knob::Mu, &opts)?)))
        .collect::<Result<_>>()?;
    for ((a, b), out) in &outcomes {
        if let ResonanceOutcome::Certified(cert) = out {
            let report = verify_certificate(spec, &grid(spec, n)?, cert, 1.0)?;
            return evidence(
                cert.ode_residual < 1e-8 && report.mode_retention > 0.999 && report.random_retention <= 0.99,
                format!(
                    "(n,m)=({a},{b}) mu={:.6e}: residual {:.2e}, mode E(T)/E0 {:.6}, random E(T)/E0 {:.6}",
                    cert.knob_value, cert.ode_residual, report.mode_retention, report.random_retention
                ),
            );
        }
    }
    let parts: Vec<String> = outcomes
        .iter()
        .map(|((a, b), out)| match out {
            ResonanceOutcome::Infeasible(inf) => format!("({a},{b}) min mismatch {:.3e}", inf.min_mismatch),
            ResonanceOutcome::Certified(_) => unreachable!(),
        })
        .collect();
    evidence(
        false,
        format!(
            "no tuned mu in [{:.1e}, {:.1e}]: distinct quarter-wave sines never share a frequency for positive \
             coefficients ({})",
            opts.interval.0,
            opts.interval.1,
            parts.join(", ")
        ),
    )
}

/// Undamped mode of the discretized coupled dynamic M-M loop: tuned mu,
/// verification and falsification.
pub fn coupled_evidence(spec: &CompositeSpec) -> Result<Option<CoupledVerification>> {
    let g = grid(spec, 16)?;
    let opts = SearchOptions { interval: (1e-9, 1e3), samples: 300, log: true, check_points: 0 };
    let certs = coupled_resonance_search(spec, &g, 6, &opts)?;
    let Some(cert) = certs.iter().min_by(|a, b| a.frequency.total_cmp(&b.frequency)) else {
        return Ok(None);
    };
    Ok(Some(verify_coupled(spec, &g, cert, 1.0, g.n / 2)?))
}

// 7
pub fn nonlocal_operator(spec: &CompositeSpec) -> Result<Evidence> {
    let g = grid(spec, 64)?;
    let xi = derive_mm(spec)?.xi;
    let solver = EllipticSolver::new(&g, xi)?;
    let j = solver.j_gram();
    let jt = linalg::transpose(&j);
    let asym = linalg::frobenius(&(&j - &jt)) / linalg::frobenius(&j);
    let eig = linalg::sym_eigenvalues(&linalg::symmetrize(&j))?;
    let scale = eig.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let top = eig[eig.len() - 1] / scale;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut v: Vec<f64> = (0..=g.n).map(|_| rng.random_range(-1.0..1.0)).collect();
        v[0] = 0.0;
        let a = solver.apply_j(&v)?;
        let b = solver.apply_j_second_derivative(&v)?;
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        worst = worst.max(linalg::norm(&diff) / linalg::norm(&a));
    }
    evidence(
        asym < 1e-12 && top <= 1e-12 && worst < 1e-12,
        format!("N=64 xi={xi:.4e}: asymmetry {asym:.1e}, max eigenvalue {top:.1e} of scale, identity defect {worst:.1e}"),
    )
}

// 8
pub fn overdetermined(spec: &CompositeSpec) -> Result<Evidence> {
    let g = grid(spec, 64)?;
    let freqs = spectral::scan_frequencies(spec, &g, 10, 40)?;
    let prof = spectral::overdetermined_scan(spec, &g, &freqs)?;
    let (w, s) = prof.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).expect("50 frequencies");
    evidence(
        prof.len() == 50 && s > 1e-4,
        format!("N=64, {} frequencies in [{:.3e}, {:.3e}]: min sigma {s:.3e} at {w:.4e}", prof.len(), freqs[0], freqs[freqs.len() - 1]),
    )
}

/// Random positive specs spread over several decades around the default.
pub fn random_specs(count: usize, seed: u64) -> Vec<CompositeSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log_uniform = |lo: f64, hi: f64| (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
    (0..count)
        .map(|_| CompositeSpec {
            length: log_uniform(0.1, 10.0),
            h: [log_uniform(1e-4, 1e-1), log_uniform(1e-4, 1e-1), log_uniform(1e-4, 1e-1)],
            rho: [log_uniform(5e2, 2e4), log_uniform(5e2, 2e4), log_uniform(5e2, 2e4)],
            alpha: [log_uniform(1e9, 3e11), log_uniform(1e5, 1e10), log_uniform(1e9, 3e11)],
            g2: log_uniform(1e4, 1e9),
            gamma: log_uniform(1e-2, 1e2),
            beta: log_uniform(1e6, 1e10),
            mu: log_uniform(1e-7, 1e-3),
            shear_damping: 0.0,
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

// 9
pub fn coefficient_oracle() -> Result<Evidence> {
    let mut worst: (f64, &str) = (0.0, "");
    let mut det_ok = true;
    for spec in random_specs(20, 23) {
        let mm = derive_mm(&spec)?;
        let ex = exact::mm_constants(&spec).ok_or_else(|| Error::Validation("oracle denominator vanished".into()))?;
        let got = [mm.a, mm.b1, mm.b2, mm.b3, mm.b4, mm.c, mm.tilde_a, mm.tilde_b, mm.tilde_c];
        let want = ex.to_f64();
        for (g, (name, w)) in got.iter().zip(want.iter()) {
            let e = rel(*g, *w);
            if !(e <= worst.0) {
                worst = (e, name);
            }
        }
        let det = mm.a * mm.b4 - spec.gamma * spec.gamma * spec.beta * mm.b3 * mm.b3;
        det_ok &= det > 0.0 && want[9].1 > 0.0;
    }
    evidence(
        worst.0 < 1e-12 && det_ok,
        format!("20 random specs: worst relative error {:.2e} ({}), A B4 - gamma^2 beta B3^2 > 0: {det_ok}", worst.0, worst.1),
    )
}

/// Spec with core density and stiffness scaled by `eps`.
pub fn soft_core(spec: &CompositeSpec, eps: f64) -> CompositeSpec {
    let mut s = spec.clone();
    s.rho[1] *= eps;
    s.alpha[1] *= eps;
    s
}

/// G-norm distance at `t_end` between the parent and R-N trajectories
/// from a common initial state, relative to the R-N norm.
pub fn perturbation_error(spec: &CompositeSpec, eps: f64, n: usize, t_end: f64, dt: f64) -> Result<f64> {
    let g = grid(spec, n)?;
    let soft = soft_core(spec, eps);
    let base = assemble(ModelKind::RnDynamic, spec, &g)?;
    let x0 = smooth_random_state(&base, 5, 29)?;
    let rn = assemble(ModelKind::RnDynamic, &soft, &g)?;
    let full = assemble(ModelKind::Full, &soft, &g)?;
    let steps = simulate::step_count(t_end, dt)?;
    let (_, xr) = simulate::integrate(&rn, &x0, t_end, dt, steps)?;
    let (_, xf) = simulate::integrate(&full, &x0, t_end, dt, steps)?;
    let gram = rn.gram();
    let diff: Vec<f64> = xf.iter().zip(&xr).map(|(a, b)| a - b).collect();
    Ok((linalg::quad(&gram, &diff) / linalg::quad(&gram, &xr)).sqrt())
}

// 10
pub fn perturbation(spec: &CompositeSpec) -> Result<Evidence> {
    let eps = [1.0, 0.1, 0.01];
    let errs: Vec<f64> = eps
        .par_iter()
        .map(|&e| perturbation_error(spec, e, 16, 1.0, 5e-6))
        .collect::<Result<_>>()?;
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    evidence(
        decreasing,
        format!(
            "N=16, T=1, dt=5e-6: G-norm error {}",
            eps.iter().zip(&errs).map(|(e, v)| format!("eps={e} {v:.4e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

/// One row of the closed-loop stability summary.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub model: &'static str,
    pub feedback: &'static str,
    pub expected: &'static str,
    pub verdict: String,
    pub evidence: String,
}

pub const TABLE_MODELS: [(&str, &str, &str); 4] = [
    ("electrostatic Rao-Nakra", "g1, V, M (three controllers)", "E.S."),
    ("fully dynamic Rao-Nakra, inertial sliding", "g1, V", "A.S."),
    ("electrostatic Mead-Marcus", "V from smoothed tip angular velocity", "E.S."),
    ("fully dynamic Mead-Marcus", "V from tip current", "Not A.S."),
];

fn row(i: usize, confirmed: bool, evidence: String) -> TableRow {
    let (model, feedback, expected) = TABLE_MODELS[i];
    TableRow {
        model,
        feedback,
        expected,
        verdict: if confirmed { expected.to_string() } else { "UNCONFIRMED".to_string() },
        evidence,
    }
}

fn coupled_row(spec: &CompositeSpec, resonance: Option<&CriterionResult>) -> Result<TableRow> {
    if let Some(r) = resonance.filter(|r| r.passed) {
        return Ok(row(3, true, format!("resonance certificate: {}", r.detail)));
    }
    Ok(match coupled_evidence(spec)? {
        Some(v) => row(
            3,
            v.passes(),
            format!(
                "discrete coupled (w,p) mode at mu={:.6e}, omega={:.6e}: closed-loop eigenvalue {:.3e}{:+.6e}i, mode \
                 E(10 periods)/E0 {:.9}, random {:.4}; observation moved to node: mode E/E0 {:.9}",
                v.cert.mu,
                v.cert.frequency,
                v.tuned.nearest.re,
                v.tuned.nearest.im,
                v.tuned.mode_retention,
                v.tuned.random_retention,
                v.shifted.mode_retention
            ),
        ),
        None => row(3, false, "no undamped coupled mode found".to_string()),
    })
}

fn evidence_row(i: usize, ev: Result<Evidence>) -> TableRow {
    match ev {
        Ok(e) => row(i, e.passed, e.detail),
        Err(e) => row(i, false, format!("error: {e}")),
    }
}

/// The four-row stability summary, computed from scratch.
pub fn stability_table(spec: &CompositeSpec) -> Result<Vec<TableRow>> {
    Ok(vec![
        evidence_row(0, rn_static_stability(spec)),
        evidence_row(1, inertial_sliding(spec)),
        evidence_row(2, mm_static_stability(spec)),
        coupled_row(spec, None)?,
    ])
}

/// The summary reusing already computed criterion results.
pub fn stability_table_from(spec: &CompositeSpec, done: &[CriterionResult]) -> Result<Vec<TableRow>> {
    let find = |id: u8| done.iter().find(|r| r.id == id);
    let reuse = |i: usize, id: u8| -> Result<TableRow> {
        match find(id) {
            Some(r) => Ok(row(i, r.passed, r.detail.clone())),
            None => Ok(match i {
                0 => evidence_row(0, rn_static_stability(spec)),
                1 => evidence_row(1, inertial_sliding(spec)),
                _ => evidence_row(2, mm_static_stability(spec)),
            }),
        }
    };
    Ok(vec![reuse(0, 3)?, reuse(1, 5)?, reuse(2, 4)?, coupled_row(spec, find(6))?])
}

fn table_check(rows: &[TableRow]) -> Result<Evidence> {
    let ok = rows.iter().all(|r| r.verdict == r.expected);
    let verdicts: Vec<&str> = rows.iter().map(|r| r.verdict.as_str()).collect();
    evidence(ok, format!("verdicts {} (expected E.S. / A.S. / E.S. / Not A.S.)", verdicts.join(" / ")))
}

// 11
pub fn table_evidence(spec: &CompositeSpec) -> Result<Evidence> {
    table_check(&stability_table(spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_specs_are_valid() {
        for s in random_specs(20, 23) {
            s.validate().unwrap();
            assert!(derive_mm(&s).is_ok());
        }
    }

    #[test]
    fn soft_core_scales_only_the_core() {
        let s = soft_core(&CompositeSpec::default(), 0.1);
        let d = CompositeSpec::default();
        assert_eq!(s.rho[0], d.rho[0]);
        assert!((s.alpha[1] - 0.1 * d.alpha[1]).abs() < 1e-6);
    }

    #[test]
    fn line_format() {
        let r = CriterionResult {
            id: 2,
            name: "x",
            passed: true,
            detail: "d".into(),
            elapsed: Duration::from_millis(1500),
            budget: Duration::from_secs(5),
        };
        assert_eq!(r.line(), "PASS  2 x (1.5 s / 5 s): d");
    }
}
