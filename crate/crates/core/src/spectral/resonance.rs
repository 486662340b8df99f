//! Undamped modes of the dynamic Mead-Marcus model under tip-current
//! feedback.
//!
//! Two searches are provided. `resonance_search` works on the bending-free
//! continuum problem
//!
//! ```text
//! xi phi - phi'' + B2 p''      = 0
//! -s p'' + c phi               = rho tau^2 p
//! p(0) = phi(0) = 0,  p'(L) = phi'(L) = 0
//! ```
//!
//! (`s = beta B4`, `c = gamma beta h2 h3 varsigma B2`, `rho = mu h3`) and
//! looks for two sine wavenumbers `a1 = (2n-1) pi / 2L`, `a2 = (2m-1) pi / 2L`
//! sharing a frequency, so that `p = sin(a2 x) - sin(a1 x)` is a mode.
//! A single sine of wavenumber `a` is a solution at
//! `rho tau^2 = a^2 (s + c B2 / (a^2 + xi))`; when `c B2 >= 0` and `xi > 0`
//! the right side is strictly increasing in `a^2`, so two distinct
//! wavenumbers never share a frequency and the search reports infeasibility.
//!
//! `coupled_resonance_search` works on the discretized coupled (w, p) model
//! and tunes the magnetic permeability until an open-loop mode has zero
//! tip charge, which makes it an exact undamped mode of the closed loop.

use super::{axis_tol, Spectrum};
use crate::control::{close_loop, FeedbackLaw, LawKind};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::materials::{derive_mm, CompositeSpec, Knob};
use crate::models::{assemble, Channel, DiscreteSystem, ModelKind};
use crate::operators::{tip_functional, Grid};
use crate::simulate;
use faer::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Relative tolerance on certificate residuals and the tip value.
pub const CERT_TOL: f64 = 1e-8;

/// Coefficients of the bending-free charge/shear problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BendingFree {
    /// `mu h3`.
    pub rho: f64,
    /// `beta B4`.
    pub s: f64,
    /// `gamma beta h2 h3 varsigma B2`.
    pub c: f64,
    pub b2: f64,
    /// `C varsigma`.
    pub xi: f64,
}

impl BendingFree {
    pub fn from_spec(spec: &CompositeSpec) -> Result<BendingFree> {
        let mm = derive_mm(spec)?;
        let [_, h2, h3] = spec.h;
        Ok(BendingFree {
            rho: spec.mu * h3,
            s: spec.beta * mm.b4,
            c: spec.gamma * spec.beta * h2 * h3 * mm.varsigma * mm.b2,
            b2: mm.b2,
            xi: mm.xi,
        })
    }

    /// `rho tau^2` at which `sin(a x)` solves the problem.
    pub fn dispersion(&self, a: f64) -> f64 {
        let a2 = a * a;
        a2 * (self.s + self.c * self.b2 / (a2 + self.xi))
    }

    /// Shear amplitude per unit charge amplitude of the sine of wavenumber `a`.
    pub fn shear_ratio(&self, a: f64) -> f64 {
        self.b2 * a * a / (a * a + self.xi)
    }

    /// `(b, c0)` with the characteristic polynomial `l^4 + b l^2 + c0`.
    pub fn quartic(&self, tau: f64) -> (f64, f64) {
        let kappa = self.rho * tau * tau / self.s;
        (kappa - self.c * self.b2 / self.s - self.xi, -self.xi * kappa)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootPair {
    /// `±sqrt(z)` with `z > 0`.
    Real,
    /// `±i sqrt(-z)`: a sine/cosine wavenumber.
    Imaginary,
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharacteristicRoots {
    /// The two roots `z = l^2` of the quadratic, descending.
    pub squares: [f64; 2],
    pub roots: [c64; 4],
    pub pairs: [RootPair; 2],
    pub b: f64,
    pub c0: f64,
}

impl CharacteristicRoots {
    /// `|l^4 + b l^2 + c0|` at each root.
    pub fn residuals(&self) -> [f64; 4] {
        self.roots.map(|l| {
            let l2 = l * l;
            (l2 * l2 + l2 * self.b + c64::new(self.c0, 0.0)).norm()
        })
    }

    /// Wavenumbers `a` of the imaginary pairs.
    pub fn wavenumbers(&self) -> Vec<f64> {
        self.squares.iter().filter(|z| **z < 0.0).map(|z| (-z).sqrt()).collect()
    }
}

fn quadratic_roots(b: f64, c0: f64) -> [f64; 2] {
    let disc = (b * b - 4.0 * c0).max(0.0).sqrt();
    let q = -0.5 * (b + b.signum() * disc);
    let (z1, z2) = if q == 0.0 { (0.0, -b) } else { (q, c0 / q) };
    if z1 >= z2 {
        [z1, z2]
    } else {
        [z2, z1]
    }
}

pub fn roots_of(coef: &BendingFree, tau: f64) -> CharacteristicRoots {
    let (b, c0) = coef.quartic(tau);
    let squares = quadratic_roots(b, c0);
    let mut roots = [c64::new(0.0, 0.0); 4];
    let mut pairs = [RootPair::Zero; 2];
    for (k, &z) in squares.iter().enumerate() {
        let (r, pair) = if z > 0.0 {
            (c64::new(z.sqrt(), 0.0), RootPair::Real)
        } else if z < 0.0 {
            (c64::new(0.0, (-z).sqrt()), RootPair::Imaginary)
        } else {
            (c64::new(0.0, 0.0), RootPair::Zero)
        };
        roots[2 * k] = r;
        roots[2 * k + 1] = -r;
        pairs[k] = pair;
    }
    CharacteristicRoots { squares, roots, pairs, b, c0 }
}

/// Four roots of the spatial characteristic polynomial of the bending-free
/// model at temporal frequency `tau`.
pub fn characteristic_roots_mm(spec: &CompositeSpec, tau: f64) -> Result<CharacteristicRoots> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::Validation(format!("frequency must be nonnegative, got {tau}")));
    }
    Ok(roots_of(&BendingFree::from_spec(spec)?, tau))
}

/// Odd quarter-wave wavenumber `(2k-1) pi / 2L`.
pub fn quarter_wave(k: u32, length: f64) -> f64 {
    (2 * k - 1) as f64 * PI / (2.0 * length)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceCertificate {
    pub n: u32,
    pub m: u32,
    pub knob: String,
    pub knob_value: f64,
    pub length: f64,
    pub coef: BendingFree,
    pub a1: f64,
    pub a2: f64,
    pub tau: f64,
    pub b1: f64,
    pub b2: f64,
    pub ode_residual: f64,
    pub boundary_residual: f64,
    /// `p(L)` of the mode.
    pub p_tip: f64,
    /// `|tau p(L)|`, the tip current amplitude seen by the feedback.
    pub observation: f64,
}

impl ResonanceCertificate {
    pub fn p(&self, x: f64) -> f64 {
        (self.a2 * x).sin() - (self.a1 * x).sin()
    }

    pub fn shear(&self, x: f64) -> f64 {
        self.b2 * (self.a2 * x).sin() - self.b1 * (self.a1 * x).sin()
    }

    /// Max-norm residual of both equations at `samples` evenly spaced
    /// points, each relative to its largest term.
    pub fn sampled_residual(&self, samples: usize) -> f64 {
        let k = &self.coef;
        let rt2 = k.rho * self.tau * self.tau;
        let (mut r1, mut s1, mut r2, mut s2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..samples.max(2) {
            let x = self.length * i as f64 / (samples.max(2) - 1) as f64;
            let (s_1, s_2) = ((self.a1 * x).sin(), (self.a2 * x).sin());
            let p = s_2 - s_1;
            let pxx = -self.a2 * self.a2 * s_2 + self.a1 * self.a1 * s_1;
            let phi = self.b2 * s_2 - self.b1 * s_1;
            let phixx = -self.b2 * self.a2 * self.a2 * s_2 + self.b1 * self.a1 * self.a1 * s_1;
            let t1 = [k.xi * phi, -phixx, k.b2 * pxx];
            let t2 = [-k.s * pxx, k.c * phi, -rt2 * p];
            r1 = r1.max(t1.iter().sum::<f64>().abs());
            s1 = s1.max(t1.iter().map(|t| t.abs()).fold(0.0, f64::max));
            r2 = r2.max(t2.iter().sum::<f64>().abs());
            s2 = s2.max(t2.iter().map(|t| t.abs()).fold(0.0, f64::max));
        }
        let rel = |r: f64, s: f64| if s > 0.0 { r / s } else { r };
        rel(r1, s1).max(rel(r2, s2))
    }

    pub fn passes(&self) -> bool {
        self.ode_residual < CERT_TOL && self.boundary_residual < CERT_TOL && self.p_tip.abs() < CERT_TOL
    }

    /// Name/value rows for `resonance.csv`.
    pub fn rows(&self) -> Vec<(String, f64)> {
        vec![
            ("n".into(), self.n as f64),
            ("m".into(), self.m as f64),
            (self.knob.clone(), self.knob_value),
            ("a1".into(), self.a1),
            ("a2".into(), self.a2),
            ("tau".into(), self.tau),
            ("b1".into(), self.b1),
            ("b2".into(), self.b2),
            ("ode_residual".into(), self.ode_residual),
            ("boundary_residual".into(), self.boundary_residual),
            ("p_tip".into(), self.p_tip),
            ("observation".into(), self.observation),
        ]
    }
}

/// Builds and checks the two-sine mode at the frequency of `a1`.
pub fn certify(
    coef: &BendingFree,
    length: f64,
    n: u32,
    m: u32,
    knob: &str,
    knob_value: f64,
    samples: usize,
) -> ResonanceCertificate {
    let (a1, a2) = (quarter_wave(n, length), quarter_wave(m, length));
    let tau2 = coef.dispersion(a1) / coef.rho;
    let tau = tau2.max(0.0).sqrt();
    let mut cert = ResonanceCertificate {
        n,
        m,
        knob: knob.to_string(),
        knob_value,
        length,
        coef: *coef,
        a1,
        a2,
        tau,
        b1: coef.shear_ratio(a1),
        b2: coef.shear_ratio(a2),
        ode_residual: f64::INFINITY,
        boundary_residual: f64::INFINITY,
        p_tip: f64::NAN,
        observation: f64::NAN,
    };
    if !(tau2 > 0.0) {
        return cert;
    }
    cert.ode_residual = cert.sampled_residual(samples);
    let amp = 2.0f64.max(cert.b1.abs() + cert.b2.abs());
    let px = a2 * (a2 * length).cos() - a1 * (a1 * length).cos();
    let phix = cert.b2 * a2 * (a2 * length).cos() - cert.b1 * a1 * (a1 * length).cos();
    let slope_scale = (a1 + a2) * amp;
    cert.boundary_residual = (cert.p(0.0).abs() / amp)
        .max(cert.shear(0.0).abs() / amp)
        .max(px.abs() / slope_scale)
        .max(phix.abs() / slope_scale);
    cert.p_tip = cert.p(length);
    cert.observation = (tau * cert.p_tip).abs();
    cert
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    pub interval: (f64, f64),
    pub samples: usize,
    /// Sample the interval logarithmically (both ends positive).
    pub log: bool,
    /// Points for the continuum residual check.
    pub check_points: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { interval: (1e-12, 1e2), samples: 400, log: true, check_points: 640 }
    }
}

impl SearchOptions {
    fn points(&self) -> Result<Vec<f64>> {
        let (lo, hi) = self.interval;
        if !(lo < hi) || self.samples < 2 || (self.log && !(lo > 0.0)) {
            return Err(Error::Validation(format!("bad knob interval [{lo}, {hi}] with {} samples", self.samples)));
        }
        let k = (self.samples - 1) as f64;
        Ok((0..self.samples)
            .map(|i| {
                let t = i as f64 / k;
                if self.log {
                    (lo.ln() + t * (hi.ln() - lo.ln())).exp()
                } else {
                    lo + t * (hi - lo)
                }
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Infeasibility {
    pub knob: String,
    pub interval: (f64, f64),
    pub samples: usize,
    /// Smallest relative frequency mismatch seen, and where.
    pub min_mismatch: f64,
    pub at: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ResonanceOutcome {
    Certified(ResonanceCertificate),
    Infeasible(Infeasibility),
}

/// Relative mismatch of the two sine frequencies.
fn mismatch(coef: &BendingFree, a1: f64, a2: f64) -> f64 {
    let (f1, f2) = (coef.dispersion(a1), coef.dispersion(a2));
    (f1 - f2) / (f1.abs() + f2.abs())
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, log: bool) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = if log { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    if log {
        (lo * hi).sqrt()
    } else {
        0.5 * (lo + hi)
    }
}

/// Resonance search over a one-parameter family of coefficients.
pub fn resonance_search_family(
    family: &(dyn Fn(f64) -> Result<BendingFree> + Sync),
    length: f64,
    n: u32,
    m: u32,
    knob: &str,
    opts: &SearchOptions,
) -> Result<ResonanceOutcome> {
    if n == 0 || m == 0 || n == m {
        return Err(Error::Validation(format!("need distinct positive mode indices, got n={n}, m={m}")));
    }
    let (a1, a2) = (quarter_wave(n, length), quarter_wave(m, length));
    let pts = opts.points()?;
    let vals: Vec<f64> = pts
        .iter()
        .map(|&k| family(k).map(|c| mismatch(&c, a1, a2)).unwrap_or(f64::NAN))
        .collect();
    let (mut min_mismatch, mut at) = (f64::INFINITY, f64::NAN);
    for (k, v) in pts.iter().zip(&vals) {
        if v.abs() < min_mismatch {
            min_mismatch = v.abs();
            at = *k;
        }
    }
    let f = |k: f64| family(k).map(|c| mismatch(&c, a1, a2)).unwrap_or(f64::NAN);
    let mut rejected = vec![];
    for i in 0..pts.len() - 1 {
        let (u, v) = (vals[i], vals[i + 1]);
        if !(u.is_finite() && v.is_finite()) || (u < 0.0) == (v < 0.0) && u != 0.0 {
            continue;
        }
        let root = if u == 0.0 { pts[i] } else { bisect(&f, pts[i], pts[i + 1], opts.log) };
        let coef = family(root)?;
        let cert = certify(&coef, length, n, m, knob, root, opts.check_points);
        if cert.passes() {
            return Ok(ResonanceOutcome::Certified(cert));
        }
        rejected.push(format!(
            "{knob}={root}: residual {:.3e}, boundary {:.3e}, p(L) {:.3e}",
            cert.ode_residual, cert.boundary_residual, cert.p_tip
        ));
    }
    let reason = if rejected.is_empty() {
        "the two sine frequencies never coincide on the interval".to_string()
    } else {
        format!("frequency coincidences rejected: {}", rejected.join("; "))
    };
    Ok(ResonanceOutcome::Infeasible(Infeasibility {
        knob: knob.to_string(),
        interval: opts.interval,
        samples: opts.samples,
        min_mismatch,
        at,
        reason,
    }))
}

/// Tunes `knob` so that the quarter-wave sines of indices `n` and `m` share
/// a frequency, and certifies the resulting two-sine mode.
pub fn resonance_search(
    spec: &CompositeSpec,
    n: u32,
    m: u32,
    knob: Knob,
    opts: &SearchOptions,
) -> Result<ResonanceOutcome> {
    if knob == Knob::Gamma {
        return Err(Error::Validation("resonance knob must be mu, G2 or beta".into()));
    }
    spec.validate()?;
    let family = |k: f64| BendingFree::from_spec(&spec.with_knob(knob, k));
    resonance_search_family(&family, spec.length, n, m, knob.name(), opts)
}

/// Report of an undamped-mode check on a closed-loop system.
#[derive(Clone, Debug, PartialEq)]
pub struct UndampedReport {
    pub frequency: f64,
    /// Eigenvalue of the closed loop nearest to `i frequency`.
    pub nearest: c64,
    pub on_axis: bool,
    pub frequency_error: f64,
    pub mode_retention: f64,
    pub random_retention: f64,
    pub periods: f64,
}

impl UndampedReport {
    pub fn passes(&self) -> bool {
        self.on_axis && self.mode_retention > 0.999 && self.random_retention <= 0.99
    }
}

/// Nodal random state with entries uniform in [-1, 1], from a fixed seed.
pub fn random_state(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Random combination of the lowest `modes` open-loop mode shapes as
/// displacement, with zero velocity. Nodal random states put almost all of
/// their energy in the stiffest modes; this one spreads it over the low band.
pub fn smooth_random_state(sys: &DiscreteSystem, modes: usize, seed: u64) -> Result<Vec<f64>> {
    let (_, vecs) = sys.modes()?;
    let k = modes.min(vecs.ncols());
    let r = random_state(k, seed);
    let mut x = vec![0.0; sys.dim()];
    for (j, rj) in r.iter().enumerate() {
        for i in 0..sys.n_pos() {
            x[i] += rj * vecs[(i, j)];
        }
    }
    Ok(x)
}

/// Checks that `x0` (a real mode shape with zero velocity, oscillating at
/// `frequency`) is undamped on the closed loop: a spectral point on the
/// imaginary axis at that frequency, energy retention over `periods`
/// periods, and decay of a random state over the same horizon.
pub fn verify_undamped_mode(
    closed: &DiscreteSystem,
    x0: &[f64],
    frequency: f64,
    periods: f64,
    steps_per_period: usize,
    freq_tol: f64,
) -> Result<UndampedReport> {
    if !(frequency > 0.0) {
        return Err(Error::Validation(format!("mode frequency must be positive, got {frequency}")));
    }
    let sp: Spectrum = super::spectrum(closed)?;
    let target = c64::new(0.0, frequency);
    let nearest = *sp
        .eigenvalues
        .iter()
        .min_by(|a, b| (**a - target).norm().total_cmp(&(**b - target).norm()))
        .ok_or_else(|| Error::Numerical("empty spectrum".into()))?;
    let period = 2.0 * PI / frequency;
    let dt = period / steps_per_period as f64;
    let t_end = periods * period;
    let retention = |x: &[f64]| -> Result<f64> {
        let (trace, _) = simulate::integrate(closed, x, t_end, dt, steps_per_period)?;
        Ok(trace.total[trace.len() - 1] / trace.total[0])
    };
    let mode_retention = retention(x0)?;
    let random_retention = retention(&smooth_random_state(closed, 10, 7)?)?;
    let frequency_error = (nearest.im - frequency).abs() / frequency;
    Ok(UndampedReport {
        frequency,
        nearest,
        on_axis: nearest.re.abs() < axis_tol(nearest) && frequency_error < freq_tol,
        frequency_error,
        mode_retention,
        random_retention,
        periods,
    })
}

/// Nodal interpolant of the certificate's charge profile on the bending-free
/// subsystem, as displacement with zero velocity.
pub fn certificate_state(bending_free: &DiscreteSystem, cert: &ResonanceCertificate) -> Result<Vec<f64>> {
    let p = bending_free
        .layout
        .block("p")
        .filter(|_| bending_free.layout.blocks.len() == 1)
        .ok_or_else(|| Error::Validation("certificate state needs the bending-free subsystem".into()))?;
    let mut x = vec![0.0; bending_free.dim()];
    for i in 0..p.len {
        x[p.offset + i] = cert.p(bending_free.grid.nodes[i + 1]);
    }
    Ok(x)
}

/// Integrates the interpolated certificate mode on the closed bending-free
/// loop at the certificate's spec.
pub fn verify_certificate(
    spec: &CompositeSpec,
    grid: &Grid,
    cert: &ResonanceCertificate,
    gain: f64,
) -> Result<UndampedReport> {
    let knob = Knob::parse(&cert.knob)
        .ok_or_else(|| Error::Validation(format!("certificate knob {} is not a material parameter", cert.knob)))?;
    let tuned = spec.with_knob(knob, cert.knob_value);
    let open = assemble(ModelKind::MmDynamic, &tuned, grid)?.bending_free_subsystem()?;
    let closed = close_loop(&open, &FeedbackLaw::new(LawKind::MmDynamic, vec![gain])?)?;
    let x0 = certificate_state(&open, cert)?;
    verify_undamped_mode(&closed, &x0, cert.tau, 10.0, 200, 1e-2)
}

/// The open dynamic M-M system with the tip-current channel moved to the
/// charge hat function at `node` (1-based node index, node N is the tip).
pub fn shifted_observation(open: &DiscreteSystem, node: usize) -> Result<DiscreteSystem> {
    if open.kind != ModelKind::MmDynamic || !open.active.is_empty() {
        return Err(Error::Validation("observation shift needs the open dynamic M-M system".into()));
    }
    let p = open.layout.block("p").expect("mm-dynamic layout");
    if node == 0 || node > p.len {
        return Err(Error::Validation(format!("node {node} outside 1..={}", p.len)));
    }
    let mut load = vec![0.0; open.n_pos()];
    load[p.offset + node - 1] = 1.0;
    let mut out = open.clone();
    out.channels = vec![Channel { name: "V", load }];
    Ok(out)
}

/// A discrete undamped mode of the closed dynamic M-M loop.
#[derive(Clone, Debug)]
pub struct CoupledCertificate {
    pub mu: f64,
    pub branch: usize,
    pub frequency: f64,
    /// Normalized tip charge of the mode (zero at resonance).
    pub tip_charge: f64,
    /// Normalized tip deflection, nonzero so the mode is not trivially silent.
    pub tip_deflection: f64,
    /// Mass-normalized position shape.
    pub shape: Vec<f64>,
}

impl CoupledCertificate {
    /// State with the mode as displacement and zero velocity.
    pub fn state(&self) -> Vec<f64> {
        let mut x = self.shape.clone();
        x.extend(std::iter::repeat_n(0.0, self.shape.len()));
        x
    }
}

/// Tip readings of open-loop branch `k` normalized by the dual norms of the
/// functionals, so both lie in [-1, 1].
struct BranchReading {
    frequency: f64,
    charge: f64,
    deflection: f64,
    shape: Vec<f64>,
}

fn dual_norm(sys: &DiscreteSystem, e: &[f64]) -> f64 {
    let chol = linalg::Cholesky::new(&sys.mass, "mass matrix").expect("assembled mass is definite");
    linalg::dot(e, &chol.solve(e)).sqrt()
}

fn branch_readings(spec: &CompositeSpec, grid: &Grid, mu: f64, branches: usize) -> Result<Vec<BranchReading>> {
    let sys = assemble(ModelKind::MmDynamic, &spec.with_knob(Knob::Mu, mu), grid)?;
    let (omega, vecs): (Vec<f64>, Matrix) = sys.modes()?;
    let e = tip_functional(grid, &sys.layout, sys.layout.index("p").unwrap(), 0);
    let f = tip_functional(grid, &sys.layout, sys.layout.index("w").unwrap(), 0);
    let (ne, nf) = (dual_norm(&sys, &e), dual_norm(&sys, &f));
    Ok((0..branches.min(omega.len()))
        .map(|k| {
            let shape: Vec<f64> = (0..vecs.nrows()).map(|i| vecs[(i, k)]).collect();
            BranchReading {
                frequency: omega[k],
                charge: linalg::dot(&e, &shape) / ne,
                deflection: linalg::dot(&f, &shape) / nf,
                shape,
            }
        })
        .collect())
}

/// Log-scans `mu` and returns every certified root of the tip charge of
/// the lowest `branches` open-loop modes, sorted by `mu`.
pub fn coupled_resonance_search(
    spec: &CompositeSpec,
    grid: &Grid,
    branches: usize,
    opts: &SearchOptions,
) -> Result<Vec<CoupledCertificate>> {
    let pts = opts.points()?;
    let scans: Vec<Vec<BranchReading>> =
        pts.par_iter().map(|&mu| branch_readings(spec, grid, mu, branches)).collect::<Result<_>>()?;
    let product = |mu: f64, k: usize| -> f64 {
        branch_readings(spec, grid, mu, k + 1)
            .map(|r| r[k].charge * r[k].deflection)
            .unwrap_or(f64::NAN)
    };
    let mut brackets = vec![];
    for k in 0..branches.min(scans[0].len()) {
        for i in 0..pts.len() - 1 {
            let (u, v) = (&scans[i][k], &scans[i + 1][k]);
            let (pu, pv) = (u.charge * u.deflection, v.charge * v.deflection);
            // A sign flip of the product caused by the charge, not the deflection.
            if (pu < 0.0) != (pv < 0.0) && u.deflection.abs().min(v.deflection.abs()) > 1e-3 {
                brackets.push((k, pts[i], pts[i + 1]));
            }
        }
    }
    let mut certs: Vec<CoupledCertificate> = brackets
        .par_iter()
        .filter_map(|&(k, lo, hi)| {
            let mu = bisect(|m| product(m, k), lo, hi, true);
            let r = branch_readings(spec, grid, mu, k + 1).ok()?;
            let b = &r[k];
            (b.charge.abs() < 1e-9 && b.deflection.abs() > 1e-3).then(|| CoupledCertificate {
                mu,
                branch: k,
                frequency: b.frequency,
                tip_charge: b.charge,
                tip_deflection: b.deflection,
                shape: b.shape.clone(),
            })
        })
        .collect();
    certs.sort_by(|a, b| a.mu.total_cmp(&b.mu).then(a.branch.cmp(&b.branch)));
    Ok(certs)
}

/// Evidence that the closed dynamic M-M loop is not asymptotically stable:
/// the undamped check on the tuned system, and its falsification with the
/// observation moved to `shift_node`.
#[derive(Clone, Debug)]
pub struct CoupledVerification {
    pub cert: CoupledCertificate,
    pub tuned: UndampedReport,
    pub shifted: UndampedReport,
}

impl CoupledVerification {
    /// The tuned loop keeps the mode, and moving the observation makes the
    /// same mode decay.
    pub fn passes(&self) -> bool {
        self.tuned.passes() && !self.shifted.on_axis && self.shifted.mode_retention < 1.0 - 1e-9
    }
}

pub fn verify_coupled(
    spec: &CompositeSpec,
    grid: &Grid,
    cert: &CoupledCertificate,
    gain: f64,
    shift_node: usize,
) -> Result<CoupledVerification> {
    let open = assemble(ModelKind::MmDynamic, &spec.with_knob(Knob::Mu, cert.mu), grid)?;
    let law = FeedbackLaw::new(LawKind::MmDynamic, vec![gain])?;
    let closed = close_loop(&open, &law)?;
    let x0 = cert.state();
    let tuned = verify_undamped_mode(&closed, &x0, cert.frequency, 10.0, 200, 1e-6)?;
    let shifted_sys = close_loop(&shifted_observation(&open, shift_node)?, &law)?;
    let shifted = verify_undamped_mode(&shifted_sys, &x0, cert.frequency, 10.0, 200, 1e-6)?;
    Ok(CoupledVerification { cert: cert.clone(), tuned, shifted })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_frequency_roots() {
        let spec = CompositeSpec::default();
        let c = BendingFree::from_spec(&spec).unwrap();
        let r = characteristic_roots_mm(&spec, 0.0).unwrap();
        let want = (c.xi + c.c * c.b2 / c.s).sqrt();
        assert!((r.roots[0].re - want).abs() < 1e-12 * want);
        assert_eq!(r.squares[1], 0.0);
        assert_eq!(r.pairs, [RootPair::Real, RootPair::Zero]);
    }

    #[test]
    fn vieta_product() {
        let spec = CompositeSpec::default();
        let c = BendingFree::from_spec(&spec).unwrap();
        for tau in [1.0, 1e2, 1e4] {
            let r = characteristic_roots_mm(&spec, tau).unwrap();
            let want = -c.xi * c.rho * tau * tau / c.s;
            assert!((r.squares[0] * r.squares[1] - want).abs() < 1e-12 * want.abs());
            let scale = r.b.abs().max(r.c0.abs().sqrt()).powi(2);
            assert!(r.residuals().iter().all(|v| *v < 1e-10 * scale));
            assert_eq!(r.pairs, [RootPair::Real, RootPair::Imaginary]);
        }
    }

    #[test]
    fn sine_at_dispersion_frequency_is_a_root() {
        let spec = CompositeSpec::default();
        let c = BendingFree::from_spec(&spec).unwrap();
        let a = quarter_wave(3, 1.0);
        let tau = (c.dispersion(a) / c.rho).sqrt();
        let r = characteristic_roots_mm(&spec, tau).unwrap();
        assert!((r.wavenumbers()[0] - a).abs() < 1e-9 * a);
    }

    #[test]
    fn physical_knobs_are_infeasible() {
        let spec = CompositeSpec::default();
        for knob in [Knob::Mu, Knob::G2, Knob::Beta] {
            let base = spec.knob(knob);
            let opts = SearchOptions { interval: (base * 1e-3, base * 1e3), samples: 50, ..Default::default() };
            match resonance_search(&spec, 1, 3, knob, &opts).unwrap() {
                ResonanceOutcome::Infeasible(inf) => assert!(inf.min_mismatch > 0.0),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    // A negative shift makes the dispersion relation non-monotone,
    // so two quarter-wave sines can share a frequency.
    fn unphysical(xi: f64) -> BendingFree {
        let (x1, x2) = (quarter_wave(1, 1.0).powi(2), quarter_wave(3, 1.0).powi(2));
        let cb2 = (x1 - 70.0) * (x2 - 70.0) / 70.0;
        BendingFree { rho: 1.0, s: 1.0, c: cb2, b2: 1.0, xi }
    }

    #[test]
    fn certificate_for_non_monotone_dispersion() {
        let fam = |xi: f64| Ok(unphysical(xi));
        let opts = SearchOptions { interval: (-80.0, -65.0), samples: 31, log: false, check_points: 640 };
        let out = resonance_search_family(&fam, 1.0, 1, 3, "xi", &opts).unwrap();
        let ResonanceOutcome::Certified(cert) = out else { panic!("{out:?}") };
        assert!((cert.knob_value + 70.0).abs() < 1e-9);
        assert!(cert.ode_residual < 1e-8);
        assert!(cert.p_tip.abs() < 1e-12);
    }

    #[test]
    fn opposite_parity_rejected_by_tip_value() {
        // n = 1, m = 2 gives p(L) = sin(3 pi / 2) - sin(pi / 2) = -2.
        let (x1, x2) = (quarter_wave(1, 1.0).powi(2), quarter_wave(2, 1.0).powi(2));
        let cb2 = (x1 - 30.0) * (x2 - 30.0) / 30.0;
        let fam = move |xi: f64| Ok(BendingFree { rho: 1.0, s: 1.0, c: cb2, b2: 1.0, xi });
        let opts = SearchOptions { interval: (-40.0, -25.0), samples: 31, log: false, check_points: 640 };
        match resonance_search_family(&fam, 1.0, 1, 2, "xi", &opts).unwrap() {
            ResonanceOutcome::Infeasible(inf) => assert!(inf.reason.contains("p(L)")),
            other => panic!("{other:?}"),
        }
        let cert = certify(&fam(-30.0).unwrap(), 1.0, 1, 2, "xi", -30.0, 640);
        assert!((cert.p_tip + 2.0).abs() < 1e-12);
        assert!(!cert.passes());
    }

    #[test]
    fn excluded_interval_infeasible() {
        let fam = |xi: f64| Ok(unphysical(xi));
        let opts = SearchOptions { interval: (-60.0, -50.0), samples: 11, log: false, check_points: 640 };
        assert!(matches!(
            resonance_search_family(&fam, 1.0, 1, 3, "xi", &opts).unwrap(),
            ResonanceOutcome::Infeasible(_)
        ));
    }

    #[test]
    fn equal_indices_rejected() {
        let spec = CompositeSpec::default();
        assert!(resonance_search(&spec, 2, 2, Knob::Mu, &SearchOptions::default()).is_err());
    }

    #[test]
    fn zero_gain_conserves() {
        let spec = CompositeSpec::default();
        let grid = Grid::new(1.0, 6).unwrap();
        let open = assemble(ModelKind::MmDynamic, &spec, &grid).unwrap();
        let closed = close_loop(&open, &FeedbackLaw::new(LawKind::MmDynamic, vec![0.0]).unwrap()).unwrap();
        let (omega, _) = open.modes().unwrap();
        let x0 = random_state(open.dim(), 3);
        let r = verify_undamped_mode(&closed, &x0, omega[0], 2.0, 100, 1e-6).unwrap();
        assert!((r.mode_retention - 1.0).abs() < 1e-10);
    }
}
