//! Implicit-midpoint integration of `G x' = S x`.
//!
//! The step `(G - dt/2 S) x1 = (G + dt/2 S) x0` conserves `x^T G x` when `S`
//! is skew and decreases it by exactly `dt xm^T D xm` otherwise, where `xm`
//! is the midpoint. The state is scaled by `sqrt(diag G)` before factoring so
//! that stiffness and mass rows are comparable.

use crate::control;
use crate::error::{Error, Result};
use crate::linalg::{self, Lu, Matrix};
use crate::models::DiscreteSystem;

pub struct Integrator {
    pub dt: f64,
    scale: Vec<f64>,
    gram: Matrix,
    rhs: Matrix,
    lu: Lu,
}

impl Integrator {
    pub fn new(sys: &DiscreteSystem, dt: f64) -> Result<Integrator> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Validation(format!("time step must be positive, got {dt}")));
        }
        Self::from_matrices(&sys.gram(), &sys.generator(), dt)
    }

    pub fn from_matrices(gram: &Matrix, s: &Matrix, dt: f64) -> Result<Integrator> {
        let n = gram.nrows();
        let scale: Vec<f64> = (0..n).map(|i| gram[(i, i)].sqrt()).collect();
        if scale.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Numerical("Gram matrix has a nonpositive diagonal".into()));
        }
        let g = faer::Mat::from_fn(n, n, |i, j| gram[(i, j)] / (scale[i] * scale[j]));
        let ss = faer::Mat::from_fn(n, n, |i, j| s[(i, j)] / (scale[i] * scale[j]));
        let lhs = faer::Mat::from_fn(n, n, |i, j| g[(i, j)] - 0.5 * dt * ss[(i, j)]);
        let rhs = faer::Mat::from_fn(n, n, |i, j| g[(i, j)] + 0.5 * dt * ss[(i, j)]);
        let lu = Lu::new(&lhs)?;
        Ok(Integrator { dt, scale, gram: g, rhs, lu })
    }

    pub fn to_scaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scale).map(|(a, s)| a * s).collect()
    }

    pub fn from_scaled(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.scale).map(|(a, s)| a / s).collect()
    }

    /// One step in scaled coordinates.
    pub fn step_scaled(&self, y: &[f64]) -> Result<Vec<f64>> {
        let out = self.lu.solve(&linalg::matvec(&self.rhs, y));
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite state after time step".into()));
        }
        Ok(out)
    }

    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.from_scaled(&self.step_scaled(&self.to_scaled(x))?))
    }

    /// Half the scaled Gram form, i.e. the energy.
    pub fn energy_scaled(&self, y: &[f64]) -> f64 {
        0.5 * linalg::quad(&self.gram, y)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyTrace {
    pub t: Vec<f64>,
    pub total: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub potential: Vec<f64>,
    pub channels: Vec<String>,
    /// One row per sample, one column per channel.
    pub obs: Vec<Vec<f64>>,
}

impl EnergyTrace {
    fn push(&mut self, sys: &DiscreteSystem, t: f64, x: &[f64]) -> Result<()> {
        let e = sys.energy(x)?;
        self.t.push(t);
        self.total.push(e.total);
        self.kinetic.push(e.kinetic);
        self.potential.push(e.potential);
        self.obs.push(control::observe(sys, x)?.into_iter().map(|(_, v)| v).collect());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Fastest-wave step `1e-3 L / c_max`.
pub fn default_dt(sys: &DiscreteSystem) -> f64 {
    1e-3 * sys.spec.length / sys.spec.max_wave_speed()
}

/// Number of steps covering `t_end` with step `dt`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end >= dt) {
        return Err(Error::Validation(format!("need T >= dt > 0, got T={t_end}, dt={dt}")));
    }
    Ok((t_end / dt).round() as usize)
}

pub fn integrate(
    sys: &DiscreteSystem,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<(EnergyTrace, Vec<f64>)> {
    if x0.len() != sys.dim() {
        return Err(Error::Validation(format!("initial state has length {}, expected {}", x0.len(), sys.dim())));
    }
    let steps = step_count(t_end, dt)?;
    let stride = stride.max(1);
    let integ = Integrator::new(sys, dt)?;
    let mut trace = EnergyTrace {
        channels: control::observe(sys, x0)?.into_iter().map(|(n, _)| n.to_string()).collect(),
        ..Default::default()
    };
    trace.push(sys, 0.0, x0)?;
    let mut y = integ.to_scaled(x0);
    for k in 1..=steps {
        y = integ.step_scaled(&y)?;
        if k % stride == 0 || k == steps {
            trace.push(sys, k as f64 * dt, &integ.from_scaled(&y))?;
        }
    }
    Ok((trace, integ.from_scaled(&y)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub r_squared: f64,
}

/// Least-squares slope of log E over the window, reported as a positive
/// decay constant.
pub fn fit_decay(t: &[f64], energy: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(energy)
        .filter(|(ti, _)| **ti >= window.0 && **ti <= window.1)
        .map(|(ti, e)| (*ti, *e))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Validation("decay window holds fewer than two samples".into()));
    }
    if let Some((ti, e)) = pts.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(Error::Numerical(format!("nonpositive energy {e} at t={ti} in decay window")));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut stl, mut sll) = (0.0, 0.0, 0.0);
    for &(ti, e) in &pts {
        let (dt, dl) = (ti - mt, e.ln() - ml);
        stt += dt * dt;
        stl += dt * dl;
        sll += dl * dl;
    }
    let slope = stl / stt;
    let r_squared = if sll == 0.0 { 1.0 } else { stl * stl / (stt * sll) };
    Ok(DecayFit { rate: -slope, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillator_conserves_energy() {
        let g = faer::Mat::from_fn(2, 2, |i, j| if i == j { [4.0, 0.25][i] } else { 0.0 });
        let s = faer::Mat::from_fn(2, 2, |i, j| [[0.0, 4.0], [-4.0, 0.0]][i][j]);
        let integ = Integrator::from_matrices(&g, &s, 1e-2).unwrap();
        let mut y = integ.to_scaled(&[1.0, 0.5]);
        let e0 = integ.energy_scaled(&y);
        for _ in 0..10_000 {
            y = integ.step_scaled(&y).unwrap();
        }
        assert!((integ.energy_scaled(&y) - e0).abs() < 1e-12 * e0);
    }

    #[test]
    fn scalar_decay_second_order() {
        let g = faer::Mat::from_fn(1, 1, |_, _| 1.0);
        let s = faer::Mat::from_fn(1, 1, |_, _| -1.0);
        let mut errs = vec![];
        for dt in [0.1, 0.05] {
            let integ = Integrator::from_matrices(&g, &s, dt).unwrap();
            let mut x = vec![1.0];
            for _ in 0..(1.0 / dt).round() as usize {
                x = integ.step(&x).unwrap();
            }
            errs.push((x[0] - (-1.0f64).exp()).abs());
        }
        assert!(errs[0] < 1e-3);
        assert!(errs[0] / errs[1] > 3.9);
    }

    #[test]
    fn synthetic_exponential_rate() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        let e: Vec<f64> = t.iter().map(|t| (-3.0 * t).exp()).collect();
        let fit = fit_decay(&t, &e, (0.0, 1.0)).unwrap();
        assert!((fit.rate - 3.0).abs() < 1e-6);
        let c = vec![2.0; 100];
        assert!(fit_decay(&t, &c, (0.0, 1.0)).unwrap().rate.abs() < 1e-9);
    }

    #[test]
    fn nonpositive_energy_in_window_rejected() {
        assert!(fit_decay(&[0.0, 1.0], &[1.0, 0.0], (0.0, 1.0)).is_err());
    }

    #[test]
    fn step_count_checks_horizon() {
        assert!(step_count(1e-4, 1e-3).is_err());
        assert_eq!(step_count(1.0, 1e-3).unwrap(), 1000);
    }
}
