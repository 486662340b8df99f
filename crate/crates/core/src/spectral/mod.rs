//! Closed-loop spectra of `G x' = S x`.
//!
//! With `G = L L^T` the pencil `(S, G)` is similar to `L^{-1} S L^{-T}`,
//! which is skew plus a negative semidefinite block. For the block form
//! `G = diag(K, M)` the off-diagonal blocks are `±L_K^T L_M^{-T}` so the skew
//! part is exact by construction.

pub mod resonance;

use crate::control::{close_loop, FeedbackLaw, LawKind};
use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, Matrix};
use crate::materials::CompositeSpec;
use crate::models::{assemble, DiscreteSystem, ModelKind};
use crate::operators::{tip_functional, Grid};
use faer::{c64, Mat};

/// Dense eigensolves are capped at this state dimension.
pub const MAX_DIM: usize = 2000;

/// Relative size below which an eigenvalue counts as zero.
pub const ZERO_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Sorted by real part descending, then imaginary part descending.
    pub eigenvalues: Vec<c64>,
    /// Eigenvectors in the original state coordinates, matching columns.
    pub eigenvectors: Option<Mat<c64>>,
}

/// `1e-8 max(1, |Im λ|)`.
pub fn axis_tol(l: c64) -> f64 {
    1e-8 * l.im.abs().max(1.0)
}

impl Spectrum {
    pub fn abscissa(&self) -> f64 {
        self.eigenvalues.first().map_or(f64::NEG_INFINITY, |l| l.re)
    }

    pub fn scale(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max)
    }

    pub fn min_modulus(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn has_zero(&self) -> bool {
        self.min_modulus() <= ZERO_TOL * self.scale()
    }

    /// Eigenvalues with `|Re λ| < axis_tol(λ)`.
    pub fn axis_count(&self) -> usize {
        self.eigenvalues.iter().filter(|l| l.re.abs() < axis_tol(**l)).count()
    }

    /// Largest `|Re λ| / |λ|`, the pure-rotation defect of a conservative spectrum.
    pub fn rotation_defect(&self) -> f64 {
        self.eigenvalues
            .iter()
            .filter(|l| l.norm() > 0.0)
            .map(|l| l.re.abs() / l.norm())
            .fold(0.0, f64::max)
    }

    /// Largest distance from an eigenvalue to the nearest conjugate of
    /// another, relative to the spectral scale.
    pub fn conjugation_defect(&self) -> f64 {
        let scale = self.scale().max(f64::MIN_POSITIVE);
        let mut used = vec![false; self.eigenvalues.len()];
        let mut worst: f64 = 0.0;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            if used[i] {
                continue;
            }
            let target = l.conj();
            let best = self
                .eigenvalues
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j] && (*j != i || l.im == 0.0))
                .map(|(j, m)| (j, (*m - target).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((j, d)) => {
                    used[i] = true;
                    used[j] = true;
                    worst = worst.max(d / scale);
                }
                None => return f64::INFINITY,
            }
        }
        worst
    }

    /// Column `k` of the eigenvectors.
    pub fn vector(&self, k: usize) -> Option<Vec<c64>> {
        self.eigenvectors.as_ref().map(|v| (0..v.nrows()).map(|i| v[(i, k)]).collect())
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n > MAX_DIM {
        return Err(Error::Validation(format!("state dimension {n} exceeds the dense limit {MAX_DIM}")));
    }
    Ok(())
}

fn order(vals: &[c64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[b].re.total_cmp(&vals[a].re).then(vals[b].im.total_cmp(&vals[a].im)));
    idx
}

fn finish(vals: Vec<c64>, vecs: Option<Mat<c64>>, back: impl Fn(&mut Matrix)) -> Spectrum {
    let idx = order(&vals);
    let eigenvalues = idx.iter().map(|&i| vals[i]).collect();
    let eigenvectors = vecs.map(|y| {
        let n = y.nrows();
        let mut re = Mat::from_fn(n, idx.len(), |i, j| y[(i, idx[j])].re);
        let mut im = Mat::from_fn(n, idx.len(), |i, j| y[(i, idx[j])].im);
        back(&mut re);
        back(&mut im);
        Mat::from_fn(n, idx.len(), |i, j| c64::new(re[(i, j)], im[(i, j)]))
    });
    Spectrum { eigenvalues, eigenvectors }
}

fn solve(a: &Matrix, vectors: bool) -> Result<(Vec<c64>, Option<Mat<c64>>)> {
    if vectors {
        let (v, u) = linalg::eigen(a)?;
        Ok((v, Some(u)))
    } else {
        Ok((linalg::eigenvalues(a)?, None))
    }
}

/// Generalized eigenvalues of `(S, G)` for a symmetric positive definite `G`.
pub fn descriptor_spectrum(gram: &Matrix, s: &Matrix, vectors: bool) -> Result<Spectrum> {
    check_dim(gram.nrows())?;
    let chol = Cholesky::new(gram, "Gram matrix")?;
    let mut x = s.clone();
    chol.solve_l_in_place(&mut x);
    let mut a = linalg::transpose(&x);
    chol.solve_l_in_place(&mut a);
    let a = linalg::transpose(&a);
    let (vals, vecs) = solve(&a, vectors)?;
    Ok(finish(vals, vecs, |m| chol.solve_lt_in_place(m)))
}

fn similar_generator(sys: &DiscreteSystem) -> Result<(Matrix, Cholesky, Cholesky)> {
    let n = sys.n_pos();
    let lk = Cholesky::new(&sys.stiffness, "stiffness matrix")?;
    let lm = Cholesky::new(&sys.mass, "mass matrix")?;
    // B = L_K^T L_M^{-T} = (L_M^{-1} L_K)^T
    let mut x = lk.l().clone();
    lm.solve_l_in_place(&mut x);
    let mut d = sys.damping.clone();
    lm.solve_l_in_place(&mut d);
    let mut d = linalg::transpose(&d);
    lm.solve_l_in_place(&mut d);
    let a = Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, true) => 0.0,
        (true, false) => x[(j - n, i)],
        (false, true) => -x[(i - n, j)],
        (false, false) => -d[(i - n, j - n)],
    });
    Ok((a, lk, lm))
}

fn spectrum_impl(sys: &DiscreteSystem, vectors: bool) -> Result<Spectrum> {
    check_dim(sys.dim())?;
    let n = sys.n_pos();
    let (a, lk, lm) = similar_generator(sys)?;
    let (vals, vecs) = solve(&a, vectors)?;
    Ok(finish(vals, vecs, |m| {
        let mut top = m.subrows(0, n).to_owned();
        let mut bot = m.subrows(n, n).to_owned();
        lk.solve_lt_in_place(&mut top);
        lm.solve_lt_in_place(&mut bot);
        m.subrows_mut(0, n).copy_from(&top);
        m.subrows_mut(n, n).copy_from(&bot);
    }))
}

/// All eigenvalues of the (possibly closed-loop) system.
pub fn spectrum(sys: &DiscreteSystem) -> Result<Spectrum> {
    spectrum_impl(sys, false)
}

/// Eigenvalues with eigenvectors in state coordinates.
pub fn spectrum_with_vectors(sys: &DiscreteSystem) -> Result<Spectrum> {
    spectrum_impl(sys, true)
}

fn complex_matvec(a: &Matrix, x: &[c64]) -> Vec<c64> {
    let re: Vec<f64> = x.iter().map(|z| z.re).collect();
    let im: Vec<f64> = x.iter().map(|z| z.im).collect();
    linalg::matvec(a, &re).into_iter().zip(linalg::matvec(a, &im)).map(|(r, i)| c64::new(r, i)).collect()
}

fn cnorm(x: &[c64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `||S x - λ G x|| / (||G x|| |λ| + ||S x||)` for every eigenpair.
pub fn eigenpair_residuals(gram: &Matrix, s: &Matrix, sp: &Spectrum) -> Result<Vec<f64>> {
    let vecs = sp
        .eigenvectors
        .as_ref()
        .ok_or_else(|| Error::Validation("spectrum was computed without eigenvectors".into()))?;
    Ok((0..sp.eigenvalues.len())
        .map(|k| {
            let l = sp.eigenvalues[k];
            let x: Vec<c64> = (0..vecs.nrows()).map(|i| vecs[(i, k)]).collect();
            let sx = complex_matvec(s, &x);
            let gx = complex_matvec(gram, &x);
            let r: Vec<c64> = sx.iter().zip(&gx).map(|(a, b)| *a - l * *b).collect();
            cnorm(&r) / (cnorm(&gx) * l.norm() + cnorm(&sx))
        })
        .collect())
}

/// Spectrum of the w = 0 restriction of the dynamic R-N model closed with
/// the (g1, V) channels.
pub fn inertial_sliding_abscissa(spec: &CompositeSpec, grid: &Grid, gains: [f64; 2]) -> Result<Spectrum> {
    let full = assemble(ModelKind::RnDynamic, spec, grid)?;
    let sub = full.inertial_sliding_subsystem()?;
    let closed = close_loop(&sub, &FeedbackLaw::new(LawKind::InertialSliding, gains.to_vec())?)?;
    spectrum(&closed)
}

/// Observation functionals that vanish on an undamped mode of the
/// electrostatic R-N model under the three-channel law:
/// v1(L), v3(L) and w_x(L).
pub fn silent_boundary_rows(sys: &DiscreteSystem) -> Result<Vec<Vec<f64>>> {
    if sys.kind != ModelKind::RnStatic {
        return Err(Error::Validation(format!("overdetermined scan needs rn-static, got {}", sys.kind.name())));
    }
    let idx = |n: &str| sys.layout.index(n).expect("rn-static layout");
    Ok(vec![
        tip_functional(&sys.grid, &sys.layout, idx("v1"), 0),
        tip_functional(&sys.grid, &sys.layout, idx("v3"), 0),
        tip_functional(&sys.grid, &sys.layout, idx("w"), 1),
    ])
}

/// For each frequency ω, the smallest singular value of
/// `[L^{-1} K L^{-T} / ω² - I ; c_i L^{-T} / |c_i L^{-T}|]` with `M = L L^T`.
/// A zero would be an open-loop mode at ω whose boundary observations all
/// vanish.
pub fn overdetermined_scan(spec: &CompositeSpec, grid: &Grid, freqs: &[f64]) -> Result<Vec<(f64, f64)>> {
    if freqs.is_empty() {
        return Ok(vec![]);
    }
    let sys = assemble(ModelKind::RnStatic, spec, grid)?;
    if let Some(w) = freqs.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::Validation(format!("scan frequencies must be positive, got {w}")));
    }
    let n = sys.n_pos();
    let lm = Cholesky::new(&sys.mass, "mass matrix")?;
    let mut t = sys.stiffness.clone();
    lm.solve_l_in_place(&mut t);
    let mut t = linalg::transpose(&t);
    lm.solve_l_in_place(&mut t);
    let t = linalg::symmetrize(&t);
    let rows = silent_boundary_rows(&sys)?;
    let mut c = Mat::from_fn(n, rows.len(), |i, j| rows[j][i]);
    lm.solve_l_in_place(&mut c);
    let c: Vec<Vec<f64>> = (0..rows.len())
        .map(|j| {
            let col: Vec<f64> = (0..n).map(|i| c[(i, j)]).collect();
            let s = linalg::norm(&col);
            col.into_iter().map(|v| v / s).collect()
        })
        .collect();
    freqs
        .iter()
        .map(|&w| {
            let m = rows.len();
            let stacked = Mat::from_fn(n + m, n, |i, j| {
                if i < n {
                    t[(i, j)] / (w * w) - if i == j { 1.0 } else { 0.0 }
                } else {
                    c[i - n][j]
                }
            });
            let sv = linalg::singular_values(&stacked)?;
            Ok((w, sv.iter().copied().fold(f64::INFINITY, f64::min)))
        })
        .collect()
}

/// The default scan grid: the first `modes` open-loop frequencies plus
/// `extra` evenly spaced points in `[0.5 ω_1, 1.1 ω_modes]`, sorted.
pub fn scan_frequencies(spec: &CompositeSpec, grid: &Grid, modes: usize, extra: usize) -> Result<Vec<f64>> {
    let sys = assemble(ModelKind::RnStatic, spec, grid)?;
    let (omega, _) = sys.modes()?;
    if omega.len() < modes || modes == 0 {
        return Err(Error::Validation(format!("need {modes} modes, system has {}", omega.len())));
    }
    let (lo, hi) = (0.5 * omega[0], 1.1 * omega[modes - 1]);
    let mut out: Vec<f64> = omega[..modes].to_vec();
    for k in 0..extra {
        out.push(lo + (hi - lo) * k as f64 / (extra.max(2) - 1) as f64);
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(kind: ModelKind, n: usize) -> DiscreteSystem {
        assemble(kind, &CompositeSpec::default(), &Grid::new(1.0, n).unwrap()).unwrap()
    }

    #[test]
    fn scalar_decay() {
        let g = Mat::from_fn(1, 1, |_, _| 2.0);
        let s = Mat::from_fn(1, 1, |_, _| -6.0);
        let sp = descriptor_spectrum(&g, &s, true).unwrap();
        assert!((sp.eigenvalues[0] - c64::new(-3.0, 0.0)).norm() < 1e-14);
        assert!(eigenpair_residuals(&g, &s, &sp).unwrap()[0] < 1e-15);
    }

    #[test]
    fn open_loop_is_pure_rotation() {
        for kind in ModelKind::ALL {
            let sp = spectrum(&sys(kind, 8)).unwrap();
            assert!(sp.rotation_defect() < 1e-8, "{kind:?}: {}", sp.rotation_defect());
            assert!(sp.conjugation_defect() < 1e-10);
        }
    }

    #[test]
    fn block_and_generic_paths_agree() {
        let s = sys(ModelKind::MmDynamic, 6);
        let closed = close_loop(&s, &FeedbackLaw::unit(LawKind::MmDynamic)).unwrap();
        let a = spectrum(&closed).unwrap();
        let b = descriptor_spectrum(&closed.gram(), &closed.generator(), false).unwrap();
        let scale = a.scale();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((*x - *y).norm() < 1e-9 * scale);
        }
    }

    #[test]
    fn eigenvectors_satisfy_pencil() {
        let s = sys(ModelKind::RnStatic, 8);
        let closed = close_loop(&s, &FeedbackLaw::unit(LawKind::RnStaticReduced)).unwrap();
        let sp = spectrum_with_vectors(&closed).unwrap();
        let r = eigenpair_residuals(&closed.gram(), &closed.generator(), &sp).unwrap();
        assert!(r.iter().all(|v| *v < 1e-8), "{:?}", r.iter().fold(0.0f64, |a, b| a.max(*b)));
    }

    #[test]
    fn zero_gain_sliding_is_conservative() {
        let sp = inertial_sliding_abscissa(&CompositeSpec::default(), &Grid::new(1.0, 8).unwrap(), [0.0, 0.0]).unwrap();
        assert!(sp.rotation_defect() < 1e-8);
        let sp = inertial_sliding_abscissa(&CompositeSpec::default(), &Grid::new(1.0, 8).unwrap(), [1.0, 1.0]).unwrap();
        assert!(sp.abscissa() < 0.0);
    }

    #[test]
    fn empty_scan() {
        let g = Grid::new(1.0, 8).unwrap();
        assert!(overdetermined_scan(&CompositeSpec::default(), &g, &[]).unwrap().is_empty());
    }

    #[test]
    fn too_large_rejected() {
        assert!(check_dim(MAX_DIM + 1).is_err());
    }
}
