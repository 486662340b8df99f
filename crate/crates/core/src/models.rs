//! Assembly of the five beam models into the descriptor form
//! `G x' = S x` with `x = (q, q')`, `G = diag(K, M)` and
//! `S = [[0, K], [-K, -D]]`, where `K` is the stiffness, `M` the mass and
//! `D` the velocity damping (shear damping plus closed-loop feedback).

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, Matrix};
use crate::materials::{derive_mm, derive_rn, CompositeSpec};
use crate::operators::{
    add_cross, add_gram, load_matrix, tip_functional, Combo, EllipticSolver, Grid, Layout, SpaceKind,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Parent model keeping core inertia and core stretching stiffness.
    Full,
    RnDynamic,
    RnStatic,
    MmDynamic,
    MmStatic,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::Full, ModelKind::RnDynamic, ModelKind::RnStatic, ModelKind::MmDynamic, ModelKind::MmStatic];

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "full" => Some(ModelKind::Full),
            "rn-dynamic" => Some(ModelKind::RnDynamic),
            "rn-static" => Some(ModelKind::RnStatic),
            "mm-dynamic" => Some(ModelKind::MmDynamic),
            "mm-static" => Some(ModelKind::MmStatic),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Full => "full",
            ModelKind::RnDynamic => "rn-dynamic",
            ModelKind::RnStatic => "rn-static",
            ModelKind::MmDynamic => "mm-dynamic",
            ModelKind::MmStatic => "mm-static",
        }
    }

    fn needs_magnetic(self) -> bool {
        matches!(self, ModelKind::Full | ModelKind::RnDynamic | ModelKind::MmDynamic)
    }
}

/// One boundary input: its load vector over the positions. The collocated
/// observation is the same functional applied to the velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub name: &'static str,
    pub load: Vec<f64>,
}

/// A closed feedback loop `u = -gain * (output . q')` entering through `input`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveChannel {
    pub name: &'static str,
    pub gain: f64,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DiscreteSystem {
    pub kind: ModelKind,
    pub spec: CompositeSpec,
    pub grid: Grid,
    pub layout: Layout,
    pub mass: Matrix,
    pub stiffness: Matrix,
    /// Velocity damping; zero for a conservative open loop.
    pub damping: Matrix,
    pub channels: Vec<Channel>,
    /// Extra observation functionals that are not collocated with a load.
    pub aux_outputs: Vec<(&'static str, Vec<f64>)>,
    /// Feedback loops closed on this system.
    pub active: Vec<ActiveChannel>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energy {
    pub total: f64,
    pub kinetic: f64,
    pub potential: f64,
}

fn v(field: usize, deriv: usize, coef: f64) -> Combo {
    vec![(field, deriv, coef)]
}

fn shear_combo(v1: usize, v3: usize, w: usize, h_mid: f64, deriv: usize) -> Combo {
    vec![(v1, deriv, -1.0), (v3, deriv, 1.0), (w, deriv + 1, h_mid)]
}

pub fn assemble(kind: ModelKind, spec: &CompositeSpec, grid: &Grid) -> Result<DiscreteSystem> {
    spec.validate()?;
    if (spec.length - grid.length).abs() > 1e-12 * spec.length {
        return Err(Error::Validation(format!(
            "grid length {} differs from beam length {}",
            grid.length, spec.length
        )));
    }
    if kind.needs_magnetic() && spec.mu <= 0.0 {
        return Err(Error::Validation(format!("model {} needs mu > 0", kind.name())));
    }
    let sys = match kind {
        ModelKind::Full | ModelKind::RnDynamic => assemble_layered(kind, spec, grid)?,
        ModelKind::RnStatic => assemble_rn_static(spec, grid)?,
        ModelKind::MmDynamic => assemble_mm_dynamic(spec, grid)?,
        ModelKind::MmStatic => assemble_mm_static(spec, grid)?,
    };
    sys.check_definite()?;
    Ok(sys)
}

fn symmetrized(a: Matrix) -> Matrix {
    linalg::symmetrize(&a)
}

fn assemble_layered(kind: ModelKind, spec: &CompositeSpec, grid: &Grid) -> Result<DiscreteSystem> {
    let rn = derive_rn(spec)?;
    let layout = Layout::new(
        &[
            ("v1", SpaceKind::Linear),
            ("v3", SpaceKind::Linear),
            ("p", SpaceKind::Linear),
            ("w", SpaceKind::Hermite),
        ],
        grid.n,
    );
    let (v1, v3, p, w) = (0, 1, 2, 3);
    let [h1, h2, h3] = spec.h;
    let [r1, r2, r3] = spec.rho;
    let [a1, a2, _] = spec.alpha;
    let n = layout.dim();
    let mut k = linalg::zeros(n, n);
    let mut m = linalg::zeros(n, n);

    add_gram(&mut k, grid, &layout, &v(v1, 1, 1.0), a1 * h1);
    add_gram(&mut k, grid, &layout, &v(v3, 1, 1.0), h3 * rn.alpha3);
    add_gram(&mut k, grid, &layout, &v(p, 1, 1.0), h3 * spec.beta);
    add_cross(&mut k, grid, &layout, &v(v3, 1, 1.0), &v(p, 1, 1.0), -h3 * spec.gamma * spec.beta);
    add_gram(&mut k, grid, &layout, &v(w, 2, 1.0), rn.k2);
    add_gram(&mut k, grid, &layout, &shear_combo(v1, v3, w, rn.h_mid, 0), rn.varsigma);

    add_gram(&mut m, grid, &layout, &v(v1, 0, 1.0), r1 * h1);
    add_gram(&mut m, grid, &layout, &v(v3, 0, 1.0), r3 * h3);
    add_gram(&mut m, grid, &layout, &v(p, 0, 1.0), spec.mu * h3);
    add_gram(&mut m, grid, &layout, &v(w, 0, 1.0), rn.m);
    add_gram(&mut m, grid, &layout, &v(w, 1, 1.0), rn.k1);

    if kind == ModelKind::Full {
        // core mid-plane stretch and core rotation, in positions and rates
        let stretch = |d: usize| -> Combo { vec![(v1, d, 0.5), (v3, d, 0.5), (w, d + 1, (h3 - h1) / 4.0)] };
        let rotation = |d: usize| -> Combo {
            vec![(v1, d, -1.0 / h2), (v3, d, 1.0 / h2), (w, d + 1, (h1 + h3) / (2.0 * h2))]
        };
        add_gram(&mut k, grid, &layout, &stretch(1), a2 * h2);
        add_gram(&mut k, grid, &layout, &rotation(1), a2 * h2.powi(3) / 12.0);
        add_gram(&mut m, grid, &layout, &stretch(0), r2 * h2);
        add_gram(&mut m, grid, &layout, &rotation(0), r2 * h2.powi(3) / 12.0);
    }

    let mut d = linalg::zeros(n, n);
    add_gram(&mut d, grid, &layout, &shear_combo(v1, v3, w, rn.h_mid, 0), spec.shear_damping / h2);

    let channels = vec![
        Channel { name: "g1", load: tip_functional(grid, &layout, v1, 0) },
        Channel { name: "g3", load: tip_functional(grid, &layout, v3, 0) },
        Channel { name: "V", load: tip_functional(grid, &layout, p, 0) },
        Channel { name: "M", load: tip_functional(grid, &layout, w, 1) },
        Channel { name: "g", load: tip_functional(grid, &layout, w, 0) },
    ];
    Ok(DiscreteSystem {
        kind,
        spec: spec.clone(),
        grid: grid.clone(),
        layout,
        mass: symmetrized(m),
        stiffness: symmetrized(k),
        damping: symmetrized(d),
        channels,
        aux_outputs: vec![],
        active: vec![],
    })
}

fn assemble_rn_static(spec: &CompositeSpec, grid: &Grid) -> Result<DiscreteSystem> {
    let rn = derive_rn(spec)?;
    let layout = Layout::new(
        &[("v1", SpaceKind::Linear), ("v3", SpaceKind::Linear), ("w", SpaceKind::Hermite)],
        grid.n,
    );
    let (v1, v3, w) = (0, 1, 2);
    let [h1, h2, h3] = spec.h;
    let [r1, _, r3] = spec.rho;
    let n = layout.dim();
    let mut k = linalg::zeros(n, n);
    let mut m = linalg::zeros(n, n);
    add_gram(&mut k, grid, &layout, &v(v1, 1, 1.0), spec.alpha[0] * h1);
    add_gram(&mut k, grid, &layout, &v(v3, 1, 1.0), spec.alpha[2] * h3);
    add_gram(&mut k, grid, &layout, &v(w, 2, 1.0), rn.k2);
    add_gram(&mut k, grid, &layout, &shear_combo(v1, v3, w, rn.h_mid, 0), rn.varsigma);

    add_gram(&mut m, grid, &layout, &v(v1, 0, 1.0), r1 * h1);
    add_gram(&mut m, grid, &layout, &v(v3, 0, 1.0), r3 * h3);
    add_gram(&mut m, grid, &layout, &v(w, 0, 1.0), rn.m);
    add_gram(&mut m, grid, &layout, &v(w, 1, 1.0), rn.k1);

    let mut d = linalg::zeros(n, n);
    add_gram(&mut d, grid, &layout, &shear_combo(v1, v3, w, rn.h_mid, 0), spec.shear_damping / h2);

    let channels = vec![
        Channel { name: "g1", load: tip_functional(grid, &layout, v1, 0) },
        Channel { name: "V", load: tip_functional(grid, &layout, v3, 0) },
        Channel { name: "M", load: tip_functional(grid, &layout, w, 1) },
        Channel { name: "g", load: tip_functional(grid, &layout, w, 0) },
    ];
    Ok(DiscreteSystem {
        kind: ModelKind::RnStatic,
        spec: spec.clone(),
        grid: grid.clone(),
        layout,
        mass: symmetrized(m),
        stiffness: symmetrized(k),
        damping: symmetrized(d),
        channels,
        aux_outputs: vec![],
        active: vec![],
    })
}

/// Stiffness of `-c <J s, s>` for `s` a combination of field values:
/// `c (int s s - xi B^T A^{-1} B)` with `B` the load matrix of `s`.
fn add_nonlocal(k: &mut Matrix, grid: &Grid, layout: &Layout, s: &Combo, coef: f64, solver: &EllipticSolver) {
    if coef == 0.0 {
        return;
    }
    add_gram(k, grid, layout, s, coef);
    let b = load_matrix(grid, layout, s);
    let ab = solver.solve_loads(&b);
    let bab = b.transpose() * &ab;
    for i in 0..k.nrows() {
        for j in 0..k.ncols() {
            k[(i, j)] -= coef * solver.xi * bab[(i, j)];
        }
    }
}

fn mm_shift_error(e: Error) -> Error {
    match e {
        Error::Validation(msg) => Error::Assembly(msg),
        other => other,
    }
}

fn assemble_mm_dynamic(spec: &CompositeSpec, grid: &Grid) -> Result<DiscreteSystem> {
    let rn = derive_rn(spec)?;
    let mm = derive_mm(spec)?;
    let solver = EllipticSolver::new(grid, mm.xi).map_err(mm_shift_error)?;
    let layout = Layout::new(&[("w", SpaceKind::Hermite), ("p", SpaceKind::Linear)], grid.n);
    let (w, p) = (0, 1);
    let [_, h2, h3] = spec.h;
    let (g, b) = (spec.gamma, spec.beta);
    let n = layout.dim();
    let mut k = linalg::zeros(n, n);
    let mut m = linalg::zeros(n, n);
    add_gram(&mut k, grid, &layout, &v(w, 2, 1.0), mm.a);
    add_gram(&mut k, grid, &layout, &v(p, 1, 1.0), b * mm.b4);
    add_cross(&mut k, grid, &layout, &v(w, 2, 1.0), &v(p, 1, 1.0), g * b * mm.b3);
    let s: Combo = vec![(w, 1, mm.b1), (p, 0, mm.b2)];
    add_nonlocal(&mut k, grid, &layout, &s, g * b * h2 * h3 * mm.varsigma, &solver);

    add_gram(&mut m, grid, &layout, &v(w, 0, 1.0), rn.m);
    add_gram(&mut m, grid, &layout, &v(p, 0, 1.0), spec.mu * h3);

    let channels = vec![Channel { name: "V", load: tip_functional(grid, &layout, p, 0) }];
    Ok(DiscreteSystem {
        kind: ModelKind::MmDynamic,
        spec: spec.clone(),
        grid: grid.clone(),
        layout,
        mass: symmetrized(m),
        stiffness: symmetrized(k),
        damping: linalg::zeros(n, n),
        channels,
        aux_outputs: vec![],
        active: vec![],
    })
}

/// Row `c` with `c . w = (P_xi w_x)(L)` for Hermite coefficients w.
pub fn pxi_slope_tip(grid: &Grid, layout: &Layout, w: usize, solver: &EllipticSolver) -> Vec<f64> {
    let bx = load_matrix(grid, layout, &v(w, 1, 1.0));
    let mut e = vec![0.0; grid.n];
    e[grid.n - 1] = 1.0;
    let y = solver.solve_load(&e);
    (0..layout.dim()).map(|j| (0..grid.n).map(|i| y[i] * bx[(i, j)]).sum()).collect()
}

fn assemble_mm_static(spec: &CompositeSpec, grid: &Grid) -> Result<DiscreteSystem> {
    let rn = derive_rn(spec)?;
    let mm = derive_mm(spec)?;
    if !(mm.tilde_a > 0.0) {
        return Err(Error::Assembly(format!("electrostatic bending stiffness is not positive ({})", mm.tilde_a)));
    }
    let solver = EllipticSolver::new(grid, mm.tilde_xi()).map_err(mm_shift_error)?;
    let layout = Layout::new(&[("w", SpaceKind::Hermite)], grid.n);
    let w = 0;
    let [_, h2, h3] = spec.h;
    let (g, b) = (spec.gamma, spec.beta);
    let n = layout.dim();
    let mut k = linalg::zeros(n, n);
    let mut m = linalg::zeros(n, n);
    add_gram(&mut k, grid, &layout, &v(w, 2, 1.0), mm.tilde_a);
    add_nonlocal(&mut k, grid, &layout, &v(w, 1, mm.tilde_b), g * b * mm.varsigma * h2 * h3, &solver);
    add_gram(&mut m, grid, &layout, &v(w, 0, 1.0), rn.m);

    let angular = pxi_slope_tip(grid, &layout, w, &solver);
    let slope = tip_functional(grid, &layout, w, 1);
    let a_coef = mm.varsigma * h2 * h3 * mm.tilde_b * mm.b2;
    let scale = g / mm.b4;
    let load: Vec<f64> = angular.iter().zip(&slope).map(|(c, e)| scale * (a_coef * c + mm.b3 * e)).collect();
    Ok(DiscreteSystem {
        kind: ModelKind::MmStatic,
        spec: spec.clone(),
        grid: grid.clone(),
        layout,
        mass: symmetrized(m),
        stiffness: symmetrized(k),
        damping: linalg::zeros(n, n),
        channels: vec![Channel { name: "V", load }],
        aux_outputs: vec![("angular", angular)],
        active: vec![],
    })
}

impl DiscreteSystem {
    /// Number of position unknowns.
    pub fn n_pos(&self) -> usize {
        self.layout.dim()
    }

    /// Full state dimension (positions and velocities).
    pub fn dim(&self) -> usize {
        2 * self.n_pos()
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    fn check_definite(&self) -> Result<()> {
        Cholesky::new(&self.mass, "mass matrix")?;
        Cholesky::new(&self.stiffness, "stiffness matrix")?;
        Ok(())
    }

    /// Energy Gram matrix diag(K, M).
    pub fn gram(&self) -> Matrix {
        let n = self.n_pos();
        let mut g = linalg::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = self.stiffness[(i, j)];
                g[(n + i, n + j)] = self.mass[(i, j)];
            }
        }
        g
    }

    /// Descriptor operator S with G x' = S x.
    pub fn generator(&self) -> Matrix {
        let n = self.n_pos();
        let mut s = linalg::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                s[(i, n + j)] = self.stiffness[(i, j)];
                s[(n + i, j)] = -self.stiffness[(i, j)];
                s[(n + i, n + j)] = -self.damping[(i, j)];
            }
        }
        s
    }

    /// ||S + S^T|| / ||S||, which equals ||A^T G + G A|| / ||G A|| for A = G^{-1} S.
    pub fn skew_defect(&self) -> f64 {
        let s = self.generator();
        let st = linalg::transpose(&s);
        let sum = &s + &st;
        linalg::frobenius(&sum) / linalg::frobenius(&s)
    }

    pub fn energy(&self, x: &[f64]) -> Result<Energy> {
        let n = self.n_pos();
        if x.len() != 2 * n {
            return Err(Error::Validation(format!("state has length {}, expected {}", x.len(), 2 * n)));
        }
        let potential = 0.5 * linalg::quad(&self.stiffness, &x[..n]);
        let kinetic = 0.5 * linalg::quad(&self.mass, &x[n..]);
        Ok(Energy { total: potential + kinetic, kinetic, potential })
    }

    /// Open-loop natural frequencies (ascending) and mass-normalized mode
    /// shapes as columns. Solved on the inverse pencil `L_K^{-1} M L_K^{-T}`,
    /// which keeps the low end accurate when the stiffness spans many
    /// decades; modes lost to roundoff at the top are reported as infinite.
    pub fn modes(&self) -> Result<(Vec<f64>, Matrix)> {
        let chol = Cholesky::new(&self.stiffness, "stiffness matrix")?;
        let mut t = self.mass.clone();
        chol.solve_l_in_place(&mut t);
        let mut t = linalg::transpose(&t);
        chol.solve_l_in_place(&mut t);
        let (vals, mut vecs) = linalg::sym_eigen(&linalg::symmetrize(&t))?;
        chol.solve_lt_in_place(&mut vecs);
        let n = vals.len();
        let omegas: Vec<f64> = (0..n).rev().map(|k| if vals[k] > 0.0 { vals[k].sqrt().recip() } else { f64::INFINITY }).collect();
        let shapes = faer::Mat::from_fn(n, n, |i, j| {
            let k = n - 1 - j;
            if vals[k] > 0.0 {
                vecs[(i, k)] / vals[k].sqrt()
            } else {
                vecs[(i, k)]
            }
        });
        Ok((omegas, shapes))
    }

    /// Restriction of the R-N dynamic model to w = 0 (blocks v1, v3, p).
    pub fn inertial_sliding_subsystem(&self) -> Result<DiscreteSystem> {
        if self.kind != ModelKind::RnDynamic {
            return Err(Error::Validation(format!(
                "inertial sliding restriction needs rn-dynamic, got {}",
                self.kind.name()
            )));
        }
        self.restrict(&["v1", "v3", "p"])
    }

    /// Restriction of the dynamic M-M model to w = 0 (charge only).
    pub fn bending_free_subsystem(&self) -> Result<DiscreteSystem> {
        if self.kind != ModelKind::MmDynamic {
            return Err(Error::Validation(format!(
                "bending-free restriction needs mm-dynamic, got {}",
                self.kind.name()
            )));
        }
        self.restrict(&["p"])
    }

    /// Open-loop restriction to the named blocks (other fields held at zero).
    /// Channels whose load vanishes on the kept blocks are dropped.
    pub fn restrict(&self, keep: &[&str]) -> Result<DiscreteSystem> {
        if !self.active.is_empty() {
            return Err(Error::Validation("restrict the open-loop system, then close the loop".into()));
        }
        let mut idx = vec![];
        let mut fields = vec![];
        for name in keep {
            let b = self
                .layout
                .block(name)
                .ok_or_else(|| Error::Validation(format!("{} has no block {name}", self.kind.name())))?;
            idx.extend(b.offset..b.offset + b.len);
            fields.push((b.name, b.kind));
        }
        let layout = Layout::new(&fields, self.layout.n_elems);
        let restrict = |row: &[f64]| -> Vec<f64> { idx.iter().map(|&i| row[i]).collect() };
        let channels = self
            .channels
            .iter()
            .map(|c| Channel { name: c.name, load: restrict(&c.load) })
            .filter(|c| c.load.iter().any(|&v| v != 0.0))
            .collect();
        Ok(DiscreteSystem {
            kind: self.kind,
            spec: self.spec.clone(),
            grid: self.grid.clone(),
            layout,
            mass: linalg::select(&self.mass, &idx),
            stiffness: linalg::select(&self.stiffness, &idx),
            damping: linalg::select(&self.damping, &idx),
            channels,
            aux_outputs: vec![],
            active: vec![],
        })
    }

    /// Smallest and largest eigenvalue of the Gram matrix.
    pub fn gram_extremes(&self) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for m in [&self.stiffness, &self.mass] {
            let e = linalg::sym_eigenvalues(m)?;
            lo = lo.min(e[0]);
            hi = hi.max(e[e.len() - 1]);
        }
        Ok((lo, hi))
    }

    /// Name/value rows for `system.meta.csv`.
    pub fn meta_rows(&self) -> Result<Vec<(String, f64)>> {
        let mut rows = vec![("state_dim".to_string(), self.dim() as f64)];
        for b in &self.layout.blocks {
            rows.push((format!("dofs_{}", b.name), b.len as f64));
        }
        rows.push(("norm_mass".into(), linalg::frobenius(&self.mass)));
        rows.push(("norm_stiffness".into(), linalg::frobenius(&self.stiffness)));
        rows.push(("norm_damping".into(), linalg::frobenius(&self.damping)));
        let (lo, hi) = self.gram_extremes()?;
        rows.push(("gram_min_eig".into(), lo));
        rows.push(("gram_max_eig".into(), hi));
        rows.push(("skew_defect".into(), self.skew_defect()));
        Ok(rows)
    }
}
