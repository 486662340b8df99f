//! Uniform 1-D grid, conforming finite elements and the shifted elliptic
//! solve `(xi - d^2/dx^2)^{-1}` with a clamped left end and a free right end.
//!
//! Piecewise-linear elements carry v1, v3, p and the elliptic unknown;
//! Hermite cubics carry w. All spaces are clamped at x = 0 (value, and slope
//! for Hermite), so the node at the origin carries no unknowns.

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub length: f64,
    pub n: usize,
    pub nodes: Vec<f64>,
}

impl Grid {
    pub fn new(length: f64, n: usize) -> Result<Grid> {
        if n < 4 {
            return Err(Error::Validation(format!("grid needs at least 4 elements, got N={n}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Validation(format!("beam length must be positive, got {length}")));
        }
        let he = length / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|i| i as f64 * he).collect();
        nodes[n] = length;
        Ok(Grid { length, n, nodes })
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    Linear,
    Hermite,
}

impl SpaceKind {
    pub fn dim(self, n: usize) -> usize {
        match self {
            SpaceKind::Linear => n,
            SpaceKind::Hermite => 2 * n,
        }
    }
}

/// Four-point Gauss rule on [0, 1], exact through degree 7.
pub const GAUSS: [(f64, f64); 4] = {
    const A: f64 = 0.430_568_155_797_026_3;
    const B: f64 = 0.169_990_521_792_428_1;
    const WA: f64 = 0.173_927_422_568_726_93;
    const WB: f64 = 0.326_072_577_431_273_07;
    [(0.5 - A, WA), (0.5 - B, WB), (0.5 + B, WB), (0.5 + A, WA)]
};

/// Local shape functions of element `e` at local coordinate t in [0, 1]:
/// global dof (None when clamped) and derivatives 0..=3 in x.
pub fn shape(kind: SpaceKind, e: usize, t: f64, he: f64) -> Vec<(Option<usize>, [f64; 4])> {
    match kind {
        SpaceKind::Linear => {
            let left = if e == 0 { None } else { Some(e - 1) };
            vec![
                (left, [1.0 - t, -1.0 / he, 0.0, 0.0]),
                (Some(e), [t, 1.0 / he, 0.0, 0.0]),
            ]
        }
        SpaceKind::Hermite => {
            let (h2, h3) = (he * he, he * he * he);
            let t2 = t * t;
            let t3 = t2 * t;
            let (lv, ls) = if e == 0 { (None, None) } else { (Some(2 * (e - 1)), Some(2 * (e - 1) + 1)) };
            vec![
                (
                    lv,
                    [1.0 - 3.0 * t2 + 2.0 * t3, (-6.0 * t + 6.0 * t2) / he, (-6.0 + 12.0 * t) / h2, 12.0 / h3],
                ),
                (
                    ls,
                    [he * (t - 2.0 * t2 + t3), 1.0 - 4.0 * t + 3.0 * t2, (-4.0 + 6.0 * t) / he, 6.0 / h2],
                ),
                (
                    Some(2 * e),
                    [3.0 * t2 - 2.0 * t3, (6.0 * t - 6.0 * t2) / he, (6.0 - 12.0 * t) / h2, -12.0 / h3],
                ),
                (Some(2 * e + 1), [he * (-t2 + t3), -2.0 * t + 3.0 * t2, (-2.0 + 6.0 * t) / he, 6.0 / h2]),
            ]
        }
    }
}

/// A named field occupying a contiguous range of the position vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub name: &'static str,
    pub kind: SpaceKind,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub blocks: Vec<Block>,
    pub n_elems: usize,
}

impl Layout {
    pub fn new(fields: &[(&'static str, SpaceKind)], n: usize) -> Layout {
        let mut offset = 0;
        let blocks = fields
            .iter()
            .map(|&(name, kind)| {
                let b = Block { name, kind, offset, len: kind.dim(n) };
                offset += b.len;
                b
            })
            .collect();
        Layout { blocks, n_elems: n }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len).sum()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

/// Linear combination of field derivatives, `sum coef * d^k field / dx^k`.
pub type Combo = Vec<(usize, usize, f64)>;

/// Values of a combination against all local dofs at one point.
fn eval_combo(layout: &Layout, combo: &Combo, e: usize, t: f64, he: f64) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(8);
    for &(field, deriv, coef) in combo {
        let b = &layout.blocks[field];
        for (dof, d) in shape(b.kind, e, t, he) {
            if let Some(i) = dof {
                let v = coef * d[deriv];
                if v != 0.0 {
                    out.push((b.offset + i, v));
                }
            }
        }
    }
    out
}

/// Adds `coef * int a(u) b(v) dx` to `mat` (rows from a, columns from b).
pub fn add_form(mat: &mut Matrix, grid: &Grid, layout: &Layout, a: &Combo, b: &Combo, coef: f64) {
    if coef == 0.0 {
        return;
    }
    let he = grid.spacing();
    for e in 0..grid.n {
        for &(t, w) in GAUSS.iter() {
            let ra = eval_combo(layout, a, e, t, he);
            let rb = eval_combo(layout, b, e, t, he);
            let s = coef * w * he;
            for &(i, vi) in &ra {
                for &(j, vj) in &rb {
                    mat[(i, j)] += s * vi * vj;
                }
            }
        }
    }
}

/// `coef * int a a`.
pub fn add_gram(mat: &mut Matrix, grid: &Grid, layout: &Layout, a: &Combo, coef: f64) {
    add_form(mat, grid, layout, a, a, coef);
}

/// `coef * int (a b + b a)`, the symmetric form of a cross term.
pub fn add_cross(mat: &mut Matrix, grid: &Grid, layout: &Layout, a: &Combo, b: &Combo, coef: f64) {
    add_form(mat, grid, layout, a, b, coef);
    add_form(mat, grid, layout, b, a, coef);
}

/// Rows `int combo(u) psi_j dx` over the clamped linear test functions psi_j.
pub fn load_matrix(grid: &Grid, layout: &Layout, combo: &Combo) -> Matrix {
    let he = grid.spacing();
    let mut out = linalg::zeros(grid.n, layout.dim());
    for e in 0..grid.n {
        for &(t, w) in GAUSS.iter() {
            let r = eval_combo(layout, combo, e, t, he);
            for (dof, d) in shape(SpaceKind::Linear, e, t, he) {
                if let Some(j) = dof {
                    for &(i, v) in &r {
                        out[(j, i)] += w * he * d[0] * v;
                    }
                }
            }
        }
    }
    out
}

/// Row vector of the point evaluation `d^k field/dx^k (L)`.
pub fn tip_functional(grid: &Grid, layout: &Layout, field: usize, deriv: usize) -> Vec<f64> {
    let mut row = vec![0.0; layout.dim()];
    for (i, v) in eval_combo(layout, &vec![(field, deriv, 1.0)], grid.n - 1, 1.0, grid.spacing()) {
        row[i] += v;
    }
    row
}

/// Mass and stiffness matrices of the linear space including the node at
/// x = 0 (size N + 1).
pub fn linear_matrices_full(grid: &Grid) -> (Matrix, Matrix) {
    let n = grid.n;
    let he = grid.spacing();
    let mut m = linalg::zeros(n + 1, n + 1);
    let mut k = linalg::zeros(n + 1, n + 1);
    for e in 0..n {
        let (i, j) = (e, e + 1);
        m[(i, i)] += he / 3.0;
        m[(j, j)] += he / 3.0;
        m[(i, j)] += he / 6.0;
        m[(j, i)] += he / 6.0;
        k[(i, i)] += 1.0 / he;
        k[(j, j)] += 1.0 / he;
        k[(i, j)] -= 1.0 / he;
        k[(j, i)] -= 1.0 / he;
    }
    (m, k)
}

/// Factorized `(xi - d^2/dx^2)` on the linear space with phi(0) = 0 and a
/// natural condition phi_x(L) = 0.
pub struct EllipticSolver {
    pub xi: f64,
    pub grid: Grid,
    mass: Matrix,
    stiff: Matrix,
    chol: Cholesky,
}

impl EllipticSolver {
    pub fn new(grid: &Grid, xi: f64) -> Result<EllipticSolver> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::Validation(format!("elliptic shift must be positive, got {xi}")));
        }
        let (mass, stiff) = linear_matrices_full(grid);
        let n = grid.n;
        let a = faer::Mat::from_fn(n, n, |i, j| stiff[(i + 1, j + 1)] + xi * mass[(i + 1, j + 1)]);
        let chol = Cholesky::new(&a, "elliptic operator")?;
        Ok(EllipticSolver { xi, grid: grid.clone(), mass, stiff, chol })
    }

    /// Mass matrix of the linear space including the origin node.
    pub fn mass(&self) -> &Matrix {
        &self.mass
    }

    /// Solution coefficients (clamped dofs) for a load vector over the
    /// clamped test functions.
    pub fn solve_load(&self, load: &[f64]) -> Vec<f64> {
        self.chol.solve(load)
    }

    /// A^{-1} B for a matrix of load columns.
    pub fn solve_loads(&self, loads: &Matrix) -> Matrix {
        self.chol.solve_mat(loads)
    }

    fn with_origin(&self, inner: Vec<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(inner.len() + 1);
        out.push(0.0);
        out.extend(inner);
        out
    }

    fn check_len(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.grid.n + 1 {
            return Err(Error::Validation(format!(
                "nodal vector has length {}, expected {}",
                g.len(),
                self.grid.n + 1
            )));
        }
        Ok(())
    }

    /// phi = P_xi g for nodal data g (length N + 1, linear interpolant).
    pub fn apply_pxi(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(g)?;
        let mg = linalg::matvec(&self.mass, g);
        Ok(self.with_origin(self.solve_load(&mg[1..])))
    }

    /// J g = xi P_xi g - g.
    pub fn apply_j(&self, g: &[f64]) -> Result<Vec<f64>> {
        let p = self.apply_pxi(g)?;
        Ok(p.iter().zip(g).map(|(pi, gi)| self.xi * pi - gi).collect())
    }

    /// J g computed as P_xi applied to the weak second derivative of g
    /// (requires g(0) = 0; the derivative condition at L is natural).
    pub fn apply_j_second_derivative(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(g)?;
        if g[0] != 0.0 {
            return Err(Error::Validation("second-derivative form needs g(0) = 0".into()));
        }
        let kg = linalg::matvec(&self.stiff, g);
        let load: Vec<f64> = kg[1..].iter().map(|v| -v).collect();
        Ok(self.with_origin(self.solve_load(&load)))
    }

    /// Matrix of the form <J u, v> over the nodal space (size N + 1).
    pub fn j_gram(&self) -> Matrix {
        let n = self.grid.n;
        let rows = faer::Mat::from_fn(n, n + 1, |i, j| self.mass[(i + 1, j)]);
        let solved = self.solve_loads(&rows);
        let mut out = rows.transpose() * &solved;
        for i in 0..=n {
            for j in 0..=n {
                out[(i, j)] = self.xi * out[(i, j)] - self.mass[(i, j)];
            }
        }
        out
    }
}
