//! Layer parameters and the derived constants of the sandwich-beam models.
//!
//! Layer 1 is the elastic face, layer 2 the compliant core and layer 3 the
//! piezoelectric face. All quantities are SI.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CompositeSpec {
    pub length: f64,
    /// Thicknesses h1, h2, h3.
    pub h: [f64; 3],
    /// Densities rho1, rho2, rho3.
    pub rho: [f64; 3],
    /// Elastic stiffnesses alpha1, alpha2 and the purely elastic alpha3_1.
    pub alpha: [f64; 3],
    pub g2: f64,
    pub gamma: f64,
    pub beta: f64,
    pub mu: f64,
    /// Distributed damping of the core shear rate, zero when off.
    pub shear_damping: f64,
}

impl Default for CompositeSpec {
    fn default() -> Self {
        Self {
            length: 1.0,
            h: [0.01, 0.002, 0.001],
            rho: [2700.0, 1000.0, 7600.0],
            alpha: [70e9, 1e6, 60e9],
            g2: 5e5,
            gamma: 10.0,
            beta: 1e8,
            mu: 1e-5,
            shear_damping: 0.0,
        }
    }
}

/// Knobs that sweeps and resonance searches may vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Knob {
    Mu,
    G2,
    Beta,
    Gamma,
}

impl Knob {
    pub fn parse(s: &str) -> Option<Knob> {
        match s {
            "mu" => Some(Knob::Mu),
            "G2" | "g2" => Some(Knob::G2),
            "beta" => Some(Knob::Beta),
            "gamma" => Some(Knob::Gamma),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Knob::Mu => "mu",
            Knob::G2 => "G2",
            Knob::Beta => "beta",
            Knob::Gamma => "gamma",
        }
    }
}

impl CompositeSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("h1", self.h[0]),
            ("h2", self.h[1]),
            ("h3", self.h[2]),
            ("rho1", self.rho[0]),
            ("rho2", self.rho[1]),
            ("rho3", self.rho[2]),
            ("alpha1", self.alpha[0]),
            ("alpha2", self.alpha[1]),
            ("alpha3_1", self.alpha[2]),
            ("beta", self.beta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let nonneg = [
            ("G2", self.g2),
            ("gamma", self.gamma),
            ("mu", self.mu),
            ("shear_damping", self.shear_damping),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be nonnegative and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_knob(&self, knob: Knob, value: f64) -> CompositeSpec {
        let mut s = self.clone();
        match knob {
            Knob::Mu => s.mu = value,
            Knob::G2 => s.g2 = value,
            Knob::Beta => s.beta = value,
            Knob::Gamma => s.gamma = value,
        }
        s
    }

    pub fn knob(&self, knob: Knob) -> f64 {
        match knob {
            Knob::Mu => self.mu,
            Knob::G2 => self.g2,
            Knob::Beta => self.beta,
            Knob::Gamma => self.gamma,
        }
    }

    /// Fastest longitudinal wave speed over the three layers.
    pub fn max_wave_speed(&self) -> f64 {
        (0..3).map(|i| (self.alpha[i] / self.rho[i]).sqrt()).fold(0.0, f64::max)
    }

    /// alpha3_1 + gamma^2 beta.
    pub fn alpha3(&self) -> f64 {
        self.alpha[2] + self.gamma * self.gamma * self.beta
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RnCoefficients {
    pub h_mid: f64,
    pub m: f64,
    pub k1: f64,
    pub k2: f64,
    pub alpha3: f64,
    pub varsigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmCoefficients {
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub c: f64,
    pub varsigma: f64,
    pub xi: f64,
    pub tilde_a: f64,
    pub tilde_b: f64,
    pub tilde_c: f64,
}

impl MmCoefficients {
    /// Shift of the elliptic operator in the electrostatic model.
    pub fn tilde_xi(&self) -> f64 {
        self.varsigma * self.tilde_c
    }
}

pub fn derive_rn(spec: &CompositeSpec) -> Result<RnCoefficients> {
    spec.validate()?;
    let [h1, h2, h3] = spec.h;
    let [r1, r2, r3] = spec.rho;
    let a1 = spec.alpha[0];
    let alpha3 = spec.alpha3();
    let out = RnCoefficients {
        h_mid: (h1 + 2.0 * h2 + h3) / 2.0,
        m: r1 * h1 + r2 * h2 + r3 * h3,
        k1: (r1 * h1.powi(3) + r3 * h3.powi(3)) / 12.0,
        k2: (a1 * h1.powi(3) + alpha3 * h3.powi(3)) / 12.0,
        alpha3,
        varsigma: spec.g2 / h2,
    };
    Ok(out)
}

pub fn derive_mm(spec: &CompositeSpec) -> Result<MmCoefficients> {
    spec.validate()?;
    let [h1, h2, h3] = spec.h;
    let a1 = spec.alpha[0];
    let a2 = spec.alpha[1];
    let a31 = spec.alpha[2];
    let a3 = spec.alpha3();
    let hm = (h1 + 2.0 * h2 + h3) / 2.0;
    let (g, b) = (spec.gamma, spec.beta);

    let core = 4.0 * a1 * h1 + a2 * h2 + 4.0 * a3 * h3;
    let den = a2 * h2 * h2 * core + 12.0 * a1 * a3 * h1 * h2 * h3;
    let den4 = a2 * h2 * h2 * core + 12.0 * a1 * a31 * h1 * h2 * h3;
    let den_c = a2 * h2 * core + 12.0 * a1 * a3 * h1 * h3;
    for (name, d) in [("common denominator", den), ("B4 denominator", den4), ("C denominator", den_c)] {
        if !(d > 0.0) {
            return Err(Error::Validation(format!("{name} is nonpositive ({d})")));
        }
    }

    let bend = a1 * h1.powi(3) + a3 * h3.powi(3);
    let a = (bend
        + a2 * h2 * h2 * (3.0 * a2 * h2 * bend + 12.0 * a1 * a3 * h1 * h3 * (h1 * h1 + h3 * h3 - h1 * h3)) / den)
        / 12.0;
    let b1 = (a2
        * (a2 * h2 * h2 + 3.0 * a1 * h1 * h1 + 4.0 * a1 * h1 * h2 + 3.0 * a3 * h3 * h3 + 4.0 * a3 * h2 * h3)
        + 12.0 * a1 * a3 * hm * h1 * h3)
        / den;
    let b2 = (6.0 * a2 * h2 + 12.0 * a1 * h1) / den;
    let b3 = (0.5 * a2 * a2 * h2.powi(3) * h3 * h3 + 2.0 * a1 * a2 * h1 * h2 * h2 * h3 * h3
        - a1 * a2 * h1 * h1 * h2 * h2 * h3)
        / den;
    let b4 = (a2 * a2 * h2.powi(3) * h3
        + 12.0 * a1 * a31 * h1 * h2 * h3 * h3
        + 4.0 * a1 * a2 * h1 * h2 * h2 * h3
        + 4.0 * a2 * a31 * h2 * h2 * h3 * h3)
        / den4;
    let c = 12.0 * (a1 * h1 + a2 * h2 + a3 * h3) / den_c;
    let varsigma = spec.g2 / h2;

    let tilde_a = a - g * g * b * b3 * b3 / b4;
    let tilde_b = b1 - g * b2 * b3 / b4;
    let tilde_c = c + g * h2 * h3 * b2 * b2 / b4;

    for (name, v) in [("A", a), ("B1", b1), ("B2", b2), ("B4", b4), ("C", c)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Validation(format!("derived constant {name} is not positive ({v})")));
        }
    }
    Ok(MmCoefficients {
        a,
        b1,
        b2,
        b3,
        b4,
        c,
        varsigma,
        xi: c * varsigma,
        tilde_a,
        tilde_b,
        tilde_c,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefinitenessReport {
    pub rn_matrix_pd: bool,
    /// Ratio of the extreme eigenvalues of the R-N electro-elastic matrix.
    pub rn_condition: f64,
    pub mm_det: f64,
    pub mm_det_positive: bool,
}

pub fn check_definiteness(spec: &CompositeSpec) -> Result<DefinitenessReport> {
    let mm = derive_mm(spec)?;
    let a3 = spec.alpha3();
    let off = -spec.gamma * spec.beta;
    let (p, q) = (a3, spec.beta);
    let mean = 0.5 * (p + q);
    let rad = (0.25 * (p - q) * (p - q) + off * off).sqrt();
    let hi = mean + rad;
    // smallest eigenvalue from det / largest, stable when the matrix is nearly singular
    let det = spec.alpha[2] * spec.beta;
    let lo = det / hi;
    let mm_det = mm.a * mm.b4 - spec.gamma * spec.gamma * spec.beta * mm.b3 * mm.b3;
    Ok(DefinitenessReport {
        rn_matrix_pd: p > 0.0 && lo > 0.0,
        rn_condition: hi / lo,
        mm_det,
        mm_det_positive: mm_det > 0.0,
    })
}

/// Name/value rows for `coefficients.csv`.
pub fn coefficient_rows(spec: &CompositeSpec) -> Result<Vec<(&'static str, f64)>> {
    let rn = derive_rn(spec)?;
    let mut rows = vec![
        ("H", rn.h_mid),
        ("m", rn.m),
        ("K1", rn.k1),
        ("K2", rn.k2),
        ("alpha3", rn.alpha3),
        ("varsigma", rn.varsigma),
    ];
    match derive_mm(spec) {
        Ok(mm) => rows.extend([
            ("A", mm.a),
            ("B1", mm.b1),
            ("B2", mm.b2),
            ("B3", mm.b3),
            ("B4", mm.b4),
            ("C", mm.c),
            ("xi", mm.xi),
            ("tildeA", mm.tilde_a),
            ("tildeB", mm.tilde_b),
            ("tildeC", mm.tilde_c),
            ("tildeXi", mm.tilde_xi()),
        ]),
        Err(e) => return Err(e),
    }
    let d = check_definiteness(spec)?;
    rows.push(("rn_condition", d.rn_condition));
    rows.push(("mm_det", d.mm_det));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> CompositeSpec {
        CompositeSpec {
            length: 1.0,
            h: [1.0; 3],
            rho: [1.0; 3],
            alpha: [1.0; 3],
            g2: 1.0,
            gamma: 0.0,
            beta: 1.0,
            mu: 1.0,
            shear_damping: 0.0,
        }
    }

    #[test]
    fn unit_layers() {
        let rn = derive_rn(&unit()).unwrap();
        assert_eq!(rn.m, 3.0);
        assert!((rn.k1 - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(rn.h_mid, 2.0);
    }

    #[test]
    fn alpha3_adds_piezo_stiffening() {
        let mut s = unit();
        s.alpha[2] = 2.0;
        s.gamma = 1.0;
        s.beta = 3.0;
        assert_eq!(derive_rn(&s).unwrap().alpha3, 5.0);
    }

    #[test]
    fn mid_distance() {
        let mut s = unit();
        s.h = [1.0, 2.0, 3.0];
        assert_eq!(derive_rn(&s).unwrap().h_mid, 4.0);
    }

    #[test]
    fn rejects_bad_thickness() {
        let mut s = unit();
        s.h[1] = 0.0;
        let e = derive_rn(&s).unwrap_err().to_string();
        assert!(e.contains("h2"), "{e}");
    }

    #[test]
    fn no_coupling_keeps_tilde_constants() {
        let mm = derive_mm(&unit()).unwrap();
        assert_eq!(mm.tilde_a, mm.a);
        assert_eq!(mm.tilde_b, mm.b1);
        assert_eq!(mm.tilde_c, mm.c);
    }

    #[test]
    fn diagonal_rn_matrix_is_definite() {
        let d = check_definiteness(&unit()).unwrap();
        assert!(d.rn_matrix_pd);
        assert!((d.rn_condition - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tiny_beta_reports_conditioning() {
        let mut s = CompositeSpec::default();
        s.beta = 1e-12;
        let d = check_definiteness(&s).unwrap();
        assert!(d.rn_matrix_pd);
        assert!(d.rn_condition > 1e20);
    }

    #[test]
    fn default_spec_is_admissible() {
        let s = CompositeSpec::default();
        let mm = derive_mm(&s).unwrap();
        assert!(mm.b3 < 0.0);
        assert!(mm.tilde_a > 0.0);
        assert!(check_definiteness(&s).unwrap().mm_det_positive);
    }
}
