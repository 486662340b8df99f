//! Exact rational evaluation of the Mead-Marcus constants, written out
//! independently of `materials::derive_mm` and used only as a reference.
//! Every double input is converted exactly, so the only rounding is the
//! final conversion back to f64.

use crate::materials::CompositeSpec;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

type Q = BigRational;

fn q(x: f64) -> Q {
    Q::from_float(x).expect("finite input")
}

fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn pow(x: &Q, k: u32) -> Q {
    let mut out = Q::one();
    for _ in 0..k {
        out *= x;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactConstants {
    pub a: Q,
    pub b1: Q,
    pub b2: Q,
    pub b3: Q,
    pub b4: Q,
    pub c: Q,
    pub tilde_a: Q,
    pub tilde_b: Q,
    pub tilde_c: Q,
    /// `A B4 - gamma^2 beta B3^2`.
    pub det: Q,
}

impl ExactConstants {
    pub fn to_f64(&self) -> [(&'static str, f64); 10] {
        let f = |x: &Q| x.to_f64().unwrap_or(f64::NAN);
        [
            ("A", f(&self.a)),
            ("B1", f(&self.b1)),
            ("B2", f(&self.b2)),
            ("B3", f(&self.b3)),
            ("B4", f(&self.b4)),
            ("C", f(&self.c)),
            ("tildeA", f(&self.tilde_a)),
            ("tildeB", f(&self.tilde_b)),
            ("tildeC", f(&self.tilde_c)),
            ("det", f(&self.det)),
        ]
    }
}

pub fn mm_constants(spec: &CompositeSpec) -> Option<ExactConstants> {
    let (h1, h2, h3) = (q(spec.h[0]), q(spec.h[1]), q(spec.h[2]));
    let (al1, al2, al31) = (q(spec.alpha[0]), q(spec.alpha[1]), q(spec.alpha[2]));
    let (gam, bet) = (q(spec.gamma), q(spec.beta));
    let al3 = &al31 + &gam * &gam * &bet;
    let big_h = (&h1 + int(2) * &h2 + &h3) / int(2);

    // alpha2 h2^2 (4 alpha1 h1 + alpha2 h2 + 4 alpha3 h3) + 12 alpha1 alpha3 h1 h2 h3
    let inner = int(4) * &al1 * &h1 + &al2 * &h2 + int(4) * &al3 * &h3;
    let den = &al2 * pow(&h2, 2) * &inner + int(12) * &al1 * &al3 * &h1 * &h2 * &h3;
    let den_b4 = &al2 * pow(&h2, 2) * &inner + int(12) * &al1 * &al31 * &h1 * &h2 * &h3;
    let den_c = &al2 * &h2 * &inner + int(12) * &al1 * &al3 * &h1 * &h3;
    if den.is_zero() || den_b4.is_zero() || den_c.is_zero() {
        return None;
    }

    let flex = &al1 * pow(&h1, 3) + &al3 * pow(&h3, 3);
    let a_num = &al2
        * pow(&h2, 2)
        * (int(3) * &al2 * &h2 * &flex
            + int(12) * &al1 * &al3 * &h1 * &h3 * (pow(&h1, 2) + pow(&h3, 2) - &h1 * &h3));
    let a = (&flex + a_num / &den) / int(12);

    let b1 = (&al2
        * (&al2 * pow(&h2, 2)
            + int(3) * &al1 * pow(&h1, 2)
            + int(4) * &al1 * &h1 * &h2
            + int(3) * &al3 * pow(&h3, 2)
            + int(4) * &al3 * &h2 * &h3)
        + int(12) * &al1 * &al3 * &big_h * &h1 * &h3)
        / &den;

    let b2 = (int(6) * &al2 * &h2 + int(12) * &al1 * &h1) / &den;

    let b3 = (pow(&al2, 2) * pow(&h2, 3) * pow(&h3, 2) / int(2)
        + int(2) * &al1 * &al2 * &h1 * pow(&h2, 2) * pow(&h3, 2)
        - &al1 * &al2 * pow(&h1, 2) * pow(&h2, 2) * &h3)
        / &den;

    let b4 = (pow(&al2, 2) * pow(&h2, 3) * &h3
        + int(12) * &al1 * &al31 * &h1 * &h2 * pow(&h3, 2)
        + int(4) * &al1 * &al2 * &h1 * pow(&h2, 2) * &h3
        + int(4) * &al2 * &al31 * pow(&h2, 2) * pow(&h3, 2))
        / &den_b4;

    let c = int(12) * (&al1 * &h1 + &al2 * &h2 + &al3 * &h3) / &den_c;

    if b4.is_zero() {
        return None;
    }
    let tilde_a = &a - &gam * &gam * &bet * &b3 * &b3 / &b4;
    let tilde_b = &b1 - &gam * &b2 * &b3 / &b4;
    let tilde_c = &c + &gam * &h2 * &h3 * &b2 * &b2 / &b4;
    let det = &a * &b4 - &gam * &gam * &bet * &b3 * &b3;
    Some(ExactConstants { a, b1, b2, b3, b4, c, tilde_a, tilde_b, tilde_c, det })
}

/// Exact `m = rho1 h1 + rho2 h2 + rho3 h3` for the unit-input check.
pub fn mass_per_length(spec: &CompositeSpec) -> f64 {
    let m = (0..3).fold(Q::zero(), |acc, i| acc + q(spec.rho[i]) * q(spec.h[i]));
    m.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_layers_closed_form() {
        let spec = CompositeSpec {
            length: 1.0,
            h: [1.0; 3],
            rho: [1.0; 3],
            alpha: [1.0; 3],
            g2: 1.0,
            gamma: 0.0,
            beta: 1.0,
            mu: 0.0,
            shear_damping: 0.0,
        };
        let e = mm_constants(&spec).unwrap();
        // inner = 9, den = 9 + 12 = 21, den_c = 21.
        assert_eq!(e.b2, int(18) / int(21));
        assert_eq!(e.c, int(36) / int(21));
        assert_eq!(e.b4, int(21) / int(21));
        assert_eq!(e.a, (int(2) + int(6 + 12) / int(21)) / int(12));
        assert_eq!(e.tilde_a, e.a);
        assert_eq!(mass_per_length(&spec), 3.0);
    }
}
