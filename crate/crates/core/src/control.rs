//! Static boundary feedback `u_i = -k_i y_i` on the observations at x = L.
//!
//! Every channel enters through a load functional `b_i` and reads an output
//! functional `c_i` of the velocities; closing the loop adds `k_i b_i c_i^T`
//! to the velocity damping. For collocated channels `c_i = b_i`, which makes
//! the energy rate `-sum k_i y_i^2`.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::models::{ActiveChannel, DiscreteSystem, ModelKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LawKind {
    /// Tip velocities, tip current and tip angular velocity (4 channels).
    RnDynamic,
    /// Electrostatic R-N with all four controllers.
    RnStaticFull,
    /// Electrostatic R-N without the transverse force controller.
    RnStaticReduced,
    /// Longitudinal velocity and current only, for the w = 0 restriction.
    InertialSliding,
    /// Induced current at the tip.
    MmDynamic,
    /// Voltage from the smoothed tip angular velocity (P_xi w_x)(L).
    MmStaticAngular,
    /// Voltage from the collocated output of the voltage load.
    MmStaticCollocated,
}

impl LawKind {
    pub fn channels(self) -> &'static [&'static str] {
        match self {
            LawKind::RnDynamic | LawKind::RnStaticFull => &["g1", "V", "M", "g"],
            LawKind::RnStaticReduced => &["g1", "V", "M"],
            LawKind::InertialSliding => &["g1", "V"],
            LawKind::MmDynamic | LawKind::MmStaticAngular | LawKind::MmStaticCollocated => &["V"],
        }
    }

    /// Default law for an assembled model.
    pub fn default_for(kind: ModelKind) -> LawKind {
        match kind {
            ModelKind::Full | ModelKind::RnDynamic => LawKind::RnDynamic,
            ModelKind::RnStatic => LawKind::RnStaticReduced,
            ModelKind::MmDynamic => LawKind::MmDynamic,
            ModelKind::MmStatic => LawKind::MmStaticAngular,
        }
    }

    pub fn parse(s: &str) -> Option<LawKind> {
        match s {
            "rn-dynamic" => Some(LawKind::RnDynamic),
            "rn-static-full" => Some(LawKind::RnStaticFull),
            "rn-static-reduced" => Some(LawKind::RnStaticReduced),
            "inertial-sliding" => Some(LawKind::InertialSliding),
            "mm-dynamic" => Some(LawKind::MmDynamic),
            "mm-static-angular" => Some(LawKind::MmStaticAngular),
            "mm-static-collocated" => Some(LawKind::MmStaticCollocated),
            _ => None,
        }
    }

    fn accepts(self, sys: &DiscreteSystem) -> bool {
        let has_w = sys.layout.block("w").is_some();
        match self {
            LawKind::RnDynamic => matches!(sys.kind, ModelKind::RnDynamic | ModelKind::Full) && has_w,
            LawKind::RnStaticFull | LawKind::RnStaticReduced => sys.kind == ModelKind::RnStatic,
            LawKind::InertialSliding => sys.kind == ModelKind::RnDynamic && !has_w,
            LawKind::MmDynamic => sys.kind == ModelKind::MmDynamic,
            LawKind::MmStaticAngular | LawKind::MmStaticCollocated => sys.kind == ModelKind::MmStatic,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackLaw {
    pub kind: LawKind,
    pub gains: Vec<f64>,
}

impl FeedbackLaw {
    pub fn new(kind: LawKind, gains: Vec<f64>) -> Result<FeedbackLaw> {
        let want = kind.channels().len();
        if gains.len() != want {
            return Err(Error::Validation(format!(
                "law expects {want} gains ({}), got {}",
                kind.channels().join(","),
                gains.len()
            )));
        }
        if let Some(k) = gains.iter().find(|k| !(**k >= 0.0 && k.is_finite())) {
            return Err(Error::Validation(format!("gains must be nonnegative, got {k}")));
        }
        Ok(FeedbackLaw { kind, gains })
    }

    pub fn unit(kind: LawKind) -> FeedbackLaw {
        FeedbackLaw { kind, gains: vec![1.0; kind.channels().len()] }
    }
}

/// Relative tolerance on the most negative eigenvalue of the symmetrized
/// feedback damping.
pub const DISSIPATIVITY_TOL: f64 = 1e-10;

pub fn close_loop(sys: &DiscreteSystem, law: &FeedbackLaw) -> Result<DiscreteSystem> {
    if !law.kind.accepts(sys) {
        return Err(Error::Validation(format!("law {:?} does not apply to {}", law.kind, sys.kind.name())));
    }
    FeedbackLaw::new(law.kind, law.gains.clone())?;
    let mut out = sys.clone();
    let mut added = vec![];
    for (&name, &gain) in law.kind.channels().iter().zip(&law.gains) {
        let ch = sys
            .channel(name)
            .ok_or_else(|| Error::Validation(format!("system has no channel {name}")))?;
        let output = if law.kind == LawKind::MmStaticAngular {
            sys.aux_outputs
                .iter()
                .find(|(n, _)| *n == "angular")
                .map(|(_, r)| r.clone())
                .ok_or_else(|| Error::Validation("system lacks the angular output".into()))?
        } else {
            ch.load.clone()
        };
        if gain != 0.0 {
            linalg::add_outer(&mut out.damping, gain, &ch.load, &output);
            added.push((gain, ch.load.clone(), output.clone()));
        }
        out.active.push(ActiveChannel { name, gain, input: ch.load.clone(), output });
    }
    let (lo, hi) = feedback_definiteness(&added)?;
    if lo < -DISSIPATIVITY_TOL * hi.max(0.0) {
        return Err(Error::Assembly(format!(
            "feedback is not dissipative: symmetric part has eigenvalue {lo} (largest {hi})"
        )));
    }
    Ok(out)
}

/// Extreme eigenvalues of the symmetric part of `sum k b c^T`, computed on
/// the span of the b's and c's.
pub fn feedback_definiteness(terms: &[(f64, Vec<f64>, Vec<f64>)]) -> Result<(f64, f64)> {
    if terms.is_empty() {
        return Ok((0.0, 0.0));
    }
    let n = terms[0].1.len();
    let m = terms.len();
    let u = faer::Mat::from_fn(n, 2 * m, |i, j| if j < m { terms[j].1[i] } else { terms[j - m].2[i] });
    let r = u.qr().thin_R().to_owned();
    let mut w = linalg::zeros(2 * m, 2 * m);
    for (i, (k, _, _)) in terms.iter().enumerate() {
        w[(i, m + i)] = 0.5 * k;
        w[(m + i, i)] = 0.5 * k;
    }
    let small = &r * &w * r.transpose();
    let e = linalg::sym_eigenvalues(&linalg::symmetrize(&small))?;
    Ok((e[0].min(0.0), e[e.len() - 1]))
}

/// Observation readings for the active channels (or, on an open-loop
/// system, the collocated readings of every channel).
pub fn observe(sys: &DiscreteSystem, x: &[f64]) -> Result<Vec<(&'static str, f64)>> {
    let n = sys.n_pos();
    if x.len() != 2 * n {
        return Err(Error::Validation(format!("state has length {}, expected {}", x.len(), 2 * n)));
    }
    let vel = &x[n..];
    Ok(if sys.active.is_empty() {
        sys.channels.iter().map(|c| (c.name, linalg::dot(&c.load, vel))).collect()
    } else {
        sys.active.iter().map(|a| (a.name, linalg::dot(&a.output, vel))).collect()
    })
}

/// Rate of change of the energy, `-q'^T D q'`.
pub fn energy_rate(sys: &DiscreteSystem, x: &[f64]) -> f64 {
    let n = sys.n_pos();
    -linalg::quad(&sys.damping, &x[n..])
}

/// `sum k_i (b_i . q')(c_i . q')`, the feedback part of the dissipation.
pub fn feedback_power(sys: &DiscreteSystem, x: &[f64]) -> f64 {
    let vel = &x[sys.n_pos()..];
    sys.active
        .iter()
        .map(|a| a.gain * linalg::dot(&a.input, vel) * linalg::dot(&a.output, vel))
        .sum()
}

pub fn damping_delta(closed: &DiscreteSystem, open: &DiscreteSystem) -> Matrix {
    &closed.damping - &open.damping
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::CompositeSpec;
    use crate::models::assemble;
    use crate::operators::Grid;

    fn sys(kind: ModelKind) -> DiscreteSystem {
        let spec = CompositeSpec::default();
        assemble(kind, &spec, &Grid::new(1.0, 8).unwrap()).unwrap()
    }

    #[test]
    fn zero_gains_leave_generator_unchanged() {
        let open = sys(ModelKind::RnStatic);
        let closed = close_loop(&open, &FeedbackLaw::new(LawKind::RnStaticReduced, vec![0.0; 3]).unwrap()).unwrap();
        assert!(open.generator() == closed.generator());
    }

    #[test]
    fn negative_gain_rejected() {
        assert!(FeedbackLaw::new(LawKind::MmDynamic, vec![-1.0]).is_err());
        assert!(FeedbackLaw::new(LawKind::MmDynamic, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn law_must_match_model() {
        let open = sys(ModelKind::MmDynamic);
        assert!(close_loop(&open, &FeedbackLaw::unit(LawKind::RnDynamic)).is_err());
    }

    #[test]
    fn tip_hat_reads_its_peak() {
        let open = sys(ModelKind::RnDynamic);
        let mut x = vec![0.0; open.dim()];
        let b = open.layout.block("v1").unwrap();
        x[open.n_pos() + b.offset + b.len - 1] = 2.0;
        let obs = observe(&open, &x).unwrap();
        assert_eq!(obs[0], ("g1", 2.0));
        assert!(obs[1..].iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn rank_one_per_channel() {
        let open = sys(ModelKind::RnDynamic);
        let closed = close_loop(&open, &FeedbackLaw::unit(LawKind::RnDynamic)).unwrap();
        let delta = damping_delta(&closed, &open);
        let sv = linalg::singular_values(&delta).unwrap();
        let rank = sv.iter().filter(|s| **s > 1e-12 * sv[0]).count();
        assert_eq!(rank, 4);
    }

    #[test]
    fn angular_law_is_nearly_collocated_for_default_spec() {
        let open = sys(ModelKind::MmStatic);
        assert!(close_loop(&open, &FeedbackLaw::unit(LawKind::MmStaticAngular)).is_ok());
    }

    #[test]
    fn non_collocated_indefinite_feedback_rejected() {
        let b = vec![1.0, 0.0];
        let c = vec![0.0, 1.0];
        let (lo, hi) = feedback_definiteness(&[(1.0, b, c)]).unwrap();
        assert!((lo + 0.5).abs() < 1e-14 && (hi - 0.5).abs() < 1e-14);
    }
}
