//! `key = value` run configuration with `#` comments.

use crate::control::LawKind;
use crate::error::{Error, Result};
use crate::materials::{CompositeSpec, Knob};
use crate::models::ModelKind;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

/// Inclusive evenly spaced sweep of one material knob.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sweep {
    pub knob: Knob,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Sweep {
    /// Parses `knob:lo:hi:count`.
    pub fn parse(s: &str) -> std::result::Result<Sweep, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [knob, lo, hi, count] = parts[..] else {
            return Err(format!("sweep must be knob:lo:hi:count, got {s:?}"));
        };
        let knob = Knob::parse(knob).ok_or_else(|| format!("unknown sweep knob {knob:?} (mu, G2, beta, gamma)"))?;
        let lo: f64 = lo.parse().map_err(|_| format!("bad sweep lower bound {lo:?}"))?;
        let hi: f64 = hi.parse().map_err(|_| format!("bad sweep upper bound {hi:?}"))?;
        let count: usize = count.parse().map_err(|_| format!("bad sweep count {count:?}"))?;
        if count == 0 || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(format!("sweep needs finite lo <= hi and count >= 1, got {s:?}"));
        }
        Ok(Sweep { knob, lo, hi, count })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let k = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.hi } else { self.lo + (self.hi - self.lo) * i as f64 / k })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feedback {
    Open,
    /// The model's default law.
    Default,
    Law(LawKind),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub spec: CompositeSpec,
    pub model: ModelKind,
    pub n: usize,
    pub t_end: f64,
    /// `None` selects the fastest-wave default step.
    pub dt: Option<f64>,
    pub stride: usize,
    pub feedback: Feedback,
    /// `None` means unit gains.
    pub gains: Option<Vec<f64>>,
    pub out: PathBuf,
    pub plot: bool,
    pub sweep: Option<Sweep>,
    /// Lowest modes mixed into the initial state; 0 means nodal random.
    pub init_modes: usize,
    pub seed: u64,
    pub resonance_knob: Knob,
    /// Absolute knob interval; `None` spans 1e-8 to 1e8 times the current value.
    pub resonance_interval: Option<(f64, f64)>,
    pub resonance_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            spec: CompositeSpec::default(),
            model: ModelKind::RnDynamic,
            n: 32,
            t_end: 1e-3,
            dt: None,
            stride: 1,
            feedback: Feedback::Default,
            gains: None,
            out: PathBuf::from("out"),
            plot: false,
            sweep: None,
            init_modes: 10,
            seed: 1,
            resonance_knob: Knob::Mu,
            resonance_interval: None,
            resonance_samples: 400,
        }
    }
}

pub const KEYS: &[&str] = &[
    "length",
    "layers.1.thickness",
    "layers.2.thickness",
    "layers.3.thickness",
    "layers.1.density",
    "layers.2.density",
    "layers.3.density",
    "layers.1.stiffness",
    "layers.2.stiffness",
    "layers.3.stiffness",
    "core.shear_modulus",
    "core.shear_damping",
    "piezo.gamma",
    "piezo.beta",
    "piezo.mu",
    "model",
    "grid.N",
    "time.T",
    "time.dt",
    "time.stride",
    "feedback.law",
    "feedback.gains",
    "output.dir",
    "output.plot",
    "sweep",
    "init.modes",
    "init.seed",
    "resonance.knob",
    "resonance.lo",
    "resonance.hi",
    "resonance.samples",
];

/// Where a value came from, for error messages.
#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    Line(usize),
    Flag,
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Origin::Line(l) => write!(f, "line {l}"),
            Origin::Flag => write!(f, "command line"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub origin: Origin,
}

fn config_err(key: &str, origin: &Origin, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key} ({origin}): {msg}"))
}

/// Splits the text into entries, rejecting unknown, duplicate and
/// value-less keys.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out = vec![];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(Error::Config(format!("line {line}: expected `key = value`, got {body:?}")));
        };
        let (key, value) = (key.trim(), value.trim());
        let origin = Origin::Line(line);
        if !KEYS.contains(&key) {
            return Err(config_err(key, &origin, "unknown key"));
        }
        if value.is_empty() {
            return Err(config_err(key, &origin, "missing value"));
        }
        if let Some(first) = seen.insert(key.to_string(), line) {
            return Err(config_err(key, &origin, format!("duplicate key, first set on line {first}")));
        }
        out.push(Entry { key: key.into(), value: value.into(), origin });
    }
    Ok(out)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    RunConfig::from_entries(&parse_entries(&text)?)
}

fn num<T: std::str::FromStr>(e: &Entry) -> Result<T> {
    e.value.parse().map_err(|_| config_err(&e.key, &e.origin, format!("cannot parse {:?}", e.value)))
}

fn flag(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        v => Err(config_err(&e.key, &e.origin, format!("expected true or false, got {v:?}"))),
    }
}

pub fn parse_gains(e: &Entry) -> Result<Vec<f64>> {
    e.value
        .split(',')
        .map(|g| g.trim().parse::<f64>().map_err(|_| config_err(&e.key, &e.origin, format!("bad gain {g:?}"))))
        .collect()
}

impl RunConfig {
    /// Applies entries in order over the defaults; later entries win.
    pub fn from_entries(entries: &[Entry]) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        let (mut lo, mut hi) = (None, None);
        for e in entries {
            let layer = |k: &str| -> Option<usize> {
                let rest = k.strip_prefix("layers.")?;
                Some(rest[..1].parse::<usize>().ok()? - 1)
            };
            match e.key.as_str() {
                "length" => c.spec.length = num(e)?,
                k if k.ends_with(".thickness") => c.spec.h[layer(k).unwrap()] = num(e)?,
                k if k.ends_with(".density") => c.spec.rho[layer(k).unwrap()] = num(e)?,
                k if k.ends_with(".stiffness") => c.spec.alpha[layer(k).unwrap()] = num(e)?,
                "core.shear_modulus" => c.spec.g2 = num(e)?,
                "core.shear_damping" => c.spec.shear_damping = num(e)?,
                "piezo.gamma" => c.spec.gamma = num(e)?,
                "piezo.beta" => c.spec.beta = num(e)?,
                "piezo.mu" => c.spec.mu = num(e)?,
                "model" => {
                    c.model = ModelKind::parse(&e.value).ok_or_else(|| {
                        config_err(&e.key, &e.origin, "expected full, rn-dynamic, rn-static, mm-dynamic or mm-static")
                    })?
                }
                "grid.N" => c.n = num(e)?,
                "time.T" => c.t_end = num(e)?,
                "time.dt" => c.dt = Some(num(e)?),
                "time.stride" => c.stride = num(e)?,
                "feedback.law" => {
                    c.feedback = match e.value.as_str() {
                        "none" => Feedback::Open,
                        "default" => Feedback::Default,
                        v => Feedback::Law(
                            LawKind::parse(v).ok_or_else(|| config_err(&e.key, &e.origin, format!("unknown law {v:?}")))?,
                        ),
                    }
                }
                "feedback.gains" => c.gains = Some(parse_gains(e)?),
                "output.dir" => c.out = PathBuf::from(&e.value),
                "output.plot" => c.plot = flag(e)?,
                "sweep" => c.sweep = Some(Sweep::parse(&e.value).map_err(|m| config_err(&e.key, &e.origin, m))?),
                "init.modes" => c.init_modes = num(e)?,
                "init.seed" => c.seed = num(e)?,
                "resonance.knob" => {
                    c.resonance_knob = Knob::parse(&e.value)
                        .ok_or_else(|| config_err(&e.key, &e.origin, format!("unknown knob {:?}", e.value)))?
                }
                "resonance.lo" => lo = Some(num::<f64>(e)?),
                "resonance.hi" => hi = Some(num::<f64>(e)?),
                "resonance.samples" => c.resonance_samples = num(e)?,
                k => return Err(config_err(k, &e.origin, "unknown key")),
            }
        }
        c.resonance_interval = match (lo, hi) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(Error::Config("resonance.lo and resonance.hi must be given together".into())),
        };
        if c.stride == 0 {
            return Err(Error::Config("time.stride must be at least 1".into()));
        }
        c.spec.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_thickness() {
        let c = RunConfig::from_entries(&parse_entries("layers.1.thickness = 0.02").unwrap()).unwrap();
        assert_eq!(c.spec.h[0], 0.02);
    }

    #[test]
    fn model_name() {
        let c = RunConfig::from_entries(&parse_entries("model = mm-dynamic # comment").unwrap()).unwrap();
        assert_eq!(c.model, ModelKind::MmDynamic);
    }

    #[test]
    fn duplicate_names_key_and_line() {
        let err = parse_entries("# header\ngrid.N = 8\n\ngrid.N = 16\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("grid.N") && msg.contains("line 4") && msg.contains("line 2"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_and_empty_keys() {
        let msg = parse_entries("grid.M = 3").unwrap_err().to_string();
        assert!(msg.contains("grid.M") && msg.contains("line 1"));
        let msg = parse_entries("time.T = 1\ntime.dt =").unwrap_err().to_string();
        assert!(msg.contains("time.dt") && msg.contains("line 2") && msg.contains("missing"));
    }

    #[test]
    fn sweep_spec() {
        let s = Sweep::parse("mu:1e-6:3e-6:3").unwrap();
        assert_eq!(s.knob, Knob::Mu);
        let p = s.points();
        assert_eq!((p[0], p[2]), (1e-6, 3e-6));
        assert!((p[1] - 2e-6).abs() < 1e-20);
        assert!(Sweep::parse("mu:2:1:3").is_err());
        assert!(Sweep::parse("height:1:2:3").is_err());
    }

    #[test]
    fn bad_number_is_config_error() {
        let err = RunConfig::from_entries(&parse_entries("piezo.beta = lots").unwrap()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("piezo.beta"));
    }
}
