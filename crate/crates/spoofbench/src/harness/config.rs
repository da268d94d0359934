//! Experiment configuration: a small `[section] key = value` file format, its
//! validation into a typed [`ExperimentConfig`], and a stable content hash.
//!
//! The format is deliberately plain so golden files diff cleanly:
//!
//! ```text
//! schema_version = 1
//!
//! [plant]
//! kind = scalar        # scalar | vector | nonlinear
//! a = 1.0
//! noise_var = 1.0
//! init_var = 1.0
//!
//! [controller]
//! kind = linear        # zero | linear | linear_matrix | nonlinear
//! omega = 0.88
//! privacy = none       # none | iid_gaussian | iid_gaussian_vector | recursive
//!
//! [attack]
//! kind = learn_scalar  # none | learn_scalar | learn_vector | learn_gp | replay
//! window = 400
//! malicious = destabilize
//!
//! [detector]
//! kind = variance      # variance | covariance
//! delta = 0.1
//! horizon = 800
//!
//! [run]
//! trials = 500
//! seed = 12648430
//! ```
//!
//! `#` starts a comment anywhere on a line (values therefore cannot contain `#`).
//! Matrices are written row-major: rows separated by `;`, entries by `,`
//! (e.g. `A = 1,2;3,4`). Optional sections: `[gain_prior]`, `[sweep]`, `[bounds]`,
//! `[lq]`. Sweep axes name keys as `section.key` and re-apply them per grid point.

use crate::attacker::GpKernel;
use crate::controller::{
    nonlinear_policy, ControlPolicy, ControllerError, LQWeights, PrivacySignalSpec,
};
use crate::core::{CoreError, SymmetricMatrix};
use crate::plant::{
    nonlinear_plant, GainPrior, NonlinearPlant, PlantError, ScalarPlant, VectorPlant,
};
use nalgebra::DMatrix;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax error at line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in section [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("missing required key `{key}` in section [{section}]")]
    MissingKey { section: String, key: String },
    #[error("bad value for `{key}` in section [{section}]: {msg}")]
    BadValue { section: String, key: String, msg: String },
    #[error("unsupported schema_version `{0}` (this build reads version 1)")]
    SchemaVersion(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Core(#[from] CoreError),
}

// ---------------------------------------------------------------------------
// Raw key/value layer
// ---------------------------------------------------------------------------

/// Parsed but untyped config: sections of key → value strings, plus top-level keys.
/// Sweeps clone this, overwrite one key per grid point, and re-validate.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    pub top: BTreeMap<String, String>,
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RawConfig::default();
        let mut current: Option<String> = None;
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: line_no,
                    msg: format!("unterminated section header `{line}`"),
                })?;
                let name = name.trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(ConfigError::Syntax {
                        line: line_no,
                        msg: format!("bad section name `{name}`"),
                    });
                }
                cfg.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: "empty key".into(),
                });
            }
            let map = match &current {
                Some(sec) => cfg.sections.get_mut(sec).expect("section entry exists"),
                None => &mut cfg.top,
            };
            if map.insert(key.clone(), value).is_some() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Overwrite one value by dotted key (`section.key`), as sweep axes do.
    pub fn set(&mut self, dotted: &str, value: &str) -> Result<(), ConfigError> {
        let (section, key) = dotted.split_once('.').ok_or_else(|| {
            ConfigError::Invalid(format!("axis key `{dotted}` must be `section.key`"))
        })?;
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// FNV-1a 64-bit hash of the canonical (comment-free, sorted) key/value stream.
    pub fn hash_hex(&self) -> String {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
        };
        for (k, v) in &self.top {
            feed(k.as_bytes());
            feed(b"=");
            feed(v.as_bytes());
            feed(b"\n");
        }
        for (sec, map) in &self.sections {
            for (k, v) in map {
                feed(sec.as_bytes());
                feed(b".");
                feed(k.as_bytes());
                feed(b"=");
                feed(v.as_bytes());
                feed(b"\n");
            }
        }
        format!("{h:016x}")
    }
}

// ---------------------------------------------------------------------------
// Typed layer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum PlantSpec {
    Scalar(ScalarPlant),
    Vector(VectorPlant),
    Nonlinear(NonlinearPlant),
}

impl PlantSpec {
    pub fn scalar_noise_var(&self) -> Option<f64> {
        match self {
            PlantSpec::Scalar(p) => Some(p.noise_var),
            PlantSpec::Nonlinear(p) => Some(p.noise_var),
            PlantSpec::Vector(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttackKind {
    None,
    LearnScalar,
    LearnVector,
    LearnGp,
    Replay,
}

/// Actuation rule once the attacker owns the plant input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaliciousSpec {
    Zero,
    /// `ũ = μ·x` with the configured gain.
    Gain(f64),
    /// `ũ = μ·x` with μ chosen per trial from the sampled plant gain
    /// (see [`crate::attacker::default_destabilizing_gain`]).
    DefaultGain,
}

#[derive(Clone, Copy, Debug)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Learning-phase length L (or the recording length for replay). 0 when `kind` is None.
    pub window: usize,
    pub malicious: MaliciousSpec,
    pub gp_kernel: GpKernel,
}

impl AttackSpec {
    pub fn active(&self) -> bool {
        self.kind != AttackKind::None
    }
}

#[derive(Clone, Copy, Debug)]
pub enum DetectorKind {
    Variance { delta: f64 },
    Covariance { gamma: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    /// Residual-window length T; the trial simulates through step T+1.
    pub horizon: usize,
}

#[derive(Clone, Debug)]
pub struct SweepAxis {
    pub key: String,
    /// Values kept as written (re-inserted verbatim) alongside their numeric reading.
    pub values: Vec<(String, f64)>,
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub outer: Option<SweepAxis>,
}

/// Optional analytic-bound parameters; each column is emitted only when its
/// parameters are present (see `docs/BOUNDS.md`).
#[derive(Clone, Copy, Debug, Default)]
pub struct BoundsSpec {
    pub beta: Option<f64>,
    pub prior_radius: Option<f64>,
    pub zeta: Option<f64>,
    pub rho: Option<f64>,
    pub chi: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub plant: PlantSpec,
    pub gain_prior: GainPrior,
    pub policy: ControlPolicy,
    pub privacy: PrivacySignalSpec,
    pub attack: AttackSpec,
    pub detector: DetectorSpec,
    pub trials: usize,
    pub seed: u64,
    pub sweep: Option<SweepSpec>,
    pub bounds: BoundsSpec,
    pub lq: Option<LQWeights>,
    /// Hash of the raw config this was built from (pre-sweep-override for grid points).
    pub hash: String,
    /// Non-fatal validation notes (e.g. a marginal watermark strength).
    pub warnings: Vec<String>,
}

// Helper: typed access to one section with unknown-key detection.
struct Section<'a> {
    name: &'a str,
    map: &'a BTreeMap<String, String>,
    allowed: &'a [&'a str],
}

impl<'a> Section<'a> {
    fn check_unknown(&self) -> Result<(), ConfigError> {
        for key in self.map.keys() {
            if !self.allowed.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey {
                    section: self.name.to_string(),
                    key: key.clone(),
                });
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&'a str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&'a str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::MissingKey {
            section: self.name.to_string(),
            key: key.to_string(),
        })
    }

    fn bad(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::BadValue {
            section: self.name.to_string(),
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let s = self.require(key)?;
        s.parse::<f64>().map_err(|e| self.bad(key, format!("`{s}` is not a number: {e}")))
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => Ok(Some(
                s.parse::<f64>()
                    .map_err(|e| self.bad(key, format!("`{s}` is not a number: {e}")))?,
            )),
        }
    }

    fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let s = self.require(key)?;
        s.parse::<usize>()
            .map_err(|e| self.bad(key, format!("`{s}` is not a nonnegative integer: {e}")))
    }

    fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        let s = self.require(key)?;
        s.parse::<u64>().map_err(|e| self.bad(key, format!("`{s}` is not a u64: {e}")))
    }

    fn matrix(&self, key: &str) -> Result<DMatrix<f64>, ConfigError> {
        let s = self.require(key)?;
        parse_matrix(s).map_err(|msg| self.bad(key, msg))
    }
}

/// Row-major matrix literal: rows split on `;`, entries on `,`.
fn parse_matrix(s: &str) -> Result<DMatrix<f64>, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for row in s.split(';') {
        let entries: Result<Vec<f64>, _> = row
            .split(',')
            .map(|e| e.trim().parse::<f64>().map_err(|err| format!("`{}`: {err}", e.trim())))
            .collect();
        rows.push(entries?);
    }
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if ncols == 0 {
        return Err("empty matrix".into());
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged rows".into());
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(nrows, ncols, &flat))
}

fn parse_value_list(s: &str) -> Result<Vec<(String, f64)>, String> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        let v = item.parse::<f64>().map_err(|e| format!("`{item}`: {e}"))?;
        out.push((item.to_string(), v));
    }
    if out.is_empty() {
        return Err("empty value list".into());
    }
    Ok(out)
}

const KNOWN_SECTIONS: &[&str] = &[
    "plant",
    "gain_prior",
    "controller",
    "attack",
    "detector",
    "run",
    "sweep",
    "bounds",
    "lq",
];

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::from_raw(&RawConfig::from_file(path)?)
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        // top level
        for key in raw.top.keys() {
            if key != "schema_version" {
                return Err(ConfigError::UnknownKey {
                    section: "<top>".into(),
                    key: key.clone(),
                });
            }
        }
        let version = raw.top.get("schema_version").ok_or(ConfigError::MissingKey {
            section: "<top>".into(),
            key: "schema_version".into(),
        })?;
        if version.parse::<u64>() != Ok(SCHEMA_VERSION) {
            return Err(ConfigError::SchemaVersion(version.clone()));
        }
        for name in raw.sections.keys() {
            if !KNOWN_SECTIONS.contains(&name.as_str()) {
                return Err(ConfigError::UnknownSection(name.clone()));
            }
        }
        let empty = BTreeMap::new();
        let section = |name: &'static str, allowed: &'static [&'static str]| Section {
            name,
            map: raw.sections.get(name).unwrap_or(&empty),
            allowed,
        };
        let mut warnings = Vec::new();

        // [plant]
        let plant_s = section(
            "plant",
            &["kind", "a", "noise_var", "init_var", "A", "noise_cov", "init_cov", "f", "smoothness"],
        );
        plant_s.check_unknown()?;
        if raw.sections.get("plant").is_none() {
            return Err(ConfigError::MissingKey {
                section: "plant".into(),
                key: "kind".into(),
            });
        }
        let plant = match plant_s.require("kind")? {
            "scalar" => PlantSpec::Scalar(ScalarPlant::new(
                plant_s.f64("a")?,
                plant_s.f64("noise_var")?,
                plant_s.f64("init_var")?,
            )?),
            "vector" => {
                let a = plant_s.matrix("A")?;
                let noise = SymmetricMatrix::new(plant_s.matrix("noise_cov")?)?;
                let init = SymmetricMatrix::new(plant_s.matrix("init_cov")?)?;
                PlantSpec::Vector(VectorPlant::new(a, noise, init)?)
            }
            "nonlinear" => PlantSpec::Nonlinear(nonlinear_plant(
                plant_s.require("f")?,
                plant_s.f64("smoothness")?,
                plant_s.f64("noise_var")?,
                plant_s.f64("init_var")?,
            )?),
            other => return Err(plant_s.bad("kind", format!("unknown plant kind `{other}`"))),
        };

        // [gain_prior]
        let prior_s = section("gain_prior", &["kind", "radius"]);
        prior_s.check_unknown()?;
        let gain_prior = match prior_s.get("kind") {
            None | Some("fixed") => match &plant {
                PlantSpec::Scalar(p) => GainPrior::Fixed(p.a),
                _ => GainPrior::Fixed(0.0), // unused off the scalar path
            },
            Some("uniform") => {
                if !matches!(plant, PlantSpec::Scalar(_)) {
                    return Err(ConfigError::Invalid(
                        "a uniform gain prior requires a scalar plant".into(),
                    ));
                }
                let radius = prior_s.f64("radius")?;
                if !(radius > 0.0) {
                    return Err(prior_s.bad("radius", "must be > 0"));
                }
                GainPrior::UniformSymmetric { radius }
            }
            Some(other) => return Err(prior_s.bad("kind", format!("unknown prior kind `{other}`"))),
        };

        // [controller]
        let ctl_s = section(
            "controller",
            &["kind", "omega", "K", "f", "privacy", "privacy_var", "privacy_cov", "eta"],
        );
        ctl_s.check_unknown()?;
        let policy = match ctl_s.require("kind")? {
            "zero" => ControlPolicy::Zero,
            "linear" => ControlPolicy::LinearGain { omega: ctl_s.f64("omega")? },
            "linear_matrix" => ControlPolicy::LinearGainMatrix { K: ctl_s.matrix("K")? },
            "nonlinear" => nonlinear_policy(ctl_s.require("f")?)?,
            other => return Err(ctl_s.bad("kind", format!("unknown controller kind `{other}`"))),
        };
        let privacy = match ctl_s.get("privacy").unwrap_or("none") {
            "none" => PrivacySignalSpec::None,
            "iid_gaussian" => PrivacySignalSpec::IidGaussian { var: ctl_s.f64("privacy_var")? },
            "iid_gaussian_vector" => PrivacySignalSpec::IidGaussianVector {
                cov: SymmetricMatrix::new(ctl_s.matrix("privacy_cov")?)?,
            },
            "recursive" => PrivacySignalSpec::Recursive { eta: ctl_s.f64("eta")? },
            other => return Err(ctl_s.bad("privacy", format!("unknown privacy kind `{other}`"))),
        };
        if privacy.validate()? {
            warnings.push(format!(
                "privacy signal strength is in the marginal regime ({:?}); the power-deficit \
                 condition holds but with reduced margin",
                privacy
            ));
        }

        // [attack]
        let atk_s = section(
            "attack",
            &["kind", "window", "malicious", "mu", "gp_signal_var", "gp_length_scale", "gp_white_var"],
        );
        atk_s.check_unknown()?;
        let attack_kind = match atk_s.get("kind").unwrap_or("none") {
            "none" => AttackKind::None,
            "learn_scalar" => AttackKind::LearnScalar,
            "learn_vector" => AttackKind::LearnVector,
            "learn_gp" => AttackKind::LearnGp,
            "replay" => AttackKind::Replay,
            other => return Err(atk_s.bad("kind", format!("unknown attack kind `{other}`"))),
        };
        let window = if attack_kind == AttackKind::None {
            0
        } else {
            atk_s.usize("window")?
        };
        let malicious = match (atk_s.get("malicious"), atk_s.f64_opt("mu")?) {
            (Some("zero"), None) => MaliciousSpec::Zero,
            (Some("zero"), Some(_)) => {
                return Err(atk_s.bad("mu", "mu is meaningless for the zero actuation rule"))
            }
            (Some("destabilize") | None, Some(mu)) => MaliciousSpec::Gain(mu),
            (Some("destabilize") | None, None) => MaliciousSpec::DefaultGain,
            (Some(other), _) => {
                return Err(atk_s.bad("malicious", format!("unknown actuation rule `{other}`")))
            }
        };
        let mut gp_kernel = GpKernel::default();
        if let Some(v) = atk_s.f64_opt("gp_signal_var")? {
            gp_kernel.signal_var = v;
        }
        if let Some(v) = atk_s.f64_opt("gp_length_scale")? {
            gp_kernel.length_scale = v;
        }
        if let Some(v) = atk_s.f64_opt("gp_white_var")? {
            gp_kernel.white_var = v;
        }
        let attack = AttackSpec { kind: attack_kind, window, malicious, gp_kernel };

        // [detector]
        let det_s = section("detector", &["kind", "delta", "gamma", "horizon"]);
        det_s.check_unknown()?;
        let det_kind = match det_s.require("kind")? {
            "variance" => DetectorKind::Variance { delta: det_s.f64("delta")? },
            "covariance" => DetectorKind::Covariance { gamma: det_s.f64("gamma")? },
            other => return Err(det_s.bad("kind", format!("unknown detector kind `{other}`"))),
        };
        let detector = DetectorSpec { kind: det_kind, horizon: det_s.usize("horizon")? };

        // [run]
        let run_s = section("run", &["trials", "seed"]);
        run_s.check_unknown()?;
        let trials = run_s.usize("trials")?;
        let seed = run_s.u64("seed")?;

        // [sweep]
        let sweep_s = section("sweep", &["axis", "values", "outer_axis", "outer_values"]);
        sweep_s.check_unknown()?;
        let sweep = if raw.sections.contains_key("sweep") {
            let axis = SweepAxis {
                key: sweep_s.require("axis")?.to_string(),
                values: parse_value_list(sweep_s.require("values")?)
                    .map_err(|m| sweep_s.bad("values", m))?,
            };
            let outer = match (sweep_s.get("outer_axis"), sweep_s.get("outer_values")) {
                (None, None) => None,
                (Some(k), Some(v)) => Some(SweepAxis {
                    key: k.to_string(),
                    values: parse_value_list(v).map_err(|m| sweep_s.bad("outer_values", m))?,
                }),
                _ => {
                    return Err(ConfigError::Invalid(
                        "outer_axis and outer_values must be given together".into(),
                    ))
                }
            };
            Some(SweepSpec { axis, outer })
        } else {
            None
        };

        // [bounds]
        let bounds_s = section("bounds", &["beta", "prior_radius", "zeta", "rho", "chi"]);
        bounds_s.check_unknown()?;
        let bounds = BoundsSpec {
            beta: bounds_s.f64_opt("beta")?,
            prior_radius: bounds_s.f64_opt("prior_radius")?,
            zeta: bounds_s.f64_opt("zeta")?,
            rho: bounds_s.f64_opt("rho")?,
            chi: bounds_s.f64_opt("chi")?,
        };

        // [lq]
        let lq_s = section("lq", &["q", "r"]);
        lq_s.check_unknown()?;
        let lq = if raw.sections.contains_key("lq") {
            Some(LQWeights::new(lq_s.f64("q")?, lq_s.f64("r")?)?)
        } else {
            None
        };

        let cfg = ExperimentConfig {
            plant,
            gain_prior,
            policy,
            privacy,
            attack,
            detector,
            trials,
            seed,
            sweep,
            bounds,
            lq,
            hash: raw.hash_hex(),
            warnings,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-section consistency rules.
    fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.trials == 0 {
            return fail("trials must be ≥ 1".into());
        }
        let t = self.detector.horizon;
        if t == 0 {
            return fail("detector horizon must be ≥ 1".into());
        }

        // attack/plant pairing and window sanity
        match self.attack.kind {
            AttackKind::None => {}
            AttackKind::Replay => {
                if self.attack.window == 0 {
                    return fail("replay recording length must be ≥ 1".into());
                }
                if self.attack.window >= t {
                    return fail(format!(
                        "learning window {} must end before the detection horizon {t}",
                        self.attack.window
                    ));
                }
            }
            AttackKind::LearnScalar | AttackKind::LearnVector | AttackKind::LearnGp => {
                if self.attack.window < 2 {
                    return fail(
                        "model-learning attacks need window ≥ 2 (the regression window \
                         holds window−1 transitions)"
                            .into(),
                    );
                }
                if self.attack.window >= t {
                    return fail(format!(
                        "learning window {} must end before the detection horizon {t}",
                        self.attack.window
                    ));
                }
                let ok = matches!(
                    (self.attack.kind, &self.plant),
                    (AttackKind::LearnScalar, PlantSpec::Scalar(_))
                        | (AttackKind::LearnVector, PlantSpec::Vector(_))
                        | (AttackKind::LearnGp, PlantSpec::Nonlinear(_))
                );
                if !ok {
                    return fail(format!(
                        "attack kind {:?} does not fit this plant kind",
                        self.attack.kind
                    ));
                }
            }
        }

        // detector/plant pairing
        match (&self.detector.kind, &self.plant) {
            (DetectorKind::Variance { .. }, PlantSpec::Scalar(_) | PlantSpec::Nonlinear(_)) => {}
            (DetectorKind::Covariance { .. }, PlantSpec::Vector(_)) => {}
            (DetectorKind::Variance { .. }, PlantSpec::Vector(_)) => {
                return fail("vector plants use the covariance detector".into())
            }
            (DetectorKind::Covariance { .. }, _) => {
                return fail("the covariance detector requires a vector plant".into())
            }
        }
        match self.detector.kind {
            DetectorKind::Variance { delta } if !(delta > 0.0) => {
                return fail(format!("detector delta {delta} must be > 0"))
            }
            DetectorKind::Covariance { gamma } if !(gamma > 0.0) => {
                return fail(format!("detector gamma {gamma} must be > 0"))
            }
            _ => {}
        }

        // controller/plant pairing
        match (&self.policy, &self.plant) {
            (ControlPolicy::LinearGainMatrix { .. }, PlantSpec::Vector(_)) => {}
            (ControlPolicy::LinearGainMatrix { .. }, _) => {
                return fail("matrix gains require a vector plant".into())
            }
            (ControlPolicy::NonlinearNamed { .. }, PlantSpec::Vector(_)) => {
                return fail("named nonlinear policies are scalar-only".into())
            }
            _ => {}
        }
        if let (ControlPolicy::LinearGainMatrix { K }, PlantSpec::Vector(p)) =
            (&self.policy, &self.plant)
        {
            if K.nrows() != p.dim() || K.ncols() != p.dim() {
                return fail(format!(
                    "gain matrix is {}×{} but the plant has dimension {}",
                    K.nrows(),
                    K.ncols(),
                    p.dim()
                ));
            }
        }

        // privacy/plant pairing: scalar kinds ride the twin recursion (needs a scalar
        // gain); the vector kind is composed directly on the observation.
        match (&self.privacy, &self.plant) {
            (PrivacySignalSpec::None, _) => {}
            (
                PrivacySignalSpec::IidGaussian { .. } | PrivacySignalSpec::Recursive { .. },
                PlantSpec::Scalar(_),
            ) => {}
            (PrivacySignalSpec::IidGaussianVector { cov }, PlantSpec::Vector(p)) => {
                if cov.dim() != p.dim() {
                    return fail(format!(
                        "privacy covariance has dimension {} but the plant has {}",
                        cov.dim(),
                        p.dim()
                    ));
                }
            }
            (PrivacySignalSpec::IidGaussianVector { .. }, _) => {
                return fail("vector privacy signals require a vector plant".into())
            }
            (_, _) => {
                return fail("scalar privacy signals require a scalar plant".into())
            }
        }

        // gain prior scope
        if matches!(self.gain_prior, GainPrior::UniformSymmetric { .. })
            && !matches!(self.plant, PlantSpec::Scalar(_))
        {
            return fail("a uniform gain prior requires a scalar plant".into());
        }

        // LQ tracking is defined over scalar state/control traces
        if self.lq.is_some() && matches!(self.plant, PlantSpec::Vector(_)) {
            return fail("LQ cost tracking is defined for scalar-state plants only".into());
        }

        // analytic-bound parameters, where present, must make sense
        for (name, v) in [
            ("beta", self.bounds.beta),
            ("prior_radius", self.bounds.prior_radius),
            ("zeta", self.bounds.zeta),
            ("chi", self.bounds.chi),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return fail(format!("[bounds] {name} = {v} must be > 0"));
                }
            }
        }
        if let Some(rho) = self.bounds.rho {
            if !(rho > 0.0 && rho <= 1.0) {
                return fail(format!("[bounds] rho = {rho} must lie in (0, 1]"));
            }
        }

        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
schema_version = 1

[plant]
kind = scalar
a = 1.0
noise_var = 1.0
init_var = 1.0

[controller]
kind = linear
omega = 0.88

[attack]
kind = learn_scalar
window = 400

[detector]
kind = variance
delta = 0.1
horizon = 800

[run]
trials = 500
seed = 12648430
";

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_text(MINIMAL).unwrap();
        assert!(matches!(cfg.plant, PlantSpec::Scalar(p) if p.a == 1.0));
        assert!(matches!(cfg.policy, ControlPolicy::LinearGain { omega } if omega == 0.88));
        assert_eq!(cfg.attack.kind, AttackKind::LearnScalar);
        assert_eq!(cfg.attack.window, 400);
        assert!(matches!(cfg.detector.kind, DetectorKind::Variance { delta } if delta == 0.1));
        assert_eq!(cfg.detector.horizon, 800);
        assert_eq!(cfg.trials, 500);
        assert_eq!(cfg.seed, 0xC0FFEE);
        assert!(cfg.warnings.is_empty());
        assert_eq!(cfg.hash.len(), 16);
    }

    #[test]
    fn comments_and_whitespace_are_ignored_by_the_hash() {
        let with_noise = format!("# leading comment\n\n{MINIMAL}\n# trailing\n");
        let a = RawConfig::parse(MINIMAL).unwrap().hash_hex();
        let b = RawConfig::parse(&with_noise).unwrap().hash_hex();
        assert_eq!(a, b);
        // changing any value changes the hash
        let mut raw = RawConfig::parse(MINIMAL).unwrap();
        raw.set("run.seed", "7").unwrap();
        assert_ne!(raw.hash_hex(), a);
    }

    #[test]
    fn unknown_key_and_section_name_the_offender() {
        let text = MINIMAL.replace("omega = 0.88", "omega = 0.88\nomega_typo = 3");
        let err = ExperimentConfig::from_text(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("omega_typo") && msg.contains("controller"), "{msg}");

        let text = format!("{MINIMAL}\n[controler]\nkind = linear\n");
        let err = ExperimentConfig::from_text(&text).unwrap_err();
        assert!(err.to_string().contains("controler"), "{err}");
    }

    #[test]
    fn missing_key_names_key_and_section() {
        let text = MINIMAL.replace("horizon = 800\n", "");
        let err = ExperimentConfig::from_text(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("horizon") && msg.contains("detector"), "{msg}");
    }

    #[test]
    fn schema_version_is_enforced() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(
            ExperimentConfig::from_text(&text),
            Err(ConfigError::SchemaVersion(_))
        ));
        let text = MINIMAL.replace("schema_version = 1\n", "");
        assert!(matches!(
            ExperimentConfig::from_text(&text),
            Err(ConfigError::MissingKey { .. })
        ));
    }

    #[test]
    fn window_must_precede_horizon() {
        let text = MINIMAL.replace("window = 400", "window = 800");
        let err = ExperimentConfig::from_text(&text).unwrap_err();
        assert!(err.to_string().contains("must end before"), "{err}");
        let text = MINIMAL.replace("window = 400", "window = 1");
        let err = ExperimentConfig::from_text(&text).unwrap_err();
        assert!(err.to_string().contains("window ≥ 2"), "{err}");
    }

    #[test]
    fn kind_pairings_are_checked() {
        let text = MINIMAL.replace("kind = learn_scalar", "kind = learn_vector");
        assert!(ExperimentConfig::from_text(&text).is_err());
        let text = MINIMAL.replace("kind = variance\ndelta = 0.1", "kind = covariance\ngamma = 0.1");
        assert!(ExperimentConfig::from_text(&text).is_err());
    }

    #[test]
    fn vector_config_round_trip() {
        let text = "\
schema_version = 1

[plant]
kind = vector
A = 1,2;3,4
noise_cov = 1,0;0,2
init_cov = 1,0;0,1

[controller]
kind = linear_matrix
K = 0.9,1.8;2.7,3.6

[attack]
kind = learn_vector
window = 40
mu = 0.5

[detector]
kind = covariance
gamma = 0.1
horizon = 600

[run]
trials = 180
seed = 12648430

[bounds]
zeta = 0.5
rho = 0.99
beta = 0.29
";
        let cfg = ExperimentConfig::from_text(text).unwrap();
        match &cfg.plant {
            PlantSpec::Vector(p) => {
                assert_eq!(p.A[(0, 1)], 2.0);
                assert_eq!(p.noise_cov.as_matrix()[(1, 1)], 2.0);
            }
            other => panic!("wrong plant {other:?}"),
        }
        assert_eq!(cfg.bounds.zeta, Some(0.5));
        assert!(matches!(cfg.attack.malicious, MaliciousSpec::Gain(mu) if mu == 0.5));
    }

    #[test]
    fn sweep_axes_parse_and_apply() {
        let text = format!(
            "{MINIMAL}\n[sweep]\naxis = detector.horizon\nvalues = 200, 400, 800\nouter_axis = attack.window\nouter_values = 8,20\n"
        );
        let cfg = ExperimentConfig::from_text(&text).unwrap();
        let sweep = cfg.sweep.unwrap();
        assert_eq!(sweep.axis.key, "detector.horizon");
        assert_eq!(sweep.axis.values.len(), 3);
        assert_eq!(sweep.axis.values[1], ("400".to_string(), 400.0));
        assert_eq!(sweep.outer.as_ref().unwrap().values.len(), 2);

        // applying an override re-validates
        let mut raw = RawConfig::parse(&text).unwrap();
        raw.set("attack.window", "20").unwrap();
        let overridden = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(overridden.attack.window, 20);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = RawConfig::parse("schema_version = 1\nnot a key value\n").unwrap_err();
        match err {
            ConfigError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("wrong error {other}"),
        }
        let err = RawConfig::parse("[unterminated\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
        let err = RawConfig::parse("a = 1\na = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn recursive_privacy_eta_policy() {
        let base = MINIMAL.replace(
            "kind = linear\nomega = 0.88",
            "kind = linear\nomega = 0.88\nprivacy = recursive\neta = ETA",
        );
        // rejected outright at η ≤ ½
        assert!(ExperimentConfig::from_text(&base.replace("ETA", "0.4")).is_err());
        // accepted with a warning in the marginal band
        let cfg = ExperimentConfig::from_text(&base.replace("ETA", "2")).unwrap();
        assert_eq!(cfg.warnings.len(), 1);
        // clean at η ≥ 3
        let cfg = ExperimentConfig::from_text(&base.replace("ETA", "3")).unwrap();
        assert!(cfg.warnings.is_empty());
    }

    #[test]
    fn missing_file_error_names_the_path() {
        let err = ExperimentConfig::from_file(Path::new("/nonexistent/nope.cfg")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/nope.cfg"), "{err}");
    }
}
