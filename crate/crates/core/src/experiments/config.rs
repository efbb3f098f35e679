use std::fmt::Write as _;

use crate::certificate::Model;
use crate::field::StrengthDistribution;

use super::ExperimentError;

pub const SCHEMA_VERSION: u32 = 1;

/// Where the simulation field comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSource {
    /// The periodic field the supersolution is built on; the grid spans its torus.
    Construction,
    /// Poisson field on the torus of side `side`, heights `[r1, band_top)`.
    Periodic,
    /// `f ≡ 0` on the same torus.
    Empty,
}

impl FieldSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            FieldSource::Construction => "construction",
            FieldSource::Periodic => "periodic",
            FieldSource::Empty => "empty",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "construction" => Some(FieldSource::Construction),
            "periodic" => Some(FieldSource::Periodic),
            "empty" => Some(FieldSource::Empty),
            _ => None,
        }
    }
}

/// Flat `key = value` configuration. `None` fields are `auto` and get
/// resolved by the command that needs them; reports echo the resolved values
/// so a report can be re-run from its own echo.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub n: usize,
    pub lambda: f64,
    pub strength: StrengthDistribution,
    pub r0: f64,
    pub r1: f64,
    pub sigma: f64,
    pub seed: u64,
    /// Boxes per lateral axis of the construction torus.
    pub columns: usize,
    pub height_cap: usize,
    pub field: FieldSource,
    pub side: f64,
    pub band_top: f64,
    /// Grid points per lateral axis.
    pub grid_points: usize,
    pub initial_height: f64,
    pub force: Option<f64>,
    /// Multiplies `F_star` when `force` is auto.
    pub force_factor: Option<f64>,
    pub t_max: f64,
    pub v_tol: Option<f64>,
    pub tau: f64,
    pub h_esc: Option<f64>,
    pub trace_every: usize,
    pub snapshot_every: Option<f64>,
    pub expect_outcome: Option<String>,
    pub cert_spacing: f64,
    pub cert_keep: usize,
    pub bisect_lo: Option<f64>,
    pub bisect_hi: Option<f64>,
    pub bisect_resolution: Option<f64>,
    pub bisect_max_probes: usize,
    pub hyst_f_max: Option<f64>,
    pub hyst_t_plateau: f64,
    pub hyst_stiffness: f64,
    pub hyst_reference: Option<f64>,
    pub hyst_stationary_tol: f64,
    pub perc_p: f64,
    pub perc_trials: u64,
    pub perc_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: Model::Qew,
            n: 1,
            lambda: 1.0,
            strength: StrengthDistribution::Constant { value: 10.0 },
            r0: 0.25,
            r1: 0.4,
            sigma: 0.2,
            seed: 1,
            columns: 8,
            height_cap: 12,
            field: FieldSource::Construction,
            side: 32.0,
            band_top: 40.0,
            grid_points: 1024,
            initial_height: 0.0,
            force: None,
            force_factor: None,
            t_max: 5000.0,
            v_tol: None,
            tau: 10.0,
            h_esc: None,
            trace_every: 100,
            snapshot_every: None,
            expect_outcome: None,
            cert_spacing: 0.02,
            cert_keep: 10,
            bisect_lo: None,
            bisect_hi: None,
            bisect_resolution: None,
            bisect_max_probes: 40,
            hyst_f_max: None,
            hyst_t_plateau: 60.0,
            hyst_stiffness: 0.1,
            hyst_reference: None,
            hyst_stationary_tol: 1e-9,
            perc_p: 0.95,
            perc_trials: 100_000,
            perc_cap: 16,
        }
    }
}

/// One line of `--help` per key: name, default, meaning.
pub const KEY_DOCS: &[(&str, &str, &str)] = &[
    ("schema_version", "1", "config format version"),
    ("model", "qew", "qew or mcf"),
    ("n", "1", "lateral dimension (1 or 2)"),
    ("lambda", "1", "obstacle intensity"),
    ("strength", "constant 10", "strength law: constant v | uniform lo hi | exponential rate"),
    ("r0", "0.25", "obstacle core half-width"),
    ("r1", "0.4", "obstacle support radius"),
    ("sigma", "0.2", "bump smoothness"),
    ("seed", "1", "master seed"),
    ("columns", "8", "boxes per lateral axis of the construction torus"),
    ("height_cap", "12", "slab cap for the Lipschitz surface"),
    ("field", "construction", "construction | periodic | empty"),
    ("side", "32", "torus side for periodic and empty fields"),
    ("band_top", "40", "top of the obstacle band for periodic and empty fields"),
    ("grid_points", "1024", "simulation points per lateral axis"),
    ("initial_height", "0", "flat initial height"),
    ("force", "auto", "driving force; auto = force_factor * F_star"),
    ("force_factor", "auto", "1 for verify-certificate, 0.5 for simulate"),
    ("t_max", "5000", "simulation time limit"),
    ("v_tol", "auto", "pin threshold; auto = 1e-8 * max(|F|, 1e-3)"),
    ("tau", "10", "pin window"),
    ("h_esc", "auto", "escape height; auto = field top minus r1"),
    ("trace_every", "100", "steps between trace rows"),
    ("snapshot_every", "none", "time between snapshots"),
    ("expect_outcome", "none", "simulate fails unless the outcome matches (pinned | escaped | timeout)"),
    ("cert_spacing", "0.02", "certificate grid spacing"),
    ("cert_keep", "10", "worst residual rows kept"),
    ("bisect_lo", "auto", "critical-force lower bracket; auto = 0"),
    ("bisect_hi", "auto", "critical-force upper bracket; auto = field bound M (at least resolution)"),
    ("bisect_resolution", "auto", "bracket width to stop at; auto = hi / 256"),
    ("bisect_max_probes", "40", "probe budget"),
    ("hyst_f_max", "auto", "loop amplitude; auto = 0.9 * F_star"),
    ("hyst_t_plateau", "60", "plateau duration T (also run at 2T)"),
    ("hyst_stiffness", "0.1", "restoring spring k"),
    ("hyst_reference", "auto", "spring rest height and initial height; auto = band middle"),
    ("hyst_stationary_tol", "1e-9", "plateau ends early below this velocity"),
    ("perc_p", "0.95", "site openness probability"),
    ("perc_trials", "100000", "Monte Carlo trials"),
    ("perc_cap", "16", "height cap per trial"),
];

fn bad(key: &str, value: &str) -> ExperimentError {
    ExperimentError::Config(format!("bad value for {key}: {value:?}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ExperimentError> {
    value.parse::<T>().map_err(|_| bad(key, value))
}

fn auto<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>, ExperimentError> {
    if value == "auto" || value == "none" {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

fn show<T: std::fmt::Display>(v: &Option<T>, missing: &str) -> String {
    v.as_ref().map_or_else(|| missing.to_string(), |x| x.to_string())
}

impl ExperimentConfig {
    /// Parse `key = value` lines; `#` starts a comment. `schema_version` is
    /// required and unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut cfg = Self::default();
        let mut version = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ExperimentError::Config(format!("line {}: expected key = value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "schema_version" {
                version = Some(num::<u32>(key, value)?);
                continue;
            }
            cfg.set(key, value)?;
        }
        match version {
            Some(SCHEMA_VERSION) => {}
            Some(v) => return Err(ExperimentError::Config(format!("schema_version {v} unsupported (expected {SCHEMA_VERSION})"))),
            None => return Err(ExperimentError::Config("missing schema_version".into())),
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ExperimentError> {
        match key {
            "model" => self.model = Model::parse(value).ok_or_else(|| bad(key, value))?,
            "n" => self.n = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "strength" => {
                self.strength = StrengthDistribution::parse(value).map_err(|e| ExperimentError::Config(e.to_string()))?
            }
            "r0" => self.r0 = num(key, value)?,
            "r1" => self.r1 = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "columns" => self.columns = num(key, value)?,
            "height_cap" => self.height_cap = num(key, value)?,
            "field" => self.field = FieldSource::parse(value).ok_or_else(|| bad(key, value))?,
            "side" => self.side = num(key, value)?,
            "band_top" => self.band_top = num(key, value)?,
            "grid_points" => self.grid_points = num(key, value)?,
            "initial_height" => self.initial_height = num(key, value)?,
            "force" => self.force = auto(key, value)?,
            "force_factor" => self.force_factor = auto(key, value)?,
            "t_max" => self.t_max = num(key, value)?,
            "v_tol" => self.v_tol = auto(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "h_esc" => self.h_esc = auto(key, value)?,
            "trace_every" => self.trace_every = num(key, value)?,
            "snapshot_every" => self.snapshot_every = auto(key, value)?,
            "expect_outcome" => {
                self.expect_outcome = match value {
                    "none" => None,
                    "pinned" | "escaped" | "timeout" => Some(value.to_string()),
                    _ => return Err(bad(key, value)),
                }
            }
            "cert_spacing" => self.cert_spacing = num(key, value)?,
            "cert_keep" => self.cert_keep = num(key, value)?,
            "bisect_lo" => self.bisect_lo = auto(key, value)?,
            "bisect_hi" => self.bisect_hi = auto(key, value)?,
            "bisect_resolution" => self.bisect_resolution = auto(key, value)?,
            "bisect_max_probes" => self.bisect_max_probes = num(key, value)?,
            "hyst_f_max" => self.hyst_f_max = auto(key, value)?,
            "hyst_t_plateau" => self.hyst_t_plateau = num(key, value)?,
            "hyst_stiffness" => self.hyst_stiffness = num(key, value)?,
            "hyst_reference" => self.hyst_reference = auto(key, value)?,
            "hyst_stationary_tol" => self.hyst_stationary_tol = num(key, value)?,
            "perc_p" => self.perc_p = num(key, value)?,
            "perc_trials" => self.perc_trials = num(key, value)?,
            "perc_cap" => self.perc_cap = num(key, value)?,
            _ => return Err(ExperimentError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Range checks that do not need any derived parameters.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if !(1..=2).contains(&self.n) {
            return fail("n must be 1 or 2");
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return fail("lambda must be finite and >= 0");
        }
        if !(self.r0 > 0.0 && self.r1 > self.r0 && self.sigma > 0.0) {
            return fail("need 0 < r0 < r1 and sigma > 0");
        }
        if self.columns == 0 || self.height_cap == 0 || self.grid_points < 3 {
            return fail("columns, height_cap must be positive and grid_points >= 3");
        }
        if !(self.side > 0.0) || !(self.band_top > 2.0 * self.r1) {
            return fail("need side > 0 and band_top > 2 r1");
        }
        if !(self.t_max > 0.0) || !(self.tau > 0.0) || self.trace_every == 0 {
            return fail("t_max, tau and trace_every must be positive");
        }
        if !(self.cert_spacing > 0.0) {
            return fail("cert_spacing must be positive");
        }
        if !(self.hyst_t_plateau > 0.0) || !(self.hyst_stiffness >= 0.0) || !(self.hyst_stationary_tol >= 0.0) {
            return fail("hysteresis settings out of range");
        }
        if !(0.0..=1.0).contains(&self.perc_p) || self.perc_trials == 0 || self.perc_cap == 0 {
            return fail("percolation settings out of range");
        }
        if self.snapshot_every.is_some_and(|s| !(s > 0.0)) {
            return fail("snapshot_every must be positive");
        }
        Ok(())
    }

    /// Every key in a fixed order, `auto` where unresolved.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("schema_version", SCHEMA_VERSION.to_string());
        kv("model", self.model.as_str().into());
        kv("n", self.n.to_string());
        kv("lambda", self.lambda.to_string());
        kv("strength", self.strength.describe());
        kv("r0", self.r0.to_string());
        kv("r1", self.r1.to_string());
        kv("sigma", self.sigma.to_string());
        kv("seed", self.seed.to_string());
        kv("columns", self.columns.to_string());
        kv("height_cap", self.height_cap.to_string());
        kv("field", self.field.as_str().into());
        kv("side", self.side.to_string());
        kv("band_top", self.band_top.to_string());
        kv("grid_points", self.grid_points.to_string());
        kv("initial_height", self.initial_height.to_string());
        kv("force", show(&self.force, "auto"));
        kv("force_factor", show(&self.force_factor, "auto"));
        kv("t_max", self.t_max.to_string());
        kv("v_tol", show(&self.v_tol, "auto"));
        kv("tau", self.tau.to_string());
        kv("h_esc", show(&self.h_esc, "auto"));
        kv("trace_every", self.trace_every.to_string());
        kv("snapshot_every", show(&self.snapshot_every, "none"));
        kv("expect_outcome", show(&self.expect_outcome, "none"));
        kv("cert_spacing", self.cert_spacing.to_string());
        kv("cert_keep", self.cert_keep.to_string());
        kv("bisect_lo", show(&self.bisect_lo, "auto"));
        kv("bisect_hi", show(&self.bisect_hi, "auto"));
        kv("bisect_resolution", show(&self.bisect_resolution, "auto"));
        kv("bisect_max_probes", self.bisect_max_probes.to_string());
        kv("hyst_f_max", show(&self.hyst_f_max, "auto"));
        kv("hyst_t_plateau", self.hyst_t_plateau.to_string());
        kv("hyst_stiffness", self.hyst_stiffness.to_string());
        kv("hyst_reference", show(&self.hyst_reference, "auto"));
        kv("hyst_stationary_tol", self.hyst_stationary_tol.to_string());
        kv("perc_p", self.perc_p.to_string());
        kv("perc_trials", self.perc_trials.to_string());
        kv("perc_cap", self.perc_cap.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.force = Some(0.1 + 0.2);
        cfg.snapshot_every = Some(2.5);
        cfg.strength = StrengthDistribution::Uniform { lo: 0.5, hi: 2.5 };
        cfg.expect_outcome = Some("pinned".into());
        let back = ExperimentConfig::parse(&cfg.echo()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.echo(), cfg.echo());
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(ExperimentConfig::parse("schema_version = 1\nbogus = 3").is_err());
        assert!(ExperimentConfig::parse("schema_version = 2").is_err());
        assert!(ExperimentConfig::parse("model = qew").is_err());
        assert!(ExperimentConfig::parse("schema_version = 1\nn = 4").is_err());
        let c = ExperimentConfig::parse("# comment\nschema_version = 1\nmodel = mcf # trailing\n\nforce = auto").unwrap();
        assert_eq!(c.model, Model::Mcf);
        assert_eq!(c.force, None);
    }

    #[test]
    fn every_key_is_documented() {
        let echoed: Vec<String> =
            ExperimentConfig::default().echo().lines().map(|l| l.split(" = ").next().unwrap().to_string()).collect();
        let documented: Vec<&str> = KEY_DOCS.iter().map(|d| d.0).collect();
        assert_eq!(echoed, documented);
    }
}
