//! Batch drivers behind the command line: each command turns an
//! [`ExperimentConfig`] into an [`ExperimentReport`] plus CSV tables.
//!
//! Reports carry no wall-clock data and every reduction is ordered, so a
//! report re-run from its echoed config is byte-identical at any thread count.

mod commands;
mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::certificate::{CertificateReport, Model};
use crate::field::{ObstacleField, ObstacleShape};
use crate::mcf::{self, McfCertifyOptions, McfError, McfRecipe, SupersolutionMcf};
use crate::qew::{self, CertifyOptions, QewError, QewRecipe, SupersolutionQew};
use crate::certificate::Tolerances;
use crate::sim::SimError;

pub use commands::{
    cmd_critical_force, cmd_hysteresis, cmd_percolation_stats, cmd_sample_field, cmd_simulate, cmd_verify_certificate,
    simulation_for, SimSetup,
};
pub use config::{ExperimentConfig, FieldSource, KEY_DOCS, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible at {stage} stage: {message}")]
    Infeasible { stage: &'static str, message: String },
    #[error("{stage} stage failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// 2 for configuration or feasibility problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Infeasible { .. } => 2,
            _ => 1,
        }
    }
}

fn from_qew(e: QewError) -> ExperimentError {
    match e {
        QewError::Infeasible(m) => ExperimentError::Infeasible { stage: "parameters", message: m },
        QewError::Assembly(a) => ExperimentError::Infeasible { stage: a.stage(), message: a.to_string() },
        QewError::Field(f) => ExperimentError::Stage { stage: "field", message: f.to_string() },
        other => ExperimentError::Stage { stage: "profile", message: other.to_string() },
    }
}

fn from_mcf(e: McfError) -> ExperimentError {
    match e {
        McfError::Infeasible(m) => ExperimentError::Infeasible { stage: "parameters", message: m },
        McfError::Assembly(a) => ExperimentError::Infeasible { stage: a.stage(), message: a.to_string() },
        McfError::Field(f) => ExperimentError::Stage { stage: "field", message: f.to_string() },
        other => ExperimentError::Stage { stage: "profile", message: other.to_string() },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    VerifyCertificate,
    CriticalForce,
    Hysteresis,
    PercolationStats,
    SampleField,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Simulate,
        Command::VerifyCertificate,
        Command::CriticalForce,
        Command::Hysteresis,
        Command::PercolationStats,
        Command::SampleField,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::VerifyCertificate => "verify-certificate",
            Command::CriticalForce => "critical-force",
            Command::Hysteresis => "hysteresis",
            Command::PercolationStats => "percolation-stats",
            Command::SampleField => "sample-field",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// Run `command` on `cfg`.
pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    match command {
        Command::Simulate => cmd_simulate(cfg),
        Command::VerifyCertificate => cmd_verify_certificate(cfg),
        Command::CriticalForce => cmd_critical_force(cfg),
        Command::Hysteresis => cmd_hysteresis(cfg),
        Command::PercolationStats => cmd_percolation_stats(cfg),
        Command::SampleField => cmd_sample_field(cfg),
    }
}

/// Run `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, ExperimentError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub command: Command,
    /// First 16 hex digits of SHA-256 over the command name and config echo.
    pub id: String,
    pub config: String,
    pub results: Vec<(String, String)>,
    /// Free-form blocks (certificate text and the like).
    pub sections: Vec<(String, String)>,
    pub tables: Vec<Table>,
    pub status: Status,
}

pub fn experiment_id(command: Command, echo: &str) -> String {
    let digest = Sha256::digest(format!("{}\n{echo}", command.as_str()).as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

impl ExperimentReport {
    fn new(command: Command, cfg: &ExperimentConfig) -> Self {
        let config = cfg.echo();
        Self {
            command,
            id: experiment_id(command, &config),
            config,
            results: Vec::new(),
            sections: Vec::new(),
            tables: Vec::new(),
            status: Status::Pass,
        }
    }

    fn put(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.to_string(), value.to_string()));
    }

    pub fn result(&self, key: &str) -> Option<&str> {
        self.results.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# depin experiment report");
        let _ = writeln!(s, "command = {}", self.command.as_str());
        let _ = writeln!(s, "experiment_id = {}", self.id);
        let _ = writeln!(s, "status = {}", if self.passed() { "pass" } else { "fail" });
        let _ = writeln!(s, "\n[config]");
        s.push_str(&self.config);
        let _ = writeln!(s, "\n[results]");
        for (k, v) in &self.results {
            let _ = writeln!(s, "{k} = {v}");
        }
        for (name, body) in &self.sections {
            let _ = writeln!(s, "\n[{name}]");
            s.push_str(body);
            if !body.ends_with('\n') {
                s.push('\n');
            }
        }
        if !self.tables.is_empty() {
            let _ = writeln!(s, "\n[tables]");
            for t in &self.tables {
                let _ = writeln!(s, "{}", t.name);
            }
        }
        s
    }

    pub fn report_name(&self) -> String {
        format!("{}_report.txt", self.command.as_str())
    }

    /// Write the report and its tables into `dir`; returns the paths written.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::with_capacity(self.tables.len() + 1);
        let path = dir.join(self.report_name());
        std::fs::write(&path, self.to_text())?;
        out.push(path);
        for t in &self.tables {
            let path = dir.join(&t.name);
            std::fs::write(&path, &t.content)?;
            out.push(path);
        }
        Ok(out)
    }
}

/// The `[config]` block of a report, ready to be parsed again.
pub fn echoed_config(report: &str) -> Option<String> {
    let start = report.find("\n[config]\n")? + "\n[config]\n".len();
    let rest = &report[start..];
    let end = rest.find("\n[").unwrap_or(rest.len());
    Some(rest[..end].trim_end().to_string() + "\n")
}

/// Supersolution for either model, built from the config's fixture recipe.
#[derive(Debug, Clone)]
pub enum Construction {
    Qew(SupersolutionQew),
    Mcf(Box<SupersolutionMcf>),
}

pub fn shape_of(cfg: &ExperimentConfig) -> Result<ObstacleShape<f64>, ExperimentError> {
    ObstacleShape::new(cfg.n, cfg.r0, cfg.r1, cfg.sigma).map_err(|e| ExperimentError::Config(e.to_string()))
}

/// Fail early when no obstacle can ever be open: the percolation stage needs
/// a positive openness probability.
fn check_obstacles_exist(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    if cfg.lambda == 0.0 {
        return Err(ExperimentError::Infeasible {
            stage: "percolation",
            message: "obstacle intensity is zero, so no site is open".into(),
        });
    }
    Ok(())
}

/// `F_star` of the parameter recipe (no field sampling).
pub fn f_star_for(cfg: &ExperimentConfig) -> Result<f64, ExperimentError> {
    check_obstacles_exist(cfg)?;
    let shape = shape_of(cfg)?;
    match cfg.model {
        Model::Qew => Ok(qew::choose_parameters(&shape, cfg.lambda, &cfg.strength, &QewRecipe::default())
            .map_err(from_qew)?
            .f_star),
        Model::Mcf => Ok(mcf::choose_parameters_mcf(&shape, cfg.lambda, &cfg.strength, &McfRecipe::default())
            .map_err(from_mcf)?
            .f_star),
    }
}

impl Construction {
    /// sample → openness → minimal surface → select → build.
    pub fn build(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        check_obstacles_exist(cfg)?;
        let shape = shape_of(cfg)?;
        let columns = vec![cfg.columns; cfg.n];
        match cfg.model {
            Model::Qew => {
                let p = qew::choose_parameters(&shape, cfg.lambda, &cfg.strength, &QewRecipe::default()).map_err(from_qew)?;
                let field = qew::sample_construction_field(
                    &p,
                    &shape,
                    cfg.strength,
                    &columns,
                    cfg.height_cap,
                    qew::default_headroom(&p),
                    cfg.seed,
                )
                .map_err(from_qew)?;
                Ok(Construction::Qew(SupersolutionQew::build(field, &p, columns, cfg.height_cap).map_err(from_qew)?))
            }
            Model::Mcf => {
                let p = mcf::choose_parameters_mcf(&shape, cfg.lambda, &cfg.strength, &McfRecipe::default())
                    .map_err(from_mcf)?;
                let headroom = mcf::default_headroom(&p).map_err(from_mcf)?;
                let field =
                    mcf::sample_construction_field(&p, &shape, cfg.strength, &columns, cfg.height_cap, headroom, cfg.seed)
                        .map_err(from_mcf)?;
                let s = SupersolutionMcf::build(field, &p, columns, cfg.height_cap).map_err(from_mcf)?;
                Ok(Construction::Mcf(Box::new(s)))
            }
        }
    }

    /// Field only, without running the percolation pipeline.
    pub fn sample_field(cfg: &ExperimentConfig) -> Result<ObstacleField, ExperimentError> {
        check_obstacles_exist(cfg)?;
        let shape = shape_of(cfg)?;
        let columns = vec![cfg.columns; cfg.n];
        match cfg.model {
            Model::Qew => {
                let p = qew::choose_parameters(&shape, cfg.lambda, &cfg.strength, &QewRecipe::default()).map_err(from_qew)?;
                qew::sample_construction_field(&p, &shape, cfg.strength, &columns, cfg.height_cap, qew::default_headroom(&p), cfg.seed)
                    .map_err(from_qew)
            }
            Model::Mcf => {
                let p = mcf::choose_parameters_mcf(&shape, cfg.lambda, &cfg.strength, &McfRecipe::default())
                    .map_err(from_mcf)?;
                let headroom = mcf::default_headroom(&p).map_err(from_mcf)?;
                mcf::sample_construction_field(&p, &shape, cfg.strength, &columns, cfg.height_cap, headroom, cfg.seed)
                    .map_err(from_mcf)
            }
        }
    }

    pub fn f_star(&self) -> f64 {
        match self {
            Construction::Qew(s) => s.params.f_star,
            Construction::Mcf(s) => s.params.f_star,
        }
    }

    pub fn field(&self) -> &ObstacleField {
        match self {
            Construction::Qew(s) => &s.assembly().field,
            Construction::Mcf(s) => &s.assembly().field,
        }
    }

    pub fn extent(&self) -> Vec<f64> {
        match self {
            Construction::Qew(s) => s.assembly().extent(),
            Construction::Mcf(s) => s.assembly().extent(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Construction::Qew(s) => s.value(x),
            Construction::Mcf(s) => s.value(x),
        }
    }

    pub fn certify(&self, force: f64, spacing: f64, keep: usize) -> CertificateReport {
        let tolerances = Tolerances::default();
        match self {
            Construction::Qew(s) => qew::certify(s, force, &CertifyOptions { spacing, tolerances, keep }),
            Construction::Mcf(s) => {
                mcf::certify_mcf(s, force, &McfCertifyOptions { spacing, tolerances, keep, ..Default::default() })
            }
        }
    }
}
