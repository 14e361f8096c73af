//! Experiment configs. Everything here is checked before any computation.

use std::path::PathBuf;

use cmalab_core::cascade::CascadeConfig;
use cmalab_core::field::{test_solution, BallDomain, TestSolution};
use cmalab_core::solver::NewtonOptions;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Config rejected before computation (exit status 2).
#[derive(Debug)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "schema error: {}", self.0)
    }
}

impl std::error::Error for SchemaError {}

fn schema(msg: impl Into<String>) -> SchemaError {
    SchemaError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Exponents,
    Solve,
    Cascade,
    Calabi,
    Norms,
    Suite,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Kind,
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(default)]
    payload: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub job: Job,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", content = "payload", rename_all = "lowercase")]
pub enum Job {
    Exponents(ExponentsJob),
    Solve(SolveJob),
    Cascade(CascadeJob),
    Calabi(CalabiJob),
    Norms(NormsJob),
    Suite(SuiteJob),
}

impl Job {
    pub fn kind(&self) -> Kind {
        match self {
            Job::Exponents(_) => Kind::Exponents,
            Job::Solve(_) => Kind::Solve,
            Job::Cascade(_) => Kind::Cascade,
            Job::Calabi(_) => Kind::Calabi,
            Job::Norms(_) => Kind::Norms,
            Job::Suite(_) => Kind::Suite,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsJob {
    pub n: u32,
    pub alpha: f64,
    /// Plan inputs; the plan is skipped unless both are given.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_phi_points")]
    pub phi_points: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_phi_points() -> usize {
    10
}

fn default_max_iter() -> usize {
    200
}

/// A catalog member on a ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub solution: String,
    pub n: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    pub points_per_radius: usize,
}

impl BallSpec {
    pub fn catalog(&self) -> Result<TestSolution, SchemaError> {
        test_solution(&self.solution, self.n).map_err(|e| schema(e.to_string()))
    }

    pub fn ball(&self) -> Result<BallDomain, SchemaError> {
        if self.center.len() != 2 * self.n {
            return Err(schema(format!("center needs {} coordinates, got {}", 2 * self.n, self.center.len())));
        }
        BallDomain::new(self.n, &self.center, self.radius).map_err(|e| schema(e.to_string()))
    }

    pub fn h(&self) -> f64 {
        self.radius / self.points_per_radius as f64
    }

    fn validate(&self) -> Result<(), SchemaError> {
        self.catalog()?;
        self.ball()?;
        if self.points_per_radius < 4 {
            return Err(schema(format!("points_per_radius = {} must be >= 4", self.points_per_radius)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveJob {
    pub domain: BallSpec,
    #[serde(default)]
    pub newton: NewtonOptions,
    /// Multiplies the catalog right-hand side.
    #[serde(default = "one")]
    pub rhs_scale: f64,
    /// Also write the solution as CSV.
    #[serde(default)]
    pub csv: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeJob {
    pub solution: String,
    pub cascade: CascadeConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalabiJob {
    pub domain: BallSpec,
    #[serde(default = "one")]
    pub c_n: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub k: u8,
    pub alpha: f64,
    #[serde(default)]
    pub weighted: bool,
    #[serde(default)]
    pub complex: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsJob {
    pub fields: Vec<BallSpec>,
    pub specs: Vec<NormSpec>,
    #[serde(default = "default_pairs")]
    pub random_pairs: usize,
}

fn default_pairs() -> usize {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteJob {
    /// Criteria to run, 1..=7 (8 is the repeat-run check done outside a single run).
    #[serde(default = "all_criteria")]
    pub criteria: Vec<u8>,
}

fn all_criteria() -> Vec<u8> {
    (1..=7).collect()
}

fn payload<T: DeserializeOwned>(v: serde_json::Value) -> Result<T, SchemaError> {
    serde_json::from_value(v).map_err(|e| schema(format!("payload: {e}")))
}

fn positive(name: &str, v: f64) -> Result<(), SchemaError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(schema(format!("{name} = {v} must be positive")))
    }
}

impl ExperimentConfig {
    /// Parses and validates; `seed` overrides the config's seed.
    pub fn parse(text: &str, seed: Option<u64>) -> Result<Self, SchemaError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        let seed = seed
            .or(raw.seed)
            .ok_or_else(|| schema("seed is mandatory (config `seed` or --seed)"))?;
        let job = match raw.kind {
            Kind::Exponents => Job::Exponents(payload(raw.payload)?),
            Kind::Solve => Job::Solve(payload(raw.payload)?),
            Kind::Cascade => Job::Cascade(payload(raw.payload)?),
            Kind::Calabi => Job::Calabi(payload(raw.payload)?),
            Kind::Norms => Job::Norms(payload(raw.payload)?),
            Kind::Suite => Job::Suite(if raw.payload.is_null() {
                SuiteJob { criteria: all_criteria() }
            } else {
                payload(raw.payload)?
            }),
        };
        let cfg = ExperimentConfig { seed, out: raw.out, job };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        match &self.job {
            Job::Exponents(j) => {
                if !(1..=3).contains(&j.n) {
                    return Err(schema(format!("n = {} must be 1, 2 or 3", j.n)));
                }
                if !(j.alpha > 0.0 && j.alpha <= 1.0) {
                    return Err(schema(format!("alpha = {} must lie in (0, 1]", j.alpha)));
                }
                if j.beta.is_some() != j.delta.is_some() {
                    return Err(schema("beta and delta must be given together"));
                }
                if j.phi_points < 2 || j.max_iter == 0 {
                    return Err(schema("phi_points must be >= 2 and max_iter >= 1"));
                }
            }
            Job::Solve(j) => {
                j.domain.validate()?;
                positive("rhs_scale", j.rhs_scale)?;
            }
            Job::Cascade(j) => {
                test_solution(&j.solution, j.cascade.n()).map_err(|e| schema(e.to_string()))?;
                j.cascade.validate().map_err(|e| schema(e.to_string()))?;
            }
            Job::Calabi(j) => {
                j.domain.validate()?;
                positive("c_n", j.c_n)?;
            }
            Job::Norms(j) => {
                if j.fields.is_empty() || j.specs.is_empty() {
                    return Err(schema("norms needs at least one field and one spec"));
                }
                for f in &j.fields {
                    f.validate()?;
                }
                for s in &j.specs {
                    if s.k > 2 || !(0.0..=1.0).contains(&s.alpha) {
                        return Err(schema(format!("unsupported seminorm k = {}, alpha = {}", s.k, s.alpha)));
                    }
                }
            }
            Job::Suite(j) => {
                if j.criteria.is_empty() || j.criteria.iter().any(|c| !(1..=7).contains(c)) {
                    return Err(schema("suite criteria must be a nonempty subset of 1..=7"));
                }
            }
        }
        Ok(())
    }
}
