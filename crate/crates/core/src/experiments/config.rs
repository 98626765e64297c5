//! Experiment configuration, one study per TOML file.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::force::RhsMode;
use crate::kernels::{kernel_by_name, InteractionKernel, KernelParams};
use crate::measures::InitialDatumSpec;
use crate::ode::Scheme;
use crate::transport::DEFAULT_ASSIGNMENT_CAP;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    SamplingRate,
    Dobrushin,
    Chaos,
    MultiwiseLimit,
    JointLimit,
    MonokineticCheck,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::SamplingRate => "sampling_rate",
            StudyKind::Dobrushin => "dobrushin",
            StudyKind::Chaos => "chaos",
            StudyKind::MultiwiseLimit => "multiwise_limit",
            StudyKind::JointLimit => "joint_limit",
            StudyKind::MonokineticCheck => "monokinetic_check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub name: String,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default = "one")]
    pub label_dim: usize,
}

impl KernelConfig {
    pub fn build(&self) -> Result<InteractionKernel> {
        kernel_by_name(
            &self.name,
            KernelParams {
                radius: self.radius,
                dim: self.dim,
                label_dim: self.label_dim,
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsKind {
    #[default]
    Exact,
    Mc,
}

/// How chaos-study reference samples are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceCoupling {
    /// The initial points of the emitted coordinates, pushed along the
    /// reference Vlasov flow.
    #[default]
    Synchronous,
    /// Fresh `f_0` draws pushed along the reference flow.
    Independent,
}

/// Bounded test function on labels for the first-moment pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    Constant {
        value: f64,
    },
    Affine {
        intercept: f64,
        slope: Vec<f64>,
    },
    /// `amplitude · sin(2π frequency x_1 + phase)`.
    Sinusoidal {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Affine { intercept, slope } => intercept + slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
            TestFunction::Sinusoidal {
                amplitude,
                frequency,
                phase,
            } => amplitude * (2.0 * std::f64::consts::PI * frequency * x[0] + phase).sin(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::Constant { .. } => "constant",
            TestFunction::Affine { .. } => "affine",
            TestFunction::Sinusoidal { .. } => "sinusoidal",
        }
    }
}

/// `q ∈ [1, ∞]`, written as a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QNorm(pub f64);

impl Serialize for QNorm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for QNorm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(QNorm(v)),
            Raw::Int(v) => Ok(QNorm(v as f64)),
            Raw::Str(s) if matches!(s.as_str(), "inf" | "infinity" | "Inf") => Ok(QNorm(f64::INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("invalid q '{s}'"))),
        }
    }
}

fn default_radius() -> f64 {
    1.0
}
fn one() -> usize {
    1
}
fn default_seeds() -> usize {
    5
}
fn default_m_list() -> Vec<usize> {
    vec![1]
}
fn default_n_ref() -> usize {
    4096
}
fn default_p() -> f64 {
    1.0
}
fn default_q() -> QNorm {
    QNorm(1.0)
}
fn default_z() -> f64 {
    4.0
}
fn default_alpha() -> f64 {
    0.4
}
fn default_runs() -> usize {
    512
}
fn default_samples() -> usize {
    256
}
fn default_dt() -> f64 {
    0.1
}
fn default_assignment_cap() -> usize {
    DEFAULT_ASSIGNMENT_CAP
}
fn default_enumeration_cap() -> f64 {
    crate::force::DEFAULT_ENUMERATION_CAP
}
fn default_probe_count() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub study: StudyKind,
    /// Output file stem; defaults to the study name.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub master_seed: u64,
    /// Seed replicates per sweep point.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// Output directory.
    #[serde(default)]
    pub output: Option<String>,
    pub kernel: KernelConfig,
    #[serde(default = "default_m_list")]
    pub m_list: Vec<usize>,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default = "default_n_ref")]
    pub n_ref: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_q")]
    pub q: QNorm,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default = "default_z")]
    pub z: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Ensemble size `R`.
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub rhs_mode: RhsKind,
    /// Monte Carlo tuples per evaluation point.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub scheme: Scheme,
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub dt_list: Vec<f64>,
    #[serde(default = "default_assignment_cap")]
    pub assignment_cap: usize,
    #[serde(default = "default_enumeration_cap")]
    pub enumeration_cap: f64,
    #[serde(default)]
    pub test_function: Option<TestFunction>,
    #[serde(default)]
    pub reference_coupling: ReferenceCoupling,
    #[serde(default = "default_probe_count")]
    pub probe_count: usize,
    pub initial: InitialDatumSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn output_stem(&self) -> &str {
        self.name.as_deref().unwrap_or(self.study.name())
    }

    pub fn kernel(&self) -> Result<InteractionKernel> {
        self.kernel.build()
    }

    /// Evaluation mode; Monte Carlo seeds are supplied by the study.
    pub fn rhs_mode(&self, seed: u64) -> RhsMode {
        match self.rhs_mode {
            RhsKind::Exact => RhsMode::Exact {
                enumeration_cap: self.enumeration_cap,
            },
            RhsKind::Mc => RhsMode::MonteCarlo {
                samples: self.samples,
                seed,
            },
        }
    }

    /// The single interaction order of an N-sweep study.
    pub fn order(&self) -> usize {
        self.m_list[0]
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::config(msg));
        let kernel = self.kernel()?;
        self.initial.validate()?;
        if self.initial.label_dim() != kernel.label_dim() || self.initial.opinion_dim() != kernel.opinion_dim() {
            return fail(format!(
                "initial datum has dimensions ({}, {}) but kernel '{}' expects ({}, {})",
                self.initial.label_dim(),
                self.initial.opinion_dim(),
                kernel.name(),
                kernel.label_dim(),
                kernel.opinion_dim()
            ));
        }
        if self.seeds == 0 {
            return fail("seeds must be >= 1".into());
        }
        if self.m_list.is_empty() || self.m_list.contains(&0) {
            return fail("m_list must be nonempty with every m >= 1".into());
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return fail(format!("p must lie in [1, inf), got {}", self.p));
        }
        if !(self.q.0 >= 1.0) {
            return fail(format!("q must lie in [1, inf], got {}", self.q.0));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return fail("t_final must be finite and >= 0".into());
        }
        if self.t_final > 0.0 && !(self.dt > 0.0) {
            return fail("dt must be positive".into());
        }
        if !(self.z > 0.0) {
            return fail("z must be positive".into());
        }
        if self.samples == 0 || self.runs == 0 || self.probe_count < 2 || self.assignment_cap == 0 {
            return fail("samples, runs and assignment_cap must be >= 1 and probe_count >= 2".into());
        }
        let needs_n = matches!(
            self.study,
            StudyKind::SamplingRate | StudyKind::Dobrushin | StudyKind::Chaos | StudyKind::JointLimit
        );
        if needs_n {
            if self.n_list.is_empty() || self.n_list.contains(&0) {
                return fail("n_list must be nonempty with every N >= 1".into());
            }
            if self.m_list.len() != 1 && self.study != StudyKind::JointLimit {
                return fail("N-sweep studies take a single m (one config per order)".into());
            }
        }
        match self.study {
            StudyKind::Dobrushin if self.n_ref == 0 => return fail("n_ref must be >= 1".into()),
            StudyKind::Chaos if !(1..=2).contains(&self.k) => return fail("chaos studies need k in {1, 2}".into()),
            StudyKind::JointLimit => {
                if !(self.alpha > 0.0 && self.alpha < 0.5) {
                    return fail(format!("joint-limit exponent alpha must lie in (0, 1/2), got {}", self.alpha));
                }
                if !self.q.0.is_finite() {
                    return fail("joint-limit schedule needs a finite q".into());
                }
                if self.test_function.is_none() {
                    return fail("joint-limit studies need a test_function".into());
                }
            }
            StudyKind::MonokineticCheck if self.dt_list.is_empty() || self.dt_list.iter().any(|d| !(*d > 0.0)) => {
                return fail("monokinetic checks need a nonempty dt_list of positive steps".into())
            }
            _ => {}
        }
        let needs_mono = matches!(
            self.study,
            StudyKind::MultiwiseLimit | StudyKind::JointLimit | StudyKind::MonokineticCheck
        );
        if needs_mono && !self.initial.is_monokinetic() {
            return fail(format!("{} needs a monokinetic initial datum", self.study.name()));
        }
        let needs_statistic = matches!(self.study, StudyKind::MultiwiseLimit | StudyKind::JointLimit);
        if needs_statistic && kernel.as_statistic().is_none() {
            return fail(format!("{} needs a statistic-form kernel", self.study.name()));
        }
        Ok(())
    }
}
