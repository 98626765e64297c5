//! Weighted atomic measures on phase space, initial-datum samplers and
//! moment functionals.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force::{Atoms, Weights};
use crate::kernels::euclidean_norm;
use crate::particles::ParticleEnsemble;
use crate::rng::RngStream;

/// Tolerance on `Σ w = 1`.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

fn check_weights(weights: &[f64], count: usize) -> Result<()> {
    if weights.len() != count {
        return Err(Error::domain(format!("{} weights for {count} atoms", weights.len())));
    }
    if count == 0 {
        return Err(Error::domain("a measure needs at least one atom"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::domain("weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::domain(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Atoms `(x_k, ξ_k)` with weights `w_k` summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    label_dim: usize,
    opinion_dim: usize,
    labels: Vec<f64>,
    opinions: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedMeasure {
    pub fn new(
        label_dim: usize,
        opinion_dim: usize,
        labels: Vec<f64>,
        opinions: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if label_dim == 0 || opinion_dim == 0 {
            return Err(Error::domain("label and opinion dimensions must be >= 1"));
        }
        let count = opinions.len() / opinion_dim;
        if opinions.len() != count * opinion_dim || labels.len() != count * label_dim {
            return Err(Error::domain("atom arrays have inconsistent lengths"));
        }
        check_weights(&weights, count)?;
        Ok(WeightedMeasure {
            label_dim,
            opinion_dim,
            labels,
            opinions,
            weights,
        })
    }

    /// Equal weights `1/K`.
    pub fn uniform(label_dim: usize, opinion_dim: usize, labels: Vec<f64>, opinions: Vec<f64>) -> Result<Self> {
        let count = opinions.len() / opinion_dim.max(1);
        let w = 1.0 / count.max(1) as f64;
        WeightedMeasure::new(label_dim, opinion_dim, labels, opinions, vec![w; count])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn label_dim(&self) -> usize {
        self.label_dim
    }

    pub fn opinion_dim(&self) -> usize {
        self.opinion_dim
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn opinions(&self) -> &[f64] {
        &self.opinions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn label(&self, k: usize) -> &[f64] {
        &self.labels[k * self.label_dim..(k + 1) * self.label_dim]
    }

    pub fn opinion(&self, k: usize) -> &[f64] {
        &self.opinions[k * self.opinion_dim..(k + 1) * self.opinion_dim]
    }

    /// Same atoms and weights with new opinions (the push-forward along a
    /// label-preserving map).
    pub fn with_opinions(&self, opinions: Vec<f64>) -> Result<Self> {
        if opinions.len() != self.opinions.len() {
            return Err(Error::domain("opinion array length changed"));
        }
        Ok(WeightedMeasure {
            opinions,
            ..self.clone()
        })
    }

    pub(crate) fn atoms(&self) -> Atoms<'_> {
        Atoms {
            label_dim: self.label_dim,
            opinion_dim: self.opinion_dim,
            labels: &self.labels,
            opinions: &self.opinions,
            weights: Weights::detect(&self.weights),
        }
    }
}

/// Uniform atomic measure on the agents, one atom per agent.
pub fn empirical_measure(ensemble: &ParticleEnsemble) -> WeightedMeasure {
    let n = ensemble.len();
    WeightedMeasure {
        label_dim: ensemble.label_dim(),
        opinion_dim: ensemble.opinion_dim(),
        labels: ensemble.labels().to_vec(),
        opinions: ensemble.opinions().to_vec(),
        weights: vec![1.0 / n as f64; n],
    }
}

/// `Σ_k w_k |(x_k, ξ_k)|^z`, Euclidean norm on the concatenated coordinates.
pub fn moment_z(measure: &WeightedMeasure, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(format!("moment order z must be positive, got {z}")));
    }
    Ok((0..measure.len())
        .map(|k| {
            let sq: f64 = measure.label(k).iter().chain(measure.opinion(k)).map(|v| v * v).sum();
            measure.weights[k] * sq.sqrt().powf(z)
        })
        .sum())
}

/// A probability measure on the label space, given by atoms and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMeasure {
    label_dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl LabelMeasure {
    pub fn new(label_dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if label_dim == 0 || atoms.len() % label_dim != 0 {
            return Err(Error::domain("label atoms are not a multiple of the label dimension"));
        }
        check_weights(&weights, atoms.len() / label_dim)?;
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::domain("label atoms must be finite"));
        }
        Ok(LabelMeasure {
            label_dim,
            atoms,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn label_dim(&self) -> usize {
        self.label_dim
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.label_dim..(j + 1) * self.label_dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// True when every atom lies in the closed box `[lower, upper]`.
    pub fn within_box(&self, lower: &[f64], upper: &[f64]) -> bool {
        (0..self.len()).all(|j| {
            self.atom(j)
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(a, (lo, hi))| *lo <= *a && *a <= *hi)
        })
    }
}

// ---------------------------------------------------------------------------
// Initial data

/// Law of the labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelDistribution {
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    Discrete { atoms: Vec<Vec<f64>>, weights: Vec<f64> },
}

impl LabelDistribution {
    pub fn label_dim(&self) -> usize {
        match self {
            LabelDistribution::UniformBox { lower, .. } => lower.len(),
            LabelDistribution::Discrete { atoms, .. } => atoms.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LabelDistribution::UniformBox { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::config("uniform_box needs lower/upper of equal nonzero length"));
                }
                if lower.iter().zip(upper).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
                    return Err(Error::config("uniform_box needs finite lower < upper"));
                }
            }
            LabelDistribution::Discrete { atoms, weights } => {
                let dx = self.label_dim();
                if atoms.is_empty() || dx == 0 || atoms.iter().any(|a| a.len() != dx) {
                    return Err(Error::config("discrete labels need nonempty atoms of one dimension"));
                }
                check_weights(weights, atoms.len()).map_err(|e| Error::config(e.to_string()))?;
            }
        }
        Ok(())
    }

    fn sample_into<R: Rng>(&self, rng: &mut R, out: &mut Vec<f64>, cumulative: &[f64]) {
        match self {
            LabelDistribution::UniformBox { lower, upper } => {
                for (lo, hi) in lower.iter().zip(upper) {
                    out.push(lo + (hi - lo) * rng.random::<f64>());
                }
            }
            LabelDistribution::Discrete { atoms, .. } => {
                let u: f64 = rng.random();
                let j = cumulative.partition_point(|&c| c <= u).min(atoms.len() - 1);
                out.extend_from_slice(&atoms[j]);
            }
        }
    }

    fn cumulative(&self) -> Vec<f64> {
        match self {
            LabelDistribution::Discrete { weights, .. } => weights
                .iter()
                .scan(0.0, |acc, w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect(),
            LabelDistribution::UniformBox { .. } => Vec::new(),
        }
    }

    /// Quadrature representation of the label law: the atoms themselves for
    /// discrete laws, a midpoint grid with about `nodes` cells for boxes.
    pub fn discretize(&self, nodes: usize) -> Result<LabelMeasure> {
        self.validate()?;
        match self {
            LabelDistribution::Discrete { atoms, weights } => {
                LabelMeasure::new(self.label_dim(), atoms.concat(), weights.clone())
            }
            LabelDistribution::UniformBox { lower, upper } => {
                if nodes == 0 {
                    return Err(Error::domain("need at least one quadrature node"));
                }
                let dx = lower.len();
                let per_axis = ((nodes as f64).powf(1.0 / dx as f64).round() as usize).max(1);
                let total = per_axis.pow(dx as u32);
                let mut atoms = Vec::with_capacity(total * dx);
                for flat in 0..total {
                    let mut rem = flat;
                    let mut point = vec![0.0; dx];
                    for c in (0..dx).rev() {
                        let i = rem % per_axis;
                        rem /= per_axis;
                        point[c] = lower[c] + (upper[c] - lower[c]) * (i as f64 + 0.5) / per_axis as f64;
                    }
                    atoms.extend(point);
                }
                LabelMeasure::new(dx, atoms, vec![1.0 / total as f64; total])
            }
        }
    }
}

/// Deterministic initial opinion profile `y_0(x)`, Lipschitz by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant {
        value: Vec<f64>,
    },
    /// `y_c = intercept_c + slope · x`.
    Affine {
        intercept: Vec<f64>,
        slope: Vec<f64>,
    },
    /// `y_c = offset_c + amplitude · sin(2π frequency x_1 + phase)`.
    Sinusoidal {
        offset: Vec<f64>,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Affine profile clamped to `[lower, upper]` componentwise.
    Clamped {
        intercept: Vec<f64>,
        slope: Vec<f64>,
        lower: f64,
        upper: f64,
    },
}

impl Profile {
    pub fn opinion_dim(&self) -> usize {
        match self {
            Profile::Constant { value } => value.len(),
            Profile::Affine { intercept, .. } | Profile::Clamped { intercept, .. } => intercept.len(),
            Profile::Sinusoidal { offset, .. } => offset.len(),
        }
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let dot = |slope: &[f64]| slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        match self {
            Profile::Constant { value } => out.copy_from_slice(value),
            Profile::Affine { intercept, slope } => {
                let s = dot(slope);
                for (o, c) in out.iter_mut().zip(intercept) {
                    *o = c + s;
                }
            }
            Profile::Sinusoidal {
                offset,
                amplitude,
                frequency,
                phase,
            } => {
                let w = amplitude * (2.0 * PI * frequency * x[0] + phase).sin();
                for (o, c) in out.iter_mut().zip(offset) {
                    *o = c + w;
                }
            }
            Profile::Clamped {
                intercept,
                slope,
                lower,
                upper,
            } => {
                let s = dot(slope);
                for (o, c) in out.iter_mut().zip(intercept) {
                    *o = (c + s).clamp(*lower, *upper);
                }
            }
        }
    }

    /// Lipschitz constant of `x ↦ y_0(x)` in the Euclidean norms.
    pub fn lipschitz(&self) -> f64 {
        let d = (self.opinion_dim() as f64).sqrt();
        match self {
            Profile::Constant { .. } => 0.0,
            Profile::Affine { slope, .. } | Profile::Clamped { slope, .. } => d * euclidean_norm(slope),
            Profile::Sinusoidal {
                amplitude, frequency, ..
            } => d * (2.0 * PI * frequency * amplitude).abs(),
        }
    }

    fn validate(&self, label_dim: usize) -> Result<()> {
        let ok = match self {
            Profile::Constant { value } => !value.is_empty(),
            Profile::Affine { intercept, slope } => !intercept.is_empty() && slope.len() == label_dim,
            Profile::Sinusoidal { offset, .. } => !offset.is_empty(),
            Profile::Clamped {
                intercept,
                slope,
                lower,
                upper,
            } => !intercept.is_empty() && slope.len() == label_dim && lower <= upper,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("malformed opinion profile {self:?} for label dimension {label_dim}")))
        }
    }
}

/// Conditional law of the opinion given the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpinionConditional {
    /// `ξ = y_0(x)`.
    Monokinetic {
        #[serde(flatten)]
        profile: Profile,
    },
    UniformBall { center: Vec<f64>, radius: f64 },
    /// Normal with independent components, conditioned on the ball
    /// `|ξ - mean| <= radius`.
    TruncatedGaussian { mean: Vec<f64>, std: f64, radius: f64 },
}

impl OpinionConditional {
    pub fn opinion_dim(&self) -> usize {
        match self {
            OpinionConditional::Monokinetic { profile } => profile.opinion_dim(),
            OpinionConditional::UniformBall { center, .. } => center.len(),
            OpinionConditional::TruncatedGaussian { mean, .. } => mean.len(),
        }
    }

    pub fn profile(&self) -> Option<&Profile> {
        match self {
            OpinionConditional::Monokinetic { profile } => Some(profile),
            _ => None,
        }
    }

    fn validate(&self, label_dim: usize) -> Result<()> {
        match self {
            OpinionConditional::Monokinetic { profile } => profile.validate(label_dim),
            OpinionConditional::UniformBall { center, radius } => {
                if center.is_empty() || !(*radius >= 0.0) {
                    return Err(Error::config("uniform_ball needs a center and radius >= 0"));
                }
                Ok(())
            }
            OpinionConditional::TruncatedGaussian { mean, std, radius } => {
                if mean.is_empty() || !(*std > 0.0) || !(*radius > 0.0) {
                    return Err(Error::config("truncated_gaussian needs a mean, std > 0 and radius > 0"));
                }
                Ok(())
            }
        }
    }

    fn sample_into<R: Rng>(&self, rng: &mut R, label: &[f64], out: &mut Vec<f64>) {
        match self {
            OpinionConditional::Monokinetic { profile } => {
                let start = out.len();
                out.resize(start + profile.opinion_dim(), 0.0);
                profile.eval(label, &mut out[start..]);
            }
            OpinionConditional::UniformBall { center, radius } => {
                let d = center.len();
                let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let norm = euclidean_norm(&dir).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                out.extend(center.iter().zip(&dir).map(|(c, u)| c + r * u / norm));
            }
            OpinionConditional::TruncatedGaussian { mean, std, radius } => {
                let normal = Normal::new(0.0, *std).expect("std validated positive");
                loop {
                    let offset: Vec<f64> = (0..mean.len()).map(|_| normal.sample(rng)).collect();
                    if euclidean_norm(&offset) <= *radius {
                        out.extend(mean.iter().zip(&offset).map(|(m, o)| m + o));
                        break;
                    }
                }
            }
        }
    }
}

/// Joint law `f_0` of one agent: label law plus opinion conditional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDatumSpec {
    pub labels: LabelDistribution,
    pub opinions: OpinionConditional,
}

impl InitialDatumSpec {
    pub fn label_dim(&self) -> usize {
        self.labels.label_dim()
    }

    pub fn opinion_dim(&self) -> usize {
        self.opinions.opinion_dim()
    }

    pub fn is_monokinetic(&self) -> bool {
        self.opinions.profile().is_some()
    }

    pub fn validate(&self) -> Result<()> {
        self.labels.validate()?;
        self.opinions.validate(self.label_dim())
    }

    /// Monokinetic datum on quadrature nodes: atoms `(x_j, y_0(x_j))` with
    /// the node weights.
    pub fn monokinetic_measure(&self, nodes: usize) -> Result<WeightedMeasure> {
        let profile = self
            .opinions
            .profile()
            .ok_or_else(|| Error::config("a monokinetic opinion profile is required"))?;
        let nu = self.labels.discretize(nodes)?;
        let d = profile.opinion_dim();
        let mut opinions = vec![0.0; nu.len() * d];
        for j in 0..nu.len() {
            profile.eval(nu.atom(j), &mut opinions[j * d..(j + 1) * d]);
        }
        WeightedMeasure::new(nu.label_dim(), d, nu.atoms().to_vec(), opinions, nu.weights().to_vec())
    }
}

/// `N` i.i.d. draws from `spec`, agent by agent from one generator.
pub fn sample_initial(spec: &InitialDatumSpec, n: usize, stream: RngStream) -> Result<ParticleEnsemble> {
    if n == 0 {
        return Err(Error::domain("sample size N must be >= 1"));
    }
    spec.validate()?;
    let dx = spec.label_dim();
    let d = spec.opinion_dim();
    let cumulative = spec.labels.cumulative();
    let mut rng = stream.rng();
    let mut labels = Vec::with_capacity(n * dx);
    let mut opinions = Vec::with_capacity(n * d);
    for _ in 0..n {
        let start = labels.len();
        spec.labels.sample_into(&mut rng, &mut labels, &cumulative);
        let label = labels[start..].to_vec();
        spec.opinions.sample_into(&mut rng, &label, &mut opinions);
    }
    ParticleEnsemble::new(dx, d, labels, opinions, 0.0)
}
