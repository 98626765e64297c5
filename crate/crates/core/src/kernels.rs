//! m-body interaction kernels.
//!
//! A kernel maps a head agent `(x, ξ)` and a tail of `m` agents to a drift in
//! `R^d`. Two variants are supported:
//!
//! * [`StatisticKernel`]: `G(t, x, ξ, tail) = g(t, x, ξ, mean_k φ(x_k, ξ_k))`.
//!   Bounds and Lipschitz constants of this family do not depend on `m`, and
//!   its large-`m` limit is `g` evaluated at the mean of `φ`.
//! * [`BlackBoxKernel`]: an arbitrary evaluator with declared constants.
//!
//! All constants are certified on a ball of opinions of a declared radius.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// `(label, opinion) -> statistic`, written into the output slice.
pub type StatisticFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(t, label, opinion, statistic) -> drift`.
pub type HeadFn = Arc<dyn Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(t, statistic) -> drift`, the tail-dependent part of a separable head.
pub type ResponseFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `(t, label, opinion)`; adds the head-only part of a separable head into
/// the output slice.
pub type OwnFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(t, head, tail) -> drift` for black-box kernels.
pub type EvaluatorFn = Arc<dyn Fn(f64, AgentRef<'_>, &[AgentRef<'_>], &mut [f64]) + Send + Sync>;

/// Borrowed view of one agent in phase space.
#[derive(Debug, Clone, Copy)]
pub struct AgentRef<'a> {
    pub label: &'a [f64],
    pub opinion: &'a [f64],
}

impl<'a> AgentRef<'a> {
    pub fn new(label: &'a [f64], opinion: &'a [f64]) -> Self {
        AgentRef { label, opinion }
    }
}

/// Response function `g` of a statistic kernel.
#[derive(Clone)]
pub enum Head {
    General(HeadFn),
    /// `g(t, x, ξ, s) = response(t, s) + own(t, x, ξ)`. With this split the
    /// tuple sum is independent of the head agent, and when `response` is
    /// affine in `s` the sum collapses to the response at the mean statistic.
    Separable {
        response: ResponseFn,
        own: OwnFn,
        affine_response: bool,
    },
}

/// Certified constants shared by both kernel variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelBounds {
    /// Sup of `|G|` on the declared ball.
    pub bound: f64,
    /// Lipschitz constant w.r.t. the l1 aggregate of per-agent distances.
    pub lipschitz: f64,
    /// Radius of the opinion ball on which the constants hold.
    pub radius: f64,
}

#[derive(Clone)]
pub struct StatisticKernel {
    name: String,
    label_dim: usize,
    opinion_dim: usize,
    statistic_dim: usize,
    statistic: StatisticFn,
    head: Head,
    bound: f64,
    lip_head: f64,
    lip_statistic: f64,
    radius: f64,
}

impl StatisticKernel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        label_dim: usize,
        opinion_dim: usize,
        statistic_dim: usize,
        statistic: StatisticFn,
        head: Head,
        bound: f64,
        lip_head: f64,
        lip_statistic: f64,
        radius: f64,
    ) -> Self {
        StatisticKernel {
            name: name.into(),
            label_dim,
            opinion_dim,
            statistic_dim,
            statistic,
            head,
            bound,
            lip_head,
            lip_statistic,
            radius,
        }
    }

    pub fn statistic_dim(&self) -> usize {
        self.statistic_dim
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn lip_head(&self) -> f64 {
        self.lip_head
    }

    pub fn lip_statistic(&self) -> f64 {
        self.lip_statistic
    }

    /// True when `g` is affine in the statistic, so the tuple average of `g`
    /// equals `g` at the mean statistic for every `m`.
    pub fn is_affine_in_statistic(&self) -> bool {
        matches!(
            self.head,
            Head::Separable {
                affine_response: true,
                ..
            }
        )
    }

    pub fn eval_statistic(&self, label: &[f64], opinion: &[f64], out: &mut [f64]) {
        (self.statistic)(label, opinion, out)
    }

    /// `g(t, x, ξ, s)` into `out`.
    pub fn eval_head(&self, t: f64, label: &[f64], opinion: &[f64], stat: &[f64], out: &mut [f64]) {
        match &self.head {
            Head::General(g) => g(t, label, opinion, stat, out),
            Head::Separable { response, own, .. } => {
                response(t, stat, out);
                own(t, label, opinion, out);
            }
        }
    }
}

#[derive(Clone)]
pub struct BlackBoxKernel {
    name: String,
    label_dim: usize,
    opinion_dim: usize,
    evaluator: EvaluatorFn,
    bound: f64,
    lipschitz: f64,
    radius: f64,
}

impl BlackBoxKernel {
    pub fn new(
        name: impl Into<String>,
        label_dim: usize,
        opinion_dim: usize,
        evaluator: EvaluatorFn,
        bounds: KernelBounds,
    ) -> Self {
        BlackBoxKernel {
            name: name.into(),
            label_dim,
            opinion_dim,
            evaluator,
            bound: bounds.bound,
            lipschitz: bounds.lipschitz,
            radius: bounds.radius,
        }
    }

    pub fn evaluate_unchecked(&self, t: f64, head: AgentRef<'_>, tail: &[AgentRef<'_>], out: &mut [f64]) {
        (self.evaluator)(t, head, tail, out)
    }
}

#[derive(Clone)]
pub enum InteractionKernel {
    Statistic(StatisticKernel),
    BlackBox(BlackBoxKernel),
}

impl fmt::Debug for InteractionKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self {
            InteractionKernel::Statistic(_) => "statistic",
            InteractionKernel::BlackBox(_) => "black_box",
        };
        f.debug_struct("InteractionKernel")
            .field("name", &self.name())
            .field("kind", &kind)
            .field("bounds", &self.bounds())
            .finish()
    }
}

impl InteractionKernel {
    pub fn name(&self) -> &str {
        match self {
            InteractionKernel::Statistic(k) => &k.name,
            InteractionKernel::BlackBox(k) => &k.name,
        }
    }

    pub fn label_dim(&self) -> usize {
        match self {
            InteractionKernel::Statistic(k) => k.label_dim,
            InteractionKernel::BlackBox(k) => k.label_dim,
        }
    }

    pub fn opinion_dim(&self) -> usize {
        match self {
            InteractionKernel::Statistic(k) => k.opinion_dim,
            InteractionKernel::BlackBox(k) => k.opinion_dim,
        }
    }

    pub fn bounds(&self) -> KernelBounds {
        match self {
            InteractionKernel::Statistic(k) => KernelBounds {
                bound: k.bound,
                lipschitz: k.lip_head.max(k.lip_head * k.lip_statistic),
                radius: k.radius,
            },
            InteractionKernel::BlackBox(k) => KernelBounds {
                bound: k.bound,
                lipschitz: k.lipschitz,
                radius: k.radius,
            },
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.bounds().lipschitz
    }

    pub fn radius(&self) -> f64 {
        self.bounds().radius
    }

    pub fn as_statistic(&self) -> Option<&StatisticKernel> {
        match self {
            InteractionKernel::Statistic(k) => Some(k),
            InteractionKernel::BlackBox(_) => None,
        }
    }

    /// Same kernel with different declared `M` and Lipschitz constant.
    /// For statistic kernels the new constant replaces `lip_head` and the
    /// statistic map is declared 1-Lipschitz.
    pub fn with_declared(&self, bound: f64, lipschitz: f64) -> Self {
        match self {
            InteractionKernel::Statistic(k) => {
                let mut k = k.clone();
                k.bound = bound;
                k.lip_head = lipschitz;
                k.lip_statistic = 1.0;
                InteractionKernel::Statistic(k)
            }
            InteractionKernel::BlackBox(k) => {
                let mut k = k.clone();
                k.bound = bound;
                k.lipschitz = lipschitz;
                InteractionKernel::BlackBox(k)
            }
        }
    }

    /// Kernel value without shape or radius checks.
    pub(crate) fn evaluate_unchecked(
        &self,
        t: f64,
        head: AgentRef<'_>,
        tail: &[AgentRef<'_>],
        out: &mut [f64],
    ) {
        match self {
            InteractionKernel::Statistic(k) => {
                let s = k.statistic_dim;
                let mut sum = vec![0.0; s];
                let mut phi = vec![0.0; s];
                for agent in tail {
                    k.eval_statistic(agent.label, agent.opinion, &mut phi);
                    for c in 0..s {
                        sum[c] += phi[c];
                    }
                }
                let m = tail.len() as f64;
                for v in sum.iter_mut() {
                    *v /= m;
                }
                k.eval_head(t, head.label, head.opinion, &sum, out);
            }
            InteractionKernel::BlackBox(k) => k.evaluate_unchecked(t, head, tail, out),
        }
    }

    pub(crate) fn check_agent(&self, agent: AgentRef<'_>, what: &str) -> Result<()> {
        if agent.label.len() != self.label_dim() {
            return Err(Error::domain(format!(
                "{what} label has dimension {}, kernel expects {}",
                agent.label.len(),
                self.label_dim()
            )));
        }
        if agent.opinion.len() != self.opinion_dim() {
            return Err(Error::domain(format!(
                "{what} opinion has dimension {}, kernel expects {}",
                agent.opinion.len(),
                self.opinion_dim()
            )));
        }
        let norm = euclidean_norm(agent.opinion);
        let radius = self.radius();
        if !(norm <= radius) {
            return Err(Error::DomainViolation {
                component: format!("{what} opinion"),
                norm,
                radius,
            });
        }
        Ok(())
    }
}

pub(crate) fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `G^(m)(t, head, tail)` with `m = tail.len()`.
pub fn evaluate_kernel(
    kernel: &InteractionKernel,
    t: f64,
    head: AgentRef<'_>,
    tail: &[AgentRef<'_>],
) -> Result<Vec<f64>> {
    if tail.is_empty() {
        return Err(Error::domain("kernel tail must contain at least one agent (m >= 1)"));
    }
    kernel.check_agent(head, "head")?;
    for (k, agent) in tail.iter().enumerate() {
        kernel.check_agent(*agent, &format!("tail[{k}]"))?;
    }
    let mut out = vec![0.0; kernel.opinion_dim()];
    kernel.evaluate_unchecked(t, head, tail, &mut out);
    Ok(out)
}

/// Large-`m` limit field: `g(t, x, ξ, statistic_mean)`.
pub fn kernel_limit_field(
    kernel: &InteractionKernel,
    t: f64,
    label: &[f64],
    opinion: &[f64],
    statistic_mean: &[f64],
) -> Result<Vec<f64>> {
    let k = kernel.as_statistic().ok_or_else(|| {
        Error::Unsupported(format!(
            "kernel '{}' is a black box; no analytic large-m limit is available",
            kernel.name()
        ))
    })?;
    if statistic_mean.len() != k.statistic_dim {
        return Err(Error::domain(format!(
            "statistic mean has dimension {}, kernel expects {}",
            statistic_mean.len(),
            k.statistic_dim
        )));
    }
    if statistic_mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("statistic mean must be finite"));
    }
    let mut out = vec![0.0; k.opinion_dim];
    k.eval_head(t, label, opinion, statistic_mean, &mut out);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Validation

/// Tuple orders probed by [`validate_kernel`].
pub const PROBE_ORDERS: [usize; 4] = [1, 2, 4, 8];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderProbe {
    pub m: usize,
    pub max_abs: f64,
    pub max_quotient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub kernel: String,
    pub declared_bound: f64,
    pub declared_lipschitz: f64,
    pub radius: f64,
    pub probe_count: usize,
    pub orders: Vec<OrderProbe>,
    pub bound_violation: bool,
    pub lipschitz_violation: bool,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        !self.bound_violation && !self.lipschitz_violation
    }
}

/// Relative slack allowed before a probe counts as a violation.
pub const VALIDATION_SLACK: f64 = 0.01;

fn random_in_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64, on_sphere: bool) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let norm = euclidean_norm(&v).max(f64::MIN_POSITIVE);
    let r = if on_sphere {
        radius
    } else {
        radius * rng.random::<f64>().powf(1.0 / dim as f64)
    };
    for x in v.iter_mut() {
        *x *= r / norm;
    }
    v
}

fn project_to_ball(v: &mut [f64], radius: f64) {
    let n = euclidean_norm(v);
    if n > radius {
        for x in v.iter_mut() {
            *x *= radius / n;
        }
    }
}

/// Flat phase-space configuration of `m + 1` agents (head first).
struct Probe {
    labels: Vec<f64>,
    opinions: Vec<f64>,
}

/// Checks assumption-style bounds by random probing.
///
/// For each `m` in [`PROBE_ORDERS`] it draws `probe_count` configurations with
/// labels in `[0, 1]^{d_x}` and opinions in the ball of `radius` (half of them
/// on its boundary), records `max |G|`, and records the largest difference
/// quotient `|G(z) - G(z')| / ||z - z'||_1` over independent pairs and small
/// local perturbations.
pub fn validate_kernel(
    kernel: &InteractionKernel,
    probe_count: usize,
    radius: f64,
    seed: u64,
) -> Result<ValidationReport> {
    if probe_count < 2 {
        return Err(Error::domain(format!("probe_count must be >= 2, got {probe_count}")));
    }
    if !(radius > 0.0) {
        return Err(Error::domain(format!("probe radius must be positive, got {radius}")));
    }
    let dx = kernel.label_dim();
    let d = kernel.opinion_dim();
    let bounds = kernel.bounds();
    let root = RngStream::new(seed);
    let mut orders = Vec::with_capacity(PROBE_ORDERS.len());

    for &m in &PROBE_ORDERS {
        let mut rng = root.substream(m as u64).rng();
        let agents = m + 1;
        let draw = |rng: &mut crate::rng::StreamRng, boundary: bool| -> Probe {
            let labels: Vec<f64> = (0..agents * dx).map(|_| rng.random::<f64>()).collect();
            let mut opinions = Vec::with_capacity(agents * d);
            for _ in 0..agents {
                opinions.extend(random_in_ball(rng, d, radius, boundary));
            }
            Probe { labels, opinions }
        };
        let eval = |p: &Probe| -> Vec<f64> {
            let refs: Vec<AgentRef<'_>> = (0..agents)
                .map(|a| AgentRef::new(&p.labels[a * dx..(a + 1) * dx], &p.opinions[a * d..(a + 1) * d]))
                .collect();
            let mut out = vec![0.0; d];
            kernel.evaluate_unchecked(0.0, refs[0], &refs[1..], &mut out);
            out
        };
        let l1 = |a: &Probe, b: &Probe| -> f64 {
            (0..agents)
                .map(|k| {
                    euclidean_distance(&a.labels[k * dx..(k + 1) * dx], &b.labels[k * dx..(k + 1) * dx])
                        + euclidean_distance(&a.opinions[k * d..(k + 1) * d], &b.opinions[k * d..(k + 1) * d])
                })
                .sum()
        };

        let mut max_abs: f64 = 0.0;
        let mut max_quotient: f64 = 0.0;
        let mut previous: Option<(Probe, Vec<f64>)> = None;
        for i in 0..probe_count {
            let probe = draw(&mut rng, i % 2 == 0);
            let value = eval(&probe);
            max_abs = max_abs.max(euclidean_norm(&value));

            // local perturbation
            let scale = 1e-3 * radius.max(1.0);
            let mut near = Probe {
                labels: probe
                    .labels
                    .iter()
                    .map(|x| (x + scale * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, 1.0))
                    .collect(),
                opinions: probe
                    .opinions
                    .iter()
                    .map(|x| x + scale * (2.0 * rng.random::<f64>() - 1.0))
                    .collect(),
            };
            for a in 0..agents {
                project_to_ball(&mut near.opinions[a * d..(a + 1) * d], radius);
            }
            let near_value = eval(&near);
            max_abs = max_abs.max(euclidean_norm(&near_value));
            let dist = l1(&probe, &near);
            if dist > 0.0 {
                max_quotient = max_quotient.max(euclidean_distance(&value, &near_value) / dist);
            }

            if let Some((prev, prev_value)) = &previous {
                let dist = l1(prev, &probe);
                if dist > 0.0 {
                    max_quotient = max_quotient.max(euclidean_distance(prev_value, &value) / dist);
                }
            }
            previous = Some((probe, value));
        }
        orders.push(OrderProbe {
            m,
            max_abs,
            max_quotient,
        });
    }

    let bound_violation = orders
        .iter()
        .any(|o| o.max_abs > bounds.bound * (1.0 + VALIDATION_SLACK));
    let lipschitz_violation = orders
        .iter()
        .any(|o| o.max_quotient > bounds.lipschitz * (1.0 + VALIDATION_SLACK));
    Ok(ValidationReport {
        kernel: kernel.name().to_string(),
        declared_bound: bounds.bound,
        declared_lipschitz: bounds.lipschitz,
        radius,
        probe_count,
        orders,
        bound_violation,
        lipschitz_violation,
    })
}

// ---------------------------------------------------------------------------
// Catalog

/// Parameters shared by the catalog constructors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    /// Radius of the certified opinion ball.
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Opinion dimension (only `linear_consensus` accepts d > 1).
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default = "one")]
    pub label_dim: usize,
}

fn default_radius() -> f64 {
    1.0
}

fn one() -> usize {
    1
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            radius: default_radius(),
            dim: 1,
            label_dim: 1,
        }
    }
}

pub struct KernelCatalogEntry {
    pub name: &'static str,
    pub kernel: InteractionKernel,
    pub notes: &'static str,
}

pub const KERNEL_NAMES: [&str; 3] = ["linear_consensus", "quadratic_statistic", "saturated_quadratic"];

/// `φ = ξ'`, `g = s - ξ`.
pub fn linear_consensus(params: KernelParams) -> InteractionKernel {
    let d = params.dim;
    let r = params.radius;
    let statistic: StatisticFn = Arc::new(|_x, xi, out| out.copy_from_slice(xi));
    let response: ResponseFn = Arc::new(|_t, s, out| out.copy_from_slice(s));
    let own: OwnFn = Arc::new(|_t, _x, xi, out| {
        for (o, v) in out.iter_mut().zip(xi) {
            *o -= v;
        }
    });
    InteractionKernel::Statistic(StatisticKernel::new(
        "linear_consensus",
        params.label_dim,
        d,
        d,
        statistic,
        Head::Separable {
            response,
            own,
            affine_response: true,
        },
        2.0 * r,
        1.0,
        1.0,
        r,
    ))
}

/// Scalar `φ = ξ'`, `g = s² - ξ`; certified with `M = r² + r`,
/// `Lip = max(2r, 1)` on the ball of radius `r`.
pub fn quadratic_statistic(params: KernelParams) -> InteractionKernel {
    let r = params.radius;
    let statistic: StatisticFn = Arc::new(|_x, xi, out| out[0] = xi[0]);
    let response: ResponseFn = Arc::new(|_t, s, out| out[0] = s[0] * s[0]);
    let own: OwnFn = Arc::new(|_t, _x, xi, out| out[0] -= xi[0]);
    InteractionKernel::Statistic(StatisticKernel::new(
        "quadratic_statistic",
        params.label_dim,
        1,
        1,
        statistic,
        Head::Separable {
            response,
            own,
            affine_response: false,
        },
        r * r + r,
        (2.0 * r).max(1.0),
        1.0,
        r,
    ))
}

/// Sup over `|s| <= r` of `d/ds tanh(s²) = 2 s sech²(s²)`.
fn saturated_slope(r: f64) -> f64 {
    let slope = |s: f64| 2.0 * s / (s * s).cosh().powi(2);
    // Interior maximiser solves 4 u tanh(u) = 1 with u = s².
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 4.0 * mid * mid.tanh() < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s_star = lo.sqrt();
    if s_star <= r {
        slope(s_star)
    } else {
        slope(r)
    }
}

/// Scalar `φ = ξ'`, `g = tanh(s²) - tanh(ξ)`; bounded by 2 everywhere.
pub fn saturated_quadratic(params: KernelParams) -> InteractionKernel {
    let r = params.radius;
    let statistic: StatisticFn = Arc::new(|_x, xi, out| out[0] = xi[0]);
    let response: ResponseFn = Arc::new(|_t, s, out| out[0] = (s[0] * s[0]).tanh());
    let own: OwnFn = Arc::new(|_t, _x, xi, out| out[0] -= xi[0].tanh());
    InteractionKernel::Statistic(StatisticKernel::new(
        "saturated_quadratic",
        params.label_dim,
        1,
        1,
        statistic,
        Head::Separable {
            response,
            own,
            affine_response: false,
        },
        (r * r).tanh() + r.tanh(),
        saturated_slope(r).max(1.0),
        1.0,
        r,
    ))
}

pub fn catalog(params: KernelParams) -> Vec<KernelCatalogEntry> {
    vec![
        KernelCatalogEntry {
            name: "linear_consensus",
            kernel: linear_consensus(params),
            notes: "g = s - ξ; drift is m-independent: mean(ξ) - ξ_i; limit equals finite-m field",
        },
        KernelCatalogEntry {
            name: "quadratic_statistic",
            kernel: quadratic_statistic(params),
            notes: "g = s² - ξ; drift = mean² + Var/m - ξ_i; limit drops the Var/m term",
        },
        KernelCatalogEntry {
            name: "saturated_quadratic",
            kernel: saturated_quadratic(params),
            notes: "g = tanh(s²) - tanh(ξ); globally bounded by 2",
        },
    ]
}

pub fn kernel_by_name(name: &str, params: KernelParams) -> Result<InteractionKernel> {
    if params.dim != 1 && name != "linear_consensus" {
        return Err(Error::config(format!("kernel '{name}' is scalar; dim must be 1")));
    }
    if !(params.radius > 0.0) || params.dim == 0 || params.label_dim == 0 {
        return Err(Error::config("kernel radius and dimensions must be positive"));
    }
    match name {
        "linear_consensus" => Ok(linear_consensus(params)),
        "quadratic_statistic" => Ok(quadratic_statistic(params)),
        "saturated_quadratic" => Ok(saturated_quadratic(params)),
        other => Err(Error::config(format!(
            "unknown kernel '{other}'; available: {}",
            KERNEL_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(radius: f64) -> KernelParams {
        KernelParams {
            radius,
            ..KernelParams::default()
        }
    }

    fn agents(opinions: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        opinions.iter().map(|&o| (vec![0.0], vec![o])).collect()
    }

    fn refs(a: &[(Vec<f64>, Vec<f64>)]) -> Vec<AgentRef<'_>> {
        a.iter().map(|(x, o)| AgentRef::new(x, o)).collect()
    }

    #[test]
    fn linear_consensus_mean_minus_self() {
        let k = linear_consensus(params(4.0));
        let tail = agents(&[2.0, 2.0]);
        let v = evaluate_kernel(&k, 0.0, AgentRef::new(&[0.0], &[0.0]), &refs(&tail)).unwrap();
        assert_eq!(v, vec![2.0]);
    }

    #[test]
    fn quadratic_hand_value() {
        let k = quadratic_statistic(params(4.0));
        let tail = agents(&[0.0, 2.0]);
        let v = evaluate_kernel(&k, 0.0, AgentRef::new(&[0.0], &[0.0]), &refs(&tail)).unwrap();
        assert_eq!(v, vec![1.0]);
    }

    #[test]
    fn empty_tail_is_domain_error() {
        let k = quadratic_statistic(params(4.0));
        let err = evaluate_kernel(&k, 0.0, AgentRef::new(&[0.0], &[0.0]), &[]).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn opinion_outside_ball_names_component() {
        let k = quadratic_statistic(params(1.0));
        let tail = agents(&[0.5, 3.0]);
        let err = evaluate_kernel(&k, 0.0, AgentRef::new(&[0.0], &[0.0]), &refs(&tail)).unwrap_err();
        match err {
            Error::DomainViolation { component, .. } => assert_eq!(component, "tail[1] opinion"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn limit_field_values() {
        let q = quadratic_statistic(params(4.0));
        assert_eq!(kernel_limit_field(&q, 0.0, &[0.0], &[0.0], &[1.0]).unwrap(), vec![1.0]);
        let l = linear_consensus(params(4.0));
        assert_eq!(kernel_limit_field(&l, 0.0, &[0.3], &[1.7], &[1.7]).unwrap(), vec![0.0]);
    }

    #[test]
    fn limit_field_unsupported_for_black_box() {
        let bb = InteractionKernel::BlackBox(BlackBoxKernel::new(
            "bb",
            1,
            1,
            Arc::new(|_t, _h, _tail, out| out[0] = 0.0),
            KernelBounds {
                bound: 1.0,
                lipschitz: 1.0,
                radius: 1.0,
            },
        ));
        let err = kernel_limit_field(&bb, 0.0, &[0.0], &[0.0], &[0.0]).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn validation_clean_for_linear_consensus() {
        let k = linear_consensus(params(1.0));
        let report = validate_kernel(&k, 200, 1.0, 3).unwrap();
        assert_eq!(report.declared_bound, 2.0);
        assert_eq!(report.declared_lipschitz, 1.0);
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn validation_flags_understated_bound() {
        let k = quadratic_statistic(params(2.0)).with_declared(1.0, 4.0);
        let report = validate_kernel(&k, 64, 2.0, 5).unwrap();
        assert!(report.bound_violation);
        // true sup is r² + r = 6
        let worst = report.orders.iter().map(|o| o.max_abs).fold(0.0, f64::max);
        assert!(worst > 1.0 && worst <= 6.0 + 1e-12);
    }

    #[test]
    fn validation_flags_understated_lipschitz() {
        let k = quadratic_statistic(params(2.0)).with_declared(6.0, 0.5);
        let report = validate_kernel(&k, 64, 2.0, 5).unwrap();
        assert!(report.lipschitz_violation && !report.bound_violation);
    }

    #[test]
    fn validation_needs_two_probes() {
        let k = linear_consensus(params(1.0));
        assert!(matches!(validate_kernel(&k, 0, 1.0, 0), Err(Error::Domain(_))));
        assert!(matches!(validate_kernel(&k, 1, 1.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn catalog_kernels_validate_on_their_ball() {
        for r in [0.5, 1.0, 2.0] {
            for entry in catalog(params(r)) {
                let report = validate_kernel(&entry.kernel, 128, r, 9).unwrap();
                assert!(report.is_clean(), "{} r={r}: {report:?}", entry.name);
            }
        }
    }

    #[test]
    fn saturated_slope_is_a_sup() {
        let r = 3.0;
        let declared = saturated_slope(r);
        let scanned = (0..=30_000)
            .map(|i| {
                let s = r * i as f64 / 30_000.0;
                2.0 * s / (s * s).cosh().powi(2)
            })
            .fold(0.0, f64::max);
        assert!(declared >= scanned - 1e-12 && declared - scanned < 1e-6);
    }

    #[test]
    fn unknown_name_is_config_error() {
        assert!(matches!(kernel_by_name("nope", params(1.0)), Err(Error::Config(_))));
        assert!(matches!(
            kernel_by_name("quadratic_statistic", KernelParams { dim: 2, ..params(1.0) }),
            Err(Error::Config(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tail_permutation_symmetry(
                tail in proptest::collection::vec(-1.0f64..1.0, 1..7),
                head in -1.0f64..1.0,
                rot in 0usize..7,
            ) {
                for k in [quadratic_statistic(params(1.0)), saturated_quadratic(params(1.0)), linear_consensus(params(1.0))] {
                    let a = agents(&tail);
                    let mut b = a.clone();
                    b.reverse();
                    let len = b.len();
                    b.rotate_left(rot % len);
                    let h = AgentRef::new(&[0.2], std::slice::from_ref(&head));
                    let v1 = evaluate_kernel(&k, 0.0, h, &refs(&a)).unwrap();
                    let v2 = evaluate_kernel(&k, 0.0, h, &refs(&b)).unwrap();
                    // equal up to summation order of the statistic
                    prop_assert!((v1[0] - v2[0]).abs() <= 1e-15 * (1.0 + v1[0].abs()));
                }
            }

            #[test]
            fn limit_field_matches_constant_tail(
                s in -1.0f64..1.0, head in -1.0f64..1.0, m in 1usize..9,
            ) {
                // a tail of m copies of s has φ-mean exactly s
                for k in [quadratic_statistic(params(1.0)), saturated_quadratic(params(1.0)), linear_consensus(params(1.0))] {
                    let tail = agents(&vec![s; m]);
                    let h = AgentRef::new(&[0.0], std::slice::from_ref(&head));
                    let direct = evaluate_kernel(&k, 0.0, h, &refs(&tail)).unwrap();
                    let mean = tail.iter().map(|(_, o)| o[0]).sum::<f64>() / m as f64;
                    let limit = kernel_limit_field(&k, 0.0, &[0.0], &[head], &[mean]).unwrap();
                    prop_assert_eq!(direct, limit);
                }
            }
        }
    }
}
