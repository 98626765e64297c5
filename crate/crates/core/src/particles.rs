//! Microscopic labeled particle system with m-body interactions.
//!
//! Labels are stationary; opinions follow
//! `ξ_i' = N^{-m} Σ_{j ∈ [N]^m} G^(m)(t, x_i, ξ_i, x_{j_1}, ξ_{j_1}, …)`,
//! the sum running over all tuples, repeats and `i` itself included.

use crate::error::{BlowUp, Error, Result};
use crate::force::{tuple_force, Atoms, Evaluation, Points, RhsMode, Weights, DEFAULT_ENUMERATION_CAP};
use crate::kernels::{euclidean_norm, InteractionKernel};
use crate::ode::{integrate_grid, Scheme, TimeGrid};
use crate::rng::RngStream;

/// `N` agents with labels in `R^{d_x}` and opinions in `R^d`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    label_dim: usize,
    opinion_dim: usize,
    labels: Vec<f64>,
    opinions: Vec<f64>,
    time: f64,
}

impl ParticleEnsemble {
    pub fn new(
        label_dim: usize,
        opinion_dim: usize,
        labels: Vec<f64>,
        opinions: Vec<f64>,
        time: f64,
    ) -> Result<Self> {
        if label_dim == 0 || opinion_dim == 0 {
            return Err(Error::domain("label and opinion dimensions must be >= 1"));
        }
        if opinions.is_empty() {
            return Err(Error::domain("an ensemble needs N >= 1 agents"));
        }
        if opinions.len() % opinion_dim != 0 || labels.len() % label_dim != 0 {
            return Err(Error::domain("flat arrays are not a multiple of their dimension"));
        }
        if labels.len() / label_dim != opinions.len() / opinion_dim {
            return Err(Error::domain(format!(
                "{} labels but {} opinions",
                labels.len() / label_dim,
                opinions.len() / opinion_dim
            )));
        }
        if labels.iter().chain(&opinions).any(|v| !v.is_finite()) {
            return Err(Error::domain("ensemble contains non-finite coordinates"));
        }
        Ok(ParticleEnsemble {
            label_dim,
            opinion_dim,
            labels,
            opinions,
            time,
        })
    }

    /// Scalar labels and opinions at time 0.
    pub fn from_scalars(labels: &[f64], opinions: &[f64]) -> Result<Self> {
        ParticleEnsemble::new(1, 1, labels.to_vec(), opinions.to_vec(), 0.0)
    }

    pub fn len(&self) -> usize {
        self.opinions.len() / self.opinion_dim
    }

    pub fn is_empty(&self) -> bool {
        self.opinions.is_empty()
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

    pub fn label(&self, i: usize) -> &[f64] {
        &self.labels[i * self.label_dim..(i + 1) * self.label_dim]
    }

    pub fn opinion(&self, i: usize) -> &[f64] {
        &self.opinions[i * self.opinion_dim..(i + 1) * self.opinion_dim]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Same agents in the order `order[0], order[1], …`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(Error::domain("permutation length differs from N"));
        }
        let mut labels = Vec::with_capacity(self.labels.len());
        let mut opinions = Vec::with_capacity(self.opinions.len());
        for &i in order {
            if i >= self.len() {
                return Err(Error::domain(format!("permutation index {i} out of range")));
            }
            labels.extend_from_slice(self.label(i));
            opinions.extend_from_slice(self.opinion(i));
        }
        ParticleEnsemble::new(self.label_dim, self.opinion_dim, labels, opinions, self.time)
    }

    pub(crate) fn atoms(&self) -> Atoms<'_> {
        Atoms {
            label_dim: self.label_dim,
            opinion_dim: self.opinion_dim,
            labels: &self.labels,
            opinions: &self.opinions,
            weights: Weights::Uniform,
        }
    }
}

/// First agent whose opinion norm exceeds `radius`.
pub(crate) fn first_outside(opinions: &[f64], d: usize, radius: f64) -> Option<(usize, f64)> {
    opinions
        .chunks(d)
        .enumerate()
        .map(|(i, o)| (i, euclidean_norm(o)))
        .find(|&(_, n)| !(n <= radius))
}

pub(crate) fn check_inside(opinions: &[f64], d: usize, radius: f64, what: &str) -> Result<()> {
    match first_outside(opinions, d, radius) {
        Some((i, norm)) => Err(Error::DomainViolation {
            component: format!("{what} {i}"),
            norm,
            radius,
        }),
        None => Ok(()),
    }
}

fn drift(
    ensemble: &ParticleEnsemble,
    kernel: &InteractionKernel,
    m: usize,
    t: f64,
    evaluation: Evaluation,
) -> Result<crate::force::ForceOutput> {
    check_inside(&ensemble.opinions, ensemble.opinion_dim, kernel.radius(), "opinion of agent")?;
    let points = Points {
        labels: &ensemble.labels,
        opinions: &ensemble.opinions,
    };
    tuple_force(kernel, m, t, &ensemble.atoms(), &points, evaluation)
}

/// Exact drift of every agent, flat `N × d`, with the default enumeration cap.
pub fn rhs_exact(ensemble: &ParticleEnsemble, kernel: &InteractionKernel, m: usize, t: f64) -> Result<Vec<f64>> {
    rhs_exact_capped(ensemble, kernel, m, t, DEFAULT_ENUMERATION_CAP)
}

pub fn rhs_exact_capped(
    ensemble: &ParticleEnsemble,
    kernel: &InteractionKernel,
    m: usize,
    t: f64,
    enumeration_cap: f64,
) -> Result<Vec<f64>> {
    Ok(drift(ensemble, kernel, m, t, Evaluation::Exact { enumeration_cap })?.values)
}

/// Monte Carlo drift: agent `i` averages `samples` uniform tuples drawn from
/// `stream.substream(i)`.
pub fn rhs_monte_carlo(
    ensemble: &ParticleEnsemble,
    kernel: &InteractionKernel,
    m: usize,
    t: f64,
    samples: usize,
    stream: RngStream,
) -> Result<Vec<f64>> {
    Ok(rhs_monte_carlo_with_error(ensemble, kernel, m, t, samples, stream)?.0)
}

/// Monte Carlo drift together with per-component standard errors
/// (`NaN` when `samples == 1`).
pub fn rhs_monte_carlo_with_error(
    ensemble: &ParticleEnsemble,
    kernel: &InteractionKernel,
    m: usize,
    t: f64,
    samples: usize,
    stream: RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if samples == 0 {
        return Err(Error::domain("sample count S must be >= 1"));
    }
    let out = drift(ensemble, kernel, m, t, Evaluation::MonteCarlo { samples, stream })?;
    Ok((out.values, out.stderr.unwrap_or_default()))
}

/// Snapshots of an ensemble on a time grid. Labels are stored once.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    label_dim: usize,
    opinion_dim: usize,
    labels: Vec<f64>,
    opinions: Vec<Vec<f64>>,
    blow_up: Option<BlowUp>,
}

impl Trajectory {
    /// Number of stored snapshots (shorter than the grid after a blow-up).
    pub fn len(&self) -> usize {
        self.opinions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opinions.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label_dim(&self) -> usize {
        self.label_dim
    }

    pub fn opinion_dim(&self) -> usize {
        self.opinion_dim
    }

    pub fn agent_count(&self) -> usize {
        self.labels.len() / self.label_dim
    }

    pub fn opinions_at(&self, k: usize) -> &[f64] {
        &self.opinions[k]
    }

    pub fn snapshot(&self, k: usize) -> ParticleEnsemble {
        ParticleEnsemble {
            label_dim: self.label_dim,
            opinion_dim: self.opinion_dim,
            labels: self.labels.clone(),
            opinions: self.opinions[k].clone(),
            time: self.times[k],
        }
    }

    pub fn last(&self) -> ParticleEnsemble {
        self.snapshot(self.len() - 1)
    }

    /// Snapshot index whose time equals `t`.
    pub fn index_of_time(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Set when the opinions left the kernel's certified ball; the
    /// trajectory then ends at the last admissible grid time.
    pub fn blow_up(&self) -> Option<BlowUp> {
        self.blow_up
    }

    pub fn is_complete(&self) -> bool {
        self.blow_up.is_none()
    }
}

/// Advances the ensemble across `grid` with a fixed-step scheme. The grid's
/// first time is the initial time.
pub fn integrate(
    initial: &ParticleEnsemble,
    kernel: &InteractionKernel,
    m: usize,
    grid: &TimeGrid,
    scheme: Scheme,
    mode: RhsMode,
) -> Result<Trajectory> {
    mode.validate()?;
    let radius = kernel.radius();
    check_inside(&initial.opinions, initial.opinion_dim, radius, "initial opinion of agent")?;
    let d = initial.opinion_dim;
    let labels = &initial.labels;
    let solution = integrate_grid(
        initial.opinions.clone(),
        grid,
        scheme,
        |t, y, call, out| {
            let atoms = Atoms {
                label_dim: initial.label_dim,
                opinion_dim: d,
                labels,
                opinions: y,
                weights: Weights::Uniform,
            };
            let points = Points { labels, opinions: y };
            let f = tuple_force(kernel, m, t, &atoms, &points, mode.for_call(call))?;
            out.copy_from_slice(&f.values);
            Ok(())
        },
        |y| first_outside(y, d, radius),
    )?;
    let count = solution.states.len();
    Ok(Trajectory {
        times: grid.times()[..count].to_vec(),
        label_dim: initial.label_dim,
        opinion_dim: d,
        labels: initial.labels.clone(),
        opinions: solution.states,
        blow_up: solution.rejected.map(|r| BlowUp {
            time: r.time,
            index: r.index,
            norm: r.norm,
            radius,
        }),
    })
}
