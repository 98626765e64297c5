//! Opinion-field equation on the quadrature nodes of the label law:
//! `∂_t y(t, x_j) = Σ_{tuples} ν_{k_1}⋯ν_{k_m} G^(m)(t, x_j, y_j, …)` for
//! finite `m`, and `∂_t y = g(t, x, y, Σ_k ν_k φ(x_k, y_k))` in the limit.

use crate::error::{BlowUp, Error, Result};
use crate::force::{statistic_mean, tuple_force, Atoms, Points, RhsMode, Weights};
use crate::kernels::{InteractionKernel, StatisticKernel};
use crate::measures::{LabelMeasure, Profile};
use crate::ode::{integrate_grid, Scheme, TimeGrid};
use crate::particles::{check_inside, first_outside};

/// Values `y_j ∈ R^d` on the nodes of a label measure.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionField {
    nodes: LabelMeasure,
    opinion_dim: usize,
    values: Vec<f64>,
    time: f64,
}

impl OpinionField {
    pub fn new(nodes: LabelMeasure, opinion_dim: usize, values: Vec<f64>, time: f64) -> Result<Self> {
        if opinion_dim == 0 || values.len() != nodes.len() * opinion_dim {
            return Err(Error::domain(format!(
                "{} values for {} nodes of dimension {opinion_dim}",
                values.len(),
                nodes.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("opinion field values must be finite"));
        }
        Ok(OpinionField {
            nodes,
            opinion_dim,
            values,
            time,
        })
    }

    /// `y_j = y_0(x_j)` on every node.
    pub fn from_profile(nodes: LabelMeasure, profile: &Profile) -> Result<Self> {
        let d = profile.opinion_dim();
        let mut values = vec![0.0; nodes.len() * d];
        for j in 0..nodes.len() {
            profile.eval(nodes.atom(j), &mut values[j * d..(j + 1) * d]);
        }
        OpinionField::new(nodes, d, values, 0.0)
    }

    pub fn nodes(&self) -> &LabelMeasure {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.opinion_dim..(j + 1) * self.opinion_dim]
    }

    pub fn opinion_dim(&self) -> usize {
        self.opinion_dim
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn atoms<'a>(&'a self, values: &'a [f64]) -> Atoms<'a> {
        Atoms {
            label_dim: self.nodes.label_dim(),
            opinion_dim: self.opinion_dim,
            labels: self.nodes.atoms(),
            opinions: values,
            weights: Weights::detect(self.nodes.weights()),
        }
    }
}

/// Finite-`m` right-hand side at every node (flat `J × d`). Monte Carlo mode
/// uses the streams of the first call of [`opinion_solve`].
pub fn opinion_rhs(
    field: &OpinionField,
    kernel: &InteractionKernel,
    m: usize,
    mode: RhsMode,
    t: f64,
) -> Result<Vec<f64>> {
    opinion_rhs_with_error(field, kernel, m, mode, t).map(|(v, _)| v)
}

/// [`opinion_rhs`] with Monte Carlo standard errors (empty in exact mode).
pub fn opinion_rhs_with_error(
    field: &OpinionField,
    kernel: &InteractionKernel,
    m: usize,
    mode: RhsMode,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    mode.validate()?;
    check_inside(&field.values, field.opinion_dim, kernel.radius(), "value at node")?;
    let points = Points {
        labels: field.nodes.atoms(),
        opinions: &field.values,
    };
    let out = tuple_force(kernel, m, t, &field.atoms(&field.values), &points, mode.for_call(0))?;
    Ok((out.values, out.stderr.unwrap_or_default()))
}

fn require_statistic(kernel: &InteractionKernel) -> Result<&StatisticKernel> {
    kernel.as_statistic().ok_or_else(|| {
        Error::Unsupported(format!(
            "kernel '{}' is a black box; the large-m limit needs a statistic-form kernel",
            kernel.name()
        ))
    })
}

fn limit_rhs_into(k: &StatisticKernel, field: &OpinionField, values: &[f64], t: f64, out: &mut [f64]) {
    let d = field.opinion_dim;
    let mean = statistic_mean(k, &field.atoms(values));
    for j in 0..field.len() {
        k.eval_head(t, field.nodes.atom(j), &values[j * d..(j + 1) * d], &mean, &mut out[j * d..(j + 1) * d]);
    }
}

/// Limit right-hand side `g(t, x_j, y_j, Σ_k ν_k φ(x_k, y_k))`.
pub fn opinion_limit_rhs(field: &OpinionField, kernel: &InteractionKernel, t: f64) -> Result<Vec<f64>> {
    let k = require_statistic(kernel)?;
    if kernel.opinion_dim() != field.opinion_dim || kernel.label_dim() != field.nodes.label_dim() {
        return Err(Error::domain("field dimensions do not match the kernel"));
    }
    check_inside(&field.values, field.opinion_dim, kernel.radius(), "value at node")?;
    let mut out = vec![0.0; field.values.len()];
    limit_rhs_into(k, field, &field.values, t, &mut out);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct OpinionTrajectory {
    pub fields: Vec<OpinionField>,
    pub blow_up: Option<BlowUp>,
}

impl OpinionTrajectory {
    pub fn last(&self) -> &OpinionField {
        self.fields.last().expect("at least the initial field")
    }
}

fn assemble(
    y0: &OpinionField,
    grid: &TimeGrid,
    radius: f64,
    solution: crate::ode::GridSolution,
) -> Result<OpinionTrajectory> {
    let fields = solution
        .states
        .into_iter()
        .enumerate()
        .map(|(s, values)| OpinionField::new(y0.nodes.clone(), y0.opinion_dim, values, grid.times()[s]))
        .collect::<Result<Vec<_>>>()?;
    Ok(OpinionTrajectory {
        fields,
        blow_up: solution.rejected.map(|r| BlowUp {
            time: r.time,
            index: r.index,
            norm: r.norm,
            radius,
        }),
    })
}

pub fn opinion_solve(
    y0: &OpinionField,
    kernel: &InteractionKernel,
    m: usize,
    grid: &TimeGrid,
    scheme: Scheme,
    mode: RhsMode,
) -> Result<OpinionTrajectory> {
    mode.validate()?;
    let radius = kernel.radius();
    let d = y0.opinion_dim;
    check_inside(&y0.values, d, radius, "initial value at node")?;
    let solution = integrate_grid(
        y0.values.clone(),
        grid,
        scheme,
        |t, y, call, out| {
            let points = Points {
                labels: y0.nodes.atoms(),
                opinions: y,
            };
            let f = tuple_force(kernel, m, t, &y0.atoms(y), &points, mode.for_call(call))?;
            out.copy_from_slice(&f.values);
            Ok(())
        },
        |y| first_outside(y, d, radius),
    )?;
    assemble(y0, grid, radius, solution)
}

pub fn opinion_limit_solve(
    y0: &OpinionField,
    kernel: &InteractionKernel,
    grid: &TimeGrid,
    scheme: Scheme,
) -> Result<OpinionTrajectory> {
    let k = require_statistic(kernel)?;
    let radius = kernel.radius();
    let d = y0.opinion_dim;
    check_inside(&y0.values, d, radius, "initial value at node")?;
    let solution = integrate_grid(
        y0.values.clone(),
        grid,
        scheme,
        |t, y, _call, out| {
            limit_rhs_into(k, y0, y, t, out);
            Ok(())
        },
        |y| first_outside(y, d, radius),
    )?;
    assemble(y0, grid, radius, solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{linear_consensus, quadratic_statistic, BlackBoxKernel, KernelBounds, KernelParams};
    use std::sync::Arc;

    fn params(radius: f64) -> KernelParams {
        KernelParams {
            radius,
            ..KernelParams::default()
        }
    }

    fn two_node(a: f64, b: f64) -> OpinionField {
        let nu = LabelMeasure::new(1, vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        OpinionField::new(nu, 1, vec![a, b], 0.0).unwrap()
    }

    #[test]
    fn quadratic_two_node_rhs() {
        let k = quadratic_statistic(params(4.0));
        let f = two_node(0.0, 2.0);
        for m in 1..=6 {
            let rhs = opinion_rhs(&f, &k, m, RhsMode::exact(), 0.0).unwrap();
            let inv = 1.0 / m as f64;
            assert!((rhs[0] - (1.0 + inv)).abs() < 1e-15);
            assert!((rhs[1] - (1.0 + inv - 2.0)).abs() < 1e-15);
        }
        assert_eq!(opinion_limit_rhs(&f, &k, 0.0).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn finite_minus_limit_is_variance_over_m() {
        let k = quadratic_statistic(params(4.0));
        let nu = LabelMeasure::new(1, vec![0.0, 0.5, 1.0], vec![0.2, 0.3, 0.5]).unwrap();
        let f = OpinionField::new(nu, 1, vec![-0.5, 1.0, 0.25], 0.0).unwrap();
        let mean = -0.5 * 0.2 + 1.0 * 0.3 + 0.25 * 0.5;
        let var = 0.2 * (-0.5 - mean) * (-0.5 - mean) + 0.3 * (1.0 - mean) * (1.0 - mean) + 0.5 * (0.25 - mean) * (0.25 - mean);
        let limit = opinion_limit_rhs(&f, &k, 0.0).unwrap();
        for m in [1, 2, 3, 5] {
            let rhs = opinion_rhs(&f, &k, m, RhsMode::exact(), 0.0).unwrap();
            for j in 0..3 {
                assert!((rhs[j] - limit[j] - var / m as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn consensus_constant_field_is_stationary() {
        let k = linear_consensus(params(4.0));
        let f = two_node(0.7, 0.7);
        assert_eq!(opinion_rhs(&f, &k, 3, RhsMode::exact(), 0.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_node_uses_own_statistic() {
        let k = quadratic_statistic(params(4.0));
        let nu = LabelMeasure::new(1, vec![0.4], vec![1.0]).unwrap();
        let f = OpinionField::new(nu, 1, vec![1.5], 0.0).unwrap();
        for m in 1..4 {
            assert_eq!(opinion_rhs(&f, &k, m, RhsMode::exact(), 0.0).unwrap(), vec![1.5 * 1.5 - 1.5]);
        }
    }

    #[test]
    fn affine_limit_equals_finite_m() {
        let k = linear_consensus(params(4.0));
        let nu = LabelMeasure::new(1, vec![0.0, 0.5, 1.0], vec![0.2, 0.3, 0.5]).unwrap();
        let f = OpinionField::new(nu, 1, vec![-0.5, 1.0, 0.25], 0.0).unwrap();
        let limit = opinion_limit_rhs(&f, &k, 0.0).unwrap();
        for m in 1..5 {
            assert_eq!(opinion_rhs(&f, &k, m, RhsMode::exact(), 0.0).unwrap(), limit);
        }
    }

    #[test]
    fn limit_solution_closed_form() {
        let k = quadratic_statistic(params(4.0));
        let grid = TimeGrid::uniform(1.0, 1e-3).unwrap();
        let traj = opinion_limit_solve(&two_node(0.0, 2.0), &k, &grid, Scheme::Rk4).unwrap();
        for f in &traj.fields {
            let e = (-f.time()).exp();
            assert!((f.value(0)[0] - (1.0 - e)).abs() < 1e-8);
            assert!((f.value(1)[0] - (1.0 + e)).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_consensus_value_is_fixed() {
        let k = quadratic_statistic(params(4.0));
        let grid = TimeGrid::uniform(1.0, 0.1).unwrap();
        let traj = opinion_limit_solve(&two_node(1.0, 1.0), &k, &grid, Scheme::Rk4).unwrap();
        for f in &traj.fields {
            assert_eq!(f.values(), &[1.0, 1.0]);
        }
    }

    /// Reduced oracle: with `μ` the node mean and `δ = y_b - y_a`,
    /// `μ' = μ² + δ²/(4m) - μ` and `δ' = -δ`.
    fn reduced_oracle(m: f64, t_final: f64, dt: f64) -> (f64, f64) {
        let f = |mu: f64, delta: f64| (mu * mu + delta * delta / (4.0 * m) - mu, -delta);
        let steps = (t_final / dt).round() as usize;
        let (mut mu, mut delta) = (1.0, 2.0);
        for _ in 0..steps {
            let (a1, b1) = f(mu, delta);
            let (a2, b2) = f(mu + 0.5 * dt * a1, delta + 0.5 * dt * b1);
            let (a3, b3) = f(mu + 0.5 * dt * a2, delta + 0.5 * dt * b2);
            let (a4, b4) = f(mu + dt * a3, delta + dt * b3);
            mu += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            delta += dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        (mu - 0.5 * delta, mu + 0.5 * delta)
    }

    #[test]
    fn finite_m_matches_reduced_oracle() {
        let k = quadratic_statistic(params(4.0));
        let grid = TimeGrid::uniform(1.0, 1e-3).unwrap();
        let traj = opinion_solve(&two_node(0.0, 2.0), &k, 4, &grid, Scheme::Rk4, RhsMode::exact()).unwrap();
        let (a, b) = reduced_oracle(4.0, 1.0, 1e-3);
        assert!((traj.last().value(0)[0] - a).abs() < 1e-6);
        assert!((traj.last().value(1)[0] - b).abs() < 1e-6);
    }

    #[test]
    fn gap_to_limit_shrinks_with_m() {
        let k = quadratic_statistic(params(4.0));
        let grid = TimeGrid::uniform(1.0, 1e-2).unwrap();
        let y0 = two_node(0.0, 2.0);
        let limit = opinion_limit_solve(&y0, &k, &grid, Scheme::Rk4).unwrap();
        let mut previous: Option<Vec<f64>> = None;
        for m in [2, 4, 8, 16, 32] {
            let traj = opinion_solve(&y0, &k, m, &grid, Scheme::Rk4, RhsMode::exact()).unwrap();
            let gaps: Vec<f64> = traj
                .fields
                .iter()
                .zip(&limit.fields)
                .map(|(a, b)| a.values().iter().zip(b.values()).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max))
                .collect();
            if let Some(prev) = &previous {
                for (g, p) in gaps.iter().zip(prev) {
                    assert!(*g <= p + 1e-9);
                }
            }
            previous = Some(gaps);
        }
    }

    #[test]
    fn monte_carlo_rhs_within_error_bars() {
        let k = quadratic_statistic(params(4.0));
        let nu = LabelMeasure::new(1, vec![0.0, 0.5, 1.0], vec![0.2, 0.3, 0.5]).unwrap();
        let f = OpinionField::new(nu, 1, vec![-0.5, 1.0, 0.25], 0.0).unwrap();
        let exact = opinion_rhs(&f, &k, 3, RhsMode::exact(), 0.0).unwrap();
        let (mc, se) = opinion_rhs_with_error(&f, &k, 3, RhsMode::monte_carlo(100_000, 42), 0.0).unwrap();
        for j in 0..3 {
            assert!((mc[j] - exact[j]).abs() <= 3.0 * se[j], "{j}: {} vs {} ± {}", mc[j], exact[j], se[j]);
        }
    }

    #[test]
    fn black_box_has_no_limit() {
        let bb = InteractionKernel::BlackBox(BlackBoxKernel::new(
            "bb",
            1,
            1,
            Arc::new(|_t, _h, _tail, out| out[0] = 0.0),
            KernelBounds {
                bound: 1.0,
                lipschitz: 1.0,
                radius: 4.0,
            },
        ));
        let f = two_node(0.0, 2.0);
        assert!(matches!(opinion_limit_rhs(&f, &bb, 0.0), Err(Error::Unsupported(_))));
        let grid = TimeGrid::uniform(0.1, 0.1).unwrap();
        assert!(matches!(opinion_limit_solve(&f, &bb, &grid, Scheme::Rk4), Err(Error::Unsupported(_))));
        // finite m works
        assert_eq!(opinion_rhs(&f, &bb, 2, RhsMode::exact(), 0.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_time_grid_returns_initial() {
        let k = quadratic_statistic(params(4.0));
        let y0 = two_node(0.0, 2.0);
        let traj = opinion_solve(&y0, &k, 2, &TimeGrid::new(vec![0.0]).unwrap(), Scheme::Rk4, RhsMode::exact()).unwrap();
        assert_eq!(traj.fields, vec![y0]);
    }
}
