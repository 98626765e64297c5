//! Mean-field force and the Vlasov solution as a pushed-forward weighted
//! sample: atoms keep their labels and weights while their opinions follow
//! the characteristics `ξ' = X^[m][f(t)](x, ξ)`.

use crate::error::{BlowUp, Error, Result};
use crate::force::{tuple_force, Atoms, Evaluation, Points, RhsMode};
use crate::kernels::InteractionKernel;
use crate::measures::WeightedMeasure;
use crate::ode::{integrate_grid, Scheme, TimeGrid};
use crate::particles::{check_inside, first_outside};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct VlasovState {
    pub measure: WeightedMeasure,
    pub time: f64,
}

impl VlasovState {
    pub fn new(measure: WeightedMeasure, time: f64) -> Self {
        VlasovState { measure, time }
    }
}

fn single_evaluation(mode: RhsMode) -> Result<Evaluation> {
    mode.validate()?;
    Ok(match mode {
        RhsMode::Exact { enumeration_cap } => Evaluation::Exact { enumeration_cap },
        RhsMode::MonteCarlo { samples, seed } => Evaluation::MonteCarlo {
            samples,
            stream: RngStream::new(seed),
        },
    })
}

/// `X^[m][f](t, x, ξ) = ∫ G^(m)(t, x, ξ, z_1, …, z_m) df^{⊗m}` for the
/// weighted atoms of `state`.
pub fn mean_field_force(
    state: &VlasovState,
    kernel: &InteractionKernel,
    m: usize,
    t: f64,
    label: &[f64],
    opinion: &[f64],
    mode: RhsMode,
) -> Result<Vec<f64>> {
    mean_field_force_at(state, kernel, m, t, label, opinion, mode)
}

/// [`mean_field_force`] at several points (flat arrays). In Monte Carlo mode
/// point `i` draws from substream `i` of the seed's stream.
pub fn mean_field_force_at(
    state: &VlasovState,
    kernel: &InteractionKernel,
    m: usize,
    t: f64,
    labels: &[f64],
    opinions: &[f64],
    mode: RhsMode,
) -> Result<Vec<f64>> {
    let evaluation = single_evaluation(mode)?;
    let d = state.measure.opinion_dim();
    let dx = state.measure.label_dim();
    if opinions.len() % d != 0 || labels.len() / dx != opinions.len() / d || labels.len() % dx != 0 {
        return Err(Error::domain("evaluation point shapes do not match the state"));
    }
    let radius = kernel.radius();
    check_inside(state.measure.opinions(), d, radius, "opinion of atom")?;
    check_inside(opinions, d, radius, "opinion of probe")?;
    let points = Points { labels, opinions };
    Ok(tuple_force(kernel, m, t, &state.measure.atoms(), &points, evaluation)?.values)
}

/// Vlasov states on a time grid.
#[derive(Debug, Clone)]
pub struct VlasovTrajectory {
    pub states: Vec<VlasovState>,
    pub blow_up: Option<BlowUp>,
}

impl VlasovTrajectory {
    pub fn last(&self) -> &VlasovState {
        self.states.last().expect("at least the initial state")
    }
}

/// Vlasov solution together with passive tracers advected by the same
/// mean-field force.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub trajectory: VlasovTrajectory,
    /// Tracer opinions at each stored grid time (flat, `T × d`).
    pub tracers: Vec<Vec<f64>>,
}

pub fn vlasov_solve(
    f0: &WeightedMeasure,
    kernel: &InteractionKernel,
    m: usize,
    grid: &TimeGrid,
    scheme: Scheme,
    mode: RhsMode,
) -> Result<VlasovTrajectory> {
    Ok(vlasov_flow(f0, &[], &[], kernel, m, grid, scheme, mode)?.trajectory)
}

/// Solves the Vlasov flow of `f0` and carries the tracer points
/// `(tracer_labels, tracer_opinions)` along its characteristics. Tracers do
/// not influence the force. In Monte Carlo mode tracer `j` uses the point
/// substream `K + j`.
#[allow(clippy::too_many_arguments)]
pub fn vlasov_flow(
    f0: &WeightedMeasure,
    tracer_labels: &[f64],
    tracer_opinions: &[f64],
    kernel: &InteractionKernel,
    m: usize,
    grid: &TimeGrid,
    scheme: Scheme,
    mode: RhsMode,
) -> Result<FlowSolution> {
    mode.validate()?;
    let d = f0.opinion_dim();
    let dx = f0.label_dim();
    if tracer_opinions.len() % d != 0 || tracer_labels.len() % dx != 0 || tracer_labels.len() / dx != tracer_opinions.len() / d {
        return Err(Error::domain("tracer shapes do not match the measure"));
    }
    let radius = kernel.radius();
    check_inside(f0.opinions(), d, radius, "initial opinion of atom")?;
    check_inside(tracer_opinions, d, radius, "initial opinion of tracer")?;

    let k = f0.len();
    let split = k * d;
    let mut all_labels = f0.labels().to_vec();
    all_labels.extend_from_slice(tracer_labels);
    let mut y0 = f0.opinions().to_vec();
    y0.extend_from_slice(tracer_opinions);
    let weights = f0.atoms().weights;

    let solution = integrate_grid(
        y0,
        grid,
        scheme,
        |t, y, call, out| {
            let atoms = Atoms {
                label_dim: dx,
                opinion_dim: d,
                labels: f0.labels(),
                opinions: &y[..split],
                weights,
            };
            let points = Points {
                labels: &all_labels,
                opinions: y,
            };
            let f = tuple_force(kernel, m, t, &atoms, &points, mode.for_call(call))?;
            out.copy_from_slice(&f.values);
            Ok(())
        },
        |y| first_outside(y, d, radius),
    )?;

    let mut states = Vec::with_capacity(solution.states.len());
    let mut tracers = Vec::with_capacity(solution.states.len());
    for (s, y) in solution.states.into_iter().enumerate() {
        tracers.push(y[split..].to_vec());
        let mut y = y;
        y.truncate(split);
        states.push(VlasovState {
            measure: f0.with_opinions(y)?,
            time: grid.times()[s],
        });
    }
    Ok(FlowSolution {
        trajectory: VlasovTrajectory {
            states,
            blow_up: solution.rejected.map(|r| BlowUp {
                time: r.time,
                index: r.index,
                norm: r.norm,
                radius,
            }),
        },
        tracers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{evaluate_kernel, linear_consensus, quadratic_statistic, AgentRef, KernelParams};
    use crate::measures::empirical_measure;
    use crate::particles::{integrate, rhs_exact, ParticleEnsemble};

    fn params(radius: f64) -> KernelParams {
        KernelParams {
            radius,
            ..KernelParams::default()
        }
    }

    #[test]
    fn quadratic_weighted_force() {
        let k = quadratic_statistic(params(4.0));
        let mu = WeightedMeasure::new(1, 1, vec![0.0, 1.0], vec![0.0, 2.0], vec![0.5, 0.5]).unwrap();
        let state = VlasovState::new(mu, 0.0);
        let f = mean_field_force(&state, &k, 2, 0.0, &[0.0], &[0.0], RhsMode::exact()).unwrap();
        assert_eq!(f, vec![1.5]);
    }

    #[test]
    fn uniform_weights_reproduce_particle_drift() {
        let k = quadratic_statistic(params(4.0));
        let e = ParticleEnsemble::from_scalars(&[0.1, 0.4, 0.8], &[0.3, -1.2, 2.0]).unwrap();
        let state = VlasovState::new(empirical_measure(&e), 0.0);
        let drift = rhs_exact(&e, &k, 3, 0.0).unwrap();
        let force = mean_field_force_at(&state, &k, 3, 0.0, e.labels(), e.opinions(), RhsMode::exact()).unwrap();
        assert_eq!(drift, force);
    }

    #[test]
    fn single_atom_is_constant_tail() {
        let k = quadratic_statistic(params(4.0));
        let mu = WeightedMeasure::uniform(1, 1, vec![0.3], vec![1.1]).unwrap();
        let state = VlasovState::new(mu, 0.0);
        let f = mean_field_force(&state, &k, 3, 0.0, &[0.0], &[0.5], RhsMode::exact()).unwrap();
        let a = AgentRef::new(&[0.3], &[1.1]);
        let direct = evaluate_kernel(&k, 0.0, AgentRef::new(&[0.0], &[0.5]), &[a, a, a]).unwrap();
        assert_eq!(f, direct);
    }

    #[test]
    fn uniform_measure_flow_equals_particles_bitwise() {
        let k = quadratic_statistic(params(4.0));
        let e = ParticleEnsemble::from_scalars(&[0.1, 0.4, 0.8, 0.9], &[0.3, -1.2, 1.0, 0.0]).unwrap();
        let grid = TimeGrid::uniform(0.5, 0.01).unwrap();
        for mode in [RhsMode::exact(), RhsMode::monte_carlo(16, 4)] {
            let p = integrate(&e, &k, 2, &grid, Scheme::Rk4, mode).unwrap();
            let v = vlasov_solve(&empirical_measure(&e), &k, 2, &grid, Scheme::Rk4, mode).unwrap();
            assert_eq!(p.len(), v.states.len());
            for s in 0..p.len() {
                assert_eq!(p.opinions_at(s), v.states[s].measure.opinions());
            }
        }
    }

    #[test]
    fn weighted_consensus_closed_form() {
        let k = linear_consensus(params(4.0));
        let labels = vec![0.0, 0.5, 1.0];
        let y0 = vec![-1.0, 0.5, 2.0];
        let w = vec![0.2, 0.5, 0.3];
        let mu = WeightedMeasure::new(1, 1, labels, y0.clone(), w.clone()).unwrap();
        let grid = TimeGrid::uniform(1.0, 1e-3).unwrap();
        let traj = vlasov_solve(&mu, &k, 2, &grid, Scheme::Rk4, RhsMode::exact()).unwrap();
        let bar: f64 = y0.iter().zip(&w).map(|(a, b)| a * b).sum();
        let e = (-1.0f64).exp();
        for (j, &y) in y0.iter().enumerate() {
            let expect = bar + (y - bar) * e;
            assert!((traj.last().measure.opinion(j)[0] - expect).abs() < 1e-8);
        }
        for s in &traj.states {
            assert_eq!(s.measure.weights(), &w[..]);
            assert_eq!(s.measure.labels(), mu.labels());
        }
    }

    #[test]
    fn single_time_grid_returns_initial() {
        let k = linear_consensus(params(4.0));
        let mu = WeightedMeasure::uniform(1, 1, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let traj = vlasov_solve(&mu, &k, 1, &TimeGrid::new(vec![0.0]).unwrap(), Scheme::Rk4, RhsMode::exact()).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.states[0].measure, mu);
    }

    #[test]
    fn tracers_follow_the_force_without_feedback() {
        let k = quadratic_statistic(params(4.0));
        let mu = WeightedMeasure::uniform(1, 1, vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let grid = TimeGrid::uniform(0.5, 0.05).unwrap();
        let plain = vlasov_solve(&mu, &k, 2, &grid, Scheme::Rk4, RhsMode::exact()).unwrap();
        // a tracer placed on an atom moves with it
        let flow = vlasov_flow(&mu, &[1.0, 0.3], &[1.0, 0.2], &k, 2, &grid, Scheme::Rk4, RhsMode::exact()).unwrap();
        for s in 0..plain.states.len() {
            assert_eq!(plain.states[s].measure.opinions(), flow.trajectory.states[s].measure.opinions());
            assert_eq!(flow.tracers[s][0], plain.states[s].measure.opinion(1)[0]);
        }
    }

    #[test]
    fn coupled_initializations_stay_within_gronwall_ceiling() {
        use crate::transport::{wasserstein_assignment, GroundMetric};
        let k = quadratic_statistic(params(2.0));
        let n = 24;
        let labels: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let a: Vec<f64> = labels.iter().map(|x| 0.5 * x).collect();
        let b: Vec<f64> = labels.iter().map(|x| 0.5 * x + 0.05 * (7.0 * x).sin()).collect();
        let grid = TimeGrid::uniform(1.0, 0.05).unwrap();
        let m = 2;
        let ta = vlasov_solve(&WeightedMeasure::uniform(1, 1, labels.clone(), a).unwrap(), &k, m, &grid, Scheme::Rk4, RhsMode::exact()).unwrap();
        let tb = vlasov_solve(&WeightedMeasure::uniform(1, 1, labels.clone(), b).unwrap(), &k, m, &grid, Scheme::Rk4, RhsMode::exact()).unwrap();
        let metric = GroundMetric::phase_space(1, 1);
        let w1 = |s: usize| {
            let pa: Vec<f64> = labels.iter().zip(ta.states[s].measure.opinions()).flat_map(|(x, y)| [*x, *y]).collect();
            let pb: Vec<f64> = labels.iter().zip(tb.states[s].measure.opinions()).flat_map(|(x, y)| [*x, *y]).collect();
            wasserstein_assignment(&pa, &pb, 1.0, &metric, 64).unwrap().distance
        };
        let c = 2.0 * k.lipschitz() * (1.0 + m as f64);
        let w0 = w1(0);
        for (s, &t) in grid.times().iter().enumerate() {
            assert!(w1(s) <= (c * t).exp() * w0 + 1e-12);
        }
    }
}
