//! Liouville dynamics represented by an ensemble of independent runs, with
//! permutation-sampled symmetrized marginals.
//!
//! The law `F^N(t)` of the N-particle state is the image of `f_0^{⊗N}`
//! under the particle flow, so `R` independent runs are `R` exact samples of
//! it. One uniform permutation per run replaces the `N!`-term
//! symmetrization.

use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::force::RhsMode;
use crate::kernels::InteractionKernel;
use crate::measures::{sample_initial, InitialDatumSpec};
use crate::ode::{Scheme, TimeGrid};
use crate::particles::{integrate, Trajectory};
use crate::rng::RngStream;

const INITIAL: u64 = 1;
const DYNAMICS: u64 = 2;

/// Stream for the initial draw of run `run`.
pub fn run_initial_stream(master_seed: u64, run: usize) -> RngStream {
    RngStream::new(master_seed).derive(&[INITIAL, run as u64])
}

/// Evaluation mode of run `run`: Monte Carlo seeds are re-derived per run.
pub fn run_mode(mode: RhsMode, master_seed: u64, run: usize) -> RhsMode {
    match mode {
        RhsMode::Exact { .. } => mode,
        RhsMode::MonteCarlo { samples, seed } => RhsMode::MonteCarlo {
            samples,
            seed: RngStream::new(master_seed).derive(&[DYNAMICS, run as u64, seed]).key(),
        },
    }
}

#[derive(Debug, Clone)]
pub struct LiouvilleEnsemble {
    runs: Vec<Trajectory>,
    agents: usize,
    master_seed: u64,
}

impl LiouvilleEnsemble {
    pub fn runs(&self) -> &[Trajectory] {
        &self.runs
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// First blow-up among the runs, if any.
    pub fn blow_up(&self) -> Option<crate::error::BlowUp> {
        self.runs.iter().find_map(Trajectory::blow_up)
    }

    fn snapshot_index(&self, run: usize, t: f64) -> Result<usize> {
        self.runs[run].index_of_time(t).ok_or_else(|| {
            Error::domain(format!(
                "t = {t} is not a stored grid time of run {run}; snapshots are not interpolated"
            ))
        })
    }
}

/// `R` independent runs of the `N`-particle system from i.i.d. `f_0` data.
#[allow(clippy::too_many_arguments)]
pub fn sample_liouville_ensemble(
    spec: &InitialDatumSpec,
    n: usize,
    runs: usize,
    kernel: &InteractionKernel,
    m: usize,
    grid: &TimeGrid,
    scheme: Scheme,
    mode: RhsMode,
    master_seed: u64,
) -> Result<LiouvilleEnsemble> {
    if runs == 0 {
        return Err(Error::domain("ensemble needs R >= 1 runs"));
    }
    if n == 0 {
        return Err(Error::domain("ensemble needs N >= 1 agents"));
    }
    let trajectories = (0..runs)
        .into_par_iter()
        .map(|r| {
            let initial = sample_initial(spec, n, run_initial_stream(master_seed, r))?;
            integrate(&initial, kernel, m, grid, scheme, run_mode(mode, master_seed, r))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LiouvilleEnsemble {
        runs: trajectories,
        agents: n,
        master_seed,
    })
}

/// How the coordinates of each run are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationPolicy {
    Uniform,
    /// Coordinates `0..k` of every run; a test hook.
    Identity,
}

/// One point of `(Ω × R^d)^k` per run.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSamples {
    pub k: usize,
    pub label_dim: usize,
    pub opinion_dim: usize,
    /// Flat `R × k(d_x + d)`, factors laid out as `[x^1, ξ^1, …, x^k, ξ^k]`.
    pub points: Vec<f64>,
    /// Pre-permutation agent index of each emitted coordinate, `R × k`.
    pub sources: Vec<usize>,
}

impl MarginalSamples {
    pub fn len(&self) -> usize {
        self.sources.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn point_dim(&self) -> usize {
        self.k * (self.label_dim + self.opinion_dim)
    }
}

/// Per run, the first `k` coordinates of a uniform permutation of the agents
/// at time `t`; run `r` draws from `stream.substream(r)`.
pub fn symmetrized_marginal_samples(
    ensemble: &LiouvilleEnsemble,
    t: f64,
    k: usize,
    stream: RngStream,
) -> Result<MarginalSamples> {
    symmetrized_marginal_samples_with(ensemble, t, k, stream, PermutationPolicy::Uniform)
}

pub fn symmetrized_marginal_samples_with(
    ensemble: &LiouvilleEnsemble,
    t: f64,
    k: usize,
    stream: RngStream,
    policy: PermutationPolicy,
) -> Result<MarginalSamples> {
    let n = ensemble.agents;
    if k == 0 || k > n {
        return Err(Error::domain(format!("marginal order k = {k} must lie in 1..={n}")));
    }
    let first = &ensemble.runs[0];
    let (dx, d) = (first.label_dim(), first.opinion_dim());
    let mut points = Vec::with_capacity(ensemble.runs.len() * k * (dx + d));
    let mut sources = Vec::with_capacity(ensemble.runs.len() * k);
    for (r, run) in ensemble.runs.iter().enumerate() {
        let s = ensemble.snapshot_index(r, t)?;
        let chosen: Vec<usize> = match policy {
            PermutationPolicy::Uniform => {
                let mut rng = stream.substream(r as u64).rng();
                index::sample(&mut rng, n, k).into_vec()
            }
            PermutationPolicy::Identity => (0..k).collect(),
        };
        let opinions = run.opinions_at(s);
        for &i in &chosen {
            points.extend_from_slice(&run.labels()[i * dx..(i + 1) * dx]);
            points.extend_from_slice(&opinions[i * d..(i + 1) * d]);
        }
        sources.extend(chosen);
    }
    Ok(MarginalSamples {
        k,
        label_dim: dx,
        opinion_dim: d,
        points,
        sources,
    })
}

/// `(1/N) Σ_i φ(x_i) ξ_i(t)` for every run (one vector of length `d` each).
pub fn first_moment_per_run<F>(ensemble: &LiouvilleEnsemble, t: f64, phi: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> f64,
{
    (0..ensemble.runs.len())
        .map(|r| {
            let run = &ensemble.runs[r];
            let s = ensemble.snapshot_index(r, t)?;
            let (dx, d) = (run.label_dim(), run.opinion_dim());
            let opinions = run.opinions_at(s);
            let n = run.agent_count();
            let mut acc = vec![0.0; d];
            for i in 0..n {
                let w = phi(&run.labels()[i * dx..(i + 1) * dx]);
                for c in 0..d {
                    acc[c] += w * opinions[i * d + c];
                }
            }
            Ok(acc.into_iter().map(|v| v / n as f64).collect())
        })
        .collect()
}

/// `(1/R) Σ_runs (1/N) Σ_i φ(x_i) ξ_i(t)`, one value per opinion component.
pub fn first_moment_pairing<F>(ensemble: &LiouvilleEnsemble, t: f64, phi: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let per_run = first_moment_per_run(ensemble, t, phi)?;
    let d = per_run[0].len();
    let r = per_run.len() as f64;
    Ok((0..d).map(|c| per_run.iter().map(|v| v[c]).sum::<f64>() / r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{linear_consensus, quadratic_statistic, KernelParams};
    use crate::measures::{LabelDistribution, OpinionConditional, Profile};
    use crate::transport::wasserstein_1d;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn spec() -> InitialDatumSpec {
        InitialDatumSpec {
            labels: LabelDistribution::UniformBox {
                lower: vec![0.0],
                upper: vec![1.0],
            },
            opinions: OpinionConditional::Monokinetic {
                profile: Profile::Affine {
                    intercept: vec![0.0],
                    slope: vec![0.5],
                },
            },
        }
    }

    fn kernel() -> InteractionKernel {
        quadratic_statistic(KernelParams {
            radius: 2.0,
            ..KernelParams::default()
        })
    }

    #[test]
    fn single_run_is_one_integration() {
        let k = kernel();
        let grid = TimeGrid::uniform(0.5, 0.1).unwrap();
        let mode = RhsMode::monte_carlo(8, 3);
        let ens = sample_liouville_ensemble(&spec(), 6, 1, &k, 2, &grid, Scheme::Rk4, mode, 11).unwrap();
        let initial = sample_initial(&spec(), 6, run_initial_stream(11, 0)).unwrap();
        let direct = integrate(&initial, &k, 2, &grid, Scheme::Rk4, run_mode(mode, 11, 0)).unwrap();
        for s in 0..grid.len() {
            assert_eq!(ens.runs()[0].opinions_at(s), direct.opinions_at(s));
        }
    }

    #[test]
    fn monokinetic_runs_start_on_the_graph() {
        let k = kernel();
        let grid = TimeGrid::uniform(0.2, 0.1).unwrap();
        let ens = sample_liouville_ensemble(&spec(), 5, 4, &k, 1, &grid, Scheme::Rk4, RhsMode::exact(), 1).unwrap();
        for run in ens.runs() {
            let s = run.snapshot(0);
            for i in 0..5 {
                assert_eq!(s.opinion(i)[0], 0.0 + 0.5 * s.label(i)[0]);
            }
        }
    }

    #[test]
    fn different_master_seeds_draw_different_labels() {
        let k = kernel();
        let grid = TimeGrid::new(vec![0.0]).unwrap();
        let a = sample_liouville_ensemble(&spec(), 4, 2, &k, 1, &grid, Scheme::Rk4, RhsMode::exact(), 1).unwrap();
        let b = sample_liouville_ensemble(&spec(), 4, 2, &k, 1, &grid, Scheme::Rk4, RhsMode::exact(), 2).unwrap();
        for (ra, rb) in a.runs().iter().zip(b.runs()) {
            for x in ra.labels() {
                assert!(!rb.labels().contains(x));
            }
        }
    }

    #[test]
    fn identity_hook_recovers_state() {
        let k = kernel();
        let grid = TimeGrid::uniform(0.2, 0.1).unwrap();
        let ens = sample_liouville_ensemble(&spec(), 5, 3, &k, 1, &grid, Scheme::Rk4, RhsMode::exact(), 4).unwrap();
        let s = symmetrized_marginal_samples_with(&ens, 0.2, 5, RngStream::new(0), PermutationPolicy::Identity).unwrap();
        for (r, run) in ens.runs().iter().enumerate() {
            let last = run.last();
            for i in 0..5 {
                assert_eq!(s.points[(r * 5 + i) * 2], last.label(i)[0]);
                assert_eq!(s.points[(r * 5 + i) * 2 + 1], last.opinion(i)[0]);
            }
        }
        // uniform policy with k = N emits a permutation of the same state
        let u = symmetrized_marginal_samples(&ens, 0.2, 5, RngStream::new(9)).unwrap();
        for r in 0..3 {
            let mut idx = u.sources[r * 5..(r + 1) * 5].to_vec();
            idx.sort_unstable();
            assert_eq!(idx, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn k_out_of_range_and_off_grid_times() {
        let k = kernel();
        let grid = TimeGrid::uniform(0.2, 0.1).unwrap();
        let ens = sample_liouville_ensemble(&spec(), 3, 2, &k, 1, &grid, Scheme::Rk4, RhsMode::exact(), 4).unwrap();
        assert!(matches!(symmetrized_marginal_samples(&ens, 0.2, 4, RngStream::new(0)), Err(Error::Domain(_))));
        assert!(matches!(symmetrized_marginal_samples(&ens, 0.2, 0, RngStream::new(0)), Err(Error::Domain(_))));
        assert!(matches!(symmetrized_marginal_samples(&ens, 0.15, 1, RngStream::new(0)), Err(Error::Domain(_))));
    }

    #[test]
    fn chosen_coordinate_is_uniform() {
        let k = kernel();
        let n = 8;
        let runs = 10_000;
        let grid = TimeGrid::new(vec![0.0]).unwrap();
        let ens = sample_liouville_ensemble(&spec(), n, runs, &k, 1, &grid, Scheme::Rk4, RhsMode::exact(), 5).unwrap();
        let s = symmetrized_marginal_samples(&ens, 0.0, 1, RngStream::new(6)).unwrap();
        let mut counts = vec![0.0; n];
        for &i in &s.sources {
            counts[i] += 1.0;
        }
        let expected = runs as f64 / n as f64;
        let chi2: f64 = counts.iter().map(|c| (c - expected) * (c - expected) / expected).sum();
        let p = 1.0 - ChiSquared::new((n - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
    }

    #[test]
    fn permuting_runs_leaves_marginal_law_unchanged() {
        // Two-sample permutation test on W1 between the k = 1 marginal of the
        // original and of an agent-permuted ensemble.
        let k = kernel();
        let grid = TimeGrid::uniform(0.3, 0.1).unwrap();
        let n = 6;
        let runs = 400;
        let ens = sample_liouville_ensemble(&spec(), n, runs, &k, 2, &grid, Scheme::Rk4, RhsMode::exact(), 8).unwrap();
        let order = [3usize, 5, 0, 1, 4, 2];
        let permuted_runs: Vec<Trajectory> = ens
            .runs()
            .iter()
            .map(|run| {
                let e = run.snapshot(0).permuted(&order).unwrap();
                integrate(&e, &k, 2, &grid, Scheme::Rk4, RhsMode::exact()).unwrap()
            })
            .collect();
        let permuted = LiouvilleEnsemble {
            runs: permuted_runs,
            agents: n,
            master_seed: 8,
        };
        let a = symmetrized_marginal_samples(&ens, 0.3, 1, RngStream::new(1)).unwrap();
        let b = symmetrized_marginal_samples(&permuted, 0.3, 1, RngStream::new(2)).unwrap();
        let xa: Vec<f64> = a.points.chunks(2).map(|p| p[1]).collect();
        let xb: Vec<f64> = b.points.chunks(2).map(|p| p[1]).collect();
        let observed = wasserstein_1d(&xa, &xb, 1.0).unwrap();
        let mut pooled = xa.clone();
        pooled.extend(&xb);
        let mut rng = RngStream::new(3).rng();
        let trials = 200;
        let mut exceed = 0;
        for _ in 0..trials {
            use rand::seq::SliceRandom;
            pooled.shuffle(&mut rng);
            let (u, v) = pooled.split_at(runs);
            if wasserstein_1d(u, v, 1.0).unwrap() >= observed {
                exceed += 1;
            }
        }
        let p = (exceed + 1) as f64 / (trials + 1) as f64;
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn pairing_examples() {
        let k = linear_consensus(KernelParams {
            radius: 2.0,
            ..KernelParams::default()
        });
        let grid = TimeGrid::uniform(1.0, 0.05).unwrap();
        let ens = sample_liouville_ensemble(&spec(), 7, 3, &k, 2, &grid, Scheme::Rk4, RhsMode::exact(), 2).unwrap();
        let per_run0 = first_moment_per_run(&ens, 0.0, |_| 1.0).unwrap();
        for &t in grid.times() {
            let per_run = first_moment_per_run(&ens, t, |_| 1.0).unwrap();
            for (a, b) in per_run.iter().zip(&per_run0) {
                assert!((a[0] - b[0]).abs() < 1e-6);
            }
            assert_eq!(first_moment_pairing(&ens, t, |_| 0.0).unwrap(), vec![0.0]);
        }
        // the pairing at t = 0 is the mean of y_0 over the sampled labels
        let run = &ens.runs()[0];
        let mean_y0 = run.labels().iter().map(|x| 0.5 * x).sum::<f64>() / 7.0;
        assert!((per_run0[0][0] - mean_y0).abs() < 1e-15);

        let single = sample_liouville_ensemble(&spec(), 1, 1, &k, 1, &grid, Scheme::Rk4, RhsMode::exact(), 3).unwrap();
        let bump = |x: &[f64]| (-(x[0] - 0.5).powi(2) * 20.0).exp();
        let last = single.runs()[0].last();
        let value = first_moment_pairing(&single, 1.0, bump).unwrap();
        assert_eq!(value, vec![bump(last.label(0)) * last.opinion(0)[0]]);
    }
}
