//! The convergence studies. Each returns a [`StudyReport`] with one row per
//! sweep point; seeds and sweep points run concurrently and every random
//! stream is derived from the master seed, so results do not depend on the
//! worker count.

use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use super::config::{ExperimentConfig, ReferenceCoupling, StudyKind, TestFunction};
use super::fit::{fit_loglog_slope, m_schedule};
use super::report::{extra, ExtraValue, StudyReport, StudyRow};
use crate::chaos::{first_moment_per_run, sample_liouville_ensemble, symmetrized_marginal_samples, LiouvilleEnsemble};
use crate::error::{BlowUp, Error, Result};
use crate::kernels::{validate_kernel, InteractionKernel, ValidationReport};
use crate::macroscopic::{opinion_limit_solve, opinion_solve, OpinionField, OpinionTrajectory};
use crate::measures::{moment_z, sample_initial, LabelDistribution, WeightedMeasure};
use crate::mesoscopic::{vlasov_flow, vlasov_solve};
use crate::ode::TimeGrid;
use crate::particles::{integrate, ParticleEnsemble, Trajectory};
use crate::rng::RngStream;
use crate::transport::{wasserstein_assignment, GroundMetric};

const SAMPLING: u64 = 11;
const DOBRUSHIN: u64 = 12;
const CHAOS: u64 = 13;
const JOINT: u64 = 14;
const VALIDATION: u64 = 15;

const REFERENCE: u64 = 0;
const SWEEP: u64 = 1;
const RESAMPLE: u64 = 2;
const DYNAMICS: u64 = 3;
const MARGINAL: u64 = 4;
const FRESH: u64 = 5;

/// Runs the study named in `config`.
pub fn run_study(config: &ExperimentConfig) -> Result<StudyReport> {
    config.validate()?;
    match config.study {
        StudyKind::SamplingRate => run_sampling_rate_study(config),
        StudyKind::Dobrushin => run_dobrushin_study(config),
        StudyKind::Chaos => run_chaos_study(config),
        StudyKind::MultiwiseLimit => run_multiwise_limit_study(config),
        StudyKind::JointLimit => run_joint_limit_study(config),
        StudyKind::MonokineticCheck => run_monokinetic_check(config),
    }
}

/// Builds the kernel and re-validates its declared constants; a violation is
/// a configuration error.
fn checked_kernel(config: &ExperimentConfig) -> Result<(InteractionKernel, ValidationReport)> {
    let kernel = config.kernel()?;
    let seed = RngStream::new(config.master_seed).derive(&[VALIDATION]).key();
    let report = validate_kernel(&kernel, config.probe_count, kernel.radius(), seed)?;
    if !report.is_clean() {
        return Err(Error::config(format!(
            "kernel '{}' violates its declared constants (bound violation: {}, Lipschitz violation: {})",
            kernel.name(),
            report.bound_violation,
            report.lipschitz_violation
        )));
    }
    Ok((kernel, report))
}

fn grid(config: &ExperimentConfig) -> Result<TimeGrid> {
    TimeGrid::uniform(config.t_final, config.dt)
}

fn base_metadata(config: &ExperimentConfig, validation: &ValidationReport) -> serde_json::Value {
    json!({
        "config": config,
        "master_seed": config.master_seed,
        "scheme": config.scheme.name(),
        "kernel_validation": validation,
    })
}

fn merge(mut base: serde_json::Value, more: serde_json::Value) -> serde_json::Value {
    if let (Some(b), serde_json::Value::Object(m)) = (base.as_object_mut(), more) {
        b.extend(m);
    }
    base
}

fn no_blow_up(b: Option<BlowUp>) -> Result<()> {
    match b {
        Some(b) => Err(Error::BlowUp(b)),
        None => Ok(()),
    }
}

/// Mean and standard error of the mean (NaN for a single value).
pub(crate) fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Fits `rows` on (param, gap); a failure is recorded rather than raised.
fn fitted(mut report: StudyReport) -> StudyReport {
    let pairs: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.param_value, r.gap)).collect();
    match fit_loglog_slope(&pairs) {
        Ok(fit) => report.fit = Some(fit),
        Err(e) => report.fit_error = Some(e.to_string()),
    }
    report
}

/// Flat phase-space points `[x_i, ξ_i]` of the agents listed in `idx`.
fn phase_points(labels: &[f64], opinions: &[f64], dx: usize, d: usize, idx: impl Iterator<Item = usize>) -> Vec<f64> {
    let mut out = Vec::new();
    for i in idx {
        out.extend_from_slice(&labels[i * dx..(i + 1) * dx]);
        out.extend_from_slice(&opinions[i * d..(i + 1) * d]);
    }
    out
}

fn ensemble_points(e: &ParticleEnsemble) -> Vec<f64> {
    phase_points(e.labels(), e.opinions(), e.label_dim(), e.opinion_dim(), 0..e.len())
}

fn snapshot_points(traj: &Trajectory, s: usize, idx: &[usize]) -> Vec<f64> {
    phase_points(traj.labels(), traj.opinions_at(s), traj.label_dim(), traj.opinion_dim(), idx.iter().copied())
}

/// `count` reference indices out of `n`. Drawn without replacement when
/// possible, so the picked atoms are themselves an i.i.d. sample; with
/// replacement only when the reference is smaller than `count`.
fn draw_indices(stream: RngStream, n: usize, count: usize) -> Vec<usize> {
    let mut rng = stream.rng();
    if count <= n {
        rand::seq::index::sample(&mut rng, n, count).into_vec()
    } else {
        (0..count).map(|_| rng.random_range(0..n)).collect()
    }
}

fn rhs_seed(stream: &RngStream) -> u64 {
    stream.derive(&[DYNAMICS]).key()
}

/// `W_p` between `N`-sample empirical measures of `f_0` and an independent
/// reference of `max N` samples, subsampled to `N`.
pub fn run_sampling_rate_study(config: &ExperimentConfig) -> Result<StudyReport> {
    let (kernel, validation) = checked_kernel(config)?;
    let spec = &config.initial;
    let metric = GroundMetric::phase_space(kernel.label_dim(), kernel.opinion_dim());
    let n_max = *config.n_list.iter().max().expect("validated nonempty");
    let root = RngStream::new(config.master_seed).derive(&[SAMPLING]);

    let references = (0..config.seeds)
        .into_par_iter()
        .map(|s| sample_initial(spec, n_max, root.derive(&[s as u64, REFERENCE])))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..config.n_list.len())
        .flat_map(|j| (0..config.seeds).map(move |s| (j, s)))
        .collect();
    let gaps = jobs
        .par_iter()
        .map(|&(j, s)| {
            let n = config.n_list[j];
            let stream = root.derive(&[s as u64, SWEEP, n as u64]);
            let sample = sample_initial(spec, n, stream)?;
            let reference = &references[s];
            let idx = draw_indices(root.derive(&[s as u64, RESAMPLE, n as u64]), n_max, n);
            let b = phase_points(
                reference.labels(),
                reference.opinions(),
                reference.label_dim(),
                reference.opinion_dim(),
                idx.into_iter(),
            );
            Ok(wasserstein_assignment(&ensemble_points(&sample), &b, config.p, &metric, config.assignment_cap)?.distance)
        })
        .collect::<Result<Vec<f64>>>()?;

    let rows = config
        .n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let (gap, stderr) = mean_stderr(&gaps[j * config.seeds..(j + 1) * config.seeds]);
            StudyRow {
                param_value: n as f64,
                gap,
                stderr,
                seed_count: config.seeds,
                t_final: 0.0,
                m: None,
                n: Some(n),
                p: config.p,
                q: config.q.0,
                extra: extra(&[("reference_size", ExtraValue::Int(n_max as u64))]),
            }
        })
        .collect();
    Ok(fitted(StudyReport {
        study: StudyKind::SamplingRate.name().into(),
        param_name: "N".into(),
        rows,
        fit: None,
        fit_error: None,
        metadata: merge(
            base_metadata(config, &validation),
            json!({
                "reference": "independent f0 sample of max(N) points per seed",
                "equal_count_policy": "reference subsampled without replacement to N",
                "ground_metric": "phase_space",
            }),
        ),
    }))
}

/// Loose Dobrushin rate `2 · lip · (1 + m)`.
pub fn dobrushin_rate(kernel: &InteractionKernel, m: usize) -> f64 {
    2.0 * kernel.lipschitz() * (1.0 + m as f64)
}

/// `W_1` at `T` between an `N`-agent run and an `N_ref`-agent reference run
/// from the same `f_0`, with the reference subsampled to `N` (same indices at
/// both times).
pub fn run_dobrushin_study(config: &ExperimentConfig) -> Result<StudyReport> {
    let (kernel, validation) = checked_kernel(config)?;
    let grid = grid(config)?;
    let m = config.order();
    let spec = &config.initial;
    let metric = GroundMetric::phase_space(kernel.label_dim(), kernel.opinion_dim());
    let root = RngStream::new(config.master_seed).derive(&[DOBRUSHIN]);
    let last = grid.len() - 1;
    let rate = dobrushin_rate(&kernel, m);
    let ceiling_factor = (rate * config.t_final).exp();

    let run = |stream: RngStream, n: usize| -> Result<Trajectory> {
        let initial = sample_initial(spec, n, stream)?;
        let traj = integrate(&initial, &kernel, m, &grid, config.scheme, config.rhs_mode(rhs_seed(&stream)))?;
        no_blow_up(traj.blow_up())?;
        Ok(traj)
    };

    let references = (0..config.seeds)
        .into_par_iter()
        .map(|s| run(root.derive(&[s as u64, REFERENCE]), config.n_ref))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..config.n_list.len())
        .flat_map(|j| (0..config.seeds).map(move |s| (j, s)))
        .collect();
    let pairs = jobs
        .par_iter()
        .map(|&(j, s)| {
            let n = config.n_list[j];
            let traj = run(root.derive(&[s as u64, SWEEP, n as u64]), n)?;
            let all: Vec<usize> = (0..n).collect();
            let idx = draw_indices(root.derive(&[s as u64, RESAMPLE, n as u64]), config.n_ref, n);
            let w = |k: usize| -> Result<f64> {
                let a = snapshot_points(&traj, k, &all);
                let b = snapshot_points(&references[s], k, &idx);
                Ok(wasserstein_assignment(&a, &b, 1.0, &metric, config.assignment_cap)?.distance)
            };
            Ok((w(0)?, w(last)?))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let rows = config
        .n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let chunk = &pairs[j * config.seeds..(j + 1) * config.seeds];
            let finals: Vec<f64> = chunk.iter().map(|p| p.1).collect();
            let initials: Vec<f64> = chunk.iter().map(|p| p.0).collect();
            let (gap, stderr) = mean_stderr(&finals);
            let (initial_gap, _) = mean_stderr(&initials);
            let ceiling_ok = chunk.iter().all(|&(w0, wt)| wt <= ceiling_factor * w0);
            StudyRow {
                param_value: n as f64,
                gap,
                stderr,
                seed_count: config.seeds,
                t_final: config.t_final,
                m: Some(m),
                n: Some(n),
                p: 1.0,
                q: config.q.0,
                extra: extra(&[
                    ("initial_gap", ExtraValue::Num(initial_gap)),
                    ("ceiling", ExtraValue::Num(ceiling_factor * initial_gap)),
                    ("ceiling_ok", ExtraValue::Bool(ceiling_ok)),
                ]),
            }
        })
        .collect();
    Ok(fitted(StudyReport {
        study: StudyKind::Dobrushin.name().into(),
        param_name: "N".into(),
        rows,
        fit: None,
        fit_error: None,
        metadata: merge(
            base_metadata(config, &validation),
            json!({
                "reference_size": config.n_ref,
                "equal_count_policy": "reference subsampled without replacement to N (with replacement if N > n_ref), same indices at t=0 and t=T",
                "ceiling_rate": rate,
                "ceiling_factor": ceiling_factor,
                "ceiling_check": "per seed: W1(T) <= exp(rate T) W1(0)",
                "rhs_mode": config.rhs_mode(0),
            }),
        ),
    }))
}

/// Splits flat `k`-tuples of phase-space points into label and opinion
/// arrays (one entry per agent).
fn split_points(points: &[f64], dx: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut labels = Vec::new();
    let mut opinions = Vec::new();
    for z in points.chunks_exact(dx + d) {
        labels.extend_from_slice(&z[..dx]);
        opinions.extend_from_slice(&z[dx..]);
    }
    (labels, opinions)
}

/// The Vlasov reference `f(t)`: the monokinetic datum on quadrature nodes,
/// or an `n_ref`-atom `f_0` sample otherwise.
fn reference_measure(config: &ExperimentConfig, stream: RngStream) -> Result<WeightedMeasure> {
    if config.initial.is_monokinetic() {
        config.initial.monokinetic_measure(config.n_ref)
    } else {
        let e = sample_initial(&config.initial, config.n_ref, stream)?;
        WeightedMeasure::uniform(e.label_dim(), e.opinion_dim(), e.labels().to_vec(), e.opinions().to_vec())
    }
}

/// `W_p^{[q]}` at `T` between symmetrized `k`-marginal samples of the
/// `N`-agent law and `f(T)^{⊗k}` samples, one per ensemble run.
pub fn run_chaos_study(config: &ExperimentConfig) -> Result<StudyReport> {
    let (kernel, validation) = checked_kernel(config)?;
    let grid = grid(config)?;
    let m = config.order();
    let k = config.k;
    let (dx, d) = (kernel.label_dim(), kernel.opinion_dim());
    let metric = GroundMetric::product(dx, d, k, config.q.0)?;
    let root = RngStream::new(config.master_seed).derive(&[CHAOS]);
    let last = grid.len() - 1;
    let t_final = grid.final_time();
    let r = config.runs;

    struct SeedResult {
        gaps: Vec<f64>,
        floor: f64,
        moment: f64,
    }

    let per_seed = (0..config.seeds)
        .into_par_iter()
        .map(|s| -> Result<SeedResult> {
            let seed_root = root.derive(&[s as u64]);
            let mut marginals = Vec::with_capacity(config.n_list.len());
            for &n in &config.n_list {
                let stream = seed_root.derive(&[SWEEP, n as u64]);
                let mode = config.rhs_mode(rhs_seed(&stream));
                let ensemble: LiouvilleEnsemble =
                    sample_liouville_ensemble(&config.initial, n, r, &kernel, m, &grid, config.scheme, mode, stream.key())?;
                no_blow_up(ensemble.blow_up())?;
                let pick = stream.derive(&[MARGINAL]);
                let at_t = symmetrized_marginal_samples(&ensemble, t_final, k, pick)?;
                let at_0 = symmetrized_marginal_samples(&ensemble, grid.times()[0], k, pick)?;
                marginals.push((at_0.points, at_t.points));
            }

            // tracer block layout: per N the reference starting points, then
            // 2R fresh k-tuples for the two-sample floor
            let mut tracer_points = Vec::new();
            for (j, (start, _)) in marginals.iter().enumerate() {
                match config.reference_coupling {
                    ReferenceCoupling::Synchronous => tracer_points.extend_from_slice(start),
                    ReferenceCoupling::Independent => {
                        let n = config.n_list[j];
                        let fresh = sample_initial(&config.initial, r * k, seed_root.derive(&[FRESH, n as u64]))?;
                        tracer_points.extend(ensemble_points(&fresh));
                    }
                }
            }
            let floor_sample = sample_initial(&config.initial, 2 * r * k, seed_root.derive(&[FRESH, u64::MAX]))?;
            tracer_points.extend(ensemble_points(&floor_sample));
            let (tl, to) = split_points(&tracer_points, dx, d);

            let f0 = reference_measure(config, seed_root.derive(&[REFERENCE]))?;
            let flow = vlasov_flow(
                &f0,
                &tl,
                &to,
                &kernel,
                m,
                &grid,
                config.scheme,
                config.rhs_mode(rhs_seed(&seed_root.derive(&[REFERENCE]))),
            )?;
            no_blow_up(flow.trajectory.blow_up)?;
            let pushed = &flow.tracers[last];
            let tuple_points = |agents: std::ops::Range<usize>| -> Vec<f64> {
                phase_points(&tl, pushed, dx, d, agents)
            };

            let mut gaps = Vec::with_capacity(config.n_list.len());
            for (j, (_, sampled)) in marginals.iter().enumerate() {
                let reference = tuple_points(j * r * k..(j + 1) * r * k);
                debug_assert_eq!(reference.len(), r * k * (dx + d));
                gaps.push(wasserstein_assignment(sampled, &reference, config.p, &metric, config.assignment_cap)?.distance);
            }
            let base = config.n_list.len() * r * k;
            let fa = tuple_points(base..base + r * k);
            let fb = tuple_points(base + r * k..base + 2 * r * k);
            let floor = wasserstein_assignment(&fa, &fb, config.p, &metric, config.assignment_cap)?.distance;
            let moment = moment_z(&flow.trajectory.last().measure, config.z)?;
            Ok(SeedResult { gaps, floor, moment })
        })
        .collect::<Result<Vec<_>>>()?;

    let (floor, floor_err) = mean_stderr(&per_seed.iter().map(|x| x.floor).collect::<Vec<_>>());
    let (moment, _) = mean_stderr(&per_seed.iter().map(|x| x.moment).collect::<Vec<_>>());
    let rows = config
        .n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let gaps: Vec<f64> = per_seed.iter().map(|x| x.gaps[j]).collect();
            let (gap, stderr) = mean_stderr(&gaps);
            StudyRow {
                param_value: n as f64,
                gap,
                stderr,
                seed_count: config.seeds,
                t_final,
                m: Some(m),
                n: Some(n),
                p: config.p,
                q: config.q.0,
                extra: extra(&[
                    ("k", ExtraValue::Int(k as u64)),
                    ("runs", ExtraValue::Int(r as u64)),
                    ("two_sample_floor", ExtraValue::Num(floor)),
                    ("two_sample_floor_stderr", ExtraValue::Num(floor_err)),
                ]),
            }
        })
        .collect();
    let coupling = match config.reference_coupling {
        ReferenceCoupling::Synchronous => "synchronous: reference tuples are the sampled tuples' initial points carried by the reference flow",
        ReferenceCoupling::Independent => "independent: fresh f0 tuples carried by the reference flow",
    };
    Ok(fitted(StudyReport {
        study: StudyKind::Chaos.name().into(),
        param_name: "N".into(),
        rows,
        fit: None,
        fit_error: None,
        metadata: merge(
            base_metadata(config, &validation),
            json!({
                "reference_coupling": coupling,
                "reference_measure": if config.initial.is_monokinetic() {
                    "monokinetic datum on n_ref midpoint label nodes"
                } else {
                    "n_ref-atom f0 sample"
                },
                "reference_size": config.n_ref,
                "two_sample_floor": floor,
                "moment_z": config.z,
                "moment_z_value": moment,
                "rhs_mode": config.rhs_mode(0),
            }),
        ),
    }))
}

fn field_distance(a: &OpinionField, b: &OpinionField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn sup_distance(a: &OpinionTrajectory, b: &OpinionTrajectory) -> f64 {
    a.fields
        .iter()
        .zip(&b.fields)
        .map(|(x, y)| field_distance(x, y))
        .fold(0.0, f64::max)
}

fn initial_field(config: &ExperimentConfig) -> Result<OpinionField> {
    let mu = config.initial.monokinetic_measure(config.n_ref)?;
    let nodes = config.initial.labels.discretize(config.n_ref)?;
    OpinionField::new(nodes, mu.opinion_dim(), mu.opinions().to_vec(), 0.0)
}

/// `sup_t ‖y^(m)(t) − y^∞(t)‖_∞` on the label nodes for each `m`.
pub fn run_multiwise_limit_study(config: &ExperimentConfig) -> Result<StudyReport> {
    let (kernel, validation) = checked_kernel(config)?;
    let grid = grid(config)?;
    let y0 = initial_field(config)?;
    let limit = opinion_limit_solve(&y0, &kernel, &grid, config.scheme)?;
    no_blow_up(limit.blow_up)?;
    let gaps = config
        .m_list
        .par_iter()
        .map(|&m| {
            let mode = config.rhs_mode(RngStream::new(config.master_seed).derive(&[m as u64]).key());
            let sol = opinion_solve(&y0, &kernel, m, &grid, config.scheme, mode)?;
            no_blow_up(sol.blow_up)?;
            Ok(sup_distance(&sol, &limit))
        })
        .collect::<Result<Vec<f64>>>()?;
    let rows = config
        .m_list
        .iter()
        .zip(&gaps)
        .map(|(&m, &gap)| StudyRow {
            param_value: m as f64,
            gap,
            stderr: f64::NAN,
            seed_count: 1,
            t_final: config.t_final,
            m: Some(m),
            n: None,
            p: config.p,
            q: config.q.0,
            extra: extra(&[("nodes", ExtraValue::Int(y0.len() as u64))]),
        })
        .collect();
    Ok(fitted(StudyReport {
        study: StudyKind::MultiwiseLimit.name().into(),
        param_name: "m".into(),
        rows,
        fit: None,
        fit_error: None,
        metadata: merge(
            base_metadata(config, &validation),
            json!({
                "nodes": y0.len(),
                "label_discretization": label_discretization(&config.initial.labels),
                "gap": "max over grid times of the max-norm node distance",
            }),
        ),
    }))
}

fn label_discretization(labels: &LabelDistribution) -> &'static str {
    match labels {
        LabelDistribution::UniformBox { .. } => "midpoint grid with n_ref cells per axis",
        LabelDistribution::Discrete { .. } => "the discrete label atoms",
    }
}

/// `Σ_j ν_j φ(x_j) y(t, x_j)` for every stored time.
fn pairing_series(traj: &OpinionTrajectory, phi: &TestFunction) -> Vec<Vec<f64>> {
    traj.fields
        .iter()
        .map(|f| {
            let d = f.opinion_dim();
            let mut acc = vec![0.0; d];
            for j in 0..f.len() {
                let w = f.nodes().weights()[j] * phi.eval(f.nodes().atom(j));
                for c in 0..d {
                    acc[c] += w * f.value(j)[c];
                }
            }
            acc
        })
        .collect()
}

/// `max_t |⟨φ, Y_{N:1}(t)⟩ − Σ ν_j φ(x_j) y^∞(t, x_j)|` along `N` with
/// `m = m_schedule(N)`.
pub fn run_joint_limit_study(config: &ExperimentConfig) -> Result<StudyReport> {
    let (kernel, validation) = checked_kernel(config)?;
    let grid = grid(config)?;
    let phi = config.test_function.clone().expect("validated");
    let lip = kernel.lipschitz();
    let schedule = config
        .n_list
        .iter()
        .map(|&n| m_schedule(n as f64, config.alpha, config.q.0, lip, config.t_final))
        .collect::<Result<Vec<usize>>>()?;

    let y0 = initial_field(config)?;
    let limit = opinion_limit_solve(&y0, &kernel, &grid, config.scheme)?;
    no_blow_up(limit.blow_up)?;
    let target = pairing_series(&limit, &phi);
    let root = RngStream::new(config.master_seed).derive(&[JOINT]);

    let jobs: Vec<(usize, usize)> = (0..config.n_list.len())
        .flat_map(|j| (0..config.seeds).map(move |s| (j, s)))
        .collect();
    let gaps = jobs
        .par_iter()
        .map(|&(j, s)| {
            let (n, m) = (config.n_list[j], schedule[j]);
            let stream = root.derive(&[s as u64, n as u64]);
            let mode = config.rhs_mode(rhs_seed(&stream));
            let ensemble =
                sample_liouville_ensemble(&config.initial, n, config.runs, &kernel, m, &grid, config.scheme, mode, stream.key())?;
            no_blow_up(ensemble.blow_up())?;
            let mut worst: f64 = 0.0;
            for (i, &t) in grid.times().iter().enumerate() {
                let per_run = first_moment_per_run(&ensemble, t, |x| phi.eval(x))?;
                let runs = per_run.len() as f64;
                for (c, &reference) in target[i].iter().enumerate() {
                    let pairing = per_run.iter().map(|v| v[c]).sum::<f64>() / runs;
                    worst = worst.max((pairing - reference).abs());
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;

    let rows = config
        .n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let (gap, stderr) = mean_stderr(&gaps[j * config.seeds..(j + 1) * config.seeds]);
            StudyRow {
                param_value: n as f64,
                gap,
                stderr,
                seed_count: config.seeds,
                t_final: config.t_final,
                m: Some(schedule[j]),
                n: Some(n),
                p: config.p,
                q: config.q.0,
                extra: extra(&[
                    ("phi", ExtraValue::Text(phi.name())),
                    ("runs", ExtraValue::Int(config.runs as u64)),
                ]),
            }
        })
        .collect();
    Ok(fitted(StudyReport {
        study: StudyKind::JointLimit.name().into(),
        param_name: "N".into(),
        rows,
        fit: None,
        fit_error: None,
        metadata: merge(
            base_metadata(config, &validation),
            json!({
                "m_schedule": schedule,
                "lipschitz": lip,
                "alpha": config.alpha,
                "test_function": phi,
                "limit_nodes": y0.len(),
                "label_discretization": label_discretization(&config.initial.labels),
                "rhs_mode": config.rhs_mode(0),
            }),
        ),
    }))
}

/// `‖vlasov_solve − opinion_solve‖_∞` at `T` on identical nodes for each
/// `Δt`, with the rk4 self-convergence error `‖y_Δt − y_{Δt/2}‖_∞`.
pub fn run_monokinetic_check(config: &ExperimentConfig) -> Result<StudyReport> {
    let (kernel, validation) = checked_kernel(config)?;
    let m = config.order();
    let mode = config.rhs_mode(RngStream::new(config.master_seed).key());
    let f0 = config.initial.monokinetic_measure(config.n_ref)?;
    let y0 = initial_field(config)?;

    let results = config
        .dt_list
        .par_iter()
        .map(|&dt| {
            let grid = TimeGrid::uniform(config.t_final, dt)?;
            let vlasov = vlasov_solve(&f0, &kernel, m, &grid, config.scheme, mode)?;
            no_blow_up(vlasov.blow_up)?;
            let field = opinion_solve(&y0, &kernel, m, &grid, config.scheme, mode)?;
            no_blow_up(field.blow_up)?;
            let gap = vlasov
                .last()
                .measure
                .opinions()
                .iter()
                .zip(field.last().values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let fine = opinion_solve(&y0, &kernel, m, &TimeGrid::uniform(config.t_final, dt / 2.0)?, config.scheme, mode)?;
            no_blow_up(fine.blow_up)?;
            Ok((gap, field_distance(field.last(), fine.last())))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let rows: Vec<StudyRow> = config
        .dt_list
        .iter()
        .zip(&results)
        .map(|(&dt, &(gap, self_conv))| StudyRow {
            param_value: dt,
            gap,
            stderr: f64::NAN,
            seed_count: 1,
            t_final: config.t_final,
            m: Some(m),
            n: None,
            p: config.p,
            q: config.q.0,
            extra: extra(&[("self_convergence", ExtraValue::Num(self_conv))]),
        })
        .collect();
    let order_pairs: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.param_value, r.extra_value("self_convergence").and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)))
        .collect();
    let order = match order_pairs.as_slice() {
        [(h1, e1), (h2, e2)] if *e1 > 0.0 && *e2 > 0.0 => Some((e1 / e2).ln() / (h1 / h2).ln()),
        _ => fit_loglog_slope(&order_pairs).ok().map(|f| f.slope),
    };
    Ok(fitted(StudyReport {
        study: StudyKind::MonokineticCheck.name().into(),
        param_name: "dt".into(),
        rows,
        fit: None,
        fit_error: None,
        metadata: merge(
            base_metadata(config, &validation),
            json!({
                "nodes": y0.len(),
                "self_convergence_order": order,
                "note": "both solvers share the force engine, so the gap is expected at roundoff level",
                "rhs_mode": mode,
            }),
        ),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_error() {
        let (m, e) = mean_stderr(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((e - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(mean_stderr(&[4.0]).1.is_nan());
    }

    #[test]
    fn subsample_indices_are_distinct_unless_oversized() {
        let mut idx = draw_indices(RngStream::new(3), 50, 50);
        idx.sort_unstable();
        assert_eq!(idx, (0..50).collect::<Vec<_>>());
        let big = draw_indices(RngStream::new(3), 4, 10);
        assert_eq!(big.len(), 10);
        assert!(big.iter().all(|&i| i < 4));
    }

    #[test]
    fn split_roundtrip() {
        let pts = [0.1, 1.0, 0.2, 2.0];
        let (l, o) = split_points(&pts, 1, 1);
        assert_eq!(l, vec![0.1, 0.2]);
        assert_eq!(o, vec![1.0, 2.0]);
    }
}
