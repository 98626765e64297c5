//! Tuple-sum engine shared by the particle, Vlasov and opinion-field solvers.
//!
//! Every drift in the crate has the form
//! `F(z) = Σ_{j ∈ [K]^m} w_{j_1} ⋯ w_{j_m} G^(m)(t, z, a_{j_1}, …, a_{j_m})`
//! for a weighted atom set `a` and an evaluation point `z`. Keeping one
//! implementation guarantees that the three solvers agree bit for bit when
//! they are fed the same atoms.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{AgentRef, Head, InteractionKernel, StatisticKernel};
use crate::rng::RngStream;

/// Default cap on kernel calls for one exact evaluation point.
pub const DEFAULT_ENUMERATION_CAP: f64 = 1e7;

/// How the tuple sum is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhsMode {
    /// Full enumeration of all `K^m` tuples.
    Exact { enumeration_cap: f64 },
    /// `samples` i.i.d. tuples per evaluation point.
    MonteCarlo { samples: usize, seed: u64 },
}

impl RhsMode {
    pub fn exact() -> Self {
        RhsMode::Exact {
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        RhsMode::MonteCarlo { samples, seed }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            RhsMode::Exact { enumeration_cap } if !(enumeration_cap >= 1.0) => Err(Error::domain(
                format!("enumeration cap must be >= 1, got {enumeration_cap}"),
            )),
            RhsMode::MonteCarlo { samples: 0, .. } => {
                Err(Error::domain("Monte Carlo sample count must be >= 1"))
            }
            _ => Ok(()),
        }
    }

    /// Evaluation for right-hand-side call number `call` of an integration.
    pub(crate) fn for_call(&self, call: u64) -> Evaluation {
        match *self {
            RhsMode::Exact { enumeration_cap } => Evaluation::Exact { enumeration_cap },
            RhsMode::MonteCarlo { samples, seed } => Evaluation::MonteCarlo {
                samples,
                stream: RngStream::new(seed).substream(call),
            },
        }
    }
}

/// One evaluation request: exact, or Monte Carlo with a stream from which
/// evaluation point `i` takes substream `i`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Evaluation {
    Exact { enumeration_cap: f64 },
    MonteCarlo { samples: usize, stream: RngStream },
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Weights<'a> {
    Uniform,
    Explicit(&'a [f64]),
}

impl<'a> Weights<'a> {
    /// `Uniform` when all weights are bitwise equal, so that uniform-weight
    /// measures follow exactly the same arithmetic as particle ensembles.
    pub(crate) fn detect(weights: &'a [f64]) -> Self {
        match weights.first() {
            Some(w0) if weights.iter().all(|w| w.to_bits() == w0.to_bits()) => Weights::Uniform,
            _ => Weights::Explicit(weights),
        }
    }
}

/// Weighted atom set integrated against.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Atoms<'a> {
    pub label_dim: usize,
    pub opinion_dim: usize,
    pub labels: &'a [f64],
    pub opinions: &'a [f64],
    pub weights: Weights<'a>,
}

impl<'a> Atoms<'a> {
    pub(crate) fn len(&self) -> usize {
        self.opinions.len() / self.opinion_dim
    }

    fn agent(&self, k: usize) -> AgentRef<'a> {
        AgentRef::new(
            &self.labels[k * self.label_dim..(k + 1) * self.label_dim],
            &self.opinions[k * self.opinion_dim..(k + 1) * self.opinion_dim],
        )
    }
}

/// Evaluation points `z_i = (x_i, ξ_i)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Points<'a> {
    pub labels: &'a [f64],
    pub opinions: &'a [f64],
}

/// Drift at each point (flat `P × d`), plus per-component standard errors in
/// Monte Carlo mode.
#[derive(Debug, Clone)]
pub(crate) struct ForceOutput {
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

// ---------------------------------------------------------------------------
// Summation

const BLOCK: usize = 128;

/// Blocked pairwise summation of vectors: sequential inside blocks of
/// [`BLOCK`] terms, binary tree across blocks. Order is fixed by the push
/// sequence alone.
struct PairwiseSum {
    dim: usize,
    block: Vec<f64>,
    in_block: usize,
    stack: Vec<(u32, Vec<f64>)>,
}

impl PairwiseSum {
    fn new(dim: usize) -> Self {
        PairwiseSum {
            dim,
            block: vec![0.0; dim],
            in_block: 0,
            stack: Vec::new(),
        }
    }

    #[inline]
    fn push_scaled(&mut self, v: &[f64], scale: f64) {
        for (b, x) in self.block.iter_mut().zip(v) {
            *b += scale * x;
        }
        self.bump();
    }

    #[inline]
    fn push(&mut self, v: &[f64]) {
        for (b, x) in self.block.iter_mut().zip(v) {
            *b += x;
        }
        self.bump();
    }

    #[inline]
    fn bump(&mut self) {
        self.in_block += 1;
        if self.in_block == BLOCK {
            let full = std::mem::replace(&mut self.block, vec![0.0; self.dim]);
            self.in_block = 0;
            self.carry(0, full);
        }
    }

    fn carry(&mut self, mut level: u32, mut v: Vec<f64>) {
        while let Some((l, _)) = self.stack.last() {
            if *l != level {
                break;
            }
            let (_, left) = self.stack.pop().expect("nonempty");
            for (a, b) in v.iter_mut().zip(&left) {
                *a = b + *a;
            }
            level += 1;
        }
        self.stack.push((level, v));
    }

    fn finish(mut self) -> Vec<f64> {
        let mut total = if self.in_block > 0 {
            std::mem::take(&mut self.block)
        } else {
            match self.stack.pop() {
                Some((_, v)) => v,
                None => return vec![0.0; self.dim],
            }
        };
        while let Some((_, left)) = self.stack.pop() {
            for (a, b) in total.iter_mut().zip(&left) {
                *a = b + *a;
            }
        }
        total
    }
}

/// Lexicographic odometer over `[K]^m`, first index most significant.
struct Odometer {
    idx: Vec<usize>,
    k: usize,
    done: bool,
}

impl Odometer {
    fn new(k: usize, m: usize) -> Self {
        Odometer {
            idx: vec![0; m],
            k,
            done: k == 0,
        }
    }

    /// Advances and returns the first position that changed.
    fn advance(&mut self) -> Option<usize> {
        let m = self.idx.len();
        let mut pos = m;
        while pos > 0 {
            pos -= 1;
            self.idx[pos] += 1;
            if self.idx[pos] < self.k {
                return Some(pos);
            }
            self.idx[pos] = 0;
        }
        self.done = true;
        None
    }
}

/// Running state for tuple statistics: prefix sums of φ and prefix products
/// of weights, refreshed from the first changed tuple position.
struct TupleStat {
    s: usize,
    m: usize,
    prefix: Vec<f64>,
    wprefix: Vec<f64>,
}

impl TupleStat {
    fn new(s: usize, m: usize) -> Self {
        TupleStat {
            s,
            m,
            prefix: vec![0.0; s * m],
            wprefix: vec![1.0; m],
        }
    }

    fn refresh(&mut self, from: usize, idx: &[usize], phi: &[f64], weights: Weights<'_>) {
        let s = self.s;
        for d in from..self.m {
            let j = idx[d];
            let row = &phi[j * s..(j + 1) * s];
            if d == 0 {
                self.prefix[..s].copy_from_slice(row);
            } else {
                let (before, after) = self.prefix.split_at_mut(d * s);
                let prev = &before[(d - 1) * s..];
                for c in 0..s {
                    after[c] = prev[c] + row[c];
                }
            }
            if let Weights::Explicit(w) = weights {
                self.wprefix[d] = if d == 0 { w[j] } else { self.wprefix[d - 1] * w[j] };
            }
        }
    }

    fn mean_into(&self, out: &mut [f64]) {
        let s = self.s;
        let m = self.m as f64;
        for c in 0..s {
            out[c] = self.prefix[(self.m - 1) * s + c] / m;
        }
    }

    fn weight(&self) -> f64 {
        self.wprefix[self.m - 1]
    }
}

fn phi_table(k: &StatisticKernel, atoms: &Atoms<'_>) -> Vec<f64> {
    let s = k.statistic_dim();
    let n = atoms.len();
    let mut table = vec![0.0; n * s];
    for j in 0..n {
        let a = atoms.agent(j);
        k.eval_statistic(a.label, a.opinion, &mut table[j * s..(j + 1) * s]);
    }
    table
}

/// Weighted mean of φ over the atoms, `Σ_k w_k φ_k`.
pub(crate) fn statistic_mean(k: &StatisticKernel, atoms: &Atoms<'_>) -> Vec<f64> {
    let s = k.statistic_dim();
    let table = phi_table(k, atoms);
    let n = atoms.len();
    let mut acc = PairwiseSum::new(s);
    match atoms.weights {
        Weights::Uniform => {
            for j in 0..n {
                acc.push(&table[j * s..(j + 1) * s]);
            }
            let mut total = acc.finish();
            for v in total.iter_mut() {
                *v /= n as f64;
            }
            total
        }
        Weights::Explicit(w) => {
            for j in 0..n {
                acc.push_scaled(&table[j * s..(j + 1) * s], w[j]);
            }
            acc.finish()
        }
    }
}

fn check_cap(needed: f64, cap: f64) -> Result<()> {
    if needed > cap {
        return Err(Error::Capacity {
            what: "exact tuple enumeration (kernel calls per point)",
            needed,
            cap,
            advice: "use Monte Carlo evaluation (rhs_mode = \"mc\") or raise enumeration_cap",
        });
    }
    Ok(())
}

/// Nondecreasing index tuples `j_1 <= … <= j_m` over `[K]`, in
/// lexicographic order. Each stands for the `m! / Π c_k!` ordered tuples
/// with the same index counts `c_k`.
struct MultisetOdometer {
    idx: Vec<usize>,
    k: usize,
    done: bool,
}

impl MultisetOdometer {
    fn new(k: usize, m: usize) -> Self {
        MultisetOdometer {
            idx: vec![0; m],
            k,
            done: k == 0,
        }
    }

    fn advance(&mut self) -> Option<usize> {
        let m = self.idx.len();
        let pos = (0..m).rev().find(|&p| self.idx[p] + 1 < self.k);
        match pos {
            Some(p) => {
                let v = self.idx[p] + 1;
                for slot in &mut self.idx[p..] {
                    *slot = v;
                }
                Some(p)
            }
            None => {
                self.done = true;
                None
            }
        }
    }

    /// Number of ordered tuples represented by the current multiset.
    fn multiplicity(&self) -> f64 {
        let mut coef = 1.0;
        let mut seen = 0usize;
        let mut run = 0usize;
        for (p, &j) in self.idx.iter().enumerate() {
            run = if p > 0 && self.idx[p - 1] == j { run + 1 } else { 1 };
            seen += 1;
            // C(seen, run) / C(seen - 1, run - 1) = seen / run
            coef *= seen as f64 / run as f64;
        }
        coef
    }
}

/// Number of multisets of size `m` from `k` items, `C(k + m - 1, m)`.
fn multiset_count(k: usize, m: usize) -> f64 {
    (1..=m).fold(1.0, |acc, i| acc * (k + i - 1) as f64 / i as f64)
}

/// `Σ_tuples w(tuple) · f(tuple)` for a symmetric per-tuple evaluator that
/// sees the tuple-mean statistic. Tuples are enumerated as multisets with
/// multinomial multiplicities; uniform weights divide by `K^m` at the end.
fn enumerate_statistic<F>(
    k: &StatisticKernel,
    atoms: &Atoms<'_>,
    phi: &[f64],
    m: usize,
    d: usize,
    mut f: F,
) -> Vec<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let s = k.statistic_dim();
    let n = atoms.len();
    let mut odo = MultisetOdometer::new(n, m);
    let mut state = TupleStat::new(s, m);
    state.refresh(0, &odo.idx, phi, atoms.weights);
    let mut mean = vec![0.0; s];
    let mut value = vec![0.0; d];
    let mut acc = PairwiseSum::new(d);
    while !odo.done {
        state.mean_into(&mut mean);
        f(&mean, &mut value);
        let multiplicity = odo.multiplicity();
        match atoms.weights {
            Weights::Uniform => acc.push_scaled(&value, multiplicity),
            Weights::Explicit(_) => acc.push_scaled(&value, multiplicity * state.weight()),
        }
        if let Some(from) = odo.advance() {
            state.refresh(from, &odo.idx, phi, atoms.weights);
        }
    }
    let mut total = acc.finish();
    if let Weights::Uniform = atoms.weights {
        let count = (n as f64).powi(m as i32);
        for v in total.iter_mut() {
            *v /= count;
        }
    }
    total
}

fn enumerate_black_box(
    kernel: &InteractionKernel,
    t: f64,
    atoms: &Atoms<'_>,
    head: AgentRef<'_>,
    m: usize,
    d: usize,
) -> Vec<f64> {
    let n = atoms.len();
    let mut odo = Odometer::new(n, m);
    let mut value = vec![0.0; d];
    let mut acc = PairwiseSum::new(d);
    let mut tail: Vec<AgentRef<'_>> = Vec::with_capacity(m);
    while !odo.done {
        tail.clear();
        tail.extend(odo.idx.iter().map(|&j| atoms.agent(j)));
        kernel.evaluate_unchecked(t, head, &tail, &mut value);
        match atoms.weights {
            Weights::Uniform => acc.push(&value),
            Weights::Explicit(w) => {
                let weight = odo.idx[1..].iter().fold(w[odo.idx[0]], |p, &j| p * w[j]);
                acc.push_scaled(&value, weight);
            }
        }
        odo.advance();
    }
    let mut total = acc.finish();
    if let Weights::Uniform = atoms.weights {
        let count = (n as f64).powi(m as i32);
        for v in total.iter_mut() {
            *v /= count;
        }
    }
    total
}

// ---------------------------------------------------------------------------
// Engine

fn point<'a>(points: &Points<'a>, i: usize, dx: usize, d: usize) -> AgentRef<'a> {
    AgentRef::new(&points.labels[i * dx..(i + 1) * dx], &points.opinions[i * d..(i + 1) * d])
}

/// Drift of `kernel` of order `m` at every point.
pub(crate) fn tuple_force(
    kernel: &InteractionKernel,
    m: usize,
    t: f64,
    atoms: &Atoms<'_>,
    points: &Points<'_>,
    evaluation: Evaluation,
) -> Result<ForceOutput> {
    if m == 0 {
        return Err(Error::domain("interaction order m must be >= 1"));
    }
    let dx = kernel.label_dim();
    let d = kernel.opinion_dim();
    if atoms.label_dim != dx || atoms.opinion_dim != d {
        return Err(Error::domain(format!(
            "state has dimensions (d_x = {}, d = {}), kernel '{}' expects ({dx}, {d})",
            atoms.label_dim,
            atoms.opinion_dim,
            kernel.name()
        )));
    }
    let n = atoms.len();
    if n == 0 {
        return Err(Error::domain("interaction needs at least one atom"));
    }
    if atoms.labels.len() != n * dx {
        return Err(Error::domain("atom labels and opinions have different lengths"));
    }
    if let Weights::Explicit(w) = atoms.weights {
        if w.len() != n {
            return Err(Error::domain("atom weights and opinions have different lengths"));
        }
    }
    let p = points.opinions.len() / d;
    if points.opinions.len() != p * d || points.labels.len() != p * dx {
        return Err(Error::domain("evaluation point arrays have inconsistent lengths"));
    }

    match evaluation {
        Evaluation::Exact { enumeration_cap } => {
            exact_force(kernel, m, t, atoms, points, enumeration_cap).map(|values| ForceOutput {
                values,
                stderr: None,
            })
        }
        Evaluation::MonteCarlo { samples, stream } => {
            if samples == 0 {
                return Err(Error::domain("Monte Carlo sample count must be >= 1"));
            }
            Ok(monte_carlo_force(kernel, m, t, atoms, points, samples, stream))
        }
    }
}

fn exact_force(
    kernel: &InteractionKernel,
    m: usize,
    t: f64,
    atoms: &Atoms<'_>,
    points: &Points<'_>,
    cap: f64,
) -> Result<Vec<f64>> {
    let dx = kernel.label_dim();
    let d = kernel.opinion_dim();
    let p = points.opinions.len() / d;
    let n = atoms.len();
    let mut out = vec![0.0; p * d];

    match kernel {
        InteractionKernel::Statistic(k) => match k.head() {
            Head::Separable {
                response,
                own,
                affine_response,
            } => {
                let tail_part = if *affine_response {
                    // average of an affine response = response at the mean
                    let mean = statistic_mean(k, atoms);
                    let mut r = vec![0.0; d];
                    response(t, &mean, &mut r);
                    r
                } else {
                    check_cap(multiset_count(n, m), cap)?;
                    let phi = phi_table(k, atoms);
                    enumerate_statistic(k, atoms, &phi, m, d, |s, v| response(t, s, v))
                };
                out.par_chunks_mut(d).enumerate().for_each(|(i, o)| {
                    let z = point(points, i, dx, d);
                    o.copy_from_slice(&tail_part);
                    own(t, z.label, z.opinion, o);
                });
            }
            Head::General(_) => {
                check_cap(multiset_count(n, m), cap)?;
                let phi = phi_table(k, atoms);
                out.par_chunks_mut(d).enumerate().for_each(|(i, o)| {
                    let z = point(points, i, dx, d);
                    let v = enumerate_statistic(k, atoms, &phi, m, d, |s, v| {
                        k.eval_head(t, z.label, z.opinion, s, v)
                    });
                    o.copy_from_slice(&v);
                });
            }
        },
        InteractionKernel::BlackBox(_) => {
            check_cap((n as f64).powi(m as i32), cap)?;
            out.par_chunks_mut(d).enumerate().for_each(|(i, o)| {
                let z = point(points, i, dx, d);
                let v = enumerate_black_box(kernel, t, atoms, z, m, d);
                o.copy_from_slice(&v);
            });
        }
    }
    Ok(out)
}

enum Sampler {
    Uniform(usize),
    Weighted(WeightedIndex<f64>),
}

impl Sampler {
    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        match self {
            Sampler::Uniform(n) => rng.random_range(0..*n),
            Sampler::Weighted(w) => w.sample(rng),
        }
    }
}

fn monte_carlo_force(
    kernel: &InteractionKernel,
    m: usize,
    t: f64,
    atoms: &Atoms<'_>,
    points: &Points<'_>,
    samples: usize,
    stream: RngStream,
) -> ForceOutput {
    let dx = kernel.label_dim();
    let d = kernel.opinion_dim();
    let p = points.opinions.len() / d;
    let n = atoms.len();
    let sampler = match atoms.weights {
        Weights::Uniform => Sampler::Uniform(n),
        Weights::Explicit(w) => match WeightedIndex::new(w.iter().copied()) {
            Ok(wi) => Sampler::Weighted(wi),
            Err(_) => Sampler::Uniform(n),
        },
    };
    let phi = kernel.as_statistic().map(|k| phi_table(k, atoms));

    let mut values = vec![0.0; p * d];
    let mut stderr = vec![0.0; p * d];
    values
        .par_chunks_mut(d)
        .zip(stderr.par_chunks_mut(d))
        .enumerate()
        .for_each_init(
            || (vec![0.0; d], vec![0usize; m], Vec::with_capacity(m), Vec::new()),
            |(value, idx, tail, stat), (i, (mean, se))| {
                let z = point(points, i, dx, d);
                let mut rng = stream.substream(i as u64).rng();
                let m2 = se;
                for sample in 0..samples {
                    for slot in idx.iter_mut() {
                        *slot = sampler.draw(&mut rng);
                    }
                    match (kernel, &phi) {
                        (InteractionKernel::Statistic(k), Some(table)) => {
                            let s = k.statistic_dim();
                            stat.clear();
                            stat.resize(s, 0.0);
                            for &j in idx.iter() {
                                for c in 0..s {
                                    stat[c] += table[j * s + c];
                                }
                            }
                            for v in stat.iter_mut() {
                                *v /= m as f64;
                            }
                            k.eval_head(t, z.label, z.opinion, stat, value);
                        }
                        _ => {
                            tail.clear();
                            tail.extend(idx.iter().map(|&j| atoms.agent(j)));
                            kernel.evaluate_unchecked(t, z, tail, value);
                        }
                    }
                    // Welford update
                    let count = (sample + 1) as f64;
                    for c in 0..d {
                        let delta = value[c] - mean[c];
                        mean[c] += delta / count;
                        m2[c] += delta * (value[c] - mean[c]);
                    }
                }
                for q in m2.iter_mut() {
                    *q = if samples > 1 {
                        (*q / (samples - 1) as f64 / samples as f64).sqrt()
                    } else {
                        f64::NAN
                    };
                }
            },
        );
    ForceOutput {
        values,
        stderr: Some(stderr),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{quadratic_statistic, KernelParams, StatisticFn, HeadFn};
    use std::sync::Arc;

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let mut acc = PairwiseSum::new(1);
        for i in 0..1000 {
            acc.push(&[i as f64]);
        }
        assert_eq!(acc.finish(), vec![499_500.0]);
        assert_eq!(PairwiseSum::new(2).finish(), vec![0.0, 0.0]);
    }

    #[test]
    fn odometer_visits_all_tuples_in_order() {
        let mut odo = Odometer::new(3, 2);
        let mut seen = vec![odo.idx.clone()];
        while odo.advance().is_some() {
            seen.push(odo.idx.clone());
        }
        assert_eq!(seen.len(), 9);
        assert_eq!(seen[1], vec![0, 1]);
        assert_eq!(seen[3], vec![1, 0]);
    }

    fn quadratic_general() -> InteractionKernel {
        let statistic: StatisticFn = Arc::new(|_x, xi, out| out[0] = xi[0]);
        let head: HeadFn = Arc::new(|_t, _x, xi, s, out| out[0] = s[0] * s[0] - xi[0]);
        InteractionKernel::Statistic(StatisticKernel::new(
            "quadratic_general",
            1,
            1,
            1,
            statistic,
            Head::General(head),
            20.0,
            8.0,
            1.0,
            4.0,
        ))
    }

    #[test]
    fn general_and_separable_heads_agree() {
        let sep = quadratic_statistic(KernelParams {
            radius: 4.0,
            ..KernelParams::default()
        });
        let gen = quadratic_general();
        let labels = [0.1, 0.5, 0.9];
        let opinions = [0.0, 2.0, -1.0];
        let weights = [0.2, 0.3, 0.5];
        for weights in [Weights::Uniform, Weights::Explicit(&weights)] {
            let atoms = Atoms {
                label_dim: 1,
                opinion_dim: 1,
                labels: &labels,
                opinions: &opinions,
                weights,
            };
            let points = Points {
                labels: &labels,
                opinions: &opinions,
            };
            for m in 1..=4 {
                let ev = Evaluation::Exact {
                    enumeration_cap: 1e7,
                };
                let a = tuple_force(&sep, m, 0.0, &atoms, &points, ev).unwrap().values;
                let b = tuple_force(&gen, m, 0.0, &atoms, &points, ev).unwrap().values;
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-13, "m={m}: {a:?} vs {b:?}");
                }
            }
        }
    }

    #[test]
    fn capacity_error_names_the_cap() {
        let k = quadratic_general();
        let opinions = vec![0.0; 20];
        let labels = vec![0.0; 20];
        let atoms = Atoms {
            label_dim: 1,
            opinion_dim: 1,
            labels: &labels,
            opinions: &opinions,
            weights: Weights::Uniform,
        };
        let points = Points {
            labels: &labels,
            opinions: &opinions,
        };
        let err = tuple_force(&k, 12, 0.0, &atoms, &points, Evaluation::Exact { enumeration_cap: 1e7 })
            .unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }
}
