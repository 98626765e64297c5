//! Fixed-step one-step schemes and time grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    #[default]
    Rk4,
}

impl Scheme {
    /// Number of right-hand-side evaluations per step.
    pub fn stages(self) -> u64 {
        match self {
            Scheme::Euler => 1,
            Scheme::Rk4 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Rk4 => "rk4",
        }
    }
}

/// Strictly increasing sequence of output times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::domain("time grid must contain at least one time"));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("time grid contains a non-finite time"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("time grid must be strictly increasing"));
        }
        Ok(TimeGrid { times })
    }

    /// `[0, dt, 2 dt, ..., t_final]` with `round(t_final / dt)` steps; the
    /// last point is exactly `t_final`.
    pub fn uniform(t_final: f64, dt: f64) -> Result<Self> {
        if !(t_final >= 0.0) || !t_final.is_finite() {
            return Err(Error::domain(format!("final time {t_final} must be finite and >= 0")));
        }
        if t_final == 0.0 {
            return Ok(TimeGrid { times: vec![0.0] });
        }
        if !(dt > 0.0) {
            return Err(Error::domain(format!("time step {dt} must be positive")));
        }
        let steps = (t_final / dt).round().max(1.0) as usize;
        let h = t_final / steps as f64;
        let mut times: Vec<f64> = (0..steps).map(|k| k as f64 * h).collect();
        times.push(t_final);
        TimeGrid::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("grid is nonempty")
    }

    /// Index of the grid point equal to `t` (to 1e-12 relative).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }
}

/// One step of `scheme` for `y' = f(t, y)`.
///
/// `rhs` receives the stage time, the stage state and the stage number
/// (0-based, `< scheme.stages()`), and writes the derivative into its output
/// slice.
pub fn step<S, F>(scheme: Scheme, t: S, y: &[S], dt: S, mut rhs: F) -> Result<Vec<S>>
where
    S: Scalar,
    F: FnMut(S, &[S], u64, &mut [S]) -> Result<()>,
{
    let n = y.len();
    let zero = S::from_f64(0.0);
    match scheme {
        Scheme::Euler => {
            let mut k = vec![zero; n];
            rhs(t, y, 0, &mut k)?;
            Ok(y.iter().zip(&k).map(|(&yi, &ki)| yi + dt * ki).collect())
        }
        Scheme::Rk4 => {
            let half = S::from_f64(0.5) * dt;
            let two = S::from_f64(2.0);
            let sixth = dt / S::from_f64(6.0);
            let mut k1 = vec![zero; n];
            let mut k2 = vec![zero; n];
            let mut k3 = vec![zero; n];
            let mut k4 = vec![zero; n];
            let mut stage = vec![zero; n];

            rhs(t, y, 0, &mut k1)?;
            for i in 0..n {
                stage[i] = y[i] + half * k1[i];
            }
            rhs(t + half, &stage, 1, &mut k2)?;
            for i in 0..n {
                stage[i] = y[i] + half * k2[i];
            }
            rhs(t + half, &stage, 2, &mut k3)?;
            for i in 0..n {
                stage[i] = y[i] + dt * k3[i];
            }
            rhs(t + dt, &stage, 3, &mut k4)?;
            Ok((0..n)
                .map(|i| y[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
                .collect())
        }
    }
}

/// Outcome of a grid integration: one state per accepted grid time.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub states: Vec<Vec<f64>>,
    /// Set when `admissible` rejected the state at some grid time.
    pub rejected: Option<Rejection>,
}

#[derive(Debug, Clone, Copy)]
pub struct Rejection {
    pub time: f64,
    pub index: usize,
    pub norm: f64,
}

/// Integrates across `grid`, evaluating `admissible` after each step and
/// stopping at the first rejected state. Right-hand-side calls are numbered
/// `step_index * stages + stage`, which callers use to key random streams.
pub fn integrate_grid<F, A>(
    y0: Vec<f64>,
    grid: &TimeGrid,
    scheme: Scheme,
    mut rhs: F,
    mut admissible: A,
) -> Result<GridSolution>
where
    F: FnMut(f64, &[f64], u64, &mut [f64]) -> Result<()>,
    A: FnMut(&[f64]) -> Option<(usize, f64)>,
{
    let times = grid.times();
    let mut states = Vec::with_capacity(times.len());
    states.push(y0);
    for (k, w) in times.windows(2).enumerate() {
        let (t0, t1) = (w[0], w[1]);
        let stages = scheme.stages();
        let current = states.last().expect("at least the initial state");
        let next = step(scheme, t0, current, t1 - t0, |t, y, stage, out| {
            rhs(t, y, k as u64 * stages + stage, out)
        })?;
        if let Some((index, norm)) = admissible(&next) {
            return Ok(GridSolution {
                states,
                rejected: Some(Rejection {
                    time: t1,
                    index,
                    norm,
                }),
            });
        }
        states.push(next);
    }
    Ok(GridSolution {
        states,
        rejected: None,
    })
}
