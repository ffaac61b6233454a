//! ARX plant, noisy measurement and reference trajectories.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::ald_noise::NoiseModel;
use crate::error::{Error, Result};

/// `y(k+1) = sum_i b_i u(k-i+1) + sum_i a_i y(k-i+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArxParams {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ArxParams {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::invalid(
                "plant.b",
                "at least one input coefficient is required",
            ));
        }
        if b[0] == 0.0 {
            return Err(Error::invalid(
                "plant.b",
                "leading input coefficient must be non-zero",
            ));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::invalid("plant", "coefficients must be finite"));
        }
        Ok(Self { a, b })
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Regressor dimension `m + n`.
    pub fn dim(&self) -> usize {
        self.m() + self.n()
    }

    /// `[b_1 .. b_m, a_1 .. a_n]`, the ordering the estimators use.
    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.b.iter().chain(&self.a).copied())
    }
}

/// Input/output history. Index 0 is the most recent sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    /// `y(k), .., y(k-n+1)`
    pub y_hist: VecDeque<f64>,
    /// `u(k-1), .., u(k-m+1)`
    pub u_hist: VecDeque<f64>,
    /// Output samples fed to the regressors, newest first: the measurements
    /// `z(k), .., z(k-n+1)` or the true outputs, see [`RegressorSource`].
    pub z_hist: VecDeque<f64>,
}

impl PlantState {
    /// All-zero initial information.
    pub fn zeros(p: &ArxParams) -> Self {
        Self {
            y_hist: VecDeque::from(vec![0.0; p.n()]),
            u_hist: VecDeque::from(vec![0.0; p.m() - 1]),
            z_hist: VecDeque::from(vec![0.0; p.n()]),
        }
    }

    /// Full regressor `[u(k), u(k-1).., z(k)..]` for a candidate `u(k)`.
    pub fn regressor(&self, u: f64) -> DVector<f64> {
        let len = 1 + self.u_hist.len() + self.z_hist.len();
        DVector::from_iterator(
            len,
            std::iter::once(u)
                .chain(self.u_hist.iter().copied())
                .chain(self.z_hist.iter().copied()),
        )
    }

    /// Regressor with the current input removed, `[u(k-1).., z(k)..]`.
    pub fn eta(&self) -> DVector<f64> {
        let len = self.u_hist.len() + self.z_hist.len();
        DVector::from_iterator(len, self.u_hist.iter().chain(self.z_hist.iter()).copied())
    }

    /// Latest true output `y(k)`, zero for a plant without autoregressive terms.
    pub fn y(&self) -> f64 {
        self.y_hist.front().copied().unwrap_or(0.0)
    }

    /// Records the output sample the regressors see for the latest step.
    pub fn push_feedback(&mut self, v: f64) {
        push_front_fixed(&mut self.z_hist, v);
    }
}

fn push_front_fixed(buf: &mut VecDeque<f64>, v: f64) {
    if buf.is_empty() {
        return;
    }
    buf.pop_back();
    buf.push_front(v);
}

/// Advances the plant by one step with input `u`, returning `y(k+1)`.
///
/// The regressor output history is not touched; call
/// [`PlantState::push_feedback`] once `z(k+1)` is known.
pub fn plant_step(p: &ArxParams, s: &PlantState, u: f64) -> Result<(f64, PlantState)> {
    if !u.is_finite() {
        return Err(Error::NonFinite("plant_step"));
    }
    let y_next = p.b[0] * u
        + p.b[1..]
            .iter()
            .zip(&s.u_hist)
            .map(|(b, u)| b * u)
            .sum::<f64>()
        + p.a.iter().zip(&s.y_hist).map(|(a, y)| a * y).sum::<f64>();
    let mut next = s.clone();
    push_front_fixed(&mut next.u_hist, u);
    push_front_fixed(&mut next.y_hist, y_next);
    Ok((y_next, next))
}

/// `z = y + e` with `e` drawn from the mixture.
pub fn measure<R: Rng + ?Sized>(y: f64, noise: &NoiseModel, rng: &mut R) -> f64 {
    y + noise.sample(rng)
}

/// Which output samples populate the regressor `x(k)` and the control
/// regressor `eta(k)`. The measurement `z(k+1)` is always the estimation
/// target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorSource {
    /// Noise-free outputs `y(k), .., y(k-n+1)`.
    #[default]
    Output,
    /// Noisy measurements `z(k), .., z(k-n+1)`.
    Measurement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    /// Square wave through the first-order lag `1/(s+1)`.
    FilteredSquare,
    Triangle,
    Sine,
}

impl std::str::FromStr for TrajectoryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" | "filtered_square" => Ok(TrajectoryKind::FilteredSquare),
            "triangle" => Ok(TrajectoryKind::Triangle),
            "sine" | "sin" => Ok(TrajectoryKind::Sine),
            other => Err(Error::invalid(
                "trajectory",
                format!("unknown kind `{other}` (square, triangle, sine)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub frequency: f64,
    pub amplitude: f64,
    pub sample_period: f64,
}

impl TrajectorySpec {
    pub fn new(
        kind: TrajectoryKind,
        frequency: f64,
        amplitude: f64,
        sample_period: f64,
    ) -> Result<Self> {
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::invalid(
                "trajectory.frequency_hz",
                "must be positive",
            ));
        }
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::invalid(
                "trajectory.sample_period_s",
                "must be positive",
            ));
        }
        if !amplitude.is_finite() {
            return Err(Error::invalid("trajectory.amplitude", "must be finite"));
        }
        Ok(Self {
            kind,
            frequency,
            amplitude,
            sample_period,
        })
    }

    /// 0.01 Hz, unit amplitude, one second per step.
    pub fn standard(kind: TrajectoryKind) -> Self {
        Self {
            kind,
            frequency: 0.01,
            amplitude: 1.0,
            sample_period: 1.0,
        }
    }

    fn phase(&self, k: usize) -> f64 {
        (self.frequency * self.sample_period * k as f64).rem_euclid(1.0)
    }

    fn square(&self, k: usize) -> f64 {
        if self.phase(k) < 0.5 {
            self.amplitude
        } else {
            -self.amplitude
        }
    }

    fn open_loop(&self, k: usize) -> f64 {
        let a = self.amplitude;
        match self.kind {
            TrajectoryKind::Sine => {
                a * (2.0 * PI * self.frequency * self.sample_period * k as f64).sin()
            }
            TrajectoryKind::Triangle => {
                let ph = self.phase(k);
                if ph < 0.25 {
                    4.0 * a * ph
                } else if ph < 0.75 {
                    2.0 * a - 4.0 * a * ph
                } else {
                    4.0 * a * ph - 4.0 * a
                }
            }
            TrajectoryKind::FilteredSquare => self.square(k),
        }
    }

    /// Samples `y_r(0) .. y_r(len-1)`.
    pub fn series(&self, len: usize) -> Vec<f64> {
        match self.kind {
            TrajectoryKind::FilteredSquare => {
                // zero-order-hold discretisation of 1/(s+1)
                let decay = (-self.sample_period).exp();
                let mut out = Vec::with_capacity(len);
                let mut r = 0.0;
                for k in 0..len {
                    out.push(r);
                    r = decay * r + (1.0 - decay) * self.square(k);
                }
                out
            }
            _ => (0..len).map(|k| self.open_loop(k)).collect(),
        }
    }
}

/// `y_r(k)`. The filtered square is recursive, so this is `O(k)` for it;
/// use [`TrajectorySpec::series`] for whole episodes.
pub fn reference(spec: &TrajectorySpec, k: usize) -> f64 {
    match spec.kind {
        TrajectoryKind::FilteredSquare => spec.series(k + 1)[k],
        _ => spec.open_loop(k),
    }
}
