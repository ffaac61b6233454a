//! Closed-loop episodes, tracking metrics and Monte Carlo evaluation.

mod config;
mod export;

pub use config::{
    load_config, load_preset, parse_config, preset_source, ControllerKind, RunConfig,
    DEFAULT_P0_SCALE, DEFAULT_STEPS, DEFAULT_W0_ENTRY, PRESET_NAMES,
};
pub use export::{
    parse_trace_csv, summary_csv, trace_csv, write_summary_csv, write_trace_csv, ParsedTrace,
};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::controller::{
    ce_control, combine, oracle_optimal_control, posterior_update, subsystem_controls,
    ControlSplit, EnsembleState,
};
use crate::error::{Error, Result};
use crate::estimator::{iqf_step, rls_step, EstimatorState, Regressor};
use crate::plant::{plant_step, PlantState, RegressorSource};

/// Inclusive step window `[lo, hi]`, 1-based like the trace rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub lo: usize,
    pub hi: usize,
}

impl Window {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    pub fn check(&self, steps: usize) -> Result<()> {
        if self.lo < 1 || self.lo > self.hi || self.hi > steps {
            return Err(Error::EmptyWindow {
                lo: self.lo,
                hi: self.hi,
                steps,
            });
        }
        Ok(())
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid("window", format!("expected `lo:hi`, got `{s}`"));
        let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
        Ok(Window {
            lo: lo.trim().parse().map_err(|_| bad())?,
            hi: hi.trim().parse().map_err(|_| bad())?,
        })
    }
}

/// Per-step record of one closed-loop episode. Row `i` holds step `k = i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub controller: ControllerKind,
    pub seed: u64,
    /// Number of posterior columns `s`.
    pub subsystems: usize,
    /// Parameter dimension `d`.
    pub dim: usize,
    pub k: Vec<usize>,
    pub y_r: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    /// `s` posteriors per row.
    pub posteriors: Vec<Vec<f64>>,
    /// `s * d` estimates per row, subsystem-major.
    pub w_hat: Vec<Vec<f64>>,
    /// Measurement noise `e(k) = z(k) - y(k)` consumed at each row.
    pub noise: Vec<f64>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// `|y(k) - y_r(k)|` for `k` in the window.
    pub fn abs_errors(&self, window: Window) -> Result<impl Iterator<Item = f64> + '_> {
        window.check(self.len())?;
        let range = (window.lo - 1)..window.hi;
        Ok(self.y[range.clone()]
            .iter()
            .zip(&self.y_r[range])
            .map(|(y, r)| (y - r).abs()))
    }
}

enum Law {
    Ensemble(EnsembleState),
    Single {
        hyp: crate::ald_noise::AldParams,
        est: EstimatorState,
    },
    Rls(EstimatorState),
    Oracle,
}

impl Law {
    fn learn(&mut self, x: &Regressor, z: f64, sigma_scaling: bool) -> Result<()> {
        match self {
            Law::Ensemble(ens) => {
                // posterior uses the estimates from before this measurement
                *ens = posterior_update(ens, x, z, sigma_scaling);
                for s in ens.subsystems.iter_mut() {
                    s.estimator = iqf_step(&s.estimator, &s.hypothesis, x, z)?.state;
                }
            }
            Law::Single { hyp, est } => *est = iqf_step(est, hyp, x, z)?.state,
            Law::Rls(est) => *est = rls_step(est, x, z)?,
            Law::Oracle => {}
        }
        Ok(())
    }

    fn control(&self, cfg: &RunConfig, eta: &DVector<f64>, y_r_next: f64) -> Result<f64> {
        let single = |est: &EstimatorState| {
            ce_control(
                &ControlSplit::from_parameters(&est.w_hat, eta)?,
                y_r_next,
                &cfg.limits,
            )
        };
        match self {
            Law::Ensemble(ens) => {
                let laws = subsystem_controls(ens, eta, y_r_next, &cfg.limits)?;
                Ok(combine(&ens.posteriors(), &laws))
            }
            Law::Single { est, .. } => single(est),
            Law::Rls(est) => single(est),
            Law::Oracle => oracle_optimal_control(&cfg.plant, eta, y_r_next, &cfg.limits),
        }
    }

    fn posteriors(&self) -> Vec<f64> {
        match self {
            Law::Ensemble(ens) => ens.posteriors(),
            _ => vec![1.0],
        }
    }

    fn estimates(&self, cfg: &RunConfig) -> Vec<f64> {
        match self {
            Law::Ensemble(ens) => ens
                .subsystems
                .iter()
                .flat_map(|s| s.estimator.w_hat.iter().copied())
                .collect(),
            Law::Single { est, .. } | Law::Rls(est) => est.w_hat.iter().copied().collect(),
            Law::Oracle => cfg.plant.as_vector().iter().copied().collect(),
        }
    }
}

/// Draws the measurement noise `e(1) .. e(steps)` for a seed. The sequence
/// depends only on the noise model and seed, never on the controller.
pub fn noise_sequence(cfg: &RunConfig) -> Vec<f64> {
    match &cfg.noise {
        None => vec![0.0; cfg.steps],
        Some(model) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..cfg.steps).map(|_| model.sample(&mut rng)).collect()
        }
    }
}

/// Runs one closed-loop episode of `cfg.steps` steps.
///
/// At each step `k` the learners consume `(x(k-1), z(k))`, the selected law
/// computes `u(k)` for the previewed reference `y_r(k+1)`, and the plant
/// advances. The initial information is all zeros and `u(0)` is computed
/// from the initial estimates.
pub fn run_episode(cfg: &RunConfig) -> Result<EpisodeTrace> {
    cfg.validate()?;
    let steps = cfg.steps;
    let y_r = cfg.trajectory.series(steps + 2);
    let noise = noise_sequence(cfg);

    let init = EstimatorState::with_scaled_identity(cfg.w0.clone(), cfg.p0_scale)?;
    let mut law = match cfg.controller {
        ControllerKind::Ensemble => Law::Ensemble(EnsembleState::uniform(&cfg.hypotheses, &init)?),
        ControllerKind::SingleAld(i) => Law::Single {
            hyp: cfg.hypotheses[i],
            est: init,
        },
        ControllerKind::Rls => Law::Rls(init),
        ControllerKind::Oracle => Law::Oracle,
    };
    let subsystems = law.posteriors().len();

    let mut trace = EpisodeTrace {
        controller: cfg.controller,
        seed: cfg.seed,
        subsystems,
        dim: cfg.plant.dim(),
        k: Vec::with_capacity(steps),
        y_r: Vec::with_capacity(steps),
        y: Vec::with_capacity(steps),
        z: Vec::with_capacity(steps),
        u: Vec::with_capacity(steps),
        posteriors: Vec::with_capacity(steps),
        w_hat: Vec::with_capacity(steps),
        noise: Vec::with_capacity(steps),
    };

    let diverged = |step: usize, what: &'static str| {
        move |e: Error| match e {
            Error::NonFinite(_) => Error::Diverged { step, what },
            other => other,
        }
    };

    let mut plant = PlantState::zeros(&cfg.plant);
    let u0 = law
        .control(cfg, &plant.eta(), y_r[1])
        .map_err(diverged(0, "u"))?;
    let mut x_prev = plant.regressor(u0);
    let (mut y, next) = plant_step(&cfg.plant, &plant, u0).map_err(diverged(0, "u"))?;
    plant = next;

    for k in 1..=steps {
        if !y.is_finite() {
            return Err(Error::Diverged { step: k, what: "y" });
        }
        let e = noise[k - 1];
        let z = y + e;
        plant.push_feedback(match cfg.regressor_source {
            RegressorSource::Output => y,
            RegressorSource::Measurement => z,
        });

        law.learn(&x_prev, z, cfg.likelihood_sigma_scaling)
            .map_err(diverged(k, "estimate"))?;
        let u = law
            .control(cfg, &plant.eta(), y_r[k + 1])
            .map_err(diverged(k, "u"))?;

        trace.k.push(k);
        trace.y_r.push(y_r[k]);
        trace.y.push(y);
        trace.z.push(z);
        trace.u.push(u);
        trace.posteriors.push(law.posteriors());
        trace.w_hat.push(law.estimates(cfg));
        trace.noise.push(e);

        if k < steps {
            x_prev = plant.regressor(u);
            let (y_next, next) = plant_step(&cfg.plant, &plant, u).map_err(diverged(k, "u"))?;
            y = y_next;
            plant = next;
        }
    }
    Ok(trace)
}

/// Mean squared tracking error `(y - y_r)^2` over the window.
pub fn accumulated_error(trace: &EpisodeTrace, window: Window) -> Result<f64> {
    let n = (window.hi + 1).saturating_sub(window.lo) as f64;
    Ok(trace.abs_errors(window)?.map(|e| e * e).sum::<f64>() / n)
}

/// Largest `|y - y_r|` over the window.
pub fn max_abs_error(trace: &EpisodeTrace, window: Window) -> Result<f64> {
    Ok(trace.abs_errors(window)?.fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run: usize,
    pub seed: u64,
    /// `None` when the episode failed.
    pub j_bar: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub controller: ControllerKind,
    pub window: Window,
    pub seed_base: u64,
    pub runs: Vec<RunOutcome>,
    /// Mean of the successful per-run values; NaN when every run failed.
    pub j_bar: f64,
}

impl McSummary {
    pub fn runs_ok(&self) -> usize {
        self.runs.iter().filter(|r| r.j_bar.is_some()).count()
    }

    pub fn runs_failed(&self) -> usize {
        self.runs.len() - self.runs_ok()
    }

    pub fn per_run(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.j_bar).collect()
    }
}

/// Runs `runs` episodes with seeds `cfg.seed + i` and averages the windowed
/// error. Runs execute in parallel; results are ordered by run index.
pub fn monte_carlo(cfg: &RunConfig, runs: usize, window: Window) -> Result<McSummary> {
    monte_carlo_with(cfg, runs, window, accumulated_error)
}

/// [`monte_carlo`] with a custom per-episode metric.
pub fn monte_carlo_with<F>(
    cfg: &RunConfig,
    runs: usize,
    window: Window,
    metric: F,
) -> Result<McSummary>
where
    F: Fn(&EpisodeTrace, Window) -> Result<f64> + Sync,
{
    if runs == 0 {
        return Err(Error::invalid("runs", "at least one run is required"));
    }
    cfg.validate()?;
    window.check(cfg.steps)?;
    let outcomes: Vec<RunOutcome> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let seed = cfg.seed.wrapping_add(run as u64);
            let episode = RunConfig {
                seed,
                ..cfg.clone()
            };
            match run_episode(&episode).and_then(|t| metric(&t, window)) {
                Ok(j) if j.is_finite() => RunOutcome {
                    run,
                    seed,
                    j_bar: Some(j),
                    failure: None,
                },
                Ok(j) => RunOutcome {
                    run,
                    seed,
                    j_bar: None,
                    failure: Some(format!("non-finite metric {j}")),
                },
                Err(e) => RunOutcome {
                    run,
                    seed,
                    j_bar: None,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    let ok: Vec<f64> = outcomes.iter().filter_map(|r| r.j_bar).collect();
    let j_bar = if ok.is_empty() {
        f64::NAN
    } else {
        ok.iter().sum::<f64>() / ok.len() as f64
    };
    Ok(McSummary {
        controller: cfg.controller,
        window,
        seed_base: cfg.seed,
        runs: outcomes,
        j_bar,
    })
}

/// One summary per controller, all on the same seeds and noise sequences.
pub fn compare_controllers(
    cfg: &RunConfig,
    controllers: &[ControllerKind],
    runs: usize,
    window: Window,
) -> Result<Vec<McSummary>> {
    controllers
        .iter()
        .map(|&c| monte_carlo(&cfg.with_controller(c), runs, window))
        .collect()
}
