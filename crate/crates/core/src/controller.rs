//! Certainty-equivalence control laws and the Bayesian ensemble over noise
//! hypotheses.

use nalgebra::DVector;

use crate::ald_noise::{pinball_loss, AldParams};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorState, Regressor};
use crate::plant::ArxParams;

/// Lower bound on every posterior after an update.
pub const POSTERIOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLimits {
    /// Smallest admissible magnitude of the leading input coefficient.
    pub eps_b: f64,
    /// Symmetric saturation bound on the returned control. Infinite by
    /// default: a saturated input cannot recover an open-loop unstable plant
    /// after an early estimate of `b1` near zero.
    pub u_max: f64,
}

impl Default for ControlLimits {
    fn default() -> Self {
        Self {
            eps_b: 1e-6,
            u_max: f64::INFINITY,
        }
    }
}

impl ControlLimits {
    pub fn new(eps_b: f64, u_max: f64) -> Result<Self> {
        if !(eps_b > 0.0 && eps_b.is_finite()) {
            return Err(Error::invalid(
                "eps_b",
                format!("must be positive, got {eps_b}"),
            ));
        }
        if u_max.is_nan() || u_max <= 0.0 {
            return Err(Error::invalid(
                "u_max",
                format!("must be positive, got {u_max}"),
            ));
        }
        Ok(Self { eps_b, u_max })
    }
}

/// A parameter vector split into the leading input coefficient and the rest,
/// together with the regressor that multiplies the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSplit {
    pub b1_hat: f64,
    pub alpha_hat: DVector<f64>,
    pub eta: DVector<f64>,
}

impl ControlSplit {
    /// Splits `w = [b1, alpha]`; `eta` must have `w.len() - 1` entries.
    pub fn from_parameters(w: &DVector<f64>, eta: &DVector<f64>) -> Result<Self> {
        if w.is_empty() || eta.len() + 1 != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len().saturating_sub(1),
                actual: eta.len(),
                context: "control regressor",
            });
        }
        Ok(Self {
            b1_hat: w[0],
            alpha_hat: w.rows(1, w.len() - 1).into_owned(),
            eta: eta.clone(),
        })
    }
}

/// One-step certainty-equivalence law `u = (y_r(k+1) - eta^T alpha) / b1`,
/// with the divisor kept away from zero and the output saturated.
pub fn ce_control(split: &ControlSplit, y_r_next: f64, limits: &ControlLimits) -> Result<f64> {
    if !y_r_next.is_finite()
        || !split.b1_hat.is_finite()
        || split
            .alpha_hat
            .iter()
            .chain(split.eta.iter())
            .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite("ce_control"));
    }
    let b1 = if split.b1_hat.abs() < limits.eps_b {
        if split.b1_hat < 0.0 {
            -limits.eps_b
        } else {
            limits.eps_b
        }
    } else {
        split.b1_hat
    };
    let u = (y_r_next - split.eta.dot(&split.alpha_hat)) / b1;
    Ok(u.clamp(-limits.u_max, limits.u_max))
}

/// The same law evaluated with the true plant coefficients.
pub fn oracle_optimal_control(
    true_params: &ArxParams,
    eta: &DVector<f64>,
    y_r_next: f64,
    limits: &ControlLimits,
) -> Result<f64> {
    let split = ControlSplit::from_parameters(&true_params.as_vector(), eta)?;
    ce_control(&split, y_r_next, limits)
}

/// Log-likelihood of `z` under hypothesis `hyp` given the previous regressor
/// and estimate. With `sigma_scaling` the residual is divided by the scale, so
/// `exp` of the result is the ALD density of the residual; without it the
/// pinball loss enters unscaled.
pub fn subsystem_likelihood(
    hyp: &AldParams,
    x_prev: &Regressor,
    w_hat_prev: &DVector<f64>,
    z: f64,
    sigma_scaling: bool,
) -> f64 {
    let r = z - x_prev.dot(w_hat_prev);
    let loss = pinball_loss(hyp.tau(), r);
    let loss = if sigma_scaling {
        loss / hyp.sigma()
    } else {
        loss
    };
    hyp.peak().ln() - loss
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemState {
    pub hypothesis: AldParams,
    pub estimator: EstimatorState,
    pub posterior: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub subsystems: Vec<SubsystemState>,
}

impl EnsembleState {
    /// One subsystem per hypothesis, all starting from `init` with uniform
    /// posteriors.
    pub fn uniform(hypotheses: &[AldParams], init: &EstimatorState) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::invalid(
                "hypotheses",
                "at least one hypothesis is required",
            ));
        }
        let prior = 1.0 / hypotheses.len() as f64;
        Ok(Self {
            subsystems: hypotheses
                .iter()
                .map(|h| SubsystemState {
                    hypothesis: *h,
                    estimator: init.clone(),
                    posterior: prior,
                })
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn posteriors(&self) -> Vec<f64> {
        self.subsystems.iter().map(|s| s.posterior).collect()
    }

    /// Bayes update from per-subsystem log-likelihoods.
    pub fn apply_log_likelihoods(&mut self, log_lik: &[f64]) {
        debug_assert_eq!(log_lik.len(), self.subsystems.len());
        let max = log_lik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // the prior multiplies after exponentiation; it is floored, so the
        // maximising entry keeps the total strictly positive
        let mut post: Vec<f64> = self
            .subsystems
            .iter()
            .zip(log_lik)
            .map(|(s, l)| s.posterior * (l - max).exp())
            .collect();
        let total: f64 = post.iter().sum();
        post.iter_mut().for_each(|p| *p /= total);
        apply_floor(&mut post);
        for (s, p) in self.subsystems.iter_mut().zip(post) {
            s.posterior = p;
        }
    }
}

/// Raises entries below the floor to exactly the floor and rescales the rest
/// so the vector still sums to one. The largest entry always stays above the
/// floor, so the rescaled set is never empty; rescaling can push a borderline
/// entry under the floor, hence the repeat.
fn apply_floor(post: &mut [f64]) {
    for _ in 0..post.len() {
        let floored = post.iter().filter(|&&p| p <= POSTERIOR_FLOOR).count();
        if post.iter().all(|&p| p >= POSTERIOR_FLOOR) {
            return;
        }
        let free: f64 = post.iter().filter(|&&p| p > POSTERIOR_FLOOR).sum();
        let scale = (1.0 - floored as f64 * POSTERIOR_FLOOR) / free;
        for p in post.iter_mut() {
            *p = if *p <= POSTERIOR_FLOOR {
                POSTERIOR_FLOOR
            } else {
                *p * scale
            };
        }
    }
}

/// Posterior update for measurement `z` against each subsystem's one-step
/// prediction from `x_prev`.
pub fn posterior_update(
    ens: &EnsembleState,
    x_prev: &Regressor,
    z: f64,
    sigma_scaling: bool,
) -> EnsembleState {
    let log_lik: Vec<f64> = ens
        .subsystems
        .iter()
        .map(|s| subsystem_likelihood(&s.hypothesis, x_prev, &s.estimator.w_hat, z, sigma_scaling))
        .collect();
    let mut next = ens.clone();
    next.apply_log_likelihoods(&log_lik);
    next
}

/// Posterior-weighted sum of the per-subsystem certainty-equivalence laws.
pub fn ensemble_control(
    ens: &EnsembleState,
    eta: &DVector<f64>,
    y_r_next: f64,
    limits: &ControlLimits,
) -> Result<f64> {
    let laws = subsystem_controls(ens, eta, y_r_next, limits)?;
    Ok(combine(&ens.posteriors(), &laws))
}

/// `u(k | Omega_i)` for every subsystem.
pub fn subsystem_controls(
    ens: &EnsembleState,
    eta: &DVector<f64>,
    y_r_next: f64,
    limits: &ControlLimits,
) -> Result<Vec<f64>> {
    ens.subsystems
        .iter()
        .map(|s| {
            let split = ControlSplit::from_parameters(&s.estimator.w_hat, eta)?;
            ce_control(&split, y_r_next, limits)
        })
        .collect()
}

/// `sum_i pi_i u_i`.
pub fn combine(posteriors: &[f64], laws: &[f64]) -> f64 {
    posteriors.iter().zip(laws).map(|(p, u)| p * u).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn split(b1: f64, alpha: &[f64], eta: &[f64]) -> ControlSplit {
        ControlSplit {
            b1_hat: b1,
            alpha_hat: DVector::from_row_slice(alpha),
            eta: DVector::from_row_slice(eta),
        }
    }

    #[test]
    fn ce_examples() {
        let lim = ControlLimits::default();
        assert_eq!(
            ce_control(&split(1.0, &[0.0], &[3.0]), 5.0, &lim).unwrap(),
            5.0
        );
        assert_eq!(
            ce_control(&split(0.5, &[1.0], &[1.0]), 2.0, &lim).unwrap(),
            2.0
        );
    }

    #[test]
    fn ce_safeguards() {
        let lim = ControlLimits::new(1e-6, 1e3).unwrap();
        // b1 = 0 uses +eps_b, then saturates
        assert_eq!(
            ce_control(&split(0.0, &[0.0], &[0.0]), 1.0, &lim).unwrap(),
            1e3
        );
        assert_eq!(
            ce_control(&split(-1e-9, &[0.0], &[0.0]), 1.0, &lim).unwrap(),
            -1e3
        );
        let loose = ControlLimits::new(1e-6, 1e9).unwrap();
        let u = ce_control(&split(1e-8, &[0.0], &[0.0]), 1.0, &loose).unwrap();
        assert!((u - 1e6).abs() < 1e-6);
        assert!(ce_control(&split(1.0, &[f64::NAN], &[0.0]), 1.0, &lim).is_err());
    }

    #[test]
    fn likelihood_examples() {
        let x = DVector::from_vec(vec![1.0]);
        let w = DVector::from_vec(vec![0.0]);
        let h = AldParams::new(0.95, 0.0, 0.01).unwrap();
        assert!((subsystem_likelihood(&h, &x, &w, 0.0, true) - 4.75f64.ln()).abs() < 1e-12);
        let l = subsystem_likelihood(&h, &x, &w, 0.02, true);
        assert!((l - (4.75f64.ln() - 1.9)).abs() < 1e-12);
        assert!((l.exp() - h.pdf(0.02)).abs() < 1e-12);
        let sym = AldParams::new(0.5, 0.0, 1.0).unwrap();
        assert_eq!(
            subsystem_likelihood(&sym, &x, &w, 0.7, true),
            subsystem_likelihood(&sym, &x, &w, -0.7, true)
        );
        // literal form: residual not divided by sigma
        let l = subsystem_likelihood(&h, &x, &w, 0.02, false);
        assert!((l - (4.75f64.ln() - 0.95 * 0.02)).abs() < 1e-12);
    }

    fn ensemble(posteriors: &[f64]) -> EnsembleState {
        let est = EstimatorState::new(DVector::from_vec(vec![1.0, 0.0]), DMatrix::identity(2, 2))
            .unwrap();
        EnsembleState {
            subsystems: posteriors
                .iter()
                .map(|&p| SubsystemState {
                    hypothesis: AldParams::new(0.5, 0.0, 1.0).unwrap(),
                    estimator: est.clone(),
                    posterior: p,
                })
                .collect(),
        }
    }

    #[test]
    fn posterior_bayes_arithmetic() {
        let mut e = ensemble(&[0.5, 0.5]);
        e.apply_log_likelihoods(&[2f64.ln() - 3.0, -3.0]);
        let p = e.posteriors();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn equal_likelihoods_leave_posteriors() {
        let mut e = ensemble(&[0.2, 0.3, 0.5]);
        e.apply_log_likelihoods(&[-1.5, -1.5, -1.5]);
        let p = e.posteriors();
        for (a, b) in p.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut single = ensemble(&[1.0]);
        single.apply_log_likelihoods(&[-1e6]);
        assert_eq!(single.posteriors(), vec![1.0]);
    }

    #[test]
    fn posterior_floor_prevents_absorption() {
        let mut e = ensemble(&[0.5, 0.5]);
        e.apply_log_likelihoods(&[0.0, -1e4]);
        let p = e.posteriors();
        assert!(p[1] >= POSTERIOR_FLOOR * 0.999);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ensemble_weighted_sum() {
        assert_eq!(combine(&[0.5, 0.5], &[2.0, 4.0]), 3.0);
        assert_eq!(combine(&[1.0, 0.0], &[2.0, 4.0]), 2.0);
        let e = ensemble(&[1.0]);
        let eta = DVector::from_vec(vec![0.3]);
        let lim = ControlLimits::default();
        let single = ce_control(
            &ControlSplit::from_parameters(&e.subsystems[0].estimator.w_hat, &eta).unwrap(),
            0.8,
            &lim,
        )
        .unwrap();
        assert_eq!(ensemble_control(&e, &eta, 0.8, &lim).unwrap(), single);
    }

    #[test]
    fn oracle_matches_ce_with_true_parameters() {
        let plant = ArxParams::new(vec![-1.41, 0.9], vec![0.5]).unwrap();
        let eta = DVector::from_vec(vec![0.4, -0.2]);
        let lim = ControlLimits::default();
        let split = ControlSplit::from_parameters(&plant.as_vector(), &eta).unwrap();
        assert_eq!(
            oracle_optimal_control(&plant, &eta, 1.0, &lim).unwrap(),
            ce_control(&split, 1.0, &lim).unwrap()
        );
    }
}
