//! Online parameter learning for the ARX regression `z(k+1) = x(k)^T w + e(k+1)`.
//!
//! The iterative quantile filter (IQF) is a weighted recursive least squares
//! whose per-sample weight depends on the sign of the prediction residual
//! (`tau` above the regression line, `1 - tau` below) and whose innovation is
//! shifted by the mean of the hypothesised ALD noise. With `tau = 0.5` and a
//! zero-mean hypothesis it reduces to classic RLS.

use nalgebra::{DMatrix, DVector};

use crate::ald_noise::AldParams;
use crate::error::{Error, Result};

/// Regressor `[u(k), .., u(k-m+1), z(k), .., z(k-n+1)]`.
pub type Regressor = DVector<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub w_hat: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl EstimatorState {
    pub fn new(w0: DVector<f64>, p0: DMatrix<f64>) -> Result<Self> {
        let d = w0.len();
        if p0.nrows() != d || p0.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: p0.nrows(),
                context: "initial covariance",
            });
        }
        if (&p0 - p0.transpose()).amax() > 1e-12 {
            return Err(Error::invalid("p0", "initial covariance must be symmetric"));
        }
        if p0.clone().cholesky().is_none() {
            return Err(Error::invalid(
                "p0",
                "initial covariance must be positive definite",
            ));
        }
        Ok(Self { w_hat: w0, p: p0 })
    }

    /// `w0` with covariance `scale * I`.
    pub fn with_scaled_identity(w0: DVector<f64>, scale: f64) -> Result<Self> {
        let d = w0.len();
        Self::new(w0, DMatrix::identity(d, d) * scale)
    }

    pub fn dim(&self) -> usize {
        self.w_hat.len()
    }

    pub fn predict(&self, x: &Regressor) -> f64 {
        x.dot(&self.w_hat)
    }
}

/// Initial state plus the noise hypothesis that drives the weights and offset.
#[derive(Debug, Clone, PartialEq)]
pub struct IqfConfig {
    pub ald: AldParams,
    pub w0: DVector<f64>,
    pub p0: DMatrix<f64>,
}

impl IqfConfig {
    pub fn initial_state(&self) -> Result<EstimatorState> {
        EstimatorState::new(self.w0.clone(), self.p0.clone())
    }
}

/// Result of one filter update.
#[derive(Debug, Clone, PartialEq)]
pub struct IqfUpdate {
    pub state: EstimatorState,
    /// Sample weight actually used, `tau` or `1 - tau`.
    pub weight: f64,
    /// Raw residual `z_next - x^T w_hat` before the update.
    pub residual: f64,
}

/// `1 - tau` for a negative residual, `tau` otherwise.
#[inline]
pub fn weight_p(tau: f64, residual: f64) -> f64 {
    if residual < 0.0 {
        1.0 - tau
    } else {
        tau
    }
}

fn check_inputs(
    state: &EstimatorState,
    x: &Regressor,
    z_next: f64,
    op: &'static str,
) -> Result<()> {
    if x.len() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            actual: x.len(),
            context: "regressor",
        });
    }
    if !z_next.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(op));
    }
    Ok(())
}

/// Weighted RLS update shared by both filters.
fn weighted_update(
    state: &EstimatorState,
    x: &Regressor,
    weight: f64,
    innovation: f64,
) -> EstimatorState {
    let px = &state.p * x;
    let denom = 1.0 + weight * x.dot(&px);
    let gain = px * (weight / denom);
    let w_hat = &state.w_hat + &gain * innovation;
    let mut p = &state.p - &gain * (x.transpose() * &state.p);
    symmetrize(&mut p);
    EstimatorState { w_hat, p }
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let d = p.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = avg;
            p[(j, i)] = avg;
        }
    }
}

/// One iterative-quantile-filter step with the hypothesis `ald`.
///
/// The weight is chosen from the raw residual; the innovation additionally
/// subtracts the ALD mean.
pub fn iqf_step(
    state: &EstimatorState,
    ald: &AldParams,
    x: &Regressor,
    z_next: f64,
) -> Result<IqfUpdate> {
    check_inputs(state, x, z_next, "iqf_step")?;
    let residual = z_next - state.predict(x);
    let weight = weight_p(ald.tau(), residual);
    let state = weighted_update(state, x, weight, residual - ald.mean());
    Ok(IqfUpdate {
        state,
        weight,
        residual,
    })
}

/// Classic recursive least squares: unit weight, no offset.
pub fn rls_step(state: &EstimatorState, x: &Regressor, z_next: f64) -> Result<EstimatorState> {
    check_inputs(state, x, z_next, "rls_step")?;
    let residual = z_next - state.predict(x);
    Ok(weighted_update(state, x, 1.0, residual))
}

/// Closed-form minimiser of the prior-regularised weighted quadratic loss
///
/// ```text
/// (w - w0)^T P0^-1 (w - w0) + (Z - E - X w)^T M (Z - E - X w)
/// ```
///
/// i.e. `(P0^-1 + X^T M X)^-1 (P0^-1 w0 + X^T M (Z - E))`. Feeding it the
/// weights the recursion picked online reproduces the recursive estimate.
pub fn batch_weighted_ls(
    x: &DMatrix<f64>,
    z: &DVector<f64>,
    offsets: &DVector<f64>,
    weights: &DVector<f64>,
    p0: &DMatrix<f64>,
    w0: &DVector<f64>,
) -> Result<DVector<f64>> {
    let d = w0.len();
    let n = x.nrows();
    if x.nrows() > 0 && x.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: x.ncols(),
            context: "regressor matrix columns",
        });
    }
    for (len, context) in [
        (z.len(), "measurement vector"),
        (offsets.len(), "offset vector"),
        (weights.len(), "weight vector"),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
                context,
            });
        }
    }
    let p0_inv = p0.clone().try_inverse().ok_or(Error::Singular)?;
    let mut normal = p0_inv.clone();
    let mut rhs = &p0_inv * w0;
    for (i, row) in x.row_iter().enumerate() {
        let xi = row.transpose();
        normal += &xi * xi.transpose() * weights[i];
        rhs += &xi * (weights[i] * (z[i] - offsets[i]));
    }
    normal
        .lu()
        .solve(&rhs)
        .filter(|w| w.iter().all(|v| v.is_finite()))
        .ok_or(Error::Singular)
}
