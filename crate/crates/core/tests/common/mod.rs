//! Shared numerical oracles for the integration tests.
//!
//! Nothing here calls into the crate's own distribution code paths beyond the
//! density being integrated, so the checks are independent of the sampler and
//! of the closed-form moments.

#![allow(dead_code)]

use ensemble_control::ald_noise::{AldParams, NoiseComponent, NoiseModel};

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    refine(f, a, b, fa, fm, fb, whole, tol, 60)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integrates over consecutive breakpoints so kinks sit on panel edges.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: f64) -> f64 {
    breaks
        .windows(2)
        .map(|w| integrate(f, w[0], w[1], tol / breaks.len() as f64))
        .sum()
}

/// Breakpoints covering an ALD out to `e^-60` in both tails.
pub fn ald_breaks(p: &AldParams) -> Vec<f64> {
    let left = 60.0 * p.sigma() / (1.0 - p.tau());
    let right = 60.0 * p.sigma() / p.tau();
    let mu = p.mu();
    // dense near the peak, where most of the mass sits
    let mut b: Vec<f64> = [-1.0, -0.1, -0.01]
        .iter()
        .map(|f| mu + f * left)
        .chain(std::iter::once(mu))
        .chain([0.01, 0.1, 1.0].iter().map(|f| mu + f * right))
        .collect();
    b.dedup();
    b
}

fn component_breaks(c: &NoiseComponent) -> Vec<f64> {
    match c {
        NoiseComponent::Ald(p) => ald_breaks(p),
        NoiseComponent::Gaussian(g) => {
            let sd = g.variance().sqrt();
            (-14..=14).map(|i| g.mean() + i as f64 * sd).collect()
        }
    }
}

/// Sorted union of every component's breakpoints.
pub fn mixture_breaks(m: &NoiseModel) -> Vec<f64> {
    let mut b: Vec<f64> = m
        .components()
        .iter()
        .flat_map(|(_, c)| component_breaks(c))
        .collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// The test grid of ALD parameters.
pub fn ald_grid() -> Vec<AldParams> {
    let mut out = Vec::new();
    for tau in [0.05, 0.5, 0.85, 0.95] {
        for sigma in [0.01, 1.0, 2.0] {
            for mu in [-2.0, 0.0, 2.0] {
                out.push(AldParams::new(tau, mu, sigma).unwrap());
            }
        }
    }
    out
}

/// `median` of a non-empty slice (upper median for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}
