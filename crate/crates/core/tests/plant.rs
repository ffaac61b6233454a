mod common;

use common::{ald_breaks, integrate_pieces, mixture_breaks};
use ensemble_control::ald_noise::{ald_pdf, AldParams, NoiseComponent, NoiseModel};
use ensemble_control::controller::{oracle_optimal_control, ControlLimits};
use ensemble_control::harness::load_preset;
use ensemble_control::plant::{
    measure, plant_step, reference, ArxParams, PlantState, TrajectoryKind, TrajectorySpec,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn test_plant() -> ArxParams {
    ArxParams::new(vec![-1.41, 0.9], vec![0.5]).unwrap()
}

/// Outputs of the plant from zero state driven by `inputs`.
fn response(p: &ArxParams, inputs: &[f64]) -> Vec<f64> {
    let mut s = PlantState::zeros(p);
    inputs
        .iter()
        .map(|&u| {
            let (y, next) = plant_step(p, &s, u).unwrap();
            s = next;
            y
        })
        .collect()
}

#[test]
fn step_examples() {
    let p = test_plant();
    assert_eq!(response(&p, &[0.0]), vec![0.0]);
    assert_eq!(response(&p, &[2.0]), vec![1.0]);
    // y(k) = 1, y(k-1) = 0 then zero input
    let y = response(&p, &[2.0, 0.0]);
    assert!((y[1] + 1.41).abs() < 1e-15);
    assert!(plant_step(&p, &PlantState::zeros(&p), f64::INFINITY).is_err());
}

#[test]
fn test_plant_is_open_loop_unstable() {
    let p = test_plant();
    let mut inputs = vec![1.0];
    inputs.extend(std::iter::repeat_n(0.0, 200));
    let y = response(&p, &inputs);
    assert!(y.last().unwrap().abs() > 1e6);
}

#[test]
fn longer_input_lags_enter_the_response() {
    let p = ArxParams::new(vec![0.0], vec![1.0, 0.5, 0.25]).unwrap();
    assert_eq!(
        response(&p, &[1.0, 0.0, 0.0, 0.0]),
        vec![1.0, 0.5, 0.25, 0.0]
    );
    assert!(ArxParams::new(vec![0.3], vec![0.0]).is_err());
    assert!(ArxParams::new(vec![0.3], vec![]).is_err());
}

#[test]
fn vanishing_noise_measures_the_output() {
    let noise = NoiseModel::single(NoiseComponent::Ald(AldParams::new(0.5, 0.0, 1e-9).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for y in [-3.0, 0.0, 0.25, 10.0] {
        assert!((measure(y, &noise, &mut rng) - y).abs() < 1e-7);
    }
}

#[test]
fn measurement_mean_under_base_mixture() {
    let noise = load_preset("base").unwrap().noise.unwrap();
    let oracle: f64 = noise
        .components()
        .iter()
        .map(|(w, c)| match c {
            NoiseComponent::Ald(p) => {
                w * integrate_pieces(&|x| x * ald_pdf(p, x), &ald_breaks(p), 1e-12)
            }
            NoiseComponent::Gaussian(g) => w * g.mean(),
        })
        .sum();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 100_000;
    let mean = (0..n).map(|_| measure(0.0, &noise, &mut rng)).sum::<f64>() / n as f64;
    assert!((mean - oracle).abs() < 0.01, "{mean} vs {oracle}");
}

#[test]
fn outlier_fraction_under_noise_two() {
    // The main component's left tail (scale 0.2) also reaches past -1, so the
    // oracle integrates the whole mixture rather than the outlier term alone.
    let noise = load_preset("noise2").unwrap().noise.unwrap();
    let mut breaks = mixture_breaks(&noise);
    breaks.extend([-1.0, 1.0]);
    breaks.sort_by(f64::total_cmp);
    let expected = integrate_pieces(
        &|x| if x.abs() > 1.0 { noise.pdf(x) } else { 0.0 },
        &breaks,
        1e-12,
    );
    let outlier = AldParams::new(0.85, 0.0, 2.0).unwrap();
    let outlier_only = 0.01
        * integrate_pieces(
            &|x| {
                if x.abs() > 1.0 {
                    ald_pdf(&outlier, x)
                } else {
                    0.0
                }
            },
            &breaks,
            1e-12,
        );
    assert!(expected > outlier_only + 0.005);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 100_000;
    let hits = (0..n)
        .filter(|_| measure(0.0, &noise, &mut rng).abs() > 1.0)
        .count() as f64
        / n as f64;
    assert!((hits - expected).abs() < 0.003, "{hits} vs {expected}");
}

#[test]
fn reference_examples() {
    let sine = TrajectorySpec::standard(TrajectoryKind::Sine);
    assert_eq!(reference(&sine, 0), 0.0);
    let tri = TrajectorySpec::standard(TrajectoryKind::Triangle);
    assert_eq!(reference(&tri, 0), 0.0);
    assert!((reference(&tri, 25) - 1.0).abs() < 1e-12);
    assert!((reference(&tri, 75) + 1.0).abs() < 1e-12);
    let sq = TrajectorySpec::standard(TrajectoryKind::FilteredSquare);
    for k in 0..50 {
        let oracle = 1.0 - (-(k as f64)).exp();
        assert!((reference(&sq, k) - oracle).abs() < 1e-12, "k {k}");
    }
    let scaled = TrajectorySpec::new(TrajectoryKind::Sine, 0.05, 2.5, 1.0).unwrap();
    assert!((reference(&scaled, 5) - 2.5).abs() < 1e-12);
    assert!(TrajectorySpec::new(TrajectoryKind::Sine, 0.0, 1.0, 1.0).is_err());
}

#[test]
fn references_are_periodic() {
    for kind in [TrajectoryKind::Sine, TrajectoryKind::Triangle] {
        let spec = TrajectorySpec::standard(kind);
        let r = spec.series(1000);
        for k in 0..900 {
            assert!((r[k] - r[k + 100]).abs() < 1e-9, "{kind:?} at {k}");
        }
    }
    let r = TrajectorySpec::standard(TrajectoryKind::FilteredSquare).series(1000);
    let worst = (500..900)
        .map(|k| (r[k] - r[k + 100]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn series_matches_pointwise_reference() {
    for kind in [
        TrajectoryKind::Sine,
        TrajectoryKind::Triangle,
        TrajectoryKind::FilteredSquare,
    ] {
        let spec = TrajectorySpec::standard(kind);
        let s = spec.series(300);
        for k in (0..300).step_by(7) {
            assert_eq!(s[k], reference(&spec, k));
        }
    }
}

#[test]
fn oracle_closed_loop_tracks_exactly_without_noise() {
    let p = test_plant();
    for kind in [
        TrajectoryKind::Sine,
        TrajectoryKind::Triangle,
        TrajectoryKind::FilteredSquare,
    ] {
        let r = TrajectorySpec::standard(kind).series(1001);
        let mut s = PlantState::zeros(&p);
        for k in 0..1000 {
            let u =
                oracle_optimal_control(&p, &s.eta(), r[k + 1], &ControlLimits::default()).unwrap();
            let (y, mut next) = plant_step(&p, &s, u).unwrap();
            next.push_feedback(y);
            s = next;
            assert!((y - r[k + 1]).abs() < 1e-9, "{kind:?} at {}", k + 1);
        }
    }
}

proptest! {
    #[test]
    fn plant_is_linear(
        u1 in prop::collection::vec(-5.0f64..5.0, 1..40),
        u2 in prop::collection::vec(-5.0f64..5.0, 40),
        a in prop::collection::vec(-0.9f64..0.9, 1..4),
        b in prop::collection::vec(0.1f64..2.0, 1..4),
    ) {
        let p = ArxParams::new(a, b).unwrap();
        let u2 = &u2[..u1.len()];
        let sum: Vec<f64> = u1.iter().zip(u2).map(|(x, y)| x + y).collect();
        let (y1, y2, ys) = (response(&p, &u1), response(&p, u2), response(&p, &sum));
        for i in 0..u1.len() {
            prop_assert!((ys[i] - y1[i] - y2[i]).abs() < 1e-9 * (1.0 + ys[i].abs()));
        }
    }
}
