use diagan::drs::*;
use diagan::numcore::{Activation, Mlp};
use diagan::{rng, Error};
use ndarray::{Array2, ArrayView2};
use proptest::prelude::*;
use rand::Rng;

/// `N(mean, 1)` in one dimension.
struct Normal1(f64);

impl SampleSource for Normal1 {
    fn sample(&self, n: usize, rng: &mut dyn rand::RngCore) -> diagan::Result<Array2<f64>> {
        let mut buf = vec![0.0; n];
        rng::fill_normal(rng, &mut buf);
        Ok(Array2::from_shape_vec((n, 1), buf.into_iter().map(|v| v + self.0).collect()).unwrap())
    }
}

/// Exact `log N(x; 0.5, 1) / N(x; 0, 1)`.
struct ShiftLdr;

impl LdrEstimator for ShiftLdr {
    fn ldr(&self, x: ArrayView2<f64>) -> diagan::Result<Vec<f64>> {
        Ok(x.column(0).iter().map(|&v| 0.5 * v - 0.125).collect())
    }
}

struct ConstantLdr(f64);

impl LdrEstimator for ConstantLdr {
    fn ldr(&self, x: ArrayView2<f64>) -> diagan::Result<Vec<f64>> {
        Ok(vec![self.0; x.nrows()])
    }
}

fn state(max: f64, gamma: f64) -> DrsState {
    DrsState::new(max, gamma, DEFAULT_EPSILON).unwrap()
}

fn acceptance_frequency(f: f64, draws: usize, seed: u64) -> f64 {
    let mut r = rng::stream(seed, 400);
    (0..draws).filter(|_| accept(f, r.random())).count() as f64 / draws as f64
}

#[test]
fn acceptance_rate_at_unit_logit() {
    let want = 1.0 / (1.0 + (-1f64).exp());
    assert!((want - 0.7311).abs() < 1e-4);
    assert!((acceptance_frequency(1.0, 100_000, 1) - want).abs() < 0.005);
}

#[test]
fn acceptance_limits() {
    assert_eq!(acceptance_frequency(800.0, 10_000, 2), 1.0);
    assert_eq!(acceptance_probability(0.0), 0.5);
    assert!((acceptance_frequency(0.0, 100_000, 3) - 0.5).abs() < 0.005);
}

#[test]
fn f_hat_at_running_maximum() {
    let f = f_hat(1.0, &state(1.0, 0.5)).unwrap();
    let oracle = -(1.0 - (-1e-6f64).exp()).ln() - 0.5;
    assert!((f - oracle).abs() < 1e-9);
    assert!((f + 0.5 - 13.8155).abs() < 1e-4);
}

#[test]
fn pool_maximum() {
    let cfg = DrsConfig::default();
    assert_eq!(state_from_pool(&[-1.0, 0.0, 2.0], &cfg).unwrap().ldr_max, 2.0);
    let d = Mlp::zeros(&[2, 4, 1], Activation::Relu, Activation::Sigmoid).unwrap();
    let x = Array2::from_shape_fn((20, 2), |(i, j)| (i * 3 + j) as f64);
    let pool = discriminator_ldr(&d, x.view()).unwrap();
    assert_eq!(state_from_pool(&pool, &cfg).unwrap().ldr_max, 0.0);
}

#[test]
fn gamma_is_the_nearest_rank_percentile_of_the_pool() {
    let mut r = rng::stream(4, 401);
    let pool: Vec<f64> = (0..100).map(|_| 3.0 * rng::normal(&mut r)).collect();
    let cfg = DrsConfig::default();
    let st = state_from_pool(&pool, &cfg).unwrap();
    let max = pool.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut f: Vec<f64> = pool
        .iter()
        .map(|&l| {
            let d = l - max;
            d - (1.0 - (d - 1e-6).exp()).ln()
        })
        .collect();
    f.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // 80th of 100 in 1-based rank
    assert!((st.gamma - f[79]).abs() < 1e-9);
}

#[test]
fn percentile_convention() {
    let v = [5.0, 1.0, 4.0, 2.0, 3.0];
    assert_eq!(nearest_rank_percentile(&v, 0.8).unwrap(), 4.0);
    assert_eq!(nearest_rank_percentile(&v, 0.81).unwrap(), 5.0);
    assert_eq!(nearest_rank_percentile(&v, 1.0).unwrap(), 5.0);
    assert_eq!(nearest_rank_percentile(&v, 0.01).unwrap(), 1.0);
    assert!(nearest_rank_percentile(&[], 0.5).is_err());
    assert!(nearest_rank_percentile(&v, 0.0).is_err());
}

#[test]
fn analytic_optimal_discriminator_recovers_target_mean() {
    let cfg = DrsConfig { gamma_percentile: 1.0, ..DrsConfig::default() };
    let mut r = rng::stream(5, 402);
    let mut st = init_ldr_max(&Normal1(0.0), &ShiftLdr, &cfg, &mut r).unwrap();
    st.gamma = 0.0;
    let out = sample_n(&Normal1(0.0), &ShiftLdr, 50_000, &mut st, &cfg, &mut r).unwrap();
    let mean = out.samples.column(0).mean().unwrap();
    assert!((mean - 0.5).abs() < 0.03, "{mean}");
    assert_eq!(out.samples.nrows(), 50_000);
    assert!(out.report.acceptance_rate > 0.0 && out.report.acceptance_rate <= 1.0);
}

#[test]
fn low_gamma_accepts_everything() {
    let cfg = DrsConfig::default();
    let mut st = state(0.0, -1e6);
    let mut r = rng::stream(6, 403);
    let out = sample_n(&Normal1(0.0), &ConstantLdr(0.0), 20_000, &mut st, &cfg, &mut r).unwrap();
    assert_eq!(out.report.acceptance_rate, 1.0);
    let col = out.samples.column(0);
    let mean = col.mean().unwrap();
    let var = col.var(1.0);
    assert!(mean.abs() < 0.03 && (var - 1.0).abs() < 0.05, "{mean} {var}");
}

#[test]
fn candidate_above_the_maximum_raises_it_first() {
    let cfg = DrsConfig { chunk: 1, ..DrsConfig::default() };
    let mut st = state(0.0, 0.0);
    let mut r = rng::stream(7, 404);
    let out = sample_n(&Normal1(0.0), &ConstantLdr(3.0), 100, &mut st, &cfg, &mut r).unwrap();
    assert_eq!(out.report.final_ldr_max, 3.0);
    assert_eq!(out.report.initial_ldr_max, 0.0);
    // every candidate sits at the new maximum and is accepted with ≈1 − 1e-6
    assert_eq!(out.report.candidates, 100);
}

#[test]
fn zero_requested_samples() {
    let cfg = DrsConfig::default();
    let mut st = state(0.0, 0.0);
    let mut r = rng::stream(8, 405);
    let out = sample_n(&Normal1(0.0), &ShiftLdr, 0, &mut st, &cfg, &mut r).unwrap();
    assert_eq!(out.samples.nrows(), 0);
    assert_eq!(out.report.candidates, 0);
    assert!(out.report.acceptance_rate > 0.0 && out.report.acceptance_rate <= 1.0);
}

#[test]
fn starvation_is_reported() {
    let cfg = DrsConfig { starvation_window: 1000, min_acceptance: 1e-2, chunk: 256, ..DrsConfig::default() };
    let mut st = state(0.0, 50.0);
    let mut r = rng::stream(9, 406);
    let err = sample_n(&Normal1(0.0), &ConstantLdr(-5.0), 10, &mut st, &cfg, &mut r).unwrap_err();
    assert!(matches!(err, Error::Starvation { window: 1000, .. }));
}

#[test]
fn hinge_discriminator_ldr_is_the_raw_output() {
    let d = Mlp::new(&[2, 4, 1], Activation::Relu, Activation::Identity, &mut rng::stream(10, 407)).unwrap();
    let x = Array2::from_shape_fn((7, 2), |(i, j)| i as f64 - j as f64);
    assert_eq!(discriminator_ldr(&d, x.view()).unwrap(), d.forward(x.view()).unwrap().column(0).to_vec());
    let tanh = Mlp::zeros(&[2, 1], Activation::Relu, Activation::Tanh).unwrap();
    assert!(discriminator_ldr(&tanh, x.view()).is_err());
}

#[test]
fn sampling_is_seeded() {
    let run = || {
        let cfg = DrsConfig { init_count: 500, ..DrsConfig::default() };
        let mut r = rng::stream(11, 408);
        let mut st = init_ldr_max(&Normal1(0.0), &ShiftLdr, &cfg, &mut r).unwrap();
        sample_n(&Normal1(0.0), &ShiftLdr, 300, &mut st, &cfg, &mut r).unwrap().samples
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn gamma_shift_is_additive(l in -30.0f64..0.0, g in -10.0f64..10.0, c in 0.0f64..10.0) {
        let a = f_hat(l, &state(0.0, g)).unwrap();
        let b = f_hat(l, &state(0.0, g + c)).unwrap();
        prop_assert!((a - b - c).abs() < 1e-9);
    }

    #[test]
    fn raising_gamma_never_raises_acceptance(l in -30.0f64..0.0, g in -10.0f64..10.0, c in 1e-3f64..10.0) {
        let a = acceptance_probability(f_hat(l, &state(0.0, g)).unwrap());
        let b = acceptance_probability(f_hat(l, &state(0.0, g + c)).unwrap());
        prop_assert!(b <= a);
    }

    #[test]
    fn acceptance_is_monotone_in_ldr(l in -30.0f64..-1e-3, dl in 1e-6f64..1.0) {
        let st = state(0.0, 0.0);
        let hi = (l + dl).min(0.0);
        prop_assert!(f_hat(hi, &st).unwrap() >= f_hat(l, &st).unwrap());
    }

    #[test]
    fn plain_rejection_probability(l in -20.0f64..-0.01) {
        let p = acceptance_probability(f_hat(l, &state(0.0, 0.0)).unwrap());
        prop_assert!((p - l.exp()).abs() < 1e-5);
    }
}
