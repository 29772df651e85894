use lqsense::bounds::{self, BoundsQuery, C0Variant};
use lqsense::matrix::Combinations;
use lqsense::nsp::{self, NspOptions};
use lqsense::rip::{self, RipOptions};
use lqsense::solver::{self, SolverOptions};
use lqsense::vector::{best_s_term, quasi_norm};
use lqsense::{DenseMatrix, SignalVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..m * n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z / (m as f64).sqrt()
        })
        .collect();
    DenseMatrix::new(m, n, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quasi_norm_is_homogeneous(
        x in prop::collection::vec(-10.0f64..10.0, 1..12),
        c in 0.01f64..100.0,
        q in 0.05f64..=1.0,
    ) {
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let lhs = quasi_norm(&scaled, q).unwrap();
        let rhs = c * quasi_norm(&x, q).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
    }

    #[test]
    fn best_s_term_beats_every_support(
        x in prop::collection::vec(-5.0f64..5.0, 2..8),
        q in 0.1f64..=1.0,
        s_frac in 0.0f64..1.0,
    ) {
        let n = x.len();
        let s = 1 + ((n - 1) as f64 * s_frac) as usize;
        let xv = SignalVector::new(x.clone()).unwrap();
        let best = quasi_norm(xv.sub(&best_s_term(&xv, s, q).unwrap()).unwrap().as_slice(), q).unwrap();
        for support in Combinations::new(n, s) {
            let tail: Vec<f64> = (0..n).filter(|i| !support.contains(i)).map(|i| x[i]).collect();
            prop_assert!(best <= quasi_norm(&tail, q).unwrap() + 1e-12);
        }
    }

    #[test]
    fn thresholds_are_ordered(delta in 0.01f64..0.99) {
        let succ = bounds::q_succ(delta).unwrap().q;
        let fail = bounds::q_fail(delta).unwrap().q;
        prop_assert!(succ <= fail, "delta {delta}: {succ} > {fail}");
        let delta1 = bounds::delta1(delta).unwrap();
        if succ > 0.0 {
            let a = bounds::a_value(BoundsQuery::new(0.5 * succ, delta1).unwrap()).value;
            prop_assert!(a < delta1);
        }
    }

    #[test]
    fn rescaled_constant_ignores_global_scale(seed in 0u64..200, c in 0.1f64..10.0) {
        let a = gaussian(5, 7, seed);
        let opts = RipOptions::default();
        let (_, d) = rip::rescale_to_rip(&a, 2, &opts).unwrap();
        let (_, dc) = rip::rescale_to_rip(&a.scaled(c), 2, &opts).unwrap();
        prop_assert!((d - dc).abs() <= 1e-9);
    }
}

#[test]
fn nsp_bound_dominates_search_on_certified_matrices() {
    // whenever a(q, δ₁) < δ₁ the search estimate, a lower bound on γ, must stay below it
    let mut compared = 0;
    for seed in 0..30 {
        let a = gaussian(6, 8, seed);
        let report = nsp::nsp_gamma(&a, 1, 0.05, &NspOptions::default()).unwrap();
        if let Some(bound) = report.rip_bound {
            assert!(report.gamma_estimate <= bound + 1e-9, "seed {seed}");
            compared += 1;
        }
    }
    assert!(compared > 0);
}

#[test]
fn certified_exponent_gives_exact_recovery() {
    let a = gaussian(6, 8, 4);
    let opts = RipOptions::default();
    let (_, delta) = rip::rescale_to_rip(&a, 2, &opts).unwrap();
    let q = 0.5 * bounds::q_succ(delta).unwrap().q;
    assert!(q > 0.0);
    let sopts = SolverOptions { sparsity_hint: Some(1), ..SolverOptions::new(q).unwrap() };
    for j in 0..8 {
        let mut x = vec![0.0; 8];
        x[j] = if j % 2 == 0 { 1.5 } else { -0.7 };
        let y = SignalVector::new(a.mul_vec(&x).unwrap()).unwrap();
        let out = solver::irls_equality(&a, &y, &sopts).unwrap();
        let err: f64 = out.x_hat.as_slice().iter().zip(&x).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "column {j}: {err}");
    }
}

#[test]
fn stable_bounds_hold_for_noisy_solver() {
    let a = gaussian(10, 12, 8);
    let opts = RipOptions::default();
    let (b, delta) = rip::rescale_to_rip(&a, 2, &opts).unwrap();
    let q = 0.5 * bounds::q_succ(delta).unwrap().q;
    let rc = bounds::recovery_constants(q, delta, 1, C0Variant::Squared).unwrap();
    assert!(rc.feasible);
    let sopts = SolverOptions { sparsity_hint: Some(1), ..SolverOptions::new(q).unwrap() };
    let eps = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let x: Vec<f64> = (0..12).map(|k| ((k + 1) as f64).powf(-2.0)).collect();
        let z: Vec<f64> = (0..10)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v
            })
            .collect();
        let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y: Vec<f64> = b.mul_vec(&x).unwrap().iter().zip(&z).map(|(u, v)| u + 0.5 * eps * v / zn).collect();
        let out = solver::irls_noisy(&b, &SignalVector::new(y).unwrap(), eps, &sopts).unwrap();
        let xv = SignalVector::new(x).unwrap();
        let h = out.x_hat.sub(&xv).unwrap();
        let sigma = xv.sub(&best_s_term(&xv, 1, q).unwrap()).unwrap().quasi_norm(q).unwrap();
        assert!(h.norm2() <= rc.l2_bound(sigma, eps).total());
        assert!(h.quasi_norm(q).unwrap() <= rc.lq_bound(sigma, eps).total());
        assert!(out.objective <= xv.q_power_sum(q) * (1.0 + 1e-9));
    }
}
