use proptest::prelude::*;

use liftmix::analysis::{evolve, mean_recurrence_time, worst_case_curve};
use liftmix::bounds::{occurrence_lower_bound, rho_bound, rho_limit, tv_upper_bound, BoundParams};
use liftmix::kernel::{dhn_two_stage_oracle, is_reversible, lifted_stationary, MoveKind};
use liftmix::paths::{enumerate_paths, flip_law_exact};
use liftmix::sampler::run;
use liftmix::{dhn_kernel, metropolis_kernel, UnimodalWeights};

/// Positive weights that rise then fall.
fn unimodal(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(0.0f64..2.0, 1..max_len), 0.0f64..1.0).prop_map(|(steps, split)| {
        let peak = ((steps.len() as f64 * split) as usize).min(steps.len() - 1);
        let mut w = vec![1.0];
        for (i, s) in steps.iter().enumerate() {
            let prev = *w.last().unwrap();
            w.push(if i < peak {
                prev + s
            } else {
                (prev - s * prev / 2.0).max(prev * 0.05)
            });
        }
        w
    })
}

fn odd_unimodal(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    unimodal(max_len).prop_map(|mut w| {
        if w.len() % 2 == 0 {
            w.pop();
        }
        w
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_identities(raw in unimodal(40), theta in 0.001f64..0.999) {
        let pi = UnimodalWeights::from_weights(&raw).unwrap().normalize();
        let k = dhn_kernel(&pi, theta).unwrap();
        prop_assert!(k.max_row_defect() <= 1e-15);
        let target = lifted_stationary(&pi);
        let gap: f64 = evolve(&k, &target, 1).unwrap().iter().zip(&target).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(gap < 1e-12);

        let o = dhn_two_stage_oracle(&pi, theta).unwrap();
        for s in 0..k.state_count() {
            for kind in MoveKind::ALL {
                prop_assert!((k.move_probability(s, kind) - o.move_probability(s, kind)).abs() <= 1e-15);
            }
            let flip_like = k.move_probability(s, MoveKind::Flip) + k.move_probability(s, MoveKind::Stationary);
            prop_assert!((flip_like - theta).abs() <= 1e-15);
        }

        let m = metropolis_kernel(&pi);
        prop_assert!(m.max_row_defect() <= 1e-12);
        let mgap: f64 = evolve(&m, pi.as_slice(), 1).unwrap().iter().zip(pi.as_slice()).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(mgap < 1e-12);
        prop_assert!(is_reversible(&m, pi.as_slice()).unwrap());
        if raw.len() >= 2 {
            prop_assert!(!is_reversible(&k, &target).unwrap());
        }
    }

    #[test]
    fn tv_curves_contract(raw in unimodal(12), theta in 0.01f64..0.99) {
        let pi = UnimodalWeights::from_weights(&raw).unwrap().normalize();
        for k in [dhn_kernel(&pi, theta).unwrap(), metropolis_kernel(&pi)] {
            let curve = worst_case_curve(&k, &k.stationary(), 60).unwrap();
            prop_assert!(curve.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn recurrence_identity(raw in unimodal(60)) {
        let w = UnimodalWeights::from_weights(&raw).unwrap();
        let k = dhn_kernel(&w.normalize(), 0.3).unwrap();
        let exact = mean_recurrence_time(&lifted_stationary(k.pi()), k.basepoint()).unwrap();
        let predicted = 2.0 * w.normalizer() / w.peak();
        prop_assert!((exact - predicted).abs() <= 1e-12 * predicted);
    }

    #[test]
    fn runs_are_reproducible(raw in unimodal(10), seed in any::<u64>(), steps in 0usize..500) {
        let k = dhn_kernel(&UnimodalWeights::from_weights(&raw).unwrap().normalize(), 0.2).unwrap();
        prop_assert_eq!(run(&k, 0, steps, seed).unwrap(), run(&k, 0, steps, seed).unwrap());
    }

    #[test]
    fn enumeration_matches_evolution(raw in unimodal(5), len in 0usize..7, theta in 0.05f64..0.95) {
        let k = dhn_kernel(&UnimodalWeights::from_weights(&raw).unwrap().normalize(), theta).unwrap();
        for x in 0..k.state_count() {
            let mut point = vec![0.0; k.state_count()];
            point[x] = 1.0;
            let row = evolve(&k, &point, len).unwrap();
            for (y, p) in row.iter().enumerate() {
                let e = enumerate_paths(&k, x, y, len, 1 << 24).unwrap();
                prop_assert!((e.total_probability - p).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn occurrence_bound_dominated_at_admissible_constant(raw in odd_unimodal(7)) {
        prop_assume!(raw.len() >= 3);
        let w = UnimodalWeights::from_weights(&raw).unwrap();
        let n = w.n();
        let k = dhn_kernel(&w.normalize(), 1.0 / n as f64).unwrap();
        let unit = BoundParams::default().with_radii(&w).unwrap();
        let steps = unit.path_length(n).unwrap() as usize;
        let mut rows = Vec::new();
        for x in 0..k.state_count() {
            let mut point = vec![0.0; k.state_count()];
            point[x] = 1.0;
            rows.push(evolve(&k, &point, steps).unwrap());
        }
        let position = |y: usize| if y < n { y + 1 } else { y - n + 1 };
        let mut admissible = f64::INFINITY;
        for row in &rows {
            for (y, &p) in row.iter().enumerate() {
                admissible = admissible.min(p / occurrence_lower_bound(&unit, &w, position(y)).unwrap().value);
            }
        }
        prop_assert!(admissible > 0.0);
        let p = BoundParams { c_tilde_tilde: admissible, ..unit };
        for row in &rows {
            for (y, &prob) in row.iter().enumerate() {
                prop_assert!(occurrence_lower_bound(&p, &w, position(y)).unwrap().value <= prob * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn tv_bound_monotone(c in 0.5f64..4.0, ratio in 1.0f64..20.0, c_hat in 0.01f64..1.0, n in 5usize..500) {
        let p = BoundParams { c, c_prime: c * ratio, c_hat, ..BoundParams::default() };
        let longer = BoundParams { c_prime: c * (ratio + 1.0), ..p };
        prop_assert!(tv_upper_bound(&longer, n).unwrap() <= tv_upper_bound(&p, n).unwrap());
        // smaller c^ means a larger rho
        let weaker = BoundParams { c_hat: c_hat / 2.0, ..p };
        prop_assert!(rho_bound(&weaker, n).unwrap() >= rho_bound(&p, n).unwrap());
        prop_assert!(tv_upper_bound(&weaker, n).unwrap() >= tv_upper_bound(&p, n).unwrap());
    }
}

#[test]
fn rho_converges_at_rate_one_over_n() {
    let p = BoundParams {
        c: 3.0,
        c_prime: 30.0,
        f1: 1,
        f2: 1,
        c_hat: 1.5,
        ..BoundParams::default()
    };
    let limit = rho_limit(&p).unwrap();
    let scaled: Vec<f64> = [50usize, 100, 1000, 10_000, 100_000]
        .iter()
        .map(|&n| n as f64 * (rho_bound(&p, n).unwrap() - limit).abs())
        .collect();
    // n |rho_n - rho| settles to a constant
    let last = *scaled.last().unwrap();
    assert!(
        scaled.iter().all(|&s| s <= 2.0 * last && s >= last / 2.0),
        "{scaled:?}"
    );
}

#[test]
fn flip_law_mass_and_mean() {
    for raw in [vec![1.0; 7], vec![1.0, 2.0, 4.0, 3.0, 2.0, 1.5, 1.0]] {
        let k = dhn_kernel(
            &UnimodalWeights::from_weights(&raw).unwrap().normalize(),
            1.0 / 7.0,
        )
        .unwrap();
        let law = flip_law_exact(&k, k.basepoint(), 2000).unwrap();
        assert!(law.deficiency < 1e-10, "{}", law.deficiency);
        let exact = mean_recurrence_time(&lifted_stationary(k.pi()), k.basepoint()).unwrap();
        assert!((law.mean_length() - exact).abs() < 1e-6 * exact);
    }
}
