//! Property tests for the invariants of the encoding, operators, ranking,
//! transfer matrix and simulator.

use std::sync::Arc;

use emt_core::benchmark::{shifted_task, BaseFunction};
use emt_core::polecart::{
    controller_force, dynamics, ControllerNetwork, PoleCartParams, PoleCartState, CONTROLLER_PARAMS,
};
use emt_core::rng::seeded_rng;
use emt_core::search::{factorial_ranks, gaussian_mutation, sbx_crossover, sbx_raw, Individual};
use emt_core::transfer::{
    em_step, fit_task_model, floor_row, log_density_table, update_transfer_matrix, TransferMatrix, DIAGONAL_FLOOR,
    SIGMA_MIN,
};
use emt_core::search::run_cea;
use emt_core::{EvolverConfig, TaskDefinition};
use proptest::prelude::*;

fn unit_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, dim)
}

fn simplex_row(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001..1.0f64, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

proptest! {
    #[test]
    fn encode_decode_round_trip(
        bounds in prop::collection::vec((-100.0..100.0f64, 0.01..50.0f64), 1..8),
        t in prop::collection::vec(0.0..=1.0f64, 8),
        extra in 0usize..4,
    ) {
        let lower: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let upper: Vec<f64> = bounds.iter().map(|b| b.0 + b.1).collect();
        let task = TaskDefinition::new("box", lower.clone(), upper.clone(), Arc::new(|_: &[f64]| 0.0));
        let x: Vec<f64> = lower.iter().zip(&upper).zip(&t).map(|((lo, hi), s)| lo + s * (hi - lo)).collect();
        let u = task.encode(&x, x.len() + extra).unwrap();
        prop_assert!(u.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(u[x.len()..].iter().all(|v| *v == 0.5));
        let back = task.decode(&u).unwrap();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn variation_stays_in_unit_box(
        (p1, p2) in (1usize..12).prop_flat_map(|d| (unit_vec(d), unit_vec(d))),
        eta in 0.5..40.0f64,
        sigma in 0.001..2.0f64,
        rate in 0.0..=1.0f64,
        seed in any::<u64>(),
    ) {
        let mut rng = seeded_rng(seed);
        let (c1, c2) = sbx_crossover(&p1, &p2, eta, &mut rng).unwrap();
        let m = gaussian_mutation(&c1, sigma, rate, &mut rng);
        for v in c1.iter().chain(&c2).chain(&m) {
            prop_assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn sbx_preserves_the_parent_mean(
        (p1, p2) in (1usize..12).prop_flat_map(|d| (unit_vec(d), unit_vec(d))),
        seed in any::<u64>(),
    ) {
        let (c1, c2) = sbx_raw(&p1, &p2, 10.0, &mut seeded_rng(seed)).unwrap();
        for k in 0..p1.len() {
            prop_assert!(((c1[k] + c2[k]) - (p1[k] + p2[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn ranks_are_a_bijection(fitness in prop::collection::vec(prop::option::of(-10i32..10), 1..30)) {
        let members: Vec<Individual> = fitness
            .iter()
            .map(|f| {
                let mut m = Individual::new(vec![0.5], 0);
                m.fitness = f.map(f64::from);
                m
            })
            .collect();
        let ranks = factorial_ranks(&members, 0);
        let evaluated = fitness.iter().filter(|f| f.is_some()).count();
        let mut seen: Vec<usize> = ranks.iter().zip(&fitness).filter(|(_, f)| f.is_some()).map(|(r, _)| *r).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (1..=evaluated).collect::<Vec<_>>());
        for (r, f) in ranks.iter().zip(&fitness) {
            if f.is_none() {
                prop_assert_eq!(*r, evaluated + 1);
            }
        }
    }

    #[test]
    fn floored_rows_stay_on_the_simplex(row in (1usize..6).prop_flat_map(simplex_row), pick in 0usize..6, floor in 0.0..=1.0f64) {
        let i = pick % row.len();
        let out = floor_row(&row, i, floor);
        prop_assert!(out.iter().all(|w| *w >= 0.0));
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(out[i] >= floor.min(1.0) - 1e-15);
    }

    #[test]
    fn em_keeps_the_simplex(
        row in (2usize..5).prop_flat_map(simplex_row),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let k = row.len();
        let mut rng = seeded_rng(seed);
        let models: Vec<_> = (0..k)
            .map(|_| {
                let pts: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
                fit_task_model(&pts, SIGMA_MIN).unwrap()
            })
            .collect();
        let points: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let next = em_step(&row, &log_density_table(&points, &models));
        prop_assert!(next.iter().all(|w| *w >= 0.0));
        prop_assert!((next.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let elites = vec![points.clone(); k];
        let w = update_transfer_matrix(&TransferMatrix::uniform(k), &elites, &models, 2, DIAGONAL_FLOOR).unwrap();
        prop_assert!(w.is_stochastic(1e-12));
        prop_assert!((0..k).all(|i| w.get(i, i) >= DIAGONAL_FLOOR - 1e-15));
    }

    #[test]
    fn dynamics_are_odd(
        s in prop::array::uniform6(-1.0..1.0f64),
        force in -10.0..10.0f64,
        ls in 0.05..0.95f64,
        friction in any::<bool>(),
    ) {
        let mut params = PoleCartParams::with_short_pole(ls);
        if friction {
            params = params.with_friction();
        }
        let state = PoleCartState::from_array(s);
        let a = dynamics(&state, force, &params).unwrap();
        let b = dynamics(&state.mirrored(), -force, &params).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert_eq!(*u, -*v);
        }
    }

    #[test]
    fn controller_force_is_bounded(
        w in prop::collection::vec(-10.0..10.0f64, CONTROLLER_PARAMS),
        s in prop::array::uniform6(-50.0..50.0f64),
    ) {
        let params = PoleCartParams::with_short_pole(0.6);
        let net = ControllerNetwork::from_params(&w).unwrap();
        let f = controller_force(&net, &PoleCartState::from_array(s), &params);
        prop_assert!(f.abs() <= params.force_limit);
        let mirrored = controller_force(&net.mirrored(), &PoleCartState::from_array(s).mirrored(), &params);
        prop_assert!((f + mirrored).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn elitist_traces_never_decrease(seed in any::<u64>(), pop in 2usize..12) {
        let task = shifted_task(BaseFunction::Rastrigin, vec![1.0, -2.0, 0.5]);
        let config = EvolverConfig::new(2 * pop, 15).with_seed(seed);
        let r = run_cea(&task, &config).unwrap();
        prop_assert!(r.traces[0].best_fitness.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(r.evaluations[0], (2 * pop + 15 * (2 * pop - 1)) as u64);
        let again = run_cea(&task, &config).unwrap();
        prop_assert_eq!(r, again);
    }
}
