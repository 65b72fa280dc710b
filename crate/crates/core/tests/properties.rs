mod common;

use proptest::prelude::*;
use rand::Rng;

use common::*;
use delayreg::config::{GainsFile, ScenarioConfig};
use delayreg::matcore::{eigenvalues, kron, minimal_polynomial, numeric_rank, Matrix, MINPOLY_TOL, RANK_TOL};
use delayreg::simulator::{simulate, DelayLine, LawForm};
use delayreg::synthesis::Mode;

fn matrix_strategy(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec(-2.0..2.0f64, r * c).prop_map(move |data| Matrix::from_row_slice(r, c, &data).unwrap())
    })
}

fn sized(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |d| Matrix::from_row_slice(rows, cols, &d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_is_similarity_invariant(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = rng(seed);
        let a = uniform(&mut rng, n, n, 1.0);
        let t = basis(&mut rng, n);
        let similar = &(&t * &a) * &t.inverse().unwrap();
        let ea = eigenvalues(&a).unwrap();
        let eb = eigenvalues(&similar).unwrap();
        prop_assert!(ea.matches(&eb, 1e-6), "{:?} vs {:?}", ea.values, eb.values);
    }

    #[test]
    fn minimal_polynomial_annihilates(seed in any::<u64>(), q in 1usize..=4) {
        let mut rng = rng(seed);
        let blocks = unit_circle_blocks(&mut rng, q);
        let t = basis(&mut rng, q);
        let s = &(&t * &block_diag(&blocks.blocks)) * &t.inverse().unwrap();
        let mp = minimal_polynomial(&s, MINPOLY_TOL).unwrap();
        prop_assert_eq!(mp.degree(), blocks.distinct.len());
        prop_assert!(mp.eval_matrix(&s).max_abs() < 1e-9);
    }

    #[test]
    fn kron_mixed_product(
        (a, c) in (1usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(|(r, k, cc)| (sized(r, k), sized(k, cc))),
        (b, d) in (1usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(|(r, k, cc)| (sized(r, k), sized(k, cc))),
    ) {
        let lhs = &kron(&a, &b) * &kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn rank_is_permutation_invariant(m in matrix_strategy(5), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mut rows: Vec<usize> = (0..m.rows()).collect();
        let mut cols: Vec<usize> = (0..m.cols()).collect();
        for k in (1..rows.len()).rev() {
            rows.swap(k, rng.random_range(0..=k));
        }
        for k in (1..cols.len()).rev() {
            cols.swap(k, rng.random_range(0..=k));
        }
        let mut permuted = Matrix::zeros(m.rows(), m.cols());
        for (i, &ri) in rows.iter().enumerate() {
            for (j, &cj) in cols.iter().enumerate() {
                permuted.set(i, j, m.get(ri, cj));
            }
        }
        prop_assert_eq!(numeric_rank(&m, RANK_TOL), numeric_rank(&permuted, RANK_TOL));
    }

    #[test]
    fn spanning_tree_iff_h_spectrum_positive(seed in any::<u64>(), n in 1usize..=8, extra in 0.0..0.5f64) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, n, extra, false);
        prop_assert_eq!(g.has_leader_spanning_tree(), g.connectivity_spectral_check().unwrap());
    }

    #[test]
    fn delay_line_reads_history(values in prop::collection::vec(any::<i32>(), 1..40), delay in 0usize..6) {
        let mut line = DelayLine::new(delay);
        for (t, &v) in values.iter().enumerate() {
            line.push(v);
            prop_assert_eq!(*line.delayed(), values[t.saturating_sub(delay)]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trace_identities_hold(seed in any::<u64>(), output in any::<bool>()) {
        let mut rng = rng(seed);
        let s = bounded_scenario(&mut rng, &SMALL);
        let mode = if output { Mode::Output } else { Mode::State };
        let trace = simulate(&s, mode, LawForm::Transformed).unwrap();
        let (h, _) = s.graph.h_matrix();
        let n_agents = s.n_agents();
        for step in &trace.steps {
            let fv = s.exo.f.mul_vec(&step.v);
            for i in 0..n_agents {
                for (k, fk) in fv.iter().enumerate() {
                    prop_assert!(rel_close(step.e[i][k], step.y[i][k] + fk, 1e-12));
                    let hv: f64 = (0..n_agents).map(|j| h.get(i, j) * step.e[j][k]).sum();
                    let scale = 1.0 + (0..n_agents).map(|j| (h.get(i, j) * step.e[j][k]).abs()).sum::<f64>();
                    prop_assert!((step.ev[i][k] - hv).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), output in any::<bool>()) {
        let mut rng = rng(seed);
        let s = bounded_scenario(&mut rng, &SMALL);
        let mode = if output { Mode::Output } else { Mode::State };
        let a = simulate(&s, mode, LawForm::Transformed).unwrap();
        let b = simulate(&s.clone(), mode, LawForm::Transformed).unwrap();
        prop_assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
    }

    #[test]
    fn config_round_trip(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let mut cfg = delayreg::example::config();
        cfg.synthesis.gamma = rng.random_range(0.01..0.9);
        cfg.synthesis.nu = rng.random_bool(0.5).then(|| rng.random_range(0.1..3.0));
        cfg.simulation.seed = rng.random();
        cfg.simulation.horizon = rng.random_range(3..5000);
        cfg.plant.a[0][1] = rng.random_range(-3.0..3.0);
        cfg.agents[2].dc = Some(vec![vec![rng.random_range(-0.1..0.1), 0.0]]);
        cfg.graph.edges[3].weight = rng.random_range(0.1..4.0);
        let text = cfg.to_toml_string().unwrap();
        let again = ScenarioConfig::parse(&text).unwrap();
        prop_assert_eq!(&cfg, &again);
        prop_assert_eq!(text, again.to_toml_string().unwrap());
    }

    #[test]
    fn gains_file_round_trip(seed in any::<u64>(), output in any::<bool>()) {
        let mut rng = rng(seed);
        let s = random_scenario(&mut rng, &SMALL);
        let mode = if output { Mode::Output } else { Mode::State };
        let mut gains = s.gains.clone();
        if !output {
            gains.l_obs = None;
        }
        let file = GainsFile::new(mode, &gains, None);
        let text = file.to_toml_string().unwrap();
        let parsed = GainsFile::parse(&text).unwrap();
        prop_assert_eq!(&parsed, &file);
        prop_assert_eq!(parsed.to_gain_set().unwrap(), gains);
    }
}
