use proptest::prelude::*;
use taxi_dispatch::matching::{brute_force_assignment, solve_assignment, CostMatrix};

/// Small integer costs produce many ties; `None` is a forbidden pair.
fn matrix(max_side: usize, max_cost: u32) -> impl Strategy<Value = CostMatrix> {
    (1..=max_side, 1..=max_side).prop_flat_map(move |(r, c)| {
        prop::collection::vec(
            prop::collection::vec(prop::option::weighted(0.75, 0..=max_cost), c),
            r,
        )
        .prop_map(|rows| {
            let rows: Vec<Vec<Option<f64>>> = rows
                .into_iter()
                .map(|row| row.into_iter().map(|v| v.map(f64::from)).collect())
                .collect();
            CostMatrix::from_rows(&rows).unwrap()
        })
    })
}

fn continuous(max_side: usize) -> impl Strategy<Value = CostMatrix> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::collection::vec(prop::option::weighted(0.8, 0.0..12.0f64), c), r)
            .prop_map(|rows| CostMatrix::from_rows(&rows).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn matches_oracle_with_ties(m in matrix(6, 3)) {
        let fast = solve_assignment(&m);
        let slow = brute_force_assignment(&m).unwrap();
        prop_assert_eq!(&fast.pairs, &slow.pairs);
        prop_assert!((fast.total - slow.total).abs() < 1e-9);
    }

    #[test]
    fn matches_oracle_continuous(m in continuous(7)) {
        let fast = solve_assignment(&m);
        let slow = brute_force_assignment(&m).unwrap();
        prop_assert_eq!(fast.len(), slow.len());
        prop_assert!((fast.total - slow.total).abs() < 1e-9);
        prop_assert_eq!(&fast.pairs, &slow.pairs);
    }

    #[test]
    fn output_is_a_valid_matching(m in matrix(8, 20)) {
        let a = solve_assignment(&m);
        let mut cols: Vec<usize> = a.pairs.iter().map(|p| p.1).collect();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(cols.len(), a.len());
        for &(r, c) in &a.pairs {
            prop_assert!(m.cost(r, c).is_some());
        }
        prop_assert!(a.pairs.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn optimum_is_invariant_under_permutation(m in continuous(6), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rp: Vec<usize> = (0..m.rows()).collect();
        let mut cp: Vec<usize> = (0..m.cols()).collect();
        rp.shuffle(&mut rng);
        cp.shuffle(&mut rng);
        let a = solve_assignment(&m);
        let b = solve_assignment(&m.permuted(&rp, &cp));
        prop_assert_eq!(a.len(), b.len());
        prop_assert!((a.total - b.total).abs() < 1e-9);
    }
}

#[test]
fn larger_instances_agree_on_total() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let r = rng.random_range(1..=8);
        let c = rng.random_range(1..=8);
        let rows: Vec<Vec<Option<f64>>> = (0..r)
            .map(|_| {
                (0..c)
                    .map(|_| rng.random_bool(0.7).then(|| rng.random_range(0..5) as f64 * 0.5))
                    .collect()
            })
            .collect();
        let m = CostMatrix::from_rows(&rows).unwrap();
        assert_eq!(solve_assignment(&m), brute_force_assignment(&m).unwrap());
    }
}
