use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

use otrank::calibration::{run_two_sample, TestOptions};
use otrank::lap::{brute_force_solve, build_squared_cost, empirical_rank_map, solve, CostMatrix};
use otrank::reference::{gaussian_grid, halton_grid, spherical_uniform_grid, GridSpec, NuTag, ReferenceGrid, ScoreKind};
use otrank::rng::substream;
use otrank::statistics::{rank_hotelling, rank_spearman, rdcov, IndependenceInput, TestKind, TwoSampleInput};
use otrank::SampleMatrix;

fn gaussian(n: usize, d: usize, seed: u64) -> SampleMatrix {
    let mut rng = substream(seed, 0);
    SampleMatrix::from_sampler(n, d, &mut rng, |r, row| {
        for v in row.iter_mut() {
            *v = r.sample(StandardNormal);
        }
    })
}

fn square(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0.0..100.0f64, n), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solver_matches_enumeration(rows in square(7)) {
        let c = CostMatrix::from_rows(&rows).unwrap();
        let a = solve(&c).unwrap();
        prop_assert!(a.is_permutation());
        prop_assert_eq!(a.total_cost, brute_force_solve(&c).unwrap().total_cost);
    }

    #[test]
    fn ranks_ignore_translation(seed in any::<u64>(), shift in -100.0..100.0f64, n in 5usize..60) {
        let x = gaussian(n, 2, seed);
        let moved = x.map_rows(2, |r| Ok(vec![r[0] + shift, r[1] - shift])).unwrap();
        let grid = gaussian_grid(n, 2).unwrap();
        let a = empirical_rank_map(&x, &grid).unwrap();
        let b = empirical_rank_map(&moved, &grid).unwrap();
        prop_assert_eq!(a.assignment.sigma, b.assignment.sigma);
    }

    #[test]
    fn statistics_are_nonnegative(seed in any::<u64>(), n in 6usize..40) {
        let x = gaussian(n, 2, seed);
        let y = gaussian(n + 3, 2, seed ^ 1);
        let two = TwoSampleInput::new(x.clone(), y, GridSpec::new(NuTag::UniformCube), ScoreKind::Identity).unwrap();
        prop_assert!(rank_hotelling(&two).unwrap().statistic >= -1e-10);
        let z = gaussian(n, 3, seed ^ 2);
        let ind = IndependenceInput::symmetric(x, z, GridSpec::new(NuTag::Gaussian), ScoreKind::Identity).unwrap();
        prop_assert!(rank_spearman(&ind).unwrap() >= -1e-10);
        prop_assert!(rdcov(&ind).unwrap() >= -1e-10);
    }

    #[test]
    fn swapping_samples_keeps_the_statistic(seed in any::<u64>(), m in 4usize..30, n in 4usize..30) {
        let x = gaussian(m, 2, seed);
        let y = gaussian(n, 2, seed ^ 7);
        let spec = GridSpec::new(NuTag::Gaussian);
        let a = rank_hotelling(&TwoSampleInput::new(x.clone(), y.clone(), spec, ScoreKind::Identity).unwrap()).unwrap();
        let b = rank_hotelling(&TwoSampleInput::new(y, x, spec, ScoreKind::Identity).unwrap()).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() <= 1e-9 * a.statistic.max(1.0));
    }

    #[test]
    fn permutation_p_values_are_valid(seed in any::<u64>(), b in 100usize..400) {
        let x = gaussian(10, 2, seed);
        let y = gaussian(12, 2, seed ^ 3);
        let input = TwoSampleInput::new(x, y, GridSpec::new(NuTag::UniformCube), ScoreKind::Identity).unwrap();
        let r = run_two_sample(TestKind::RankHotelling, &input, &TestOptions::permutation(0.05, b, seed)).unwrap();
        prop_assert!(r.p_value >= 1.0 / (b as f64 + 1.0) && r.p_value <= 1.0);
        prop_assert_eq!(r.decision, r.statistic >= r.cutoff);
    }

    #[test]
    fn sample_csv_round_trip(seed in any::<u64>(), n in 1usize..30, d in 1usize..5) {
        let x = gaussian(n, d, seed);
        let back = SampleMatrix::parse_csv(&x.to_csv()).unwrap();
        prop_assert_eq!(back.as_slice(), x.as_slice());
    }

    #[test]
    fn grid_csv_round_trip(n in 6usize..200, d in 1usize..6, seed in any::<u64>()) {
        for g in [halton_grid(n, d).unwrap(), gaussian_grid(n, d).unwrap(), spherical_uniform_grid(n, d, seed).unwrap()] {
            let back = ReferenceGrid::from_csv(&g.to_csv()).unwrap();
            prop_assert_eq!(back.points().as_slice(), g.points().as_slice());
            prop_assert_eq!(back.nu(), g.nu());
        }
    }

    #[test]
    fn optimal_assignment_beats_swaps(seed in any::<u64>(), n in 3usize..80) {
        let x = gaussian(n, 3, seed);
        let grid = gaussian_grid(n, 3).unwrap();
        let c = build_squared_cost(&x, &grid).unwrap();
        let s = solve(&c).unwrap().sigma;
        for i in 0..n {
            for j in (i + 1)..n {
                let now = c.get(i, s[i]) + c.get(j, s[j]);
                let swapped = c.get(i, s[j]) + c.get(j, s[i]);
                prop_assert!(swapped >= now - 1e-9);
            }
        }
    }
}
