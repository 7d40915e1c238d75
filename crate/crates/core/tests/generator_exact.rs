use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fastconv::generator::{default_points, max_transform_magnitude, verify_exact};
use fastconv::matrix::rat;
use fastconv::oracle::{correlate_valid_2d, random_rational_matrix};
use fastconv::winograd::minimal_multiplies_2d;
use fastconv::{generate, Nested2d, Point, PointSet};

fn points(n: usize) -> impl Strategy<Value = (PointSet, bool)> {
    (prop::collection::btree_set((-6i64..=6, 1i64..=4), n), any::<bool>()).prop_filter_map(
        "distinct values",
        move |(raw, inf)| {
            let mut vals: Vec<_> = raw.into_iter().map(|(p, q)| rat(p, q)).collect();
            vals.sort();
            vals.dedup();
            let take = if inf { n - 1 } else { n };
            if vals.len() < take {
                return None;
            }
            let mut pts: Vec<Point> = vals.into_iter().take(take).map(Point::Finite).collect();
            if inf {
                pts.push(Point::Infinity);
            }
            PointSet::new(pts).ok().map(|p| (p, inf))
        },
    )
}

fn algorithm_case() -> impl Strategy<Value = (usize, usize, PointSet)> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(m, r)| points(m + r - 1).prop_map(move |(p, _)| (m, r, p)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn any_distinct_points_give_exact_algorithm((m, r, pts) in algorithm_case(), seed in any::<u64>()) {
        let alg = generate(m, r, &pts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(verify_exact(&alg, 5, &mut rng).is_ok());
    }
}

#[test]
fn defaults_exact_up_to_tile_eight() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for alpha in 2..=8 {
        for m in 1..alpha {
            let r = alpha + 1 - m;
            let alg = generate(m, r, &default_points(m, r)).unwrap();
            assert_eq!(alg.alpha(), alpha);
            assert_eq!(minimal_multiplies_2d(m, m, r, r), alpha * alpha);
            let nested = Nested2d::square(alg.exact());
            for _ in 0..10 {
                let d = random_rational_matrix(&mut rng, alpha, alpha);
                let g = random_rational_matrix(&mut rng, r, r);
                assert_eq!(nested.filter_tile_2d(&d, &g).unwrap(), correlate_valid_2d(&d, &g));
            }
        }
    }
}

#[test]
fn larger_tiles_need_larger_constants() {
    let f4 = generate(4, 3, &default_points(4, 3)).unwrap();
    let f6 = generate(6, 3, &default_points(6, 3)).unwrap();
    assert!(max_transform_magnitude(&f6) > max_transform_magnitude(&f4));
}
