//! Property suites: algebraic laws of the exact arithmetic, digit/point round
//! trips, gap postconditions, stage nesting, and brute-force cross-checks of
//! the interval folds.

use cantordec::cantor::{self, CantorPoint, Interval, IntervalSet};
use cantordec::decomposer::{decompose, verify, Certificate, Problem};
use cantordec::exact::{pow3, ternary_digit, ExactRational, TriadicView};
use cantordec::oracle;
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rational() -> impl Strategy<Value = ExactRational> {
    (-2000i64..2000, 1i64..200).prop_map(|(p, q)| ExactRational::ratio(p, q))
}

fn cantor_digits() -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(prop_oneof![Just(0u8), Just(2u8)], 0..40)
}

proptest! {
    #[test]
    fn ring_laws(a in rational(), b in rational(), c in rational()) {
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
    }

    #[test]
    fn cmp_consistent_with_sub(a in rational(), b in rational()) {
        let diff = &a - &b;
        prop_assert_eq!(a.cmp_exact(&b) == std::cmp::Ordering::Less, diff.is_negative());
        prop_assert_eq!(a.cmp_exact(&b) == std::cmp::Ordering::Equal, diff.is_zero());
    }

    #[test]
    fn display_parse_round_trip(a in rational()) {
        let round: ExactRational = a.to_string().parse().unwrap();
        prop_assert_eq!(round, a);
    }

    #[test]
    fn digit_sum_reconstructs_triadic(num in 0u64..59049) {
        // x = num / 3^10 in [0, 1)
        let x = ExactRational::new(BigInt::from(num), pow3(10));
        let view = TriadicView::new(&x).unwrap();
        let mut sum = ExactRational::zero();
        for i in 1..=view.len() {
            sum = &sum + &ExactRational::new(BigInt::from(view.digit(i)), pow3(i));
        }
        prop_assert_eq!(sum, x);
    }

    #[test]
    fn point_value_membership_round_trip(digits in cantor_digits(), tail in prop_oneof![Just(0u8), Just(2u8)]) {
        let point = CantorPoint::new(digits, tail);
        let value = point.value();
        prop_assert!(cantor::is_member(&value).unwrap());
        let back = CantorPoint::from_value(&value).unwrap();
        prop_assert_eq!(back, point);
    }

    #[test]
    fn flip_then_flip_back_is_identity(digits in cantor_digits(), tail in prop_oneof![Just(0u8), Just(2u8)], pos in 1u32..45) {
        let point = CantorPoint::new(digits, tail);
        let current = point.digit(pos);
        let flipped = point.flip(pos, 2 - current).unwrap();
        let delta = (&flipped.value() - &point.value()).abs();
        prop_assert_eq!(delta, ExactRational::new(BigInt::from(2), pow3(pos)));
        prop_assert_eq!(flipped.flip(pos, current).unwrap(), point);
    }

    #[test]
    fn gap_postconditions(num in 1u64..59048) {
        let y = ExactRational::new(BigInt::from(num), pow3(10));
        prop_assume!(!cantor::is_member(&y).unwrap());
        let gap = cantor::locate_gap(&y).unwrap();
        prop_assert!(gap.left < y && y < gap.right);
        prop_assert_eq!(&gap.right - &gap.left, ExactRational::triadic_unit(gap.stage));
        prop_assert!(cantor::is_member(&gap.left).unwrap());
        prop_assert!(cantor::is_member(&gap.right).unwrap());
        // first gap: every earlier digit is 0 or 2
        for i in 1..gap.stage {
            prop_assert!(ternary_digit(&y, i).unwrap() != 1);
        }
        prop_assert_eq!(ternary_digit(&y, gap.stage).unwrap(), 1);
    }

    #[test]
    fn stage_sets_nest(k in 0u32..6) {
        let coarse = cantor::stage_intervals(k, None).unwrap();
        let fine = cantor::stage_intervals(k + 1, None).unwrap();
        prop_assert!(fine.is_subset_of(&coarse));
        prop_assert_eq!(coarse.total_measure(), ExactRational::ratio(2, 3).pow(k));
        prop_assert_eq!(coarse.len(), 1usize << k);
    }

    #[test]
    fn interval_set_invariant_holds(raw in proptest::collection::vec((0i64..100, 0i64..20), 0..25)) {
        let intervals: Vec<Interval> = raw
            .into_iter()
            .map(|(lo, len)| {
                Interval::new(ExactRational::ratio(lo, 7), ExactRational::ratio(lo + len, 7))
            })
            .collect();
        let set = IntervalSet::from_intervals(intervals.clone());
        for w in set.intervals().windows(2) {
            prop_assert!(w[0].hi() < w[1].lo(), "sorted, disjoint, non-touching");
        }
        for iv in &intervals {
            prop_assert!(set.covers_interval(iv));
        }
    }

    #[test]
    fn minkowski_matches_brute_force(
        a in proptest::collection::vec((0i64..60, 1i64..10), 1..8),
        b in proptest::collection::vec((0i64..60, 1i64..10), 1..8),
    ) {
        let build = |raw: Vec<(i64, i64)>| {
            IntervalSet::from_intervals(
                raw.into_iter()
                    .map(|(lo, len)| {
                        Interval::new(ExactRational::ratio(lo, 81), ExactRational::ratio(lo + len, 81))
                    })
                    .collect(),
            )
        };
        let (a, b) = (build(a), build(b));
        let fast = oracle::minkowski_sum(&a, &b);
        let mut pairs = Vec::new();
        for x in a.intervals() {
            for y in b.intervals() {
                pairs.push(Interval::new(x.lo() + y.lo(), x.hi() + y.hi()));
            }
        }
        prop_assert_eq!(fast, IntervalSet::from_intervals(pairs));
    }

    #[test]
    fn pointwise_product_matches_brute_force(
        a in proptest::collection::vec((0i64..50, 1i64..8), 1..7),
        b in proptest::collection::vec((0i64..50, 1i64..8), 1..7),
    ) {
        let build = |raw: Vec<(i64, i64)>| {
            IntervalSet::from_intervals(
                raw.into_iter()
                    .map(|(lo, len)| {
                        Interval::new(ExactRational::ratio(lo, 81), ExactRational::ratio(lo + len, 81))
                    })
                    .collect(),
            )
        };
        let (a, b) = (build(a), build(b));
        let fast = oracle::pointwise_product(&a, &b).unwrap();
        let mut pairs = Vec::new();
        for x in a.intervals() {
            for y in b.intervals() {
                pairs.push(Interval::new(x.lo() * y.lo(), x.hi() * y.hi()));
            }
        }
        prop_assert_eq!(fast, IntervalSet::from_intervals(pairs));
    }

    #[test]
    fn average_certificates_replay(num in 0u64..59049) {
        let x = ExactRational::new(BigInt::from(num), pow3(10));
        let problem = Problem::average(&x, 15).unwrap();
        let cert = decompose(&problem).unwrap();
        prop_assert!(verify(&cert).passed());
        let round = Certificate::from_json(&cert.to_json()).unwrap();
        prop_assert!(verify(&round).passed());
        prop_assert!(cert.residual.abs() < ExactRational::triadic_unit(15));
    }
}

/// Sampling soundness: objective values of random stage-interval endpoint
/// tuples always land inside the computed stage image.
#[test]
fn sampled_tuples_land_in_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let configs = [
        cantordec::decomposer::product4_config(),
        cantordec::decomposer::powersum_config(2).unwrap(),
        cantordec::decomposer::custom4_config(),
        cantordec::decomposer::average_config(),
    ];
    for config in &configs {
        let k = 4;
        let image = oracle::image_at_stage(config, k).unwrap();
        let pieces: Vec<IntervalSet> = config
            .variables
            .iter()
            .map(|v| {
                cantor::stage_intervals(k, Some(&v.domain)).unwrap()
            })
            .collect();
        for _ in 0..250 {
            let values: Vec<ExactRational> = pieces
                .iter()
                .map(|set| {
                    let iv = &set.intervals()[rng.gen_range(0..set.len())];
                    if rng.gen_bool(0.5) {
                        iv.lo().clone()
                    } else {
                        iv.hi().clone()
                    }
                })
                .collect();
            let value = cantordec::decomposer::objective_of_values(config, &values);
            assert!(
                image.contains_point(&value),
                "{}: F{values:?} = {value} escaped the stage-{k} image",
                config.id
            );
        }
    }
}
