use drlatent::causal::{conditional_summary, make_semisynthetic, snap, GroupBy, ReductionRecord, SNAP_GRID};
use drlatent::forecast::{mape, Frame, Method};
use drlatent::regressors::{fit_tree, DesignMatrix, KnnModel};
use drlatent::stats::Aggregates;
use drlatent::Hour;
use proptest::prelude::*;

fn frame(days: usize) -> Frame {
    let n = days * 24;
    let start = Hour::from_ymdh(2013, 6, 1, 0).unwrap();
    let y = (0..n)
        .map(|t| 0.3 + 0.4 * ((t % 24) as f64 / 23.0) + 0.01 * (t % 7) as f64)
        .collect();
    Frame::new(start, y, vec![15.0; n]).unwrap()
}

proptest! {
    #[test]
    fn snapping_is_idempotent_and_on_grid(x in -10.0f64..10.0) {
        let s = snap(x);
        prop_assert_eq!(snap(s), s);
        prop_assert!((s - x).abs() <= SNAP_GRID);
        prop_assert_eq!((s / SNAP_GRID).fract(), 0.0);
    }

    #[test]
    fn aggregates_are_ordered(v in prop::collection::vec(-100.0f64..100.0, 1..60)) {
        let a = Aggregates::of(&v).unwrap();
        prop_assert!(a.p10 <= a.p25 && a.p25 <= a.median && a.median <= a.p75 && a.p75 <= a.p90);
        prop_assert_eq!(a.count, v.len());
    }

    #[test]
    fn mape_is_zero_only_for_exact_forecasts(v in prop::collection::vec(0.1f64..5.0, 1..40), bump in 0.01f64..1.0) {
        prop_assert_eq!(mape(&v, &v).unwrap().value, 0.0);
        let off: Vec<f64> = v.iter().map(|x| x + bump).collect();
        prop_assert!(mape(&off, &v).unwrap().value > 0.0);
    }

    #[test]
    fn injected_reductions_stay_in_range(seed in any::<u64>(), c in 0.0f64..0.5, frac in 0.01f64..1.0) {
        let f = frame(20);
        let set = make_semisynthetic("p", &f, f.time(14 * 24), frac, c, seed).unwrap();
        for (&i, &u) in set.treated.iter().zip(&set.u) {
            prop_assert!((0.0..=c).contains(&u));
            prop_assert!(i >= set.signup_index);
            prop_assert_eq!(set.untreated.consumption[i] - set.observed.consumption[i], u);
        }
        for &p in &set.placebo {
            prop_assert!(set.treated.binary_search(&p).is_err());
        }
    }

    #[test]
    fn tree_leaves_are_routed_means(seed in any::<u64>(), depth in 1usize..8, leaf in 1usize..6) {
        use rand::Rng;
        let mut rng = drlatent::rng::seeded(seed);
        let rows: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 2.0 - r[1] + rng.random_range(-0.1..0.1)).collect();
        let tree = fit_tree(&DesignMatrix::new(&rows, y.clone()).unwrap(), depth, leaf).unwrap();
        prop_assert!(tree.depth() <= depth);
        let mut sums = std::collections::BTreeMap::<usize, (f64, usize)>::new();
        for (r, v) in rows.iter().zip(&y) {
            let e = sums.entry(tree.leaf_of(r)).or_default();
            e.0 += v;
            e.1 += 1;
        }
        for (l, (s, n)) in sums {
            prop_assert!(n >= leaf);
            let value = match tree.nodes[l] {
                drlatent::regressors::TreeNode::Leaf { value, .. } => value,
                _ => unreachable!(),
            };
            prop_assert!((value - s / n as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn knn_with_every_row_predicts_the_mean() {
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
    let y: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
    let knn = KnnModel::fit(&DesignMatrix::new(&rows, y).unwrap(), 10, true).unwrap();
    assert!((knn.predict(&[100.0, -3.0]).unwrap() - 2.25).abs() < 1e-12);
}

#[test]
fn grouped_summary_covers_every_combination() {
    let t = Hour::from_ymdh(2013, 6, 1, 9).unwrap();
    let rec = |placebo, reduction| ReductionRecord {
        user_id: "u".into(),
        timestamp: t,
        hour: 9,
        latent: Some(1),
        automation: true,
        placebo,
        y_obs: 1.0,
        y_hat_cf: 1.0 + reduction,
        reduction,
    };
    let groups = conditional_summary(&[rec(false, 0.2), rec(true, 0.0)], GroupBy::ALL);
    assert_eq!(groups.len(), 24 * 2 * 2 * 2);
    assert_eq!(groups.iter().map(|g| g.count).sum::<usize>(), 2);
    let hit = groups
        .iter()
        .find(|g| g.count == 1 && g.key.placebo == Some(false))
        .unwrap();
    assert_eq!(hit.key.label(), "hour=09,latent=1,automation=true,placebo=false");
    assert_eq!(hit.aggregates.unwrap().mean, 0.2);
}

#[test]
fn method_list_all_expands_to_nine() {
    let all = Method::parse_list("all").unwrap();
    assert_eq!(all.len(), 9);
    assert_eq!(Method::parse_list("ols,all").unwrap().len(), 9);
    assert!(Method::parse_list("ols,bogus").is_err());
}
