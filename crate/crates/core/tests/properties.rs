use proptest::prelude::*;
use xrl_explain::predicates::PredicateSchema;
use xrl_explain::query::{parse_query, to_sql, validate_sql, QueryContext};
use xrl_explain::replay::FeatureSchema;
use xrl_explain::rules::{compute_weights, Counts};

fn features() -> FeatureSchema {
    FeatureSchema::from_names(&["position", "velocity"]).unwrap()
}

proptest! {
    #[test]
    fn level_counts_exceeded_thresholds(mut t in prop::collection::btree_set(-1000i32..1000, 1..6), x in -1100.0f64..1100.0) {
        let t: Vec<f64> = std::mem::take(&mut t).into_iter().map(|v| v as f64 / 10.0).collect();
        let schema = PredicateSchema::from_thresholds(&["x"], vec![t.clone()]).unwrap();
        let level = schema.discretize(&[x]).unwrap().0[0] as usize;
        prop_assert_eq!(level, t.iter().filter(|&&v| x > v).count());
    }

    #[test]
    fn w4_is_w1_times_w3(n_ca in 0usize..500, extra_c in 0usize..500, extra_a in 0usize..500, rest in 0usize..500) {
        let n_c = n_ca + extra_c;
        let n_a = n_ca + extra_a;
        let c = Counts { n_ca, n_c, n_a, n_total: n_ca + extra_c + extra_a + rest };
        let w = compute_weights(c);
        prop_assert_eq!(w.w4, w.w1 * w.w3);
        for v in [w.w1, w.w2, w.w3, w.w4] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn structured_queries_always_validate(
        feats in prop::collection::vec((0usize..2, 0usize..5, -2.0f64..2.0), 1..4),
        action in prop::option::of(0usize..3),
    ) {
        let f = features();
        let actions: Vec<String> = ["push_left", "no_push", "push_right"].map(String::from).to_vec();
        let names = ["position", "velocity"];
        let ops = ["<", "<=", ">", ">=", "="];
        let clauses: Vec<String> = feats.iter().map(|&(fi, op, v)| format!("{} {} {v}", names[fi], ops[op])).collect();
        let q = match action {
            Some(a) => format!("when action = {} and {}", actions[a], clauses.join(" and ")),
            None => format!("what if {}", clauses.join(" and ")),
        };
        let ast = parse_query(&q, QueryContext { features: &f, actions: &actions, predicates: None }).unwrap();
        let sql = to_sql(&ast, &f);
        prop_assert!(validate_sql(&sql, &f).is_ok(), "{}", sql);
    }

    #[test]
    fn write_keywords_never_validate(
        kw in prop::sample::select(vec!["INSERT", "UPDATE", "DELETE", "DROP", "CREATE", "ALTER", "ATTACH", "PRAGMA", "REPLACE", "VACUUM"]),
        pos in 0usize..3,
        tail in "[ a-z0-9=*();']{0,20}",
    ) {
        let stmt = match pos {
            0 => format!("{kw} {tail}"),
            1 => format!("SELECT * FROM replay; {kw} {tail}"),
            _ => format!("SELECT * FROM replay WHERE action = 1 {kw} {tail}"),
        };
        prop_assert!(validate_sql(&stmt, &features()).is_err(), "{}", stmt);
    }
}
