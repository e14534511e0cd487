mod common;

use mid_core::data::{read_csv, write_csv, Column, ColumnType, Dataset, TypeHints};
use mid_core::interpret::{breakdown, mid_shapley};
use mid_core::MidModel;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn breakdown_and_shapley_reproduce_predictions(seed in 0u64..10_000, d in 1usize..7) {
        let (model, ds) = common::random_model(seed, d);
        let pred = model.predict(&ds).unwrap();
        let shap = mid_shapley(&model, &ds).unwrap();
        for (i, p) in pred.as_slice().iter().enumerate() {
            let b = breakdown(&model, &ds, i).unwrap();
            prop_assert_eq!(b.total, *p);
            let s = shap.intercept + shap.values[i].iter().sum::<f64>();
            prop_assert!((s - p).abs() <= 1e-12 * (1.0 + p.abs()), "{} vs {}", s, p);
        }
    }

    #[test]
    fn saved_models_predict_identically(seed in 0u64..10_000, d in 1usize..5) {
        let (model, ds) = common::random_model(seed, d);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        model.save(&path).unwrap();
        let back = MidModel::load(&path).unwrap();
        prop_assert_eq!(model.predict(&ds).unwrap(), back.predict(&ds).unwrap());
    }

    #[test]
    fn csv_round_trip(xs in prop::collection::vec(-1e6f64..1e6, 1..30), pick in prop::collection::vec(0usize..3, 30)) {
        let levels = ["b", "a, quoted", "c"];
        let labels: Vec<String> = xs.iter().enumerate().map(|(i, _)| levels[pick[i]].to_string()).collect();
        let ds = Dataset::new(vec![
            ("x".into(), Column::Numeric(xs.clone())),
            ("g".into(), Column::categorical_from_labels(&labels)),
        ]).unwrap();
        let y: Vec<f64> = xs.iter().map(|v| v * 0.5 - 1.0).collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &ds, Some(("y", &y))).unwrap();
        let hints: TypeHints = [("g".to_string(), ColumnType::Categorical)].into();
        let (back, yb) = read_csv(buf.as_slice(), "y", &hints).unwrap();
        prop_assert_eq!(yb.as_slice(), y.as_slice());
        prop_assert_eq!(back, ds);
    }
}
