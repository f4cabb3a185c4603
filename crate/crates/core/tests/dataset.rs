use fairbayes::dataset::{
    fit_normalization, mixed_distance, read_samples, write_samples, ColumnSpec, FeatureSchema, Group,
    MixedMetric, Sample, SampleTable,
};
use proptest::prelude::*;

fn schema() -> FeatureSchema {
    FeatureSchema::new(
        vec![
            ColumnSpec::continuous("income"),
            ColumnSpec::categorical("region", ["north", "south", "east"]),
            ColumnSpec::continuous("hours"),
        ],
        "sex",
        ["female", "male"],
        "approved",
    )
    .unwrap()
}

fn row_strategy() -> impl Strategy<Value = Sample> {
    (-1e6f64..1e6, 0usize..3, -50.0f64..50.0, any::<bool>(), 0u8..2).prop_map(|(x, c, z, g, y)| Sample {
        features: vec![x, c as f64, z],
        group: if g { Group::A } else { Group::B },
        label: y,
    })
}

proptest! {
    #[test]
    fn csv_round_trip(rows in prop::collection::vec(row_strategy(), 0..40)) {
        let table = SampleTable::new(schema(), rows).unwrap();
        let mut buf = Vec::new();
        write_samples(&table, &mut buf).unwrap();
        let back = read_samples(buf.as_slice(), &schema()).unwrap();
        prop_assert_eq!(back.count(), table.count());
        for (a, b) in table.rows.iter().zip(&back.rows) {
            prop_assert_eq!(a.group, b.group);
            prop_assert_eq!(a.label, b.label);
            prop_assert_eq!(a.features[1], b.features[1]);
            prop_assert!((a.features[0] - b.features[0]).abs() <= 1e-12 * a.features[0].abs().max(1.0));
            prop_assert!((a.features[2] - b.features[2]).abs() <= 1e-12 * a.features[2].abs().max(1.0));
        }
    }

    #[test]
    fn normalization_moments(rows in prop::collection::vec(row_strategy(), 2..60)) {
        let table = SampleTable::new(schema(), rows).unwrap();
        let params = fit_normalization(&table).unwrap();
        let out = params.apply(&table).unwrap();
        let n = out.count() as f64;
        for c in [0usize, 2] {
            let xs: Vec<f64> = out.rows.iter().map(|r| r.features[c]).collect();
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            prop_assert!(mean.abs() <= 1e-9);
            if params.columns[c].unwrap().scale > 0.0 {
                prop_assert!((var - 0.5).abs() <= 1e-9, "variance {}", var);
            } else {
                prop_assert!(xs.iter().all(|x| *x == 0.0));
            }
        }
        prop_assert!(out.rows.iter().zip(&table.rows).all(|(a, b)| a.features[1] == b.features[1]));
    }

    #[test]
    fn distance_is_symmetric_and_non_negative(a in row_strategy(), b in row_strategy()) {
        let s = schema();
        let d = mixed_distance(&a.features, &b.features, &s).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d, mixed_distance(&b.features, &a.features, &s).unwrap());
        prop_assert_eq!(mixed_distance(&a.features, &a.features, &s).unwrap(), 0.0);
    }

    #[test]
    fn hamming_triangle_inequality(
        u in prop::collection::vec(0u8..4, 5),
        v in prop::collection::vec(0u8..4, 5),
        w in prop::collection::vec(0u8..4, 5),
    ) {
        let m = MixedMetric::new(vec![true; 5]);
        let f = |x: &Vec<u8>| x.iter().map(|&c| c as f64).collect::<Vec<f64>>();
        let (u, v, w) = (f(&u), f(&v), f(&w));
        prop_assert!(m.distance(&u, &w) <= m.distance(&u, &v) + m.distance(&v, &w) + 1e-12);
    }
}

#[test]
fn distance_examples() {
    let m = MixedMetric::new(vec![true, true]);
    assert_eq!(m.distance(&[0.0, 1.0], &[1.0, 0.0]), 1.0);
    let m = MixedMetric::new(vec![true, false]);
    assert_eq!(m.distance(&[0.0, 0.25], &[2.0, 0.75]), 0.75);
    assert!(m.checked_distance(&[0.0], &[0.0, 1.0]).is_err());
}
