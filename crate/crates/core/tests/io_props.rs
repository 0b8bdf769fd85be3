use pooled_wear::io::{generate_fleet, read_dataset, split_sparse_tools, write_dataset_csv, GeneratorConfig};
use pooled_wear::{GroupedDataset, RawRecord};
use proptest::prelude::*;

fn record_strategy() -> impl Strategy<Value = RawRecord> {
    let label = prop_oneof![
        "[a-z][a-z0-9_-]{0,6}",
        Just("tool, with comma".to_string()),
        Just("quoted \"T\"".to_string()),
        (1..40u32).prop_map(|k| k.to_string()),
    ];
    let magnitude = prop_oneof![0.0..1.0f64, 0.0..1e6f64, 1e-300..1e-290f64, Just(0.0)];
    (label, magnitude.clone(), magnitude).prop_map(|(tool_id, sliding_distance, roughness_ra)| RawRecord {
        tool_id,
        sliding_distance,
        roughness_ra,
    })
}

fn to_bytes(d: &GroupedDataset) -> Vec<u8> {
    let mut buf = Vec::new();
    write_dataset_csv(d, &mut buf).unwrap();
    buf
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn dataset_csv_round_trips(mut records in prop::collection::vec(record_strategy(), 1000)) {
        // At least two distinct distances so the scaling is defined.
        records[0].sliding_distance = 0.5;
        records[1].sliding_distance = 2.5;
        let original = GroupedDataset::from_records(&records).unwrap();
        let bytes = to_bytes(&original);
        let loaded = read_dataset(bytes.as_slice(), "mem").unwrap();
        prop_assert_eq!(&loaded, &original);
        let again = to_bytes(&loaded);
        prop_assert_eq!(&again, &bytes);
        prop_assert_eq!(read_dataset(again.as_slice(), "mem").unwrap(), original);
    }

    #[test]
    fn scaled_x_is_in_unit_interval_and_reversible(xs in prop::collection::vec(0.0..1e7f64, 2..200)) {
        let records: Vec<RawRecord> = xs.iter().enumerate().map(|(i, &x)| RawRecord {
            tool_id: (i % 3).to_string(), sliding_distance: x, roughness_ra: 1.0,
        }).collect();
        prop_assume!(xs.iter().any(|&x| x != xs[0]));
        let d = GroupedDataset::from_records(&records).unwrap();
        for o in d.groups.iter().flat_map(|g| &g.obs) {
            prop_assert!((0.0..=1.0).contains(&o.x));
            let back = d.scaling.to_raw(o.x);
            prop_assert!((back - o.raw_x).abs() <= 1e-12 * o.raw_x.abs().max(d.scaling.range));
        }
    }

    #[test]
    fn split_then_merge_restores_the_fleet(seed in any::<u64>(), n_visible in 1..19usize, pick in 0..7usize) {
        let (d, _) = generate_fleet(&GeneratorConfig { seed, ..GeneratorConfig::default() }).unwrap();
        let sparse = vec![d.labels()[pick].clone(), d.labels()[(pick + 3) % 7].clone()];
        let (train, holdout) = split_sparse_tools(&d, &sparse, n_visible).unwrap();
        prop_assert_eq!(train.n_obs() + holdout.n_obs(), d.n_obs());
        prop_assert_eq!(train.merged(&holdout).unwrap(), d);
    }
}
