use pedqc_core::grid::{resample_to_grid, RawMap};
use pedqc_core::io::{load_dataset, load_manifest, read_field, save_dataset, write_field, MANIFEST_FILE};
use pedqc_core::{Condition, Error, OutlierLabel, PressureGrid, Sample, Side, Source, GRID_PIXELS};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = PressureGrid> {
    (prop::collection::vec(0.0f32..=1.0, GRID_PIXELS), 0..GRID_PIXELS).prop_map(|(mut v, peak)| {
        v[peak] = 1.0;
        PressureGrid::from_values(v).unwrap()
    })
}

fn sample_strategy() -> impl Strategy<Value = Sample> {
    (
        "[A-Za-z0-9]{1,8}",
        prop::bool::ANY,
        prop::bool::ANY,
        0u8..5,
        prop::sample::select(vec![Source::Real, Source::Synthetic, Source::Phantom]),
        grid_strategy(),
    )
        .prop_map(|(subject, left, dynamic, label, source, grid)| {
            let side = if left { Side::Left } else { Side::Right };
            Sample {
                id: format!("{subject}-{side}"),
                subject_id: subject,
                side,
                condition: if dynamic { Condition::Dynamic } else { Condition::Static },
                label: OutlierLabel::try_from(label).unwrap(),
                source,
                grid,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dataset_round_trip(samples in prop::collection::vec(sample_strategy(), 1..6)) {
        let mut samples = samples;
        samples.sort_by(|a, b| a.id.cmp(&b.id));
        samples.dedup_by(|a, b| a.id == b.id);
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&samples, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        prop_assert_eq!(back, samples);
    }

    #[test]
    fn resampling_is_intensity_scale_invariant(
        rows in 2usize..40,
        cols in 2usize..40,
        seed in prop::collection::vec(0.0f64..5.0, 1600),
        k in 0.01f64..100.0,
        pitch in 0.3f64..3.0,
    ) {
        let mut values: Vec<f64> = seed[..rows * cols].to_vec();
        values[0] += 0.5;
        let raw = RawMap::new(rows, cols, values.clone()).unwrap();
        let scaled = RawMap::new(rows, cols, values.iter().map(|v| v * k).collect()).unwrap();
        let a = resample_to_grid(&raw, 1.0, pitch).unwrap();
        let b = resample_to_grid(&scaled, 1.0, pitch).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-6, "{} vs {}", x, y);
        }
        prop_assert_eq!(a.max(), 1.0);
    }

    #[test]
    fn attribution_field_round_trip(values in prop::collection::vec(-10.0f32..10.0, GRID_PIXELS)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.attr.f32");
        write_field(&path, &values).unwrap();
        prop_assert_eq!(read_field(&path).unwrap(), values);
    }
}

#[test]
fn missing_grid_file_names_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let mut grid = PressureGrid::zeros();
    grid.set(3, 3, 1.0);
    let s = Sample {
        id: "S01-L".into(),
        subject_id: "S01".into(),
        side: Side::Left,
        condition: Condition::Static,
        label: OutlierLabel::Valid,
        source: Source::Real,
        grid,
    };
    let manifest = save_dataset(&[s], dir.path()).unwrap();
    std::fs::remove_file(dir.path().join(&manifest.records[0].grid_path)).unwrap();
    let err = load_manifest(&dir.path().join(MANIFEST_FILE)).unwrap_err();
    assert!(matches!(err, Error::DataFormat(_) | Error::Io { .. }), "{err}");
    assert!(err.to_string().contains("S01-L"), "{err}");
}

#[test]
fn truncated_grid_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut grid = PressureGrid::zeros();
    grid.set(3, 3, 1.0);
    let s = Sample {
        id: "S02-R".into(),
        subject_id: "S02".into(),
        side: Side::Right,
        condition: Condition::Dynamic,
        label: OutlierLabel::IncorrectSide,
        source: Source::Synthetic,
        grid,
    };
    let manifest = save_dataset(&[s], dir.path()).unwrap();
    std::fs::write(dir.path().join(&manifest.records[0].grid_path), [0u8; 100]).unwrap();
    let err = load_dataset(dir.path()).unwrap_err();
    assert!(err.to_string().contains("S02-R"), "{err}");
}
