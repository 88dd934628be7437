use eqmeasure_core::io::FieldIoError;
use eqmeasure_core::{
    dump_field, load_field, load_field_on, presets, FieldSampler, Grid, RunConfig,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dump_and_load_are_bit_exact(seed in any::<u64>(), scale in -1e6f64..1e6) {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(1, 16).unwrap();
        let f = FieldSampler::new(seed).band_limited(&g).scale(scale);
        let path = dir.path().join("f.csv");
        dump_field(&f, &path).unwrap();
        let back = load_field_on(&path, &g).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn complex_dimension_two_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::new(2, 8).unwrap();
    let f = FieldSampler::new(5).band_limited(&g);
    let path = dir.path().join("nd.csv");
    dump_field(&f, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("field,v1,ndim=2,N=8\n"));
    assert_eq!(text.lines().count(), 1 + 8 * 8 * 8);
    assert_eq!(load_field(&path).unwrap(), f);
}

#[test]
fn loading_into_another_grid_names_both_resolutions() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    dump_field(
        &FieldSampler::new(1).band_limited(&Grid::new(1, 16).unwrap()),
        &path,
    )
    .unwrap();
    match load_field_on(&path, &Grid::new(1, 32).unwrap()) {
        Err(FieldIoError::Format { message, .. }) => {
            assert!(
                message.contains("N=32") && message.contains("N=16"),
                "{message}"
            );
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(
        load_field(&dir.path().join("missing.csv")),
        Err(FieldIoError::Io(_))
    ));
}

#[test]
fn truncated_file_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    dump_field(
        &FieldSampler::new(2).band_limited(&Grid::new(1, 8).unwrap()),
        &path,
    )
    .unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let cut = text.rfind('\n').unwrap();
    let cut = text[..cut].rfind('\n').unwrap() + 1;
    std::fs::write(&path, &text[..cut]).unwrap();
    assert!(matches!(
        load_field(&path),
        Err(FieldIoError::Format { .. })
    ));
}

#[test]
fn every_preset_echo_round_trips() {
    for name in presets::names() {
        let cfg = presets::config(name).unwrap();
        let again = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg, "{name}");
    }
}
