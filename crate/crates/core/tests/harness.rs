use hlmax_core::harness::{run_decay, write_csv, write_json};
use hlmax_core::{ExperimentConfig, FieldKind};

#[test]
fn config_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    let mut c = ExperimentConfig {
        n_log2: 10,
        band: Some((1, 6)),
        ..Default::default()
    };
    c.field.kind = FieldKind::Sine;
    std::fs::write(&path, c.to_json().unwrap()).unwrap();
    let back = ExperimentConfig::load(&path).unwrap();
    assert_eq!(back.to_json().unwrap(), c.to_json().unwrap());
    assert!(ExperimentConfig::load(&dir.path().join("missing.json"))
        .unwrap_err()
        .is_config());
}

#[test]
fn constant_field_decay_is_vacuous() {
    let c = ExperimentConfig {
        field: hlmax_core::harness::FieldConfig {
            kind: FieldKind::Constant,
            amplitude: None,
        },
        ..Default::default()
    };
    let r = run_decay(&c).unwrap();
    assert!(r.vacuous && r.passed);
    assert!(r.energies.is_empty() && r.fitted_mu.is_none());
}

#[test]
fn decay_energy_bounded_by_band_and_oracle_agrees() {
    let c = ExperimentConfig {
        n_log2: 10,
        l_list: vec![1],
        oracle_l: Some(1),
        ..Default::default()
    };
    let r = run_decay(&c).unwrap();
    assert!(!r.vacuous);
    assert_eq!(r.resolved_l, vec![1]);
    for (&(_, e), &(_, b)) in r.energies.iter().zip(&r.band_bounds) {
        assert!(e > 0.0 && e <= b);
    }
    assert!(r.oracle_relative_error.unwrap() < 0.05);

    let dir = tempfile::tempdir().unwrap();
    write_json(&dir.path().join("decay.json"), &r).unwrap();
    write_csv(&dir.path().join("decay.csv"), &r.rows()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("decay.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}
