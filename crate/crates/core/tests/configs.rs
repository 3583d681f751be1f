use std::fs;
use std::path::Path;

use bipolar_core::ExperimentConfig;

fn shipped(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    fs::read_to_string(path).unwrap()
}

#[test]
fn shipped_configs_round_trip() {
    for name in ["case1.toml", "case2.toml"] {
        let cfg = ExperimentConfig::parse(&shipped(name)).unwrap();
        let again = ExperimentConfig::parse(&cfg.render()).unwrap();
        assert_eq!(again, cfg, "{name}");
        assert_eq!(again.render(), cfg.render());
    }
}

#[test]
fn shipped_configs_match_built_in_cases() {
    assert_eq!(ExperimentConfig::parse(&shipped("case1.toml")).unwrap(), ExperimentConfig::case_one());
    assert_eq!(ExperimentConfig::parse(&shipped("case2.toml")).unwrap(), ExperimentConfig::case_two());
}

#[test]
fn shipped_configs_sit_in_their_regimes() {
    let one = ExperimentConfig::parse(&shipped("case1.toml")).unwrap();
    let two = ExperimentConfig::parse(&shipped("case2.toml")).unwrap();
    assert_eq!(one.regime().label(), "case-i");
    assert_eq!(two.regime().label(), "case-ii");
    assert!(one.warnings().is_empty(), "{:?}", one.warnings());
    assert!(two.warnings().is_empty(), "{:?}", two.warnings());
}
