//! Pins the surrogate backends to frozen outputs in `data/golden/`.
//!
//! Catches accidental drift in either the physics code or the calibrated
//! constants. After an intentional recalibration (`cargo run --bin
//! calibrate` plus a rebuild), these tests pass again by construction.

use std::collections::BTreeMap;

use anmod::backends::{
    CapacitanceMode, CapacitanceSurrogate, Evaluator, QubitResonatorSurrogate, TwoQubitSurrogate,
};

type Golden = BTreeMap<String, BTreeMap<String, f64>>;

fn assert_matches(section: &str, expected: &BTreeMap<String, f64>, actual: &BTreeMap<String, f64>) {
    assert_eq!(
        expected.keys().collect::<Vec<_>>(),
        actual.keys().collect::<Vec<_>>(),
        "output names changed in [{section}]"
    );
    for (name, want) in expected {
        let got = actual[name];
        assert!(
            (got / want - 1.0).abs() < 1e-9,
            "[{section}] {name}: got {got}, frozen {want}"
        );
    }
}

#[test]
fn qubit_resonator_outputs_match_frozen_values() {
    let golden: Golden =
        toml::from_str(include_str!("../data/golden/qubit_resonator.toml")).unwrap();
    let design = &golden["design"];

    let full = QubitResonatorSurrogate::new(true, false)
        .evaluate(design, 8, 0)
        .unwrap();
    assert_matches("cross_terms", &golden["cross_terms"], &full);

    let plain = QubitResonatorSurrogate::new(false, false)
        .evaluate(design, 8, 0)
        .unwrap();
    assert_matches("power_law", &golden["power_law"], &plain);
}

#[test]
fn two_qubit_outputs_match_frozen_values() {
    let golden: Golden = toml::from_str(include_str!("../data/golden/two_qubit.toml")).unwrap();
    let design = &golden["design"];

    let full = TwoQubitSurrogate::new(true, false)
        .evaluate(design, 8, 0)
        .unwrap();
    assert_matches("cross_terms", &golden["cross_terms"], &full);

    let plain = TwoQubitSurrogate::new(false, false)
        .evaluate(design, 8, 0)
        .unwrap();
    assert_matches("power_law", &golden["power_law"], &plain);
}

#[test]
fn capacitance_outputs_match_frozen_values() {
    let golden: Golden = toml::from_str(include_str!("../data/golden/capacitance.toml")).unwrap();
    let design = &golden["design"];

    let full = CapacitanceSurrogate::new(CapacitanceMode::Coupling, true, false)
        .evaluate(design, 8, 0)
        .unwrap();
    assert_matches("cross_terms", &golden["cross_terms"], &full);

    let plain = CapacitanceSurrogate::new(CapacitanceMode::Coupling, false, false)
        .evaluate(design, 8, 0)
        .unwrap();
    assert_matches("power_law", &golden["power_law"], &plain);

    let t1 = CapacitanceSurrogate::new(CapacitanceMode::T1, true, false)
        .evaluate(design, 8, 0)
        .unwrap();
    assert_matches("t1", &golden["t1"], &t1);
}
