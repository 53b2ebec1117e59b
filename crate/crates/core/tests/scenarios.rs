mod common;

use std::fs;

use common::*;
use gazewheel_core::calibration::CalibrationModel;
use gazewheel_core::replay::{compare_golden, replay_text, Speed};

fn replay(text: &str) -> String {
    let model = CalibrationModel::load(&data_dir().join("model.json")).unwrap();
    replay_text(text, &wukong(), Some(&model), Speed::Max, None).unwrap().to_text()
}

/// Rewrites the frozen traces and goldens. Run with
/// `BLESS=1 cargo test --test scenarios -- --ignored`.
#[test]
#[ignore]
fn bless() {
    if std::env::var("BLESS").is_err() {
        return;
    }
    let dir = data_dir();
    scenario_model().save(&dir.join("model.json")).unwrap();
    for (name, build) in SCENARIOS {
        let text = build().to_text();
        fs::write(dir.join(format!("{name}.jsonl")), &text).unwrap();
        fs::write(dir.join(format!("{name}.log")), replay(&text)).unwrap();
    }
}

#[test]
fn frozen_traces_match_builders() {
    for (name, build) in SCENARIOS {
        let frozen = fs::read_to_string(data_dir().join(format!("{name}.jsonl"))).unwrap();
        assert_eq!(frozen, build().to_text(), "{name}");
    }
}

#[test]
fn goldens_match() {
    for (name, _) in SCENARIOS {
        let trace = fs::read_to_string(data_dir().join(format!("{name}.jsonl"))).unwrap();
        let golden = fs::read_to_string(data_dir().join(format!("{name}.log"))).unwrap();
        let first = replay(&trace);
        assert_eq!(first, replay(&trace), "{name} not deterministic");
        if let Err(e) = compare_golden(&first, &golden) {
            panic!("{name}: {e}");
        }
    }
}
