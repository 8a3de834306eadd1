use std::path::PathBuf;

use diffvoi::parse_maid;
use diffvoi::scenarios::{self, BuildParams, ScenarioId};

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn variants() -> Vec<(ScenarioId, BuildParams)> {
    let mut v: Vec<_> = ScenarioId::ALL
        .into_iter()
        .filter(|id| *id != ScenarioId::Braess)
        .map(|id| (id, BuildParams::default()))
        .collect();
    v.push((
        ScenarioId::Bagwell,
        BuildParams {
            symmetric_channel: true,
        },
    ));
    v
}

#[test]
fn shipped_documents_are_byte_stable() {
    for (id, params) in variants() {
        let path = scenario_dir().join(scenarios::file_name(id, &params));
        let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let doc = scenarios::document(id, &params).unwrap();
        assert_eq!(
            on_disk,
            doc.to_json(),
            "{} differs from the built-in document",
            path.display()
        );
        assert_eq!(doc.to_json(), doc.to_json());
    }
}

#[test]
fn shipped_documents_parse_to_the_built_in_games() {
    for (id, params) in variants() {
        let text = std::fs::read_to_string(scenario_dir().join(scenarios::file_name(id, &params))).unwrap();
        let parsed = parse_maid(&text).unwrap();
        assert_eq!(parsed, scenarios::build(id, &params).unwrap());
        // Round trip through the game model keeps the game.
        assert_eq!(parse_maid(&parsed.to_json()).unwrap(), parsed);
    }
}

#[test]
fn signaling_file_documents_its_defaults() {
    let text = std::fs::read_to_string(scenario_dir().join("signaling.json")).unwrap();
    assert!(text.contains("\"description\""));
    assert!(text.contains("illustrative defaults"));
}
