use std::path::PathBuf;

use mmplan_core::domain_io::{parse, serialize};
use mmplan_core::fixtures::all_fixtures;
use mmplan_core::Real;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn committed_fixtures_match_generators() {
    for f in all_fixtures() {
        let path = dir().join(format!("{}.domain", f.name));
        let committed = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let fresh = serialize(&f.model, &f.heuristic).unwrap();
        assert!(committed == fresh, "{} is stale; rerun the write_fixtures example", path.display());
    }
}

#[test]
fn committed_fixtures_parse_back() {
    for f in all_fixtures() {
        let text = std::fs::read_to_string(dir().join(format!("{}.domain", f.name))).unwrap();
        let domain = parse::<Real>(&text).unwrap();
        assert_eq!(domain.model, f.model, "{}", f.name);
        assert_eq!(domain.heuristic, f.heuristic, "{}", f.name);
    }
}
