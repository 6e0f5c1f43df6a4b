//! Replays the fuzz seeds under the same checks as the fuzz targets.

use std::fs;
use std::path::PathBuf;

use qvi_cli::SolutionTable;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn config_seeds_parse_and_build() {
    for (path, text) in seeds("parse_config") {
        let cfg = qvi_cli::parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(cfg.problem.build().validate().is_valid(), "{}", path.display());
        cfg.grid.build().unwrap();
        cfg.solver.build().unwrap();
        cfg.sim.build(cfg.problem.gamma).unwrap();
    }
}

#[test]
fn csv_seeds_round_trip() {
    for (path, text) in seeds("parse_solution_csv") {
        let t = SolutionTable::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(SolutionTable::parse(&t.to_csv()).unwrap(), t);
    }
}

#[test]
fn truncated_seeds_never_panic() {
    for (_, text) in seeds("parse_config").into_iter().chain(seeds("parse_solution_csv")) {
        for cut in (0..text.len()).filter(|&c| text.is_char_boundary(c)) {
            let _ = qvi_cli::parse_config(&text[..cut]);
            if let Ok(t) = SolutionTable::parse(&text[..cut]) {
                assert_eq!(SolutionTable::parse(&t.to_csv()).unwrap(), t);
            }
        }
    }
}
