use blocksparse::ScalarKind;
use blocksparse_web::{compare, lane_sweep, pattern, Problem};

fn problem(sparsity: f64) -> Problem {
    Problem { m: 2, k: 64, n: 128, block: 8, sparsity, seed: 5 }
}

#[test]
fn pattern_matches_block_count() {
    let p = pattern(&problem(0.8)).unwrap();
    assert_eq!((p.block_rows, p.block_cols), (16, 8));
    // round(0.2 * 128) stored blocks
    assert_eq!(p.nnzb, 26);
    assert_eq!(p.cells.iter().map(|&c| c as usize).sum::<usize>(), 26);
}

#[test]
fn pattern_is_seed_deterministic() {
    assert_eq!(pattern(&problem(0.5)).unwrap().cells, pattern(&problem(0.5)).unwrap().cells);
    let other = Problem { seed: 6, ..problem(0.5) };
    assert_ne!(pattern(&problem(0.5)).unwrap().cells, pattern(&other).unwrap().cells);
}

#[test]
fn compare_verifies_every_schedule() {
    for kind in [ScalarKind::F32, ScalarKind::F64] {
        let c = compare(&problem(0.85), kind, (2, 4), 8, 3).unwrap();
        let names: Vec<&str> = c.runs.iter().map(|r| r.schedule.as_str()).collect();
        assert_eq!(names, ["pep", "ptp:2x4", "prob", "prwb:8"]);
        assert!(c.runs.iter().all(|r| r.ok && r.ms >= 0.0), "{c:?}");
    }
}

#[test]
fn compare_rejects_bad_lanes() {
    assert!(compare(&problem(0.8), ScalarKind::F32, (1, 8), 3, 1).is_err());
    assert!(compare(&Problem { block: 7, ..problem(0.8) }, ScalarKind::F32, (1, 8), 8, 1).is_err());
}

#[test]
fn sweep_covers_divisors_and_picks_a_verified_best() {
    let s = lane_sweep(&problem(0.8), 3).unwrap();
    let lanes: Vec<&str> = s.runs.iter().map(|r| r.schedule.as_str()).collect();
    assert_eq!(lanes, ["prwb:1", "prwb:2", "prwb:4", "prwb:8", "prwb:16", "prwb:32", "prwb:64"]);
    let best = s.best.unwrap();
    let best_ms = s.runs.iter().find(|r| r.schedule == format!("prwb:{best}")).unwrap().ms;
    assert!(s.runs.iter().all(|r| r.ms >= best_ms));
}

#[test]
fn json_shape_is_stable() {
    let v = serde_json::to_value(pattern(&problem(0.95)).unwrap()).unwrap();
    for key in ["block_rows", "block_cols", "nnzb", "cells"] {
        assert!(v.get(key).is_some(), "{v}");
    }
}
