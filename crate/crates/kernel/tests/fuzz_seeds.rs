//! Replays the checked-in fuzz corpora through the same entry points as the
//! fuzz targets, so the seeds stay meaningful on stable.

use std::fs;
use std::path::{Path, PathBuf};

use relucert_kernel::model::Problem;
use relucert_kernel::prooflog::{check_proof_str, ProofLog};
use relucert_kernel::Rational;

fn corpus(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(PathBuf, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| !p.file_name().unwrap().to_string_lossy().starts_with('.'))
        .filter_map(|p| String::from_utf8(fs::read(&p).unwrap()).ok().map(|t| (p, t)))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus {target}");
    out
}

fn worked() -> Problem {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/data/worked.json");
    Problem::from_path(&path).unwrap()
}

#[test]
fn problem_seeds_round_trip() {
    for (path, text) in corpus("parse_problem") {
        let p = Problem::from_json_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(Problem::from_json_str(&p.to_json_pretty()).unwrap().digest(), p.digest());
    }
}

#[test]
fn proof_seeds_round_trip() {
    for (path, text) in corpus("parse_proof") {
        let log = ProofLog::from_json_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(ProofLog::from_json_str(&log.to_json_pretty()).unwrap(), log);
    }
}

#[test]
fn check_seeds_are_accepted() {
    let p = worked();
    for (path, text) in corpus("check_proof") {
        check_proof_str(&p, &text).unwrap_or_else(|e| panic!("{}: {e:?}", path.display()));
    }
}

#[test]
fn rational_seeds_round_trip() {
    let mut parsed = 0;
    for (_, text) in corpus("parse_rational") {
        if let Ok(r) = text.parse::<Rational>() {
            assert_eq!(r.to_string().parse::<Rational>().unwrap(), r);
            assert_eq!(r.to_fraction_string().parse::<Rational>().unwrap(), r);
            parsed += 1;
        }
    }
    assert!(parsed > 0);
}
