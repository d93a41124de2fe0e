#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use relucert_kernel::model::Problem;
use relucert_kernel::prooflog::check_proof_str;

const WORKED: &str = include_str!("../../crates/cli/tests/data/worked.json");

fuzz_target!(|data: &[u8]| {
    static PROBLEM: OnceLock<Problem> = OnceLock::new();
    let problem = PROBLEM.get_or_init(|| Problem::from_json_str(WORKED).unwrap());
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = check_proof_str(problem, text);
});
