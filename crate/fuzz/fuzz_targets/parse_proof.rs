#![no_main]

use libfuzzer_sys::fuzz_target;
use relucert_kernel::prooflog::ProofLog;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(log) = ProofLog::from_json_str(text) {
        let again = ProofLog::from_json_str(&log.to_json_pretty()).expect("emitted log parses");
        assert_eq!(again, log);
    }
});
