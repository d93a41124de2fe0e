#![no_main]

use libfuzzer_sys::fuzz_target;
use relucert_kernel::model::Problem;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = Problem::from_json_str(text) {
        let again = Problem::from_json_str(&p.to_json_pretty()).expect("emitted problem parses");
        assert_eq!(again.digest(), p.digest());
    }
});
