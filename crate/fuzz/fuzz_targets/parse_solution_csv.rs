#![no_main]

use libfuzzer_sys::fuzz_target;
use qvi_cli::SolutionTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = SolutionTable::parse(text) {
        let again = SolutionTable::parse(&t.to_csv()).expect("written table parses");
        assert_eq!(again, t);
    }
});
