#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(spec) = l2div::io::parse_grid_spec(s) {
            // materialization must not panic either
            let _ = spec.materialize(50);
        }
    }
});
