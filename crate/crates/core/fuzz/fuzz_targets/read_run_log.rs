#![no_main]

use distinction_core::harness::read_run_log;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_run_log(data);
});
