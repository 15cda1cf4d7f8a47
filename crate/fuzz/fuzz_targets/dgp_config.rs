#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| sociospatial_fuzz::checks::dgp_config(data));
