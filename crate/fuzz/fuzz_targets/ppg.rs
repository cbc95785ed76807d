#![no_main]

use adavits::io::container::decode_ppg;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decode_ppg(data);
});
