#![no_main]

use adavits::io::container::decode_phonemes;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decode_phonemes(data, 20);
});
