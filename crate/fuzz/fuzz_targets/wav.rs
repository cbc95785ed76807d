#![no_main]

use adavits::io::decode_wav;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(w) = decode_wav(data) {
        assert!(w.is_finite());
    }
});
