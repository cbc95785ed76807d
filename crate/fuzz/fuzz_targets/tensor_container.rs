#![no_main]

use adavits::io::{decode_tensors, encode_tensors};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(tensors) = decode_tensors(data) {
        let bytes = encode_tensors(tensors.iter().map(|(n, t)| (n.as_str(), t))).unwrap();
        assert_eq!(bytes, data);
    }
});
