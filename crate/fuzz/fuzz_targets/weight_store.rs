#![no_main]

use adavits::io::container::store_from_bytes;
use adavits::weights::Provenance;
use adavits::ModelConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let cfg = ModelConfig::micro();
    let _ = store_from_bytes(data, None, Provenance::Derived);
    let _ = store_from_bytes(data, Some(&cfg), Provenance::Derived);
});
