#![no_main]

use camrobust::model::{decode_salm, encode_salm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = decode_salm(data) {
        let bytes = encode_salm(&map).expect("decoded maps re-encode");
        assert_eq!(bytes, data);
    }
});
