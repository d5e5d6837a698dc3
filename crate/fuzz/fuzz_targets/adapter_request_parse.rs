#![no_main]

use camrobust::adapter::protocol::decode_request;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(req) = decode_request(line) {
        let again = decode_request(req.to_line().trim_end()).expect("encoded requests decode");
        assert_eq!((again.id, again.op), (req.id, req.op));
    }
});
