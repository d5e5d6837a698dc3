#![no_main]

use camrobust::adapter::protocol::decode_response;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(resp) = decode_response(line) {
        let again = decode_response(resp.to_line().trim_end()).expect("encoded responses decode");
        assert_eq!(again, resp);
    }
});
