#![no_main]

use camrobust::model::parse_manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(manifest) = parse_manifest(text) {
        let again = parse_manifest(&manifest.to_json()).expect("serialized manifests parse");
        assert_eq!(again, manifest);
    }
});
