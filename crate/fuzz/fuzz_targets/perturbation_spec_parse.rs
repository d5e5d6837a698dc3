#![no_main]

use camrobust::perturb::PerturbationSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = text.parse::<PerturbationSpec>() {
        let again: PerturbationSpec = spec.label().parse().expect("labels parse");
        assert_eq!(again, spec);
    }
});
