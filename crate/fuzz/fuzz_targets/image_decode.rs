#![no_main]

use camrobust::model::Image;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(image) = Image::decode(data) {
        assert_eq!(image.data().len(), image.pixel_count() * 3);
    }
});
