use camrobust::model::Image;
use camrobust::segment::{felzenszwalb, quickshift, slic, FelzenszwalbParams, QuickShiftParams, SlicParams};

fn photo() -> Image {
    Image::load(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/photo.png")).unwrap()
}

#[test]
fn quickshift_photo_regression() {
    let m = quickshift(&photo(), &QuickShiftParams::default()).unwrap().segment_count();
    assert!((10..=500).contains(&m), "quickshift {m}");
    assert_eq!(m, 11);
}

#[test]
fn slic_photo_regression() {
    let m = slic(&photo(), &SlicParams::default()).unwrap().segment_count();
    assert!((84..=156).contains(&m), "slic {m}");
    assert_eq!(m, 112);
}

#[test]
fn felzenszwalb_photo_regression() {
    let seg = felzenszwalb(&photo(), &FelzenszwalbParams::default()).unwrap();
    assert!(seg.sizes().iter().all(|&s| s >= 50));
    assert_eq!(seg.segment_count(), 38);
}
