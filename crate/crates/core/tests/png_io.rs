use std::path::Path;

use cntq_core::image::{self, GrayImage};
use cntq_core::{Error, ErrorKind};

fn encode(width: u32, height: u32, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, width, height);
    enc.set_color(color);
    enc.set_depth(depth);
    let mut w = enc.write_header().unwrap();
    w.write_image_data(data).unwrap();
    w.finish().unwrap();
    out
}

#[test]
fn gray_round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let img = GrayImage::from_fn(31, 17, |x, y| (x * 7 + y * 13) as u8);
    let path = dir.path().join("nested/dir/a.png");
    image::save_png(&img, &path).unwrap();
    assert_eq!(image::load_png(&path).unwrap(), img);
    assert!(!path.with_extension("png.tmp").exists());
}

#[test]
fn rgb_is_reduced_to_luma() {
    let dir = tempfile::tempdir().unwrap();
    let rgb = [255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30];
    let path = dir.path().join("rgb.png");
    std::fs::write(&path, encode(4, 1, png::ColorType::Rgb, png::BitDepth::Eight, &rgb)).unwrap();
    let img = image::load_png(&path).unwrap();
    // 0.299 R + 0.587 G + 0.114 B, rounded.
    let expect = [76u8, 150, 29, 18];
    assert_eq!(img.pixels(), &expect);
    for (i, px) in rgb.chunks(3).enumerate() {
        assert_eq!(image::luma(px[0], px[1], px[2]), expect[i]);
    }
}

#[test]
fn sixteen_bit_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("deep.png");
    std::fs::write(&path, encode(2, 2, png::ColorType::Grayscale, png::BitDepth::Sixteen, &[0u8; 8])).unwrap();
    let err = image::load_png(&path).unwrap_err();
    assert!(matches!(err, Error::UnsupportedBitDepth { depth: 16, .. }), "{err}");
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn missing_and_corrupt_files() {
    let err = image::load_png(Path::new("/definitely/not/here.png")).unwrap_err();
    assert!(matches!(err, Error::FileNotFound(_)));
    assert_eq!(err.kind(), ErrorKind::Io);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.png");
    std::fs::write(&path, b"not a png at all").unwrap();
    assert!(matches!(image::load_png(&path).unwrap_err(), Error::Decode { .. }));
}
