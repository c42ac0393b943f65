use std::fs;
use std::path::Path;

use sfedca_core::data::synth_blobs;
use sfedca_sim::csvdata::{read_dataset, write_dataset, CsvError};
use sfedca_sim::idx::{encode_images, encode_labels, image_dims, load_idx, parse_images, IdxError};
use sfedca_sim::output::write_atomically;

fn write_pair(dir: &Path, images: &[u8], labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
    let (i, l) = (dir.join("img-idx3-ubyte"), dir.join("lbl-idx1-ubyte"));
    fs::write(&i, images).unwrap();
    fs::write(&l, labels).unwrap();
    (i, l)
}

fn tiny_images() -> Vec<Vec<f64>> {
    (0..5).map(|k| (0..6).map(|p| ((k * 6 + p) * 8) as f64 / 255.0).collect()).collect()
}

#[test]
fn idx_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let images = tiny_images();
    let labels = [3, 0, 1, 2, 3];
    let (i, l) = write_pair(dir.path(), &encode_images(2, 3, &images), &encode_labels(&labels));

    let ds = load_idx(&i, &l).unwrap();
    assert_eq!(ds.len(), 5);
    assert_eq!(ds.classes(), 4);
    assert_eq!(ds.sample_len(), 6);
    assert_eq!(ds.labels(), &labels);
    for (got, want) in ds.samples().iter().zip(&images) {
        assert_eq!(got.values(), &want[..]);
    }
    assert_eq!(image_dims(&i).unwrap(), (5, 2, 3));
}

#[test]
fn idx_header_is_big_endian() {
    let bytes = encode_images(28, 28, &[vec![0.0; 784]]);
    assert_eq!(&bytes[..16], &[0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 28, 0, 0, 0, 28]);
    let (rows, cols, imgs) = parse_images(&bytes, Path::new("x")).unwrap();
    assert_eq!((rows, cols, imgs.len()), (28, 28, 1));
    // a full-intensity pixel scales to exactly 1
    let mut bytes = bytes;
    bytes[16] = 255;
    assert_eq!(parse_images(&bytes, Path::new("x")).unwrap().2[0][0], 1.0);
}

#[test]
fn idx_errors() {
    let dir = tempfile::tempdir().unwrap();
    let images = encode_images(2, 3, &tiny_images());
    let labels = encode_labels(&[0, 1, 0, 1, 0]);

    // labels passed as images and images passed as labels
    let (i, l) = write_pair(dir.path(), &labels, &images);
    assert!(matches!(load_idx(&i, &l), Err(IdxError::BadMagic { found: 0x801, .. })));
    let (i, l) = write_pair(dir.path(), &images, &images);
    assert!(matches!(load_idx(&i, &l), Err(IdxError::BadMagic { found: 0x803, expected: 0x801, .. })));

    // truncated mid-sample
    let (i, l) = write_pair(dir.path(), &images[..images.len() - 2], &labels);
    assert!(matches!(load_idx(&i, &l), Err(IdxError::Truncated { .. })));
    let (i, l) = write_pair(dir.path(), &images[..10], &labels);
    assert!(matches!(load_idx(&i, &l), Err(IdxError::Truncated { .. })));

    let (i, l) = write_pair(dir.path(), &images, &encode_labels(&[0, 1, 0]));
    assert!(matches!(load_idx(&i, &l), Err(IdxError::CountMismatch { images: 5, labels: 3 })));

    let missing = dir.path().join("missing");
    assert!(matches!(load_idx(&missing, &l), Err(IdxError::Io { .. })));
}

#[test]
fn csv_round_trip() {
    let ds = synth_blobs(3, 7, 4, 2.0, 11).unwrap();
    let mut buf = Vec::new();
    write_dataset(&ds, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), 21);
    assert!(text.lines().all(|l| l.split(',').count() == 5));

    let back = read_dataset(&buf[..], &ds.name).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn csv_errors_report_line() {
    for (text, line) in [("0,1.0\n1,x\n", 2), ("a,1\n", 1), ("0\n", 1)] {
        match read_dataset(text.as_bytes(), "t") {
            Err(CsvError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
    // ragged rows violate the dataset invariant
    assert!(matches!(read_dataset("0,1,2\n1,1\n".as_bytes(), "t"), Err(CsvError::Dataset(_))));
}

#[test]
fn atomic_write_all_or_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    write_atomically(&out, &[("a.csv", "1\n".into()), ("b.csv", "2\n".into())]).unwrap();
    assert_eq!(fs::read_to_string(out.join("b.csv")).unwrap(), "2\n");

    let blocked = dir.path().join("blocked");
    fs::create_dir_all(blocked.join("b.csv")).unwrap();
    assert!(write_atomically(&blocked, &[("a.csv", "1\n".into()), ("b.csv", "2\n".into())]).is_err());
    let left: Vec<_> = fs::read_dir(&blocked).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec![std::ffi::OsString::from("b.csv")]);

    // the output path sits under a regular file
    let file = dir.path().join("file");
    fs::write(&file, "").unwrap();
    assert!(write_atomically(&file.join("out"), &[("a.csv", "1\n".into())]).is_err());
}
