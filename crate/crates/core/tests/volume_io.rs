use std::fs;

use advseg::tensor::Tensor;
use advseg::volume_io::{
    generate_phantom, load_case, load_dataset, load_labelmap, load_volume, save_case, save_labelmap, save_volume,
    FileFormat, LabelMap, PhantomConfig, Volume,
};
use advseg::Error;

fn phantoms(n: usize, size: usize) -> advseg::volume_io::Dataset {
    generate_phantom(&PhantomConfig { size, num_cases: n, noise_sigma: 0.05, seed: 9 }).unwrap()
}

#[test]
fn raw_volume_round_trip_keeps_spacing_and_bits() {
    let dir = tempfile::tempdir().unwrap();
    let data = Tensor::from_fn(vec![2, 3, 4, 5], |i| (i as f32 * 0.37).sin());
    let v = Volume::new(data, [1.5, 2.0, 0.5], "v").unwrap();
    let path = dir.path().join("v.f32");
    save_volume(&v, &path).unwrap();
    let back = load_volume(&path).unwrap();
    assert_eq!(back.data, v.data);
    assert_eq!(back.spacing, v.spacing);
}

#[test]
fn nifti_volume_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = Tensor::from_fn(vec![1, 6, 5, 4], |i| i as f32 / 7.0);
    let v = Volume::new(data, [1.0, 1.2, 3.0], "n").unwrap();
    for name in ["n.nii", "n.nii.gz"] {
        let path = dir.path().join(name);
        save_volume(&v, &path).unwrap();
        let back = load_volume(&path).unwrap();
        assert_eq!(back.data, v.data, "{name}");
        // pixdim is stored as f32
        assert_eq!(back.spacing, v.spacing.map(|s| s as f32 as f64), "{name}");
    }
}

#[test]
fn label_maps_round_trip_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let data: Vec<u8> = (0..60).map(|i| [0, 1, 2, 4][i % 4]).collect();
    let lm = LabelMap::new(data, [3, 4, 5], "l").unwrap();
    for name in ["l_seg.nii.gz", "l_seg.u8"] {
        let path = dir.path().join(name);
        save_labelmap(&lm, &path).unwrap();
        let back = load_labelmap(&path).unwrap();
        assert_eq!(back.data, lm.data, "{name}");
        assert_eq!(back.dims, lm.dims, "{name}");
    }
}

#[test]
fn invalid_labels_on_disk_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.nii");
    let v = Volume::new(Tensor::full(vec![1, 2, 2, 2], 3.0), [1.0; 3], "bad").unwrap();
    save_volume(&v, &path).unwrap();
    assert!(matches!(load_labelmap(&path), Err(Error::InvalidLabel(3))));
}

#[test]
fn cases_round_trip_in_both_formats() {
    let ds = phantoms(2, 16);
    for format in [FileFormat::Nifti, FileFormat::Raw] {
        let dir = tempfile::tempdir().unwrap();
        for c in &ds.cases {
            save_case(c, dir.path(), format).unwrap();
        }
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.ids(), ds.ids());
        for (a, b) in back.cases.iter().zip(&ds.cases) {
            assert_eq!(a.image.data, b.image.data, "{format:?}");
            assert_eq!(a.labels, b.labels, "{format:?}");
        }
    }
}

#[test]
fn missing_modality_is_reported() {
    let ds = phantoms(1, 16);
    let dir = tempfile::tempdir().unwrap();
    let case_dir = save_case(&ds.cases[0], dir.path(), FileFormat::Nifti).unwrap();
    fs::remove_file(case_dir.join("phantom_0000_t1ce.nii.gz")).unwrap();
    match load_case(&case_dir) {
        Err(Error::IncompleteCase { case, missing }) => {
            assert_eq!(case, "phantom_0000");
            assert_eq!(missing, "t1ce");
        }
        other => panic!("expected incomplete case, got {other:?}"),
    }
}

#[test]
fn mismatched_modality_geometry_is_reported() {
    let ds = phantoms(1, 16);
    let dir = tempfile::tempdir().unwrap();
    let case_dir = save_case(&ds.cases[0], dir.path(), FileFormat::Nifti).unwrap();
    let odd = Volume::new(Tensor::zeros(vec![1, 16, 16, 15]), [1.0; 3], "x").unwrap();
    save_volume(&odd, &case_dir.join("phantom_0000_t2.nii.gz")).unwrap();
    assert!(matches!(load_case(&case_dir), Err(Error::InconsistentGeometry(_))));
}

#[test]
fn phantom_tumour_fraction_stays_in_range() {
    let ds = generate_phantom(&PhantomConfig { size: 64, num_cases: 100, noise_sigma: 0.05, seed: 3 }).unwrap();
    for c in &ds.cases {
        let wt = c.labels.data.iter().filter(|&&l| l != 0).count() as f64 / c.labels.data.len() as f64;
        assert!((0.005..=0.15).contains(&wt), "{}: tumour fraction {wt}", c.id());
        for l in [1, 2, 4] {
            assert!(c.labels.data.contains(&l), "{} lacks label {l}", c.id());
        }
    }
}
