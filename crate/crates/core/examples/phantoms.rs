//! Generates synthetic four-modality phantoms and writes them as NIfTI
//! case directories.
//!
//! cargo run --release --example phantoms -- out_dir [cases] [size]

use std::path::PathBuf;

use advseg::volume_io::{generate_phantom, load_dataset, save_case, FileFormat, PhantomConfig};

fn main() -> advseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "phantoms".into()));
    let cases = args.next().map_or(4, |s| s.parse().expect("cases"));
    let size = args.next().map_or(64, |s| s.parse().expect("size"));

    let cfg = PhantomConfig { size, num_cases: cases, seed: 42, ..Default::default() };
    let ds = generate_phantom(&cfg)?;
    for case in &ds.cases {
        let dir = save_case(case, &out, FileFormat::Nifti)?;
        let n = case.labels.data.len() as f64;
        let frac = |ls: &[u8]| case.labels.data.iter().filter(|l| ls.contains(l)).count() as f64 / n;
        println!(
            "{}: ET {:.4} TC {:.4} WT {:.4} of the volume",
            dir.display(),
            frac(&[4]),
            frac(&[1, 4]),
            frac(&[1, 2, 4])
        );
    }
    let back = load_dataset(&out)?;
    assert_eq!(back.ids(), ds.ids());
    println!("reloaded {} cases", back.len());
    Ok(())
}
