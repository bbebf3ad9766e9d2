//! Drives the command-line front end in-process and reruns it from the
//! manifest it wrote.
//!
//! cargo run --example cli_manifest

use csbpc::cli::{manifest_path, run};

fn main() {
    let dir = std::env::temp_dir().join("csbpc-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let out = dir.join("diagram.csv");
    let again = dir.join("diagram-again.csv");
    let out_s = out.to_string_lossy().into_owned();

    let status = run(["csbpc", "phase-diagram", "--theta", "0.1,0.25,0.4", "--gr", "0:2:0.25", "--out", &out_s]);
    assert_eq!(status, 0);
    let manifest = manifest_path(&out);
    println!("{}", std::fs::read_to_string(&manifest).expect("manifest"));

    let status = run([
        "csbpc",
        "rerun",
        "--manifest",
        &manifest.to_string_lossy(),
        "--out",
        &again.to_string_lossy(),
    ]);
    assert_eq!(status, 0);
    let same = std::fs::read(&out).ok() == std::fs::read(&again).ok();
    println!("rerun identical: {same}");
}
