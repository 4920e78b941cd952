//! The bundled shortcut experiment end to end, written to a temporary
//! directory and read back through the manifest.

use spikefair::harness::{bundled, load_summary, read_manifest, run_experiment, validate_config};

fn main() {
    let cfg = validate_config(bundled::SHORTCUT).expect("bundled config is valid");
    let out = std::env::temp_dir().join(format!("spikefair-full-{}", std::process::id()));
    let art = run_experiment(&cfg, &out).unwrap_or_else(|e| panic!("{e}"));

    for m in read_manifest(&out).expect("hashes verify") {
        println!("{:<24} {:<8} {}", m.path, m.role, &m.sha256[..16]);
    }
    println!("manifest sha256 {}", art.manifest_sha256().unwrap());

    let summary = load_summary(&out).unwrap();
    summary.write_csv(std::io::stdout().lock()).unwrap();
    std::fs::remove_dir_all(&out).ok();
}
