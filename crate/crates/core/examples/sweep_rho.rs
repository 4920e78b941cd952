//! Sweep the spurious-correlation strength and print how the epoch-0 gap
//! and final accuracy gap follow it.

use spikefair::harness::{bundled, parse_vary, sweep};

fn main() {
    let mut base: serde_json::Value = serde_json::from_str(bundled::SHORTCUT).unwrap();
    base["training"]["epochs"] = 8.into();
    base["deployment"]["profiles"] = serde_json::json!([]);
    let (path, values) = parse_vary("dataset.spurious_strength=0.5,0.7,0.85,0.95").unwrap();

    let out = std::env::temp_dir().join(format!("spikefair-sweep-{}", std::process::id()));
    let points = sweep(&base, &path, &values, &out).unwrap_or_else(|e| panic!("{e}"));
    println!("{:>6} {:>6} {:>10} {:>10}", "rho", "seed", "gap@E0", "delta_acc");
    for p in &points {
        println!("{:>6} {:>6} {:>10.4} {:>10.4}", p.value.to_string(), p.seed, p.epoch0_gap, p.delta_acc);
    }
    std::fs::remove_dir_all(&out).ok();
}
