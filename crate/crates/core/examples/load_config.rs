//! Loads a configuration file, reports every violation, and derives
//! variants by dotted parameter path.
//!
//! cargo run --example load_config -- configs/desk.toml

use std::path::PathBuf;

use tdthr::sim::SimConfig;

fn main() {
    let path: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/desk.toml"));
    let cfg = match SimConfig::from_path(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    println!("{} hashes to {}", path.display(), cfg.hash());

    for (param, value) in [
        ("traffic.critical_rate", 0.8),
        ("estimators.prr_window", 0.0),
        ("radio.rnage", 1.0),
    ] {
        match cfg.with_parameter(param, value) {
            Ok(v) if v.violations().is_empty() => println!("{param} = {value}: ok, hash {}", v.hash()),
            Ok(v) => println!("{param} = {value}: {}", v.violations().join("; ")),
            Err(e) => println!("{param} = {value}: {e}"),
        }
    }
}
