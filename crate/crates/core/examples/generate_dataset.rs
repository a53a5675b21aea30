//! Generate a synthetic dataset and print its statistics.
//!
//!     cargo run -p vars-core --example generate_dataset -- [out_dir]

use std::path::PathBuf;

use vars_core::dataset::{dataset_stats, load_manifest};
use vars_core::synthgen::{generate, observed_classes, GenConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let keep = std::env::args().nth(1).map(PathBuf::from);
    let tmp = tempfile::tempdir()?;
    let out = keep.clone().unwrap_or_else(|| tmp.path().to_path_buf());

    let config = GenConfig {
        n_actions: 200,
        class_distribution: observed_classes(),
        seed: 1,
        ..GenConfig::default()
    };
    generate(&config, &out)?;

    // what a consumer would do: load from disk and validate
    let manifest = load_manifest(&out.join("manifest.json"))?;
    manifest.validate_payloads()?;
    println!("{} actions written to {}", manifest.actions.len(), out.display());
    println!("{}", dataset_stats(&manifest)?.to_table());
    if keep.is_none() {
        println!("(temporary directory; pass a path to keep the data)");
    }
    Ok(())
}
