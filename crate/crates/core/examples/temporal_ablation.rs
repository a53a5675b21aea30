//! Train one model per frame rate and tabulate accuracy against the
//! temporal context each rate covers.
//!
//!     cargo run --release -p vars-core --example temporal_ablation

use vars_core::dataset::Split;
use vars_core::evaluation::ablate_temporal;
use vars_core::model::ModelConfig;
use vars_core::synthgen::{generate, GenConfig};
use vars_core::training::{resample_indices, TrainConfig, ABLATION_FPS, CLIP_FRAMES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // which source frames each rate samples around contact frame 40 of 80
    for fps in ABLATION_FPS {
        let idx = resample_indices(80, Some(40), f64::from(fps), CLIP_FRAMES)?;
        println!("{fps:>2} fps: {idx:?}");
    }
    println!();

    let dir = tempfile::tempdir()?;
    let gen = GenConfig { n_actions: 400, seed: 5, split: Some([0.7, 0.1, 0.2]), ..GenConfig::default() };
    let manifest = generate(&gen, dir.path())?;
    let clip = &manifest.actions[0].clips[0];
    let model = ModelConfig {
        height: clip.height as usize,
        width: clip.width as usize,
        ..ModelConfig::default()
    };
    let train = TrainConfig { lr0: 1e-3, max_epochs: 6, ..TrainConfig::default() };
    let fps: Vec<f64> = ABLATION_FPS.iter().map(|&f| f64::from(f)).collect();
    let ablation = ablate_temporal(&manifest, &model, &train, &fps, Split::Test)?;
    println!("{}", ablation.to_table());
    Ok(())
}
