//! Compare accuracy when the model sees only some camera views. The live
//! view shows the foul half the time, replays always do.
//!
//!     cargo run --release -p vars-core --example view_ablation

use vars_core::dataset::Split;
use vars_core::evaluation::{ablate_views, AblationSpec, ViewSubset};
use vars_core::model::{ModelConfig, MvfModel};
use vars_core::synthgen::{generate, GenConfig};
use vars_core::training::{prepare_split, train_prepared, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let gen = GenConfig {
        n_actions: 400,
        live_informative_prob: 0.5,
        replay_count_distribution: [0.0, 0.5, 0.5],
        seed: 2,
        split: Some([0.6, 0.0, 0.4]),
        ..GenConfig::default()
    };
    let manifest = generate(&gen, dir.path())?;
    let train_cfg = TrainConfig { lr0: 1e-3, max_epochs: 5, ..TrainConfig::default() };
    let train = prepare_split(&manifest, Some(Split::Train), train_cfg.fps)?;
    let test = prepare_split(&manifest, Some(Split::Test), train_cfg.fps)?;

    let clip = &manifest.actions[0].clips[0];
    let config = ModelConfig { height: clip.height as usize, width: clip.width as usize, ..ModelConfig::default() };
    let outcome = train_prepared(MvfModel::init(config, train_cfg.seed)?, &train, &[], &train_cfg, &mut |_, _| {})?;

    let subsets = ["L", "R1", "L+R1", "L+R1+R2"]
        .iter()
        .map(|s| s.parse::<ViewSubset>())
        .collect::<Result<Vec<_>, _>>()?;
    let spec = AblationSpec { subsets, ..AblationSpec::default() };
    let ablation = ablate_views(&outcome.model, &test, &spec)?;
    println!("{} test actions with every view ({} skipped)\n", ablation.actions_used, ablation.actions_skipped);
    println!("{}", ablation.to_table());
    Ok(())
}
