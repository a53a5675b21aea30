//! Train the reference model on synthetic data, then report test metrics
//! and a confusion matrix.
//!
//!     cargo run --release -p vars-core --example train_and_evaluate

use vars_core::dataset::Split;
use vars_core::evaluation::run_pipeline;
use vars_core::model::{Aggregation, EncoderKind, ModelConfig, Task, TaskMode};
use vars_core::synthgen::{generate, GenConfig};
use vars_core::training::TrainConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let gen = GenConfig {
        n_actions: 240,
        seed: 0,
        split: Some([0.6, 0.2, 0.2]),
        ..GenConfig::default()
    };
    let manifest = generate(&gen, dir.path())?;

    let clip = &manifest.actions[0].clips[0];
    let model = ModelConfig {
        encoder_kind: EncoderKind::TemporalConv,
        aggregation: Aggregation::Max,
        task_mode: TaskMode::MultiTask,
        height: clip.height as usize,
        width: clip.width as usize,
        ..ModelConfig::default()
    };
    // a larger step than the reference recipe keeps this example short
    let train = TrainConfig { lr0: 1e-3, max_epochs: 6, ..TrainConfig::default() };

    let run = run_pipeline(&manifest, &model, &train, Split::Test)?;
    for e in &run.outcome.history.epochs {
        println!(
            "epoch {:>2}  lr {:.2e}  train {:.4}  valid {:.4}",
            e.epoch,
            e.lr,
            e.train_loss,
            e.valid_loss.unwrap_or(f64::NAN)
        );
    }
    println!("kept epoch {:?}\n", run.outcome.history.best_epoch);
    println!("{}", run.evaluation.report.to_table("test"));
    if let Some(cm) = run.evaluation.confusion.get(&Task::Foul) {
        println!("{}", cm.to_table());
    }
    Ok(())
}
