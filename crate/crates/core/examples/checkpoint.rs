//! Save a model, load it back, and confirm predictions are unchanged.
//!
//!     cargo run -p vars-core --example checkpoint

use vars_core::model::{load_checkpoint, save_checkpoint, ModelConfig, MvfModel};
use vars_core::tensor::Tensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ModelConfig { height: 6, width: 8, ..ModelConfig::default() };
    let model = MvfModel::init(config.clone(), 42)?;
    println!("{} parameters", model.num_parameters());

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("model.mvfm");
    save_checkpoint(&model, &path)?;
    println!("wrote {} bytes", std::fs::metadata(&path)?.len());

    let loaded = load_checkpoint(&path)?;
    let n = config.frames * config.height * config.width;
    let clips: Vec<Tensor> = (0..2)
        .map(|v| Tensor::new(&[config.frames, config.height, config.width], (0..n).map(|i| ((i * (v + 3)) % 17) as f64 / 16.0).collect()))
        .collect::<Result<_, _>>()?;
    let (a, b) = (model.predict(&clips)?, loaded.predict(&clips)?);
    assert_eq!(a, b);
    for task in [&a.foul, &a.offence].into_iter().flatten() {
        println!("{:?} top-2: {:?}", task.task, task.top);
    }
    Ok(())
}
