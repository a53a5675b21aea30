//! Annotation rules and the two classification targets derived from them.
//!
//!     cargo run -p vars-core --example labels

use vars_core::dataset::{map_task1, map_task2};
use vars_core::synthgen::{generate, GenConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let manifest = generate(&GenConfig { n_actions: 6, seed: 4, ..GenConfig::default() }, dir.path())?;

    for action in &manifest.actions {
        let Some(a) = &action.annotation else { continue };
        println!(
            "{}: {:?}, severity {:?} -> task 1 {:?}, task 2 {:?}",
            action.action_id,
            a.action_class,
            a.severity,
            map_task1(a),
            map_task2(a)
        );
    }

    // break a conditional rule: upper_body_part only applies to upper-body contact
    let mut bad = manifest.actions[0].annotation.clone().expect("annotated");
    bad.upper_body_part = vars_core::dataset::UpperBodyPart::Arm;
    bad.bodypart = vars_core::dataset::Bodypart::Under;
    for v in bad.violations() {
        println!("invalid: {v}");
    }
    Ok(())
}
