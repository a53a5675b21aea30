//! Confusion matrices, balanced accuracy and top-k accuracy on hand-made
//! scores.
//!
//!     cargo run -p vars-core --example metrics

use vars_core::evaluation::{balanced_accuracy, topk_accuracy, ConfusionMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scores: Vec<Vec<f64>> = vec![
        vec![0.7, 0.2, 0.1],
        vec![0.5, 0.4, 0.1],
        vec![0.1, 0.3, 0.6],
        vec![0.6, 0.3, 0.1],
        vec![0.2, 0.7, 0.1],
    ];
    let labels = [0, 1, 2, 0, 0];

    let mut cm = ConfusionMatrix::new(["a", "b", "c"]);
    for (s, &truth) in scores.iter().zip(&labels) {
        let predicted = (0..s.len()).max_by(|&i, &j| s[i].total_cmp(&s[j]).then(j.cmp(&i))).unwrap();
        cm.record(truth, predicted)?;
    }
    println!("{}", cm.to_table());
    // class "a" is common and mostly right, so plain accuracy flatters
    println!("acc@1 {:.3}", topk_accuracy(&scores, &labels, 1)?);
    println!("acc@2 {:.3}", topk_accuracy(&scores, &labels, 2)?);
    println!("balanced accuracy {:.3}", balanced_accuracy(&cm)?);
    Ok(())
}
