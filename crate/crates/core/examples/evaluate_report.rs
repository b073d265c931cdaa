//! Quintile reports for three fixed predictors: the optimal labels, the
//! empty selection and the all-ones selection.
//!
//! cargo run --example evaluate_report

use knapsack_ldf::instance::SplitKind;
use knapsack_ldf::{generate_dataset, label_dataset, EvalReport};

pub fn run() -> anyhow::Result<()> {
    let data = label_dataset(generate_dataset(25, 1000, 8)?)?;
    let items = data.split_items(SplitKind::Test);

    let oracle: Vec<Vec<bool>> = items.iter().map(|i| i.label.as_ref().unwrap().selection.clone()).collect();
    let empty: Vec<Vec<bool>> = items.iter().map(|i| vec![false; i.instance.n_items()]).collect();
    let full: Vec<Vec<bool>> = items.iter().map(|i| vec![true; i.instance.n_items()]).collect();

    for (name, predictions) in [("optimal labels", &oracle), ("take nothing", &empty), ("take everything", &full)] {
        println!("\n{name}");
        print!("{}", EvalReport::from_predictions(predictions, &items)?);
    }
    let json = EvalReport::from_predictions(&oracle, &items)?.to_json();
    println!("\nas JSON: {}…", &json[..json.len().min(120)]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
