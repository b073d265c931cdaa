//! Train briefly, save a checkpoint, reload it and predict unseen instances.
//!
//! cargo run --release --example predict

use std::time::Instant;

use knapsack_ldf::eval::predict;
use knapsack_ldf::ldf::constraint_violation;
use knapsack_ldf::nn::{load_checkpoint, save_checkpoint};
use knapsack_ldf::{generate_dataset, label_dataset, solve_exact, train, Regime, TrainConfig};

pub fn run() -> anyhow::Result<()> {
    let data = label_dataset(generate_dataset(15, 600, 2)?)?;
    let config = TrainConfig {
        regime: Regime::Ldf,
        n_epochs: 10,
        hidden: vec![64, 32],
        learning_rate: 1e-3,
        lagrangian_step: 1e-2,
        batch_size: 64,
        seed: 4,
        ..TrainConfig::default()
    };
    let outcome = train(&data, &config)?;
    let path = std::env::temp_dir().join("knapsack_ldf_example.ldfm");
    save_checkpoint(&outcome.best, &path)?;
    let model = load_checkpoint(&path)?;
    std::fs::remove_file(&path)?;

    let fresh = generate_dataset(15, 5, 99)?;
    for item in &fresh.items {
        let inst = &item.instance;
        let t = Instant::now();
        let x = predict(&model, &[inst])?.selections().remove(0);
        let ms = 1e3 * t.elapsed().as_secs_f64();
        let best = solve_exact(inst)?.objective;
        println!(
            "instance {}: predicted value {:.3} (optimum {:.3}), violation {:.3}, {ms:.3} ms",
            inst.id,
            inst.selection_value(&x),
            best,
            constraint_violation(&x, inst)?
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
