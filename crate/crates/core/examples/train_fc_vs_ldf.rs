//! Train the unconstrained baseline and the Lagrangian dual model on the same
//! data and compare their constraint violations.
//!
//! cargo run --release --example train_fc_vs_ldf [epochs]

use knapsack_ldf::instance::SplitKind;
use knapsack_ldf::{evaluate, generate_dataset, label_dataset, train, Regime, TrainConfig};

pub fn run_with(epochs: usize) -> anyhow::Result<()> {
    let data = label_dataset(generate_dataset(30, 1500, 5)?)?;
    let base = TrainConfig {
        n_epochs: epochs,
        hidden: vec![128, 64],
        learning_rate: 1e-3,
        seed: 1,
        ..TrainConfig::default()
    };
    let configs = [
        TrainConfig {
            regime: Regime::Fc,
            max_grad_norm: 10.0,
            ..base.clone()
        },
        TrainConfig {
            regime: Regime::Ldf,
            lagrangian_step: 1e-1,
            ..base.clone()
        },
        TrainConfig {
            regime: Regime::LdfPretrained,
            lagrangian_step: 1e-3,
            max_grad_norm: 10.0,
            pretrain_epochs: epochs / 4,
            ..base
        },
    ];
    for config in &configs {
        let out = train(&data, config)?;
        let report = evaluate(&out.best, &data.split_items(SplitKind::Test))?;
        println!(
            "\n{:?}: {} epochs, best epoch {}, final lambda {:.3}, {:.1}s",
            config.regime,
            out.logs.len(),
            out.best_epoch,
            out.multipliers.lambda,
            out.wall_clock_s
        );
        print!("{report}");
    }
    Ok(())
}

pub fn run() -> anyhow::Result<()> {
    run_with(3)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    let epochs = std::env::args().nth(1).map_or(Ok(80), |a| a.parse())?;
    run_with(epochs)
}
