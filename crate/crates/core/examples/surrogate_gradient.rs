//! The rounding layer's surrogate derivative and its smooth counterpart.
//!
//! cargo run --example surrogate_gradient

use knapsack_ldf::nn::{round_half_up, surrogate_grad, surrogate_smooth};

pub fn run() -> anyhow::Result<()> {
    println!("{:>5} {:>6} {:>12} {:>12} {:>12}", "p", "round", "k=5", "k=25", "smooth k=25");
    for p in [0.0, 0.1, 0.3, 0.45, 0.5, 0.55, 0.7, 0.9, 1.0] {
        println!(
            "{p:>5} {:>6} {:>12.6} {:>12.6} {:>12.6}",
            round_half_up(p),
            surrogate_grad(p, 5.0),
            surrogate_grad(p, 25.0),
            surrogate_smooth(p, 25.0)
        );
    }
    // the peak is k/4 at p = 0.5
    assert_eq!(surrogate_grad(0.5, 25.0), 6.25);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
