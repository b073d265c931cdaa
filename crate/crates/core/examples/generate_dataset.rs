//! Generate a graded-capacity dataset, write it as JSON lines and read it back.
//!
//! cargo run --example generate_dataset

use knapsack_ldf::eval::alpha_quintile;
use knapsack_ldf::{alpha, generate_dataset, read_dataset, write_dataset};

pub fn run() -> anyhow::Result<()> {
    let dataset = generate_dataset(20, 500, 42)?;
    let path = std::env::temp_dir().join("knapsack_ldf_example.kpds");
    write_dataset(&dataset, &path)?;
    let back = read_dataset(&path)?;
    assert_eq!(back, dataset);

    let mut per_quintile = [0usize; 5];
    for item in &dataset.items {
        per_quintile[alpha_quintile(alpha(&item.instance)?)] += 1;
    }
    println!("wrote {} instances of {} items to {}", back.items.len(), back.n_items, path.display());
    println!(
        "split: {} train / {} val / {} test",
        back.split.train.len(),
        back.split.val.len(),
        back.split.test.len()
    );
    println!("instances per alpha quintile: {per_quintile:?}");
    let first = &dataset.items[0].instance;
    println!("instance 0: capacity {:.4} of total weight {:.4}", first.capacity, first.total_weight());
    std::fs::remove_file(path)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
