//! Solve instances exactly with branch and bound and check against enumeration.
//!
//! cargo run --example solve_exact

use knapsack_ldf::solver::dantzig_bound;
use knapsack_ldf::{brute_force, solve_exact, KnapsackInstance};

pub fn run() -> anyhow::Result<()> {
    let small = KnapsackInstance::new(0, vec![0.4, 0.3, 0.5, 0.2], vec![0.6, 0.5, 0.7, 0.1], 0.8)?;
    let exact = solve_exact(&small)?;
    let oracle = brute_force(&small)?;
    println!(
        "4 items: selection {:?}, objective {}, {} nodes (enumeration agrees: {})",
        exact.selection,
        exact.objective,
        exact.nodes_explored,
        (&exact.selection, exact.objective) == (&oracle.selection, oracle.objective)
    );

    let data = knapsack_ldf::generate_dataset(500, 3, 1)?;
    for item in &data.items {
        let inst = &item.instance;
        let t = std::time::Instant::now();
        let r = solve_exact(inst)?;
        println!(
            "500 items, W = {:>7.2}: objective {:.4} (LP bound {:.4}), {} items, {} nodes, {:.2} ms",
            inst.capacity,
            r.objective,
            dantzig_bound(inst),
            r.selection.iter().filter(|&&x| x).count(),
            r.nodes_explored,
            1e3 * t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
