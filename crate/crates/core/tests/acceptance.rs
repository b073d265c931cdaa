//! End-to-end acceptance checks, one PASS/FAIL line each.
//!
//! Runs as part of `cargo test`; the desk-scale training runs take a few
//! minutes on one core. Failing criteria are reported, not hidden: set
//! `KPLDF_ACCEPTANCE_STRICT=1` to turn any FAIL into a non-zero exit.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use knapsack_ldf::instance::{graded_capacity, SplitKind};
use knapsack_ldf::nn::surrogate_grad;
use knapsack_ldf::{evaluate, generate_dataset, train, Dataset, EvalReport, Regime, TrainConfig, TrainOutcome};

const DESK_DATA_SEED: u64 = 2024;
const SEEDS: [u64; 3] = [1, 2, 3];
const DESK_HIDDEN: [usize; 2] = [512, 256];

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn line(id: &'static str, pass: bool, detail: impl Into<String>) -> Line {
    Line {
        id,
        pass,
        detail: detail.into(),
    }
}

fn desk_config(regime: Regime, seed: u64) -> TrainConfig {
    let base = TrainConfig {
        regime,
        seed,
        n_epochs: 150,
        batch_size: 256,
        hidden: DESK_HIDDEN.to_vec(),
        ..TrainConfig::default()
    };
    match regime {
        Regime::Fc => TrainConfig {
            learning_rate: 1e-3,
            max_grad_norm: 10.0,
            ..base
        },
        Regime::Ldf => TrainConfig {
            learning_rate: 1e-3,
            lagrangian_step: 1e-1,
            max_grad_norm: 0.5,
            lambda_init: 1.0,
            ..base
        },
        Regime::LdfPretrained => TrainConfig {
            learning_rate: 1e-3,
            lagrangian_step: 1e-3,
            max_grad_norm: 10.0,
            lambda_init: 1.0,
            pretrain_epochs: 20,
            ..base
        },
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn solver_oracle() -> Line {
    let t = Instant::now();
    let bad = common::solver_mismatches(200, 2024);
    line(
        "1 solver matches enumeration",
        bad.is_empty(),
        format!("200 instances, n in 1..=18, {} mismatches, {:.1}s", bad.len(), t.elapsed().as_secs_f64()),
    )
}

fn gradient_check() -> Line {
    let (worst, checked) = common::max_gradient_error(2024);
    line(
        "2 gradient check",
        worst < 1e-4,
        format!("{checked} parameters, worst relative error {worst:.2e} (< 1e-4)"),
    )
}

fn surrogate_pin() -> Line {
    let centre = surrogate_grad(0.5, 25.0);
    let asym = [0.1, 0.3, 0.49]
        .iter()
        .map(|&d| (surrogate_grad(0.5 + d, 25.0) - surrogate_grad(0.5 - d, 25.0)).abs())
        .fold(0.0, f64::max);
    line(
        "3 surrogate pin",
        centre == 6.25 && asym <= 1e-12,
        format!("s'(0.5) = {centre}, max asymmetry {asym:.1e}"),
    )
}

fn generation_law() -> Line {
    let s = 100;
    let d = generate_dataset(100, s, 99).unwrap();
    let mut worst_rel = 0.0f64;
    let (mut wsum, mut vsum, mut count) = (0.0, 0.0, 0usize);
    for item in &d.items {
        let inst = &item.instance;
        let j = inst.id as usize + 1;
        let expected = graded_capacity(j, s, inst.weights.iter().sum());
        worst_rel = worst_rel.max((inst.capacity - expected).abs() / expected);
        wsum += inst.weights.iter().sum::<f64>();
        vsum += inst.values.iter().sum::<f64>();
        count += inst.n_items();
    }
    let (wm, vm) = (wsum / count as f64, vsum / count as f64);
    line(
        "4 generation law",
        worst_rel <= 1e-12 && (wm - 0.5).abs() < 0.01 && (vm - 0.5).abs() < 0.01,
        format!("capacity rel err {worst_rel:.1e}; means over {count} items: w {wm:.4}, v {vm:.4}"),
    )
}

struct Run {
    outcome: TrainOutcome,
    report: EvalReport,
}

fn run(data: &Dataset, config: &TrainConfig) -> Run {
    let outcome = train(data, config).expect("training succeeds");
    let report = evaluate(&outcome.best, &data.split_items(SplitKind::Test)).unwrap();
    eprintln!(
        "  {:?} seed {}: {} epochs ({:.0}s), best {}, test violated {:.2}%, AR {:.4}",
        config.regime,
        config.seed,
        outcome.logs.len(),
        outcome.wall_clock_s,
        outcome.best_epoch,
        report.all.pct_violated.unwrap_or(f64::NAN),
        report.all.ar.unwrap_or(f64::NAN),
    );
    Run { outcome, report }
}

fn violated(r: &Run) -> f64 {
    r.report.all.pct_violated.expect("non-empty test split")
}

fn ar(r: &Run) -> f64 {
    r.report.all.ar.expect("non-empty test split")
}

/// Worst violation rate over the two highest-capacity quintiles.
fn top_quintiles_violated(r: &Run) -> f64 {
    r.report.quintiles[3..]
        .iter()
        .map(|q| q.pct_violated.unwrap_or(0.0))
        .fold(0.0, f64::max)
}

/// The (a), (c), (d) contrast of a constrained regime against the baseline.
fn contrast(tag: &'static [&'static str; 3], fc: &[Run], model: &[Run]) -> Vec<Line> {
    let fc_v = median(fc.iter().map(violated).collect());
    let fc_ar = median(fc.iter().map(ar).collect());
    let v = median(model.iter().map(violated).collect());
    let top = median(model.iter().map(top_quintiles_violated).collect());
    let m_ar = median(model.iter().map(ar).collect());
    vec![
        line(
            tag[0],
            v < 15.0 && v < fc_v / 3.0,
            format!("median test violated {v:.2}% (need < 15% and < {:.2}% = FC/3)", fc_v / 3.0),
        ),
        line(tag[1], top == 0.0, format!("median violated in alpha >= 0.6: {top:.2}% (need 0%)")),
        line(
            tag[2],
            m_ar <= fc_ar + 0.15,
            format!("median AR {m_ar:.4} vs FC {fc_ar:.4} + 0.15"),
        ),
    ]
}

fn regime_reduction(data: &Dataset) -> Line {
    let fc = TrainConfig {
        n_epochs: 5,
        stop_at_convergence: false,
        ..desk_config(Regime::Fc, 7)
    };
    let ldf = TrainConfig {
        regime: Regime::Ldf,
        lagrangian_step: 0.0,
        lambda_init: 0.0,
        ..fc.clone()
    };
    let a = train(data, &fc).unwrap();
    let b = train(data, &ldf).unwrap();
    let same_logs = a.logs.len() == 5
        && a.logs.iter().zip(&b.logs).all(|(x, y)| x.timeless_json() == y.timeless_json());
    let same_params = a.final_params == b.final_params;
    line(
        "6 regime reduction",
        same_logs && same_params,
        format!("5 epochs: logs identical {same_logs}, parameters identical {same_params}"),
    )
}

fn multiplier_dynamics(data: &Dataset) -> Line {
    let cfg = |s: f64| TrainConfig {
        regime: Regime::Ldf,
        learning_rate: 1e-4,
        lagrangian_step: s,
        n_epochs: 6,
        stop_at_convergence: false,
        hidden: vec![64, 32],
        seed: 5,
        ..TrainConfig::default()
    };
    let rising = train(data, &cfg(1e-4)).unwrap().multipliers.history;
    let flat = train(data, &cfg(0.0)).unwrap().multipliers.history;
    let persistent = rising.iter().all(|&(_, v)| v > 0.0);
    let lambdas: Vec<f64> = rising.iter().map(|h| h.0).collect();
    let increasing = lambdas.windows(2).all(|w| w[1] > w[0]);
    let constant = flat.iter().all(|h| h.0 == flat[0].0);
    line(
        "7 multiplier dynamics",
        persistent && increasing && constant,
        format!(
            "s>0: violations every epoch {persistent}, lambda {:.4} -> {:.4} strictly increasing {increasing}; s=0 constant {constant}",
            lambdas[0],
            lambdas[lambdas.len() - 1]
        ),
    )
}

fn evaluation_fixed_point(data: &Dataset) -> Line {
    let items = data.split_items(SplitKind::Test);
    let truth: Vec<Vec<bool>> = items.iter().map(|i| i.label.as_ref().unwrap().selection.clone()).collect();
    let report = EvalReport::from_predictions(&truth, &items).unwrap();
    let ok = report.rows().filter(|r| r.count > 0).all(|r| {
        r.ar == Some(1.0) && r.pct_violated == Some(0.0) && r.pct_under == Some(0.0) && r.pct_over == Some(0.0)
    });
    line(
        "8 evaluation fixed point",
        ok,
        format!("{} test instances scored against their own labels", items.len()),
    )
}

fn pretrained_convergence(ldf: &[Run], pre: &[Run]) -> Line {
    let mut wins = 0;
    let mut parts = Vec::new();
    for (l, p) in ldf.iter().zip(pre) {
        let from_scratch = l.outcome.phase_epochs_or_cap();
        let converged = p.outcome.epochs_to_convergence;
        if converged.is_some_and(|e| e < from_scratch) {
            wins += 1;
        }
        parts.push(format!(
            "{}/{}",
            converged.map_or("-".into(), |e| e.to_string()),
            l.outcome
                .epochs_to_convergence
                .map_or(format!(">{from_scratch}"), |e| e.to_string())
        ));
    }
    line(
        "9 pretrained converges faster",
        wins >= 2,
        format!(
            "post-unfreeze vs from-scratch epochs per seed [{}]; faster in {wins}/3",
            parts.join(", ")
        ),
    )
}

fn determinism(data: &Dataset, first: &Run) -> Line {
    let again = train(data, &desk_config(Regime::Fc, SEEDS[0])).unwrap();
    let log = |o: &TrainOutcome| o.logs.iter().map(|l| l.timeless_json() + "\n").collect::<String>();
    let same = log(&first.outcome) == log(&again);
    line(
        "10 determinism",
        same,
        format!("FC seed {} rerun: {} epoch lines identical {same}", SEEDS[0], again.logs.len()),
    )
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored
    let started = Instant::now();
    let mut lines = vec![solver_oracle(), gradient_check(), surrogate_pin(), generation_law()];

    eprintln!("labeling desk-scale dataset (n=100, 4000 instances)");
    let data = common::desk_dataset(DESK_DATA_SEED);
    let fc: Vec<Run> = SEEDS.iter().map(|&s| run(&data, &desk_config(Regime::Fc, s))).collect();
    let ldf: Vec<Run> = SEEDS.iter().map(|&s| run(&data, &desk_config(Regime::Ldf, s))).collect();
    let pre: Vec<Run> = SEEDS.iter().map(|&s| run(&data, &desk_config(Regime::LdfPretrained, s))).collect();

    let [a, c, d]: [Line; 3] = contrast(&["5a LDF violation rate", "5c LDF top quintiles", "5d LDF AR cost"], &fc, &ldf)
        .try_into()
        .ok()
        .unwrap();
    let fc_v = median(fc.iter().map(violated).collect());
    lines.push(a);
    lines.push(line("5b FC violation rate", fc_v > 40.0, format!("median test violated {fc_v:.2}% (need > 40%)")));
    lines.push(c);
    lines.push(d);
    lines.push(regime_reduction(&data));
    lines.push(multiplier_dynamics(&data));
    lines.push(evaluation_fixed_point(&data));
    lines.extend(contrast(
        &["9a pretrained violation rate", "9c pretrained top quintiles", "9d pretrained AR cost"],
        &fc,
        &pre,
    ));
    lines.push(pretrained_convergence(&ldf, &pre));
    lines.push(determinism(&data, &fc[0]));

    println!();
    for l in &lines {
        println!("{} {:<32} {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.detail);
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!(
        "{}/{} checks pass ({:.0}s)",
        lines.len() - failed,
        lines.len(),
        started.elapsed().as_secs_f64()
    );
    let strict = std::env::var_os("KPLDF_ACCEPTANCE_STRICT").is_some_and(|v| v != "0");
    if failed > 0 && strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
