#![allow(dead_code)]

use knapsack_ldf::instance::{Label, LabeledInstance};
use knapsack_ldf::ldf::{decode, lagrangian_loss, Batch, Decoding};
use knapsack_ldf::{brute_force, generate_dataset, label_dataset, solve_exact, Dataset, KnapsackInstance};
use knapsack_ldf::{ModelParams, Mode};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random instance whose capacity sits at a uniformly drawn fraction of the
/// total weight.
pub fn random_instance(rng: &mut ChaCha8Rng, id: u64, n: usize) -> KnapsackInstance {
    let weights: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let values: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    let alpha: f64 = rng.gen_range(0.01..0.99);
    let capacity = alpha * weights.iter().sum::<f64>();
    KnapsackInstance::new(id, weights, values, capacity).unwrap()
}

/// Compares the exact solver with enumeration on `count` instances with
/// n cycling through 1..=18. Returns descriptions of every mismatch.
pub fn solver_mismatches(count: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for id in 0..count as u64 {
        let n = 1 + (id as usize % 18);
        let inst = random_instance(&mut rng, id, n);
        let exact = solve_exact(&inst).unwrap();
        let oracle = brute_force(&inst).unwrap();
        if exact.objective != oracle.objective || exact.selection != oracle.selection {
            bad.push(format!(
                "instance {id} (n={n}): exact {} vs enumeration {}",
                exact.objective, oracle.objective
            ));
        }
    }
    bad
}

/// Relative error with an absolute floor so parameters whose gradient is
/// zero (hidden biases ahead of batch norm) are judged in absolute terms.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error between backpropagated gradients and central
/// differences of the smoothed Lagrangian loss, over every trainable
/// parameter of an n=4, 8/8 network on a batch of three.
pub fn max_gradient_error(seed: u64) -> (f64, usize) {
    let (n, lambda, k, h) = (4, 1.0, 25.0, 1e-5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<LabeledInstance> = (0..3)
        .map(|id| {
            let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
            let values: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            // tight enough that the smoothed selection always overflows
            let capacity = 0.1 * weights.iter().sum::<f64>();
            let selection: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            LabeledInstance {
                instance: KnapsackInstance::new(id, weights, values, capacity).unwrap(),
                label: Some(Label {
                    selection,
                    optimal_value: 0.0,
                }),
            }
        })
        .collect();
    let refs: Vec<&LabeledInstance> = items.iter().collect();
    let batch = Batch::from_items(&refs).unwrap();
    let mut params = ModelParams::init_with_hidden(n, &[8, 8], seed).unwrap();

    let loss = |params: &ModelParams| -> (f64, Array2<f64>, knapsack_ldf::nn::ForwardTrace) {
        let trace = params.forward(batch.inputs.view(), Mode::Train).unwrap();
        let decoded = decode(&trace.probs, Decoding::Smooth, k);
        let out = lagrangian_loss(&trace.logits, &trace.probs, &decoded, &batch, lambda, k).unwrap();
        assert!(out.violations.iter().all(|&v| v > 0.0));
        (out.loss, out.grad_logits, trace)
    };
    let (_, grad_logits, trace) = loss(&params);
    let grads = params.backward(&trace, &grad_logits).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();

    let mut worst = 0.0f64;
    let mut checked = 0;
    for (t, tensor) in analytic.iter().enumerate() {
        for (i, &a) in tensor.iter().enumerate() {
            let original = params.trainable_mut()[t][i];
            params.trainable_mut()[t][i] = original + h;
            let up = loss(&params).0;
            params.trainable_mut()[t][i] = original - h;
            let down = loss(&params).0;
            params.trainable_mut()[t][i] = original;
            worst = worst.max(relative_error(a, (up - down) / (2.0 * h)));
            checked += 1;
        }
    }
    (worst, checked)
}

pub fn desk_dataset(seed: u64) -> Dataset {
    label_dataset(generate_dataset(100, 4000, seed).unwrap()).unwrap()
}
