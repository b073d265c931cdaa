//! Compare backpropagated gradients of the Lagrangian loss with central
//! differences on a tiny network, using the smooth stand-in for rounding.
//!
//! cargo run --example gradient_check

use knapsack_ldf::instance::{Label, LabeledInstance};
use knapsack_ldf::ldf::{decode, lagrangian_loss, Batch, Decoding};
use knapsack_ldf::{KnapsackInstance, ModelParams, Mode};

pub fn run() -> anyhow::Result<()> {
    let (lambda, k, h) = (1.0, 25.0, 1e-5);
    let items = [
        (vec![0.9, 0.4, 0.7, 0.5], 0.3, vec![true, false, false, false]),
        (vec![0.3, 0.8, 0.6, 0.2], 0.4, vec![false, false, false, true]),
        (vec![0.5, 0.5, 0.9, 0.6], 0.2, vec![false, true, false, false]),
    ]
    .into_iter()
    .enumerate()
    .map(|(id, (w, cap, x))| {
        Ok(LabeledInstance {
            instance: KnapsackInstance::new(id as u64, w, vec![0.5; 4], cap)?,
            label: Some(Label {
                selection: x,
                optimal_value: 0.5,
            }),
        })
    })
    .collect::<knapsack_ldf::Result<Vec<_>>>()?;
    let refs: Vec<&LabeledInstance> = items.iter().collect();
    let batch = Batch::from_items(&refs)?;
    let mut params = ModelParams::init_with_hidden(4, &[8, 8], 3)?;

    let loss = |p: &ModelParams| -> knapsack_ldf::Result<_> {
        let trace = p.forward(batch.inputs.view(), Mode::Train)?;
        let x = decode(&trace.probs, Decoding::Smooth, k);
        let out = lagrangian_loss(&trace.logits, &trace.probs, &x, &batch, lambda, k)?;
        Ok((out, trace))
    };
    let (out, trace) = loss(&params)?;
    let grads = params.backward(&trace, &out.grad_logits)?;
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let names = ["W1", "b1", "gamma1", "beta1", "W2", "b2", "gamma2", "beta2", "Wout", "bout"];

    for (t, tensor) in analytic.iter().enumerate() {
        let mut worst = 0.0f64;
        for (i, &a) in tensor.iter().enumerate() {
            let orig = params.trainable_mut()[t][i];
            params.trainable_mut()[t][i] = orig + h;
            let up = loss(&params)?.0.loss;
            params.trainable_mut()[t][i] = orig - h;
            let down = loss(&params)?.0.loss;
            params.trainable_mut()[t][i] = orig;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6));
        }
        println!("{:>6}: {:>3} parameters, worst relative error {worst:.2e}", names[t], tensor.len());
        assert!(worst < 1e-4);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
