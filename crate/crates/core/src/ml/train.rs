use super::config::{Optimizer, TrainingConfig};
use super::dataset::Dataset;
use super::model::{features_f64, softmax, Dense, Grads, Mlp, Model};
use super::rng::DetRng;
use super::MlError;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

pub(crate) fn check_labels(d: &Dataset, classes: usize) -> Result<(), MlError> {
    for (row, r) in d.rows().iter().enumerate() {
        if r.label as usize >= classes {
            return Err(MlError::LabelOutOfRange { row, label: r.label, classes });
        }
    }
    Ok(())
}

/// Glorot-uniform weights drawn layer by layer in row-major order, zero
/// biases.
fn init(cfg: &TrainingConfig, rng: &mut DetRng) -> Mlp {
    let arch = &cfg.architecture;
    let layers = arch
        .layers
        .windows(2)
        .map(|w| {
            let (n_in, n_out) = (w[0], w[1]);
            let a = (6.0 / (n_in + n_out) as f64).sqrt();
            Dense { n_in, n_out, w: (0..n_in * n_out).map(|_| rng.symmetric(a)).collect(), b: vec![0.0; n_out] }
        })
        .collect();
    Mlp { layers, activation: arch.activation }
}

struct Adam {
    m: Grads,
    v: Grads,
    t: i32,
}

/// Mini-batch training with softmax cross-entropy. Each epoch visits rows in
/// an order shuffled from the config's seed; gradients are averaged over the
/// batch and applied after each batch. The result depends only on
/// `(d, cfg)`.
pub fn train(d: &Dataset, cfg: &TrainingConfig) -> Result<Model, MlError> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let arch = &cfg.architecture;
    if arch.inputs() != d.arity() {
        return Err(MlError::Config(format!(
            "architecture expects {} inputs, dataset has {} features",
            arch.inputs(),
            d.arity()
        )));
    }
    check_labels(d, arch.classes())?;

    let mut rng = DetRng::new(cfg.rng_seed);
    let mut net = init(cfg, &mut rng);
    let xs: Vec<Vec<f64>> = d.rows().iter().map(|r| features_f64(&r.features)).collect();
    let ys: Vec<usize> = d.rows().iter().map(|r| r.label as usize).collect();
    let lr = cfg.learning_rate.to_f64();
    let mut grads = Grads::zeros_like(&net);
    let mut adam = match cfg.optimizer {
        Optimizer::Adam => Some(Adam { m: Grads::zeros_like(&net), v: Grads::zeros_like(&net), t: 0 }),
        Optimizer::Sgd => None,
    };
    let mut order: Vec<usize> = (0..d.len()).collect();
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size as usize) {
            grads.reset();
            for &i in batch {
                let trace = net.trace(&xs[i]);
                let mut dl = softmax(trace.acts.last().unwrap());
                dl[ys[i]] -= 1.0;
                net.backward(&trace, &dl, Some(&mut grads));
            }
            let scale = 1.0 / batch.len() as f64;
            apply(&mut net, &grads, scale, lr, adam.as_mut());
        }
    }
    Model::quantize(arch.clone(), &net)
}

fn apply(net: &mut Mlp, g: &Grads, scale: f64, lr: f64, adam: Option<&mut Adam>) {
    match adam {
        None => {
            for (li, layer) in net.layers.iter_mut().enumerate() {
                layer.w.iter_mut().zip(&g.w[li]).for_each(|(p, gi)| *p -= lr * gi * scale);
                layer.b.iter_mut().zip(&g.b[li]).for_each(|(p, gi)| *p -= lr * gi * scale);
            }
        }
        Some(st) => {
            st.t += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(st.t);
            let c2 = 1.0 - ADAM_BETA2.powi(st.t);
            let step = |p: &mut f64, gi: f64, m: &mut f64, v: &mut f64| {
                let gi = gi * scale;
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * gi;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * gi * gi;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            };
            for (li, layer) in net.layers.iter_mut().enumerate() {
                for (k, p) in layer.w.iter_mut().enumerate() {
                    step(p, g.w[li][k], &mut st.m.w[li][k], &mut st.v.w[li][k]);
                }
                for (k, p) in layer.b.iter_mut().enumerate() {
                    step(p, g.b[li][k], &mut st.m.b[li][k], &mut st.v.b[li][k]);
                }
            }
        }
    }
}
