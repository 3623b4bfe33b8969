use crate::hashcore::Decimal6;

use super::dataset::{Dataset, Row};
use super::model::{features_f64, softmax, Model};
use super::train::check_labels;
use super::MlError;

/// Gradient of the softmax cross-entropy loss with respect to the input.
pub fn input_gradient(m: &Model, x: &[f64], y: usize) -> Vec<f64> {
    let net = m.network();
    let trace = net.trace(x);
    let mut dl = softmax(trace.acts.last().unwrap());
    dl[y] -= 1.0;
    net.backward(&trace, &dl, None)
}

/// Fast gradient sign method: every feature moves by exactly `eps` in the
/// direction of the loss gradient's sign, or stays put where the gradient
/// component is zero. Arithmetic is on the fixed-point values, so
/// `|x' - x| <= eps` holds exactly.
pub fn fgsm_dataset(m: &Model, d: &Dataset, eps: Decimal6) -> Result<Dataset, MlError> {
    if eps.is_negative() {
        return Err(MlError::NegativeEpsilon(eps.to_string()));
    }
    if d.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let expected = m.architecture().inputs();
    if d.arity() != expected {
        return Err(MlError::InputArity { expected, found: d.arity() });
    }
    check_labels(d, m.architecture().classes())?;
    let overflow = || MlError::Decimal(crate::hashcore::DecimalError::Range(eps.to_string()));
    let mut rows = Vec::with_capacity(d.len());
    for r in d.rows() {
        let grad = input_gradient(m, &features_f64(&r.features), r.label as usize);
        let features = r
            .features
            .iter()
            .zip(&grad)
            .map(|(x, g)| {
                if *g > 0.0 {
                    x.checked_add(eps).ok_or_else(overflow)
                } else if *g < 0.0 {
                    x.checked_sub(eps).ok_or_else(overflow)
                } else {
                    Ok(*x)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Row { features, label: r.label, sensitive: r.sensitive });
    }
    d.with_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::{accuracy, robust_accuracy, synth, Activation, Architecture};

    fn eps(s: &str) -> Decimal6 {
        Decimal6::parse_any(s).unwrap()
    }

    #[test]
    fn zero_eps_is_identity() {
        let d = synth::separable(20, 1);
        let m = Model::zeros(Architecture::mlp(2, &[3], 2, Activation::Tanh)).unwrap();
        let rob = fgsm_dataset(&m, &d, Decimal6::ZERO).unwrap();
        assert_eq!(rob.digest(), d.digest());
        assert_eq!(robust_accuracy(&m, &rob).unwrap().value, accuracy(&m, &d).unwrap().value);
    }

    #[test]
    fn constant_model_has_zero_gradient() {
        let d = synth::separable(20, 1);
        let m = Model::zeros(Architecture::mlp(2, &[3], 2, Activation::Tanh)).unwrap();
        let rob = fgsm_dataset(&m, &d, eps("0.5")).unwrap();
        assert_eq!(rob, d);
        assert_eq!(robust_accuracy(&m, &rob).unwrap().numerator, accuracy(&m, &d).unwrap().numerator);
    }

    #[test]
    fn bounded_perturbation() {
        let d = synth::separable(40, 2);
        let cfg = crate::ml::TrainingConfig {
            architecture: Architecture::mlp(2, &[4], 2, Activation::Tanh),
            epochs: 3,
            learning_rate: eps("0.05"),
            batch_size: 8,
            optimizer: crate::ml::Optimizer::Adam,
            rng_seed: 1,
        };
        let m = crate::ml::train(&d, &cfg).unwrap();
        let e = eps("0.1");
        let rob = fgsm_dataset(&m, &d, e).unwrap();
        for (a, b) in d.rows().iter().zip(rob.rows()) {
            assert_eq!((a.label, a.sensitive), (b.label, b.sensitive));
            for (x, y) in a.features.iter().zip(&b.features) {
                assert!((y.micros() - x.micros()).abs() <= e.micros());
            }
        }
    }

    #[test]
    fn errors() {
        let d = synth::separable(4, 1);
        let m = Model::zeros(Architecture::mlp(2, &[], 2, Activation::Tanh)).unwrap();
        assert!(matches!(fgsm_dataset(&m, &d, eps("-0.1")), Err(MlError::NegativeEpsilon(_))));
        assert!(matches!(fgsm_dataset(&m, &d.with_rows(vec![]).unwrap(), eps("0.1")), Err(MlError::EmptyDataset)));
    }
}
