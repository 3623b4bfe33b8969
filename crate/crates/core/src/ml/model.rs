use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::hashcore::{canonical_bytes, canonicalize, CanonicalJson, Decimal6, Digest};

use super::config::{Activation, Architecture};
use super::MlError;

#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out x n_in`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// Floating-point view of a network used for forward and backward passes.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub(crate) layers: Vec<Dense>,
    pub(crate) activation: Activation,
}

/// Per-layer activations from a forward pass: `acts[0]` is the input,
/// `acts[last]` the logits.
pub(crate) struct Trace {
    pub acts: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub(crate) struct Grads {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            w: net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn reset(&mut self) {
        self.w.iter_mut().chain(self.b.iter_mut()).for_each(|v| v.fill(0.0));
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl Mlp {
    pub fn inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map(|l| l.n_out).unwrap_or(0)
    }

    pub(crate) fn trace(&self, x: &[f64]) -> Trace {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let input = acts.last().unwrap();
            let mut out = layer.b.clone();
            for (o, acc) in out.iter_mut().enumerate() {
                let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                for (w, a) in row.iter().zip(input) {
                    *acc += w * a;
                }
            }
            if li != last {
                match self.activation {
                    Activation::Tanh => out.iter_mut().for_each(|v| *v = v.tanh()),
                    Activation::Relu => out.iter_mut().for_each(|v| *v = v.max(0.0)),
                }
            }
            acts.push(out);
        }
        Trace { acts }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).acts.pop().unwrap()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Softmax cross-entropy of class `y` at input `x`.
    pub fn loss(&self, x: &[f64], y: usize) -> f64 {
        -self.probabilities(x)[y].ln()
    }

    /// Backpropagates `dlogits`; accumulates parameter gradients into
    /// `grads` when given and returns the gradient with respect to the input.
    pub(crate) fn backward(&self, trace: &Trace, dlogits: &[f64], mut grads: Option<&mut Grads>) -> Vec<f64> {
        let mut delta = dlogits.to_vec();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &trace.acts[li];
            if let Some(g) = grads.as_deref_mut() {
                for o in 0..layer.n_out {
                    let d = delta[o];
                    let row = &mut g.w[li][o * layer.n_in..(o + 1) * layer.n_in];
                    for (gw, a) in row.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                    g.b[li][o] += d;
                }
            }
            let mut prev = vec![0.0; layer.n_in];
            for o in 0..layer.n_out {
                let d = delta[o];
                let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            if li > 0 {
                match self.activation {
                    Activation::Tanh => prev.iter_mut().zip(input).for_each(|(p, a)| *p *= 1.0 - a * a),
                    Activation::Relu => prev.iter_mut().zip(input).for_each(|(p, a)| {
                        if *a <= 0.0 {
                            *p = 0.0
                        }
                    }),
                }
            }
            delta = prev;
        }
        delta
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    arch: Vec<usize>,
    activation: Activation,
    weights: Vec<Vec<Vec<Decimal6>>>,
    biases: Vec<Vec<Decimal6>>,
}

/// A trained MLP. Parameters are six-digit decimals; the floating-point
/// network is derived from them, so a model loaded from its file behaves
/// identically to the one that was written.
#[derive(Debug, Clone)]
pub struct Model {
    arch: Architecture,
    weights: Vec<Vec<Vec<Decimal6>>>,
    biases: Vec<Vec<Decimal6>>,
    net: Mlp,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.weights == other.weights && self.biases == other.biases
    }
}

impl Model {
    /// Builds a model from decimal parameters. `weights[l][o][i]` connects
    /// input `i` of layer `l` to output `o`.
    pub fn new(
        arch: Architecture,
        weights: Vec<Vec<Vec<Decimal6>>>,
        biases: Vec<Vec<Decimal6>>,
    ) -> Result<Self, MlError> {
        arch.validate().map_err(|e| MlError::Model(e.to_string()))?;
        let n = arch.layers.len() - 1;
        if weights.len() != n || biases.len() != n {
            return Err(MlError::Model(format!("expected {n} layers of parameters")));
        }
        let mut layers = Vec::with_capacity(n);
        for l in 0..n {
            let (n_in, n_out) = (arch.layers[l], arch.layers[l + 1]);
            if weights[l].len() != n_out || weights[l].iter().any(|r| r.len() != n_in) || biases[l].len() != n_out {
                return Err(MlError::Model(format!("layer {l}: parameter shape does not match {n_in}->{n_out}")));
            }
            layers.push(Dense {
                n_in,
                n_out,
                w: weights[l].iter().flatten().map(|d| d.to_f64()).collect(),
                b: biases[l].iter().map(|d| d.to_f64()).collect(),
            });
        }
        let net = Mlp { layers, activation: arch.activation };
        Ok(Self { arch, weights, biases, net })
    }

    /// All-zero parameters.
    pub fn zeros(arch: Architecture) -> Result<Self, MlError> {
        arch.validate()?;
        let weights = arch.layers.windows(2).map(|w| vec![vec![Decimal6::ZERO; w[0]]; w[1]]).collect();
        let biases = arch.layers[1..].iter().map(|&n| vec![Decimal6::ZERO; n]).collect();
        Self::new(arch, weights, biases)
    }

    /// Rounds a floating-point network to six-digit parameters.
    pub(crate) fn quantize(arch: Architecture, net: &Mlp) -> Result<Self, MlError> {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for layer in &net.layers {
            let rows = layer
                .w
                .chunks(layer.n_in)
                .map(|r| r.iter().map(|&v| Decimal6::from_f64(v)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            weights.push(rows);
            biases.push(layer.b.iter().map(|&v| Decimal6::from_f64(v)).collect::<Result<Vec<_>, _>>()?);
        }
        Self::new(arch, weights, biases)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn weights(&self) -> &[Vec<Vec<Decimal6>>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<Decimal6>] {
        &self.biases
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn to_canonical(&self) -> CanonicalJson {
        canonical_bytes(&ModelFile {
            arch: self.arch.layers.clone(),
            activation: self.arch.activation,
            weights: self.weights.clone(),
            biases: self.biases.clone(),
        })
        .expect("model has no floats")
    }

    pub fn digest(&self) -> Digest {
        self.to_canonical().digest()
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, MlError> {
        let canon = CanonicalJson::parse(bytes)?;
        let file: ModelFile =
            serde_json::from_slice(canon.as_bytes()).map_err(|e| MlError::Model(e.to_string()))?;
        Self::new(Architecture { layers: file.arch, activation: file.activation }, file.weights, file.biases)
    }
}

/// Output of one forward pass. `scores` are softmax probabilities rounded to
/// six digits and `predicted` is their argmax, ties to the lowest index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceRecord {
    pub input: Vec<Decimal6>,
    pub predicted: u32,
    pub scores: Vec<Decimal6>,
}

impl InferenceRecord {
    /// `{"features":[...]}`
    pub fn input_canonical(input: &[Decimal6]) -> CanonicalJson {
        canonicalize(&json!({ "features": input })).expect("decimals serialize as strings")
    }

    /// `{"predicted":k,"scores":[...]}`
    pub fn output_canonical(&self) -> CanonicalJson {
        canonicalize(&json!({ "predicted": self.predicted, "scores": self.scores }))
            .expect("decimals serialize as strings")
    }

    pub fn input_digest(&self) -> Digest {
        Self::input_canonical(&self.input).digest()
    }

    pub fn output_digest(&self) -> Digest {
        self.output_canonical().digest()
    }
}

pub(crate) fn argmax_lowest(scores: &[Decimal6]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn features_f64(input: &[Decimal6]) -> Vec<f64> {
    input.iter().map(|d| d.to_f64()).collect()
}

pub fn predict(m: &Model, input: &[Decimal6]) -> Result<InferenceRecord, MlError> {
    let expected = m.arch.inputs();
    if input.len() != expected {
        return Err(MlError::InputArity { expected, found: input.len() });
    }
    let scores = m
        .net
        .probabilities(&features_f64(input))
        .into_iter()
        .map(Decimal6::from_f64)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(InferenceRecord { input: input.to_vec(), predicted: argmax_lowest(&scores) as u32, scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Decimal6 {
        Decimal6::parse_any(s).unwrap()
    }

    #[test]
    fn zero_model_ties_to_class_zero() {
        let m = Model::zeros(Architecture::mlp(3, &[4], 3, Activation::Tanh)).unwrap();
        let r = predict(&m, &[d("1"), d("-2"), d("0.5")]).unwrap();
        assert_eq!(r.predicted, 0);
        assert!(r.scores.iter().all(|s| *s == r.scores[0]));
        assert_eq!(r.scores[0].to_string(), "0.333333");
        assert_eq!(predict(&m, &[d("1"), d("-2"), d("0.5")]).unwrap(), r);
    }

    #[test]
    fn hand_built_single_layer() {
        // logits = W x + b with W = [[1, 0], [0, 1]], x = (0.2, 0.9)
        // -> logits (0.2, 0.9) -> class 1, p1 = 1 / (1 + e^-0.7) = 0.668188
        let arch = Architecture { layers: vec![2, 2], activation: Activation::Tanh };
        let m = Model::new(
            arch,
            vec![vec![vec![d("1"), d("0")], vec![d("0"), d("1")]]],
            vec![vec![d("0"), d("0")]],
        )
        .unwrap();
        let r = predict(&m, &[d("0.2"), d("0.9")]).unwrap();
        assert_eq!(r.predicted, 1);
        assert_eq!(r.scores[1].to_string(), "0.668188");
        assert_eq!(r.scores[0].to_string(), "0.331812");
    }

    #[test]
    fn arity_mismatch() {
        let m = Model::zeros(Architecture::mlp(2, &[], 2, Activation::Tanh)).unwrap();
        assert!(matches!(predict(&m, &[d("1")]), Err(MlError::InputArity { expected: 2, found: 1 })));
    }

    #[test]
    fn file_round_trip_and_layout() {
        let m = Model::zeros(Architecture::mlp(1, &[], 2, Activation::Relu)).unwrap();
        assert_eq!(
            m.to_canonical().as_str(),
            r#"{"activation":"relu","arch":[1,2],"biases":[["0.000000","0.000000"]],"weights":[[["0.000000"],["0.000000"]]]}"#
        );
        assert_eq!(Model::from_json(m.to_canonical().as_bytes()).unwrap(), m);
        assert!(Model::from_json(br#"{"activation":"relu","arch":[1,2],"biases":[["0.000000"]],"weights":[[["0.000000"],["0.000000"]]]}"#).is_err());
    }

    #[test]
    fn io_serializations() {
        let r = InferenceRecord { input: vec![d("1")], predicted: 1, scores: vec![d("0.25"), d("0.75")] };
        assert_eq!(InferenceRecord::input_canonical(&r.input).as_str(), r#"{"features":["1.000000"]}"#);
        assert_eq!(r.output_canonical().as_str(), r#"{"predicted":1,"scores":["0.250000","0.750000"]}"#);
    }
}
