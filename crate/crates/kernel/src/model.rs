//! Networks, variable layout, exact evaluation and the problem file format.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::linear::SparseRow;
use crate::rational::{ParseRationalError, Rational};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("value error: {0}")]
    Value(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    /// Row `j` holds the weights feeding neuron `j` of this layer.
    pub weights: Vec<Vec<Rational>>,
    pub bias: Vec<Rational>,
    pub activation: Activation,
}

impl Layer {
    pub fn width(&self) -> usize {
        self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    layers: Vec<Layer>,
    input_dim: usize,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::Dimension("network has no layers".into()));
        }
        let mut prev = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.bias.len() {
                return Err(ModelError::Dimension(format!(
                    "layer {i}: {} weight rows but {} biases",
                    layer.weights.len(),
                    layer.bias.len()
                )));
            }
            if layer.bias.is_empty() {
                return Err(ModelError::Dimension(format!("layer {i} has no neurons")));
            }
            if let Some(j) = layer.weights.iter().position(|r| r.len() != prev) {
                return Err(ModelError::Dimension(format!(
                    "layer {i}, neuron {j}: expected {prev} weights, found {}",
                    layer.weights[j].len()
                )));
            }
            if layer.activation == Activation::Identity && i + 1 != layers.len() {
                return Err(ModelError::Dimension(format!(
                    "layer {i}: identity activation is only allowed on the output layer"
                )));
            }
            prev = layer.width();
        }
        Ok(Network { layers, input_dim })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, Layer::width)
    }

    /// All ReLU units in (layer, neuron) order.
    pub fn relu_units(&self) -> Vec<UnitId> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.activation == Activation::Relu)
            .flat_map(|(i, l)| (0..l.width()).map(move |j| UnitId::new(i, j)))
            .collect()
    }

    pub fn is_relu_unit(&self, unit: UnitId) -> bool {
        self.layers.get(unit.layer).is_some_and(|l| l.activation == Activation::Relu && unit.neuron < l.width())
    }
}

/// A ReLU unit, addressed by 0-based layer and neuron index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnitId {
    pub layer: usize,
    pub neuron: usize,
}

impl UnitId {
    pub fn new(layer: usize, neuron: usize) -> Self {
        UnitId { layer, neuron }
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.layer, self.neuron)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<Rational>,
    pub upper: Vec<Rational>,
}

impl Region {
    pub fn new(lower: Vec<Rational>, upper: Vec<Rational>) -> Result<Self, ModelError> {
        if lower.len() != upper.len() {
            return Err(ModelError::Dimension(format!(
                "input_lower has {} entries, input_upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(k) = lower.iter().zip(&upper).position(|(l, u)| l > u) {
            return Err(ModelError::Value(format!("empty box: lower[{k}] = {} > upper[{k}] = {}", lower[k], upper[k])));
        }
        Ok(Region { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains_point(&self, x: &[Rational]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| l <= v && v <= u)
    }

    /// True when `self ⊆ other`.
    pub fn is_within(&self, other: &Region) -> bool {
        let n = self.dim();
        self.upper.len() == n
            && other.lower.len() == n
            && other.upper.len() == n
            && (0..n).all(|k| other.lower[k] <= self.lower[k] && self.upper[k] <= other.upper[k])
    }

    pub fn width(&self, k: usize) -> Rational {
        &self.upper[k] - &self.lower[k]
    }

    /// Splits dimension `dim` at `at`, returning (lower half, upper half).
    pub fn bisect_at(&self, dim: usize, at: &Rational) -> (Region, Region) {
        let mut lo = self.clone();
        let mut hi = self.clone();
        lo.upper[dim] = at.clone();
        hi.lower[dim] = at.clone();
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyProperty {
    /// Sparse coefficients over output indices.
    pub margin: SparseRow,
    pub threshold: Rational,
    pub epsilon: Rational,
}

impl SafetyProperty {
    /// The negated query is `m(y) ≥ threshold + epsilon`.
    pub fn violation_level(&self) -> Rational {
        &self.threshold + &self.epsilon
    }

    pub fn margin_value(&self, outputs: &[Rational]) -> Rational {
        self.margin.dot(outputs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub network: Network,
    pub region: Region,
    pub property: SafetyProperty,
}

// On-disk shape. Every number is a string so nothing passes through floating point.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    weights: Vec<Vec<Vec<String>>>,
    biases: Vec<Vec<String>>,
    activations: Vec<Activation>,
    input_lower: Vec<String>,
    input_upper: Vec<String>,
    margin: BTreeMap<String, String>,
    threshold: String,
    epsilon: String,
}

fn rat(s: &str, what: &str) -> Result<Rational, ModelError> {
    s.parse().map_err(|e: ParseRationalError| match e {
        ParseRationalError::ZeroDenominator(_) => ModelError::Value(format!("{what}: {e}")),
        _ => ModelError::Parse(format!("{what}: {e}")),
    })
}

fn rats(v: &[String], what: &str) -> Result<Vec<Rational>, ModelError> {
    v.iter().enumerate().map(|(k, s)| rat(s, &format!("{what}[{k}]"))).collect()
}

impl Problem {
    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let raw: ProblemFile = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        if raw.weights.len() != raw.biases.len() || raw.weights.len() != raw.activations.len() {
            return Err(ModelError::Dimension(format!(
                "{} weight matrices, {} bias vectors, {} activations",
                raw.weights.len(),
                raw.biases.len(),
                raw.activations.len()
            )));
        }
        let lower = rats(&raw.input_lower, "input_lower")?;
        let upper = rats(&raw.input_upper, "input_upper")?;
        let mut layers = Vec::with_capacity(raw.weights.len());
        for (i, ((w, b), act)) in raw.weights.iter().zip(&raw.biases).zip(&raw.activations).enumerate() {
            let weights = w
                .iter()
                .enumerate()
                .map(|(j, row)| rats(row, &format!("weights[{i}][{j}]")))
                .collect::<Result<Vec<_>, _>>()?;
            layers.push(Layer { weights, bias: rats(b, &format!("biases[{i}]"))?, activation: *act });
        }
        let network = Network::new(lower.len(), layers)?;
        let region = Region::new(lower, upper)?;
        let mut entries = Vec::with_capacity(raw.margin.len());
        for (k, v) in &raw.margin {
            let idx: usize =
                k.parse().map_err(|_| ModelError::Parse(format!("margin key `{k}` is not an output index")))?;
            if idx >= network.output_dim() {
                return Err(ModelError::Dimension(format!(
                    "margin references output {idx}, network has {} outputs",
                    network.output_dim()
                )));
            }
            entries.push((idx, rat(v, &format!("margin[{k}]"))?));
        }
        let epsilon = rat(&raw.epsilon, "epsilon")?;
        if epsilon.is_negative() {
            return Err(ModelError::Value(format!("epsilon must be nonnegative, got {epsilon}")));
        }
        let property = SafetyProperty {
            margin: SparseRow::from_entries(entries),
            threshold: rat(&raw.threshold, "threshold")?,
            epsilon,
        };
        Ok(Problem { network, region, property })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    fn to_file(&self) -> ProblemFile {
        let strs = |v: &[Rational]| v.iter().map(Rational::to_fraction_string).collect::<Vec<_>>();
        ProblemFile {
            weights: self.network.layers().iter().map(|l| l.weights.iter().map(|r| strs(r)).collect()).collect(),
            biases: self.network.layers().iter().map(|l| strs(&l.bias)).collect(),
            activations: self.network.layers().iter().map(|l| l.activation).collect(),
            input_lower: strs(&self.region.lower),
            input_upper: strs(&self.region.upper),
            margin: self.property.margin.iter().map(|(i, c)| (i.to_string(), c.to_fraction_string())).collect(),
            threshold: self.property.threshold.to_fraction_string(),
            epsilon: self.property.epsilon.to_fraction_string(),
        }
    }

    /// Compact JSON with reduced `p/q` literals; independent of the input file's formatting.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.to_file()).expect("problem serialization cannot fail")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("problem serialization cannot fail")
    }

    /// Hex SHA-256 of [`Problem::canonical_bytes`].
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }

    pub fn layout(&self) -> VariableLayout {
        VariableLayout::new(&self.network).with_margin_aux()
    }
}

/// Index assignment for the global variable vector: inputs, then per layer the
/// pre-activations followed by the post-activations, then the margin auxiliary.
/// Identity layers have no post-activation block; their outputs alias `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableLayout {
    input_dim: usize,
    s_offset: Vec<usize>,
    z_offset: Vec<Option<usize>>,
    widths: Vec<usize>,
    aux: Option<usize>,
    total: usize,
}

impl VariableLayout {
    pub fn new(net: &Network) -> Self {
        let mut next = net.input_dim();
        let mut s_offset = Vec::new();
        let mut z_offset = Vec::new();
        let mut widths = Vec::new();
        for layer in net.layers() {
            s_offset.push(next);
            next += layer.width();
            if layer.activation == Activation::Relu {
                z_offset.push(Some(next));
                next += layer.width();
            } else {
                z_offset.push(None);
            }
            widths.push(layer.width());
        }
        VariableLayout { input_dim: net.input_dim(), s_offset, z_offset, widths, aux: None, total: next }
    }

    pub fn with_margin_aux(mut self) -> Self {
        if self.aux.is_none() {
            self.aux = Some(self.total);
            self.total += 1;
        }
        self
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len()
    }

    pub fn width(&self, layer: usize) -> usize {
        self.widths[layer]
    }

    pub fn x(&self, k: usize) -> usize {
        debug_assert!(k < self.input_dim);
        k
    }

    pub fn s(&self, layer: usize, neuron: usize) -> usize {
        self.s_offset[layer] + neuron
    }

    /// Post-activation index; identity layers alias the pre-activation.
    pub fn z(&self, layer: usize, neuron: usize) -> usize {
        match self.z_offset[layer] {
            Some(o) => o + neuron,
            None => self.s(layer, neuron),
        }
    }

    /// Index of the value feeding layer `layer`, input `k`.
    pub fn layer_input(&self, layer: usize, k: usize) -> usize {
        if layer == 0 {
            self.x(k)
        } else {
            self.z(layer - 1, k)
        }
    }

    pub fn output(&self, o: usize) -> usize {
        self.z(self.widths.len() - 1, o)
    }

    pub fn aux(&self) -> Option<usize> {
        self.aux
    }

    pub fn unit_s(&self, unit: UnitId) -> usize {
        self.s(unit.layer, unit.neuron)
    }

    pub fn unit_z(&self, unit: UnitId) -> usize {
        self.z(unit.layer, unit.neuron)
    }

    /// Human-readable name of a variable index.
    pub fn name(&self, index: usize) -> String {
        if index < self.input_dim {
            return format!("x{index}");
        }
        if Some(index) == self.aux {
            return "aux".into();
        }
        for (i, &o) in self.s_offset.iter().enumerate() {
            if (o..o + self.widths[i]).contains(&index) {
                return format!("s{i}_{}", index - o);
            }
            if let Some(zo) = self.z_offset[i] {
                if (zo..zo + self.widths[i]).contains(&index) {
                    return format!("z{i}_{}", index - zo);
                }
            }
        }
        format!("v{index}")
    }
}

/// Exact values of every layer for one input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub input: Vec<Rational>,
    pub pre: Vec<Vec<Rational>>,
    pub post: Vec<Vec<Rational>>,
}

impl Trace {
    pub fn outputs(&self) -> &[Rational] {
        self.post.last().map_or(&self.input[..], |v| &v[..])
    }

    /// Full variable vector under `layout` (the auxiliary, if any, holds the margin value).
    pub fn to_vector(&self, layout: &VariableLayout, property: Option<&SafetyProperty>) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); layout.total()];
        for (k, x) in self.input.iter().enumerate() {
            v[layout.x(k)] = x.clone();
        }
        for (i, (s, z)) in self.pre.iter().zip(&self.post).enumerate() {
            for j in 0..s.len() {
                v[layout.s(i, j)] = s[j].clone();
                v[layout.z(i, j)] = z[j].clone();
            }
        }
        if let (Some(a), Some(p)) = (layout.aux(), property) {
            v[a] = p.margin_value(self.outputs());
        }
        v
    }
}

pub fn forward_eval(net: &Network, x: &[Rational]) -> Result<Trace, ModelError> {
    if x.len() != net.input_dim() {
        return Err(ModelError::Dimension(format!(
            "input has {} entries, network expects {}",
            x.len(),
            net.input_dim()
        )));
    }
    let mut pre = Vec::with_capacity(net.layers().len());
    let mut post: Vec<Vec<Rational>> = Vec::with_capacity(net.layers().len());
    for layer in net.layers() {
        let input = post.last().map_or(x, |v| &v[..]);
        let s: Vec<Rational> = layer
            .weights
            .iter()
            .zip(&layer.bias)
            .map(|(row, b)| row.iter().zip(input).fold(b.clone(), |acc, (w, v)| acc + w * v))
            .collect();
        let z = match layer.activation {
            Activation::Relu => s.iter().map(|v| v.clone().max(Rational::zero())).collect(),
            Activation::Identity => s.clone(),
        };
        pre.push(s);
        post.push(z);
    }
    Ok(Trace { input: x.to_vec(), pre, post })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WitnessVerdict {
    Accepted { margin: Rational },
    Rejected(WitnessRejection),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WitnessRejection {
    Dimension,
    OutsideRegion { dim: usize },
    MarginTooSmall { margin: Rational, required: Rational },
}

impl WitnessVerdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, WitnessVerdict::Accepted { .. })
    }
}

/// Exact counterexample check: `x ∈ R` and `m(N(x)) ≥ threshold + ε`.
pub fn validate_witness(problem: &Problem, x: &[Rational]) -> WitnessVerdict {
    if x.len() != problem.network.input_dim() {
        return WitnessVerdict::Rejected(WitnessRejection::Dimension);
    }
    let region = &problem.region;
    if let Some(dim) = (0..x.len()).find(|&k| x[k] < region.lower[k] || x[k] > region.upper[k]) {
        return WitnessVerdict::Rejected(WitnessRejection::OutsideRegion { dim });
    }
    let trace = forward_eval(&problem.network, x).expect("dimension checked above");
    let margin = problem.property.margin_value(trace.outputs());
    let required = problem.property.violation_level();
    if margin >= required {
        WitnessVerdict::Accepted { margin }
    } else {
        WitnessVerdict::Rejected(WitnessRejection::MarginTooSmall { margin, required })
    }
}

/// Per-layer pre-activation bounds `(lower, upper)`.
pub type LayerBounds = Vec<Vec<(Rational, Rational)>>;

/// Exact interval arithmetic through the network over a box.
pub fn interval_bounds(net: &Network, region: &Region) -> LayerBounds {
    let mut out: LayerBounds = Vec::with_capacity(net.layers().len());
    let mut lo: Vec<Rational> = region.lower.clone();
    let mut hi: Vec<Rational> = region.upper.clone();
    for layer in net.layers() {
        let mut bounds = Vec::with_capacity(layer.width());
        for (row, b) in layer.weights.iter().zip(&layer.bias) {
            let mut l = b.clone();
            let mut u = b.clone();
            for (k, w) in row.iter().enumerate() {
                if w.is_positive() {
                    l += &(w * &lo[k]);
                    u += &(w * &hi[k]);
                } else if w.is_negative() {
                    l += &(w * &hi[k]);
                    u += &(w * &lo[k]);
                }
            }
            bounds.push((l, u));
        }
        match layer.activation {
            Activation::Relu => {
                lo = bounds.iter().map(|(l, _)| l.clone().max(Rational::zero())).collect();
                hi = bounds.iter().map(|(_, u)| u.clone().max(Rational::zero())).collect();
            }
            Activation::Identity => {
                lo = bounds.iter().map(|(l, _)| l.clone()).collect();
                hi = bounds.iter().map(|(_, u)| u.clone()).collect();
            }
        }
        out.push(bounds);
    }
    out
}

#[cfg(test)]
pub(crate) mod fixtures {
    pub const WORKED: &str = r#"{
        "weights": [[["2"], ["-1"]], [["1", "-1"]]],
        "biases": [["-1", "1/2"], ["0"]],
        "activations": ["relu", "identity"],
        "input_lower": ["0"],
        "input_upper": ["1"],
        "margin": {"0": "1"},
        "threshold": "1",
        "epsilon": "1/10"
    }"#;
}
