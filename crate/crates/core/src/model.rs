//! Network definition: random hidden-layer parameters, activations, hidden
//! matrix computation, prediction, and the mean squared error metric.
//!
//! Input weights and biases are drawn uniformly from `[-1, 1]` with a
//! ChaCha8 generator, so equal seeds give bit-identical parameters on every
//! platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Entry-wise activation applied to the hidden pre-activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// `1 / (1 + e^{-x})`
    Sigmoid,
    /// `tanh(x)`
    Tanh,
    /// `e^{-x^2}`
    Gaussian,
    /// `x`
    Linear,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
            Activation::Gaussian => (-x * x).exp(),
            Activation::Linear => x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Gaussian => "gaussian",
            Activation::Linear => "linear",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "gaussian" => Ok(Activation::Gaussian),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::InvalidArgument(format!(
                "unknown activation '{}'",
                other
            ))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Single-hidden-layer network with fixed random input weights and biases;
/// only the output weights are fitted.
#[derive(Debug, Clone)]
pub struct ElmModel {
    /// Input weights, one row per hidden node (`hidden x inputs`).
    pub input_weights: Matrix,
    /// Hidden-node biases, one per hidden node.
    pub biases: Vec<f64>,
    pub activation: Activation,
    /// Fitted output weights (`outputs x hidden`); `None` before training.
    pub output_weights: Option<Matrix>,
}

impl ElmModel {
    /// Draws `hidden` nodes over `inputs` features from the deterministic
    /// generator seeded by `seed`: all input-weight entries row-major first,
    /// then the biases, each uniform on `[-1, 1]`.
    pub fn random(hidden: usize, inputs: usize, seed: u64, activation: Activation) -> Result<Self> {
        if hidden == 0 || inputs == 0 {
            return Err(Error::InvalidArgument(
                "hidden and input counts must be at least 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_weights =
            Matrix::from_fn(hidden, inputs, |_, _| rng.gen_range(-1.0..=1.0));
        let biases = (0..hidden).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Ok(ElmModel {
            input_weights,
            biases,
            activation,
            output_weights: None,
        })
    }

    pub fn hidden_count(&self) -> usize {
        self.input_weights.rows()
    }

    pub fn input_count(&self) -> usize {
        self.input_weights.cols()
    }

    /// Hidden-node responses for every sample: entry `(i, k)` is the
    /// activation of node `i` on sample `k`.
    pub fn compute_hidden(&self, x: &Matrix) -> Result<Matrix> {
        compute_hidden_rows(&self.input_weights, &self.biases, self.activation, x)
    }

    /// Network output `W * H` for a precomputed hidden matrix.
    pub fn predict(&self, hidden: &Matrix) -> Result<Matrix> {
        let w = self
            .output_weights
            .as_ref()
            .ok_or_else(|| Error::State("model has no trained output weights".into()))?;
        w.matmul(hidden)
    }
}

/// Hidden responses for an arbitrary set of node parameters; used both for
/// whole models and for candidate node blocks.
pub fn compute_hidden_rows(
    input_weights: &Matrix,
    biases: &[f64],
    activation: Activation,
    x: &Matrix,
) -> Result<Matrix> {
    if input_weights.rows() != biases.len() {
        return Err(Error::Shape(format!(
            "{} weight rows but {} biases",
            input_weights.rows(),
            biases.len()
        )));
    }
    if input_weights.cols() != x.rows() {
        return Err(Error::Shape(format!(
            "weights expect {} inputs, data has {}",
            input_weights.cols(),
            x.rows()
        )));
    }
    let mut h = input_weights.matmul(x)?;
    for i in 0..h.rows() {
        for k in 0..h.cols() {
            h[(i, k)] = activation.apply(h[(i, k)] + biases[i]);
        }
    }
    Ok(h)
}

/// Training data with samples as columns: `x` is `inputs x samples`,
/// `y` is `outputs x samples`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.cols() != y.cols() || x.cols() == 0 {
            return Err(Error::Shape(format!(
                "inputs have {} samples, targets have {}",
                x.cols(),
                y.cols()
            )));
        }
        Ok(Dataset { x, y })
    }

    pub fn sample_count(&self) -> usize {
        self.x.cols()
    }
}

/// Candidate hidden nodes: the new hidden-matrix rows together with the
/// parameters that generated them.
#[derive(Debug, Clone)]
pub struct NodeBlock {
    /// New hidden rows (`count x samples`).
    pub hidden_rows: Matrix,
    /// Input weights of the new nodes (`count x inputs`).
    pub input_weights: Matrix,
    /// Biases of the new nodes.
    pub biases: Vec<f64>,
}

impl NodeBlock {
    /// Draws `count` fresh nodes and evaluates them on `x`. Node `j` uses the
    /// generator seeded by `seed + j`, so drawing a block of `count` nodes
    /// produces exactly the same nodes as `count` single draws.
    pub fn random(
        count: usize,
        seed: u64,
        activation: Activation,
        x: &Matrix,
    ) -> Result<NodeBlock> {
        if count == 0 {
            return Err(Error::InvalidArgument("node count must be at least 1".into()));
        }
        let inputs = x.rows();
        let mut weights = Matrix::zeros(count, inputs);
        let mut biases = vec![0.0; count];
        for j in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(j as u64));
            for c in 0..inputs {
                weights[(j, c)] = rng.gen_range(-1.0..=1.0);
            }
            biases[j] = rng.gen_range(-1.0..=1.0);
        }
        let hidden_rows = compute_hidden_rows(&weights, &biases, activation, x)?;
        Ok(NodeBlock {
            hidden_rows,
            input_weights: weights,
            biases,
        })
    }

    pub fn count(&self) -> usize {
        self.hidden_rows.rows()
    }
}

/// Mean squared error `||y - z||_F^2 / samples`.
pub fn mse(y: &Matrix, z: &Matrix) -> Result<f64> {
    if y.rows() != z.rows() || y.cols() != z.cols() {
        return Err(Error::Shape(format!(
            "mse on {}x{} and {}x{}",
            y.rows(),
            y.cols(),
            z.rows(),
            z.cols()
        )));
    }
    let diff = y.sub(z)?;
    let sum_sq: f64 = diff.data().iter().map(|v| v * v).sum();
    Ok(sum_sq / y.cols() as f64)
}
