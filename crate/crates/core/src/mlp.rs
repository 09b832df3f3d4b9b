//! Feedforward regressor: `hidden_sizes.len()` ReLU layers, each followed by
//! inverted dropout, and a scalar linear output.
//!
//! Weight matrices are stored `out × in`, so layer `l` computes
//! `h_l = Dropout(ReLU(W_l · h_{l−1} + b_l))`. Batches are row-major
//! `n × features`; internally every layer is evaluated as one
//! `A_{l−1} · W_lᵀ` product.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Shape};
use crate::numeric::{gemm, xavier_uniform, Matrix, Rng, Trans};

/// Hidden layer widths of the proposed network.
pub const PROPOSED_HIDDEN: [usize; 4] = [64, 1000, 200, 8];
pub const DEFAULT_DROPOUT: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_size: usize,
    pub hidden_sizes: Vec<usize>,
    pub dropout_p: f64,
}

impl MlpConfig {
    /// `[64, 1000, 200, 8]` with dropout 0.2.
    pub fn proposed(input_size: usize) -> Self {
        Self {
            input_size,
            hidden_sizes: PROPOSED_HIDDEN.to_vec(),
            dropout_p: DEFAULT_DROPOUT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 {
            return Err(Error::InvalidConfig("input_size must be >= 1".into()));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer sizes must be >= 1".into()));
        }
        if !(self.dropout_p.is_finite() && (0.0..1.0).contains(&self.dropout_p)) {
            return Err(Error::InvalidConfig(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout_p
            )));
        }
        Ok(())
    }

    /// `[input, hidden..., 1]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden_sizes.len() + 2);
        sizes.push(self.input_size);
        sizes.extend_from_slice(&self.hidden_sizes);
        sizes.push(1);
        sizes
    }
}

/// Weights `W_1..W_L` (`out × in`) and biases `b_1..b_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpParams {
    /// Xavier-uniform weights, zero biases.
    pub fn init(config: &MlpConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let sizes = config.layer_sizes();
        let weights = sizes.windows(2).map(|w| xavier_uniform(w[0], w[1], rng)).collect();
        let biases = sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self { weights, biases })
    }

    pub fn zeros(config: &MlpConfig) -> Self {
        let sizes = config.layer_sizes();
        Self {
            weights: sizes.windows(2).map(|w| Matrix::zeros(w[1], w[0])).collect(),
            biases: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Verifies the shape chain `W_1: h_1×input … W_L: 1×h_{L−1}`.
    pub fn check_shapes(&self, config: &MlpConfig) -> Result<()> {
        let sizes = config.layer_sizes();
        if self.weights.len() != sizes.len() - 1 || self.biases.len() != sizes.len() - 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} layers, found {} weight matrices and {} bias vectors",
                sizes.len() - 1,
                self.weights.len(),
                self.biases.len()
            )));
        }
        for (l, w) in sizes.windows(2).enumerate() {
            let want = Shape(w[1], w[0]);
            if self.weights[l].shape() != want {
                return Err(Error::DimensionMismatch {
                    op: "layer weights",
                    left: self.weights[l].shape(),
                    right: want,
                });
            }
            if self.biases[l].len() != w[1] {
                return Err(Error::LengthMismatch {
                    op: "layer bias",
                    expected: w[1],
                    actual: self.biases[l].len(),
                });
            }
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.as_slice().len()).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }
}

/// How dropout behaves during a forward pass.
pub enum Mode<'a> {
    /// No dropout.
    Eval,
    /// Fresh inverted-dropout masks drawn from the generator.
    Train(&'a mut Rng),
    /// Caller-provided masks, one `n × h_l` multiplier matrix per hidden layer
    /// (entries 0 or `1/(1−p)`). Used to replay a training pass exactly.
    Masked(&'a [Matrix]),
}

/// Intermediate values of a training-mode pass, consumed by backprop.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Matrix,
    /// `Z_l = A_{l−1}·W_lᵀ + b_l` for every layer including the output.
    pub pre_activations: Vec<Matrix>,
    /// Post-dropout hidden activations `A_l`.
    pub activations: Vec<Matrix>,
    /// Dropout multipliers per hidden layer.
    pub masks: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn outputs(&self) -> &[f64] {
        self.pre_activations.last().expect("at least one layer").as_slice()
    }
}

/// Same layout as [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            weights: params.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .flat_map(|w| w.as_slice().iter())
            .chain(self.biases.iter().flatten())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .flat_map(|w| w.as_mut_slice().iter_mut())
            .chain(self.biases.iter_mut().flatten())
    }

    /// L2 norm over every weight and bias gradient.
    pub fn global_norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Network configuration plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub config: MlpConfig,
    pub params: MlpParams,
}

impl Mlp {
    pub fn init(config: MlpConfig, rng: &mut Rng) -> Result<Self> {
        let params = MlpParams::init(&config, rng)?;
        Ok(Self { config, params })
    }

    pub fn from_parts(config: MlpConfig, params: MlpParams) -> Result<Self> {
        config.validate()?;
        params.check_shapes(&config)?;
        Ok(Self { config, params })
    }

    fn n_hidden(&self) -> usize {
        self.config.hidden_sizes.len()
    }

    /// Single-instance forward pass.
    pub fn forward(&self, x: &[f64], mode: Mode<'_>) -> Result<(f64, Option<ForwardTrace>)> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        let input = Matrix::from_raw(1, x.len(), x.to_vec());
        let (out, trace) = self.forward_batch(&input, mode)?;
        Ok((out[0], trace))
    }

    /// Batched forward pass over the rows of `x`. Returns one prediction per
    /// row, plus the trace for `Train` and `Masked` modes.
    pub fn forward_batch(&self, x: &Matrix, mode: Mode<'_>) -> Result<(Vec<f64>, Option<ForwardTrace>)> {
        if x.cols() != self.config.input_size {
            return Err(Error::DimensionMismatch {
                op: "forward input",
                left: x.shape(),
                right: Shape(x.rows(), self.config.input_size),
            });
        }
        let n = x.rows();
        let p = self.config.dropout_p;
        let keep_scale = 1.0 / (1.0 - p);

        let mut rng = None;
        let mut given = None;
        match mode {
            Mode::Eval => {}
            Mode::Train(r) => rng = Some(r),
            Mode::Masked(m) => {
                if m.len() != self.n_hidden() {
                    return Err(Error::LengthMismatch {
                        op: "dropout masks",
                        expected: self.n_hidden(),
                        actual: m.len(),
                    });
                }
                for (mask, &h) in m.iter().zip(&self.config.hidden_sizes) {
                    if mask.shape() != Shape(n, h) {
                        return Err(Error::DimensionMismatch {
                            op: "dropout mask",
                            left: mask.shape(),
                            right: Shape(n, h),
                        });
                    }
                }
                given = Some(m);
            }
        }
        let tracing = rng.is_some() || given.is_some();

        let mut pre_activations = Vec::new();
        let mut activations: Vec<Matrix> = Vec::new();
        let mut masks = Vec::new();
        let mut current: Option<Matrix> = None;

        for (l, (w, b)) in self.params.weights.iter().zip(&self.params.biases).enumerate() {
            let prev = current.as_ref().unwrap_or(x);
            let mut z = Matrix::zeros(n, w.rows());
            gemm(1.0, prev, Trans::No, w, Trans::Yes, 0.0, &mut z);
            for r in 0..n {
                z.row_mut(r).iter_mut().zip(b).for_each(|(v, bi)| *v += bi);
            }
            if l == self.n_hidden() {
                let out = z.as_slice().to_vec();
                if tracing {
                    pre_activations.push(z);
                    let trace = ForwardTrace {
                        input: x.clone(),
                        pre_activations,
                        activations,
                        masks,
                    };
                    return Ok((out, Some(trace)));
                }
                return Ok((out, None));
            }

            let mut a = z.clone();
            a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            if tracing {
                let mask = match (&mut rng, given) {
                    (Some(r), _) => {
                        let data = (0..n * w.rows())
                            .map(|_| if p > 0.0 && r.bernoulli(p) { 0.0 } else { keep_scale })
                            .collect();
                        Matrix::from_raw(n, w.rows(), data)
                    }
                    (None, Some(m)) => m[l].clone(),
                    (None, None) => unreachable!(),
                };
                a.as_mut_slice()
                    .iter_mut()
                    .zip(mask.as_slice())
                    .for_each(|(v, m)| *v *= m);
                pre_activations.push(z);
                masks.push(mask);
                activations.push(a.clone());
            }
            current = Some(a);
        }
        unreachable!("output layer returns")
    }

    /// Eval-mode predictions for every row.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.forward_batch(x, Mode::Eval)?.0)
    }

    /// Exact gradient of the batch mean squared error
    /// `(1/n)Σ(ŷᵢ − yᵢ)²` under the trace's dropout masks. Returns the
    /// gradients and the loss.
    pub fn backward(&self, trace: &ForwardTrace, targets: &[f64]) -> Result<(Gradients, f64)> {
        let n = trace.input.rows();
        if n == 0 {
            return Err(Error::InvalidInput("backward needs a nonempty batch".into()));
        }
        if targets.len() != n {
            return Err(Error::LengthMismatch {
                op: "backward targets",
                expected: n,
                actual: targets.len(),
            });
        }
        let layers = self.params.weights.len();
        if trace.pre_activations.len() != layers || trace.masks.len() != layers - 1 {
            return Err(Error::InvalidInput("trace does not match network depth".into()));
        }

        let outputs = trace.outputs();
        let mut loss = 0.0;
        let mut delta_data = Vec::with_capacity(n);
        for (&yhat, &y) in outputs.iter().zip(targets) {
            let r = yhat - y;
            loss += r * r;
            delta_data.push(2.0 * r / n as f64);
        }
        loss /= n as f64;
        let mut delta = Matrix::from_raw(n, 1, delta_data);

        let mut grads = Gradients::zeros_like(&self.params);
        for l in (0..layers).rev() {
            let prev = if l == 0 { &trace.input } else { &trace.activations[l - 1] };
            gemm(1.0, &delta, Trans::Yes, prev, Trans::No, 0.0, &mut grads.weights[l]);
            let db = &mut grads.biases[l];
            for r in 0..n {
                db.iter_mut().zip(delta.row(r)).for_each(|(g, d)| *g += d);
            }
            if l == 0 {
                break;
            }
            let w = &self.params.weights[l];
            let mut back = Matrix::zeros(n, w.cols());
            gemm(1.0, &delta, Trans::No, w, Trans::No, 0.0, &mut back);
            let z = trace.pre_activations[l - 1].as_slice();
            let mask = trace.masks[l - 1].as_slice();
            back.as_mut_slice()
                .iter_mut()
                .zip(z.iter().zip(mask))
                .for_each(|(d, (&zi, &mi))| *d = if zi > 0.0 { *d * mi } else { 0.0 });
            delta = back;
        }
        Ok((grads, loss))
    }
}
