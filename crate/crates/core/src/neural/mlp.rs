use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fully connected layer `y = W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense { w: DMatrix::zeros(output, input), b: DVector::zeros(output) }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }
}

/// Hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

/// MLP with `tanh` hidden layers and a linear output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Intermediate activations kept for backpropagation: `inputs[l]` is the
/// input of layer `l`; the last entry is the network output.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub activations: Vec<DVector<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &DVector<f64> {
        self.activations.last().expect("trace holds the input")
    }
}

impl Mlp {
    /// `input → hidden` repeated `depth` times `→ output`, all zeros.
    pub fn zeros(input: usize, hidden: usize, depth: usize, output: usize) -> Self {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat_n(hidden, depth));
        dims.push(output);
        Mlp { layers: dims.windows(2).map(|d| Dense::zeros(d[0], d[1])).collect() }
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier<R: Rng + ?Sized>(input: usize, hidden: usize, depth: usize, output: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(input, hidden, depth, output);
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.input_dim() + layer.output_dim()) as f64).sqrt();
            layer.w.iter_mut().for_each(|v| *v = rng.random_range(-limit..=limit));
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").output_dim()
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Multiply-accumulates of one forward pass.
    pub fn forward_macs(&self) -> u64 {
        self.layers.iter().map(|l| l.w.len() as u64).sum()
    }

    pub fn forward(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut a = u.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            a = &layer.w * a + &layer.b;
            if i < last {
                a.apply(|v| *v = v.tanh());
            }
        }
        a
    }

    pub fn forward_trace(&self, u: &DVector<f64>) -> ForwardTrace {
        let mut activations = vec![u.clone()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut a = &layer.w * activations.last().expect("non-empty") + &layer.b;
            if i < last {
                a.apply(|v| *v = v.tanh());
            }
            activations.push(a);
        }
        ForwardTrace { activations }
    }

    /// Backpropagates `d loss / d output`; returns `d loss / d input` and,
    /// when requested, parameter gradients shaped like the layers.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        grad_out: &DVector<f64>,
        want_params: bool,
    ) -> (DVector<f64>, Option<Vec<Dense>>) {
        let mut delta = grad_out.clone();
        let mut grads = want_params.then(Vec::new);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if i < last {
                let a = &trace.activations[i + 1];
                delta.zip_apply(a, |d, a| *d *= 1.0 - a * a);
            }
            if let Some(g) = grads.as_mut() {
                g.push(Dense { w: &delta * trace.activations[i].transpose(), b: delta.clone() });
            }
            delta = layer.w.transpose() * &delta;
        }
        if let Some(g) = grads.as_mut() {
            g.reverse();
        }
        (delta, grads)
    }

    /// Parameters flattened layer by layer: `W` row-major, then `b`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            for r in 0..l.w.nrows() {
                out.extend(l.w.row(r).iter());
            }
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "parameter count mismatch");
        let mut at = 0;
        for l in &mut self.layers {
            let (rows, cols) = l.w.shape();
            for r in 0..rows {
                for c in 0..cols {
                    l.w[(r, c)] = flat[at];
                    at += 1;
                }
            }
            for v in l.b.iter_mut() {
                *v = flat[at];
                at += 1;
            }
        }
    }
}

/// Flattens parameter gradients in [`Mlp::params`] order.
pub fn flatten_grads(grads: &[Dense]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in grads {
        for r in 0..l.w.nrows() {
            out.extend(l.w.row(r).iter());
        }
        out.extend(l.b.iter());
    }
    out
}
