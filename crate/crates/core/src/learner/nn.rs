//! Dense ReLU networks whose weights live in a shared flat parameter vector.
//!
//! Weights are stored row-major as `in × out`, so a batch `X (B × in)` maps to
//! `X W + b`. All hidden layers use ReLU; the output layer is linear.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseSlot {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: usize,
    pub bias: usize,
}

impl DenseSlot {
    pub fn len(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }

    pub fn weights<'a>(&self, params: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape(
            (self.inputs, self.outputs),
            &params[self.weight..self.weight + self.inputs * self.outputs],
        )
        .expect("layout in bounds")
    }

    pub fn biases<'a>(&self, params: &'a [f64]) -> ArrayView1<'a, f64> {
        ArrayView1::from(&params[self.bias..self.bias + self.outputs])
    }

    fn weights_mut<'a>(&self, params: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        ArrayViewMut2::from_shape(
            (self.inputs, self.outputs),
            &mut params[self.weight..self.weight + self.inputs * self.outputs],
        )
        .expect("layout in bounds")
    }

    fn biases_mut<'a>(&self, params: &'a mut [f64]) -> ArrayViewMut1<'a, f64> {
        ArrayViewMut1::from(&mut params[self.bias..self.bias + self.outputs])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<DenseSlot>,
}

/// Post-activation outputs of every layer, input first.
pub struct Activations {
    pub layers: Vec<Array2<f64>>,
}

impl Activations {
    pub fn output(&self) -> &Array2<f64> {
        self.layers.last().expect("at least the input")
    }
}

impl Mlp {
    /// Lays out `sizes[0] → … → sizes[n]` starting at `offset`.
    pub fn new(sizes: &[usize], offset: usize) -> Self {
        let mut at = offset;
        let layers = sizes
            .windows(2)
            .map(|w| {
                let slot = DenseSlot {
                    inputs: w[0],
                    outputs: w[1],
                    weight: at,
                    bias: at + w[0] * w[1],
                };
                at += slot.len();
                slot
            })
            .collect();
        Self { layers }
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(DenseSlot::len).sum()
    }

    pub fn end(&self) -> usize {
        self.layers.last().map(|l| l.bias + l.outputs).unwrap_or(0)
    }

    pub fn forward(&self, params: &[f64], input: ArrayView2<f64>) -> Activations {
        let mut layers = Vec::with_capacity(self.layers.len() + 1);
        layers.push(input.to_owned());
        let last = self.layers.len() - 1;
        for (k, slot) in self.layers.iter().enumerate() {
            let x = layers.last().expect("input pushed");
            let mut z = x.dot(&slot.weights(params));
            z += &slot.biases(params);
            if k != last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            layers.push(z);
        }
        Activations { layers }
    }

    /// Accumulates `∂L/∂params` into `grad` given `∂L/∂output`.
    pub fn backward(&self, params: &[f64], acts: &Activations, d_output: Array2<f64>, grad: &mut [f64]) {
        let mut dz = d_output;
        for k in (0..self.layers.len()).rev() {
            let slot = &self.layers[k];
            let a_prev = &acts.layers[k];
            let dw = a_prev.t().dot(&dz);
            slot.weights_mut(grad).scaled_add(1.0, &dw);
            slot.biases_mut(grad).scaled_add(1.0, &dz.sum_axis(Axis(0)));
            if k == 0 {
                break;
            }
            let mut da = dz.dot(&slot.weights(params).t());
            // a_prev is a ReLU output
            ndarray::Zip::from(&mut da).and(a_prev).for_each(|d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            dz = da;
        }
    }

    /// Orthogonal weights scaled by `gains[k]` per layer, zero biases.
    pub fn init_orthogonal<R: Rng + ?Sized>(&self, params: &mut [f64], gains: &[f64], rng: &mut R) {
        for (slot, &gain) in self.layers.iter().zip(gains) {
            let (r, c) = (slot.inputs, slot.outputs);
            let (big, small) = (r.max(c), r.min(c));
            let gauss = DMatrix::<f64>::from_fn(big, small, |_, _| rng.sample(StandardNormal));
            let qr = gauss.qr();
            let mut q = qr.q();
            let rr = qr.r();
            for j in 0..small {
                if rr[(j, j)] < 0.0 {
                    q.column_mut(j).neg_mut();
                }
            }
            let mut w = slot.weights_mut(params);
            for i in 0..r {
                for j in 0..c {
                    w[(i, j)] = gain * if r >= c { q[(i, j)] } else { q[(j, i)] };
                }
            }
            slot.biases_mut(params).fill(0.0);
        }
    }
}

/// Single-sample forward pass.
pub fn forward_one(mlp: &Mlp, params: &[f64], input: &[f64]) -> Array1<f64> {
    let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
    mlp.forward(params, x).output().row(0).to_owned()
}
