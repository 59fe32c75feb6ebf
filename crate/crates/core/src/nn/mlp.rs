use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Fully connected network with ReLU after every layer but the last.
///
/// All parameters live in one flat buffer, layer by layer: the `in x out`
/// weight matrix (row-major) followed by the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    params: Vec<T>,
}

/// Activations recorded by [`Mlp::forward_recorded`]: the input of every
/// layer, batch-major.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    inputs: Vec<Vec<T>>,
    batch: usize,
}

impl<T> Tape<T> {
    pub fn new() -> Self {
        Self { inputs: Vec::new(), batch: 0 }
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Input of every layer; entries after the first are ReLU outputs.
    pub fn layer_inputs(&self) -> &[Vec<T>] {
        &self.inputs
    }
}

fn layer_len(fan_in: usize, fan_out: usize) -> usize {
    fan_in * fan_out + fan_out
}

impl<T: Scalar> Mlp<T> {
    /// All-zero parameters.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let len = sizes.windows(2).map(|w| layer_len(w[0], w[1])).sum();
        Self { sizes: sizes.to_vec(), params: vec![T::zero(); len] }
    }

    /// Uniform in `±1/sqrt(fan_in)`; the last layer is further scaled by
    /// `final_scale`.
    pub fn init<R: Rng>(sizes: &[usize], final_scale: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let layers = net.layers();
        let mut off = 0;
        for l in 0..layers {
            let (fi, fo) = (sizes[l], sizes[l + 1]);
            let mut bound = 1.0 / (fi as f64).sqrt();
            if l + 1 == layers {
                bound *= final_scale;
            }
            for p in &mut net.params[off..off + layer_len(fi, fo)] {
                *p = T::lit(rng.gen_range(-bound..=bound));
            }
            off += layer_len(fi, fo);
        }
        net
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Weight and bias slices of layer `l`.
    pub fn layer(&self, l: usize) -> (&[T], &[T]) {
        let off = self.offset(l);
        let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.params[off..off + fi * fo];
        let b = &self.params[off + fi * fo..off + layer_len(fi, fo)];
        (w, b)
    }

    fn offset(&self, l: usize) -> usize {
        self.sizes.windows(2).take(l).map(|w| layer_len(w[0], w[1])).sum()
    }

    fn check_input(&self, x: &[T], batch: usize) -> Result<()> {
        if x.len() != batch * self.input_dim() {
            return Err(Error::Dimension { expected: batch * self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    fn affine(&self, l: usize, x: &[T], batch: usize) -> Vec<T> {
        let (w, b) = self.layer(l);
        let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
        let mut y = Vec::with_capacity(batch * fo);
        for _ in 0..batch {
            y.extend_from_slice(b);
        }
        T::gemm(batch, fi, fo, T::one(), x, fi as isize, 1, w, fo as isize, 1, T::one(), &mut y, fo as isize, 1);
        y
    }

    /// Batched forward pass; `x` is `batch x input_dim`, row-major.
    pub fn forward(&self, x: &[T], batch: usize) -> Result<Vec<T>> {
        self.check_input(x, batch)?;
        let mut h = self.affine(0, x, batch);
        for l in 1..self.layers() {
            h.iter_mut().for_each(|v| *v = v.max(T::zero()));
            h = self.affine(l, &h, batch);
        }
        Ok(h)
    }

    /// Forward pass that records what [`Mlp::backward`] needs in `tape`.
    pub fn forward_recorded(&self, x: &[T], batch: usize, tape: &mut Tape<T>) -> Result<Vec<T>> {
        self.check_input(x, batch)?;
        tape.inputs.clear();
        tape.batch = batch;
        tape.inputs.push(x.to_vec());
        let mut h = self.affine(0, x, batch);
        for l in 1..self.layers() {
            h.iter_mut().for_each(|v| *v = v.max(T::zero()));
            let next = self.affine(l, &h, batch);
            tape.inputs.push(h);
            h = next;
        }
        Ok(h)
    }

    /// Back-propagates `grad_out` (`batch x output_dim`) through the
    /// recorded pass. Parameter gradients are added into `grads`; the
    /// gradient with respect to the input is returned.
    pub fn backward(&self, tape: &Tape<T>, grad_out: &[T], grads: &mut [T]) -> Result<Vec<T>> {
        if tape.inputs.len() != self.layers() {
            return Err(Error::BackwardWithoutForward);
        }
        let batch = tape.batch;
        if grad_out.len() != batch * self.output_dim() {
            return Err(Error::Dimension { expected: batch * self.output_dim(), got: grad_out.len() });
        }
        if grads.len() != self.params.len() {
            return Err(Error::Dimension { expected: self.params.len(), got: grads.len() });
        }
        let mut dy = grad_out.to_vec();
        for l in (0..self.layers()).rev() {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            let x = &tape.inputs[l];
            let off = self.offset(l);
            let (gw, gb) = grads[off..off + layer_len(fi, fo)].split_at_mut(fi * fo);
            // dW += X^T dY
            T::gemm(fi, batch, fo, T::one(), x, 1, fi as isize, &dy, fo as isize, 1, T::one(), gw, fo as isize, 1);
            for row in dy.chunks(fo) {
                for (g, &d) in gb.iter_mut().zip(row) {
                    *g = *g + d;
                }
            }
            // dX = dY W^T
            let (w, _) = self.layer(l);
            let mut dx = vec![T::zero(); batch * fi];
            T::gemm(batch, fo, fi, T::one(), &dy, fo as isize, 1, w, 1, fo as isize, T::zero(), &mut dx, fi as isize, 1);
            if l > 0 {
                // input of layer l is a ReLU output; derivative 0 at 0
                for (d, &a) in dx.iter_mut().zip(x) {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                }
            }
            dy = dx;
        }
        Ok(dy)
    }

    /// `self <- tau * source + (1 - tau) * self`.
    pub fn polyak_from(&mut self, source: &Self, tau: T) {
        debug_assert_eq!(self.sizes, source.sizes);
        let keep = T::one() - tau;
        for (t, &s) in self.params.iter_mut().zip(&source.params) {
            *t = tau * s + keep * *t;
        }
    }

    pub(crate) fn from_parts(sizes: Vec<usize>, params: Vec<T>) -> Result<Self> {
        let net = Self::zeros(&sizes);
        if net.params.len() != params.len() {
            return Err(Error::Dimension { expected: net.params.len(), got: params.len() });
        }
        Ok(Self { sizes, params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straight-line single-sample forward pass, independent of gemm.
    fn oracle_forward(net: &Mlp<f64>, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for l in 0..net.layers() {
            let (w, b) = net.layer(l);
            let (fi, fo) = (net.sizes()[l], net.sizes()[l + 1]);
            let mut y = b.to_vec();
            for i in 0..fi {
                for o in 0..fo {
                    y[o] += h[i] * w[i * fo + o];
                }
            }
            if l + 1 < net.layers() {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            h = y;
        }
        h
    }

    #[test]
    fn zero_weights_output_bias() {
        let mut net = Mlp::<f64>::zeros(&[3, 4, 4, 2]);
        let n = net.num_params();
        net.params_mut()[n - 2] = 0.5;
        net.params_mut()[n - 1] = -1.5;
        assert_eq!(net.forward(&[1.0, -2.0, 3.0], 1).unwrap(), vec![0.5, -1.5]);
    }

    #[test]
    fn one_unit_relu_passthrough() {
        let net = Mlp::<f64>::from_parts(vec![1, 1, 1], vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(net.forward(&[2.5], 1).unwrap(), vec![2.5]);
        assert_eq!(net.forward(&[-2.5], 1).unwrap(), vec![0.0]);
    }

    #[test]
    fn matches_independent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::<f64>::init(&[7, 256, 256, 5], 1.0, &mut rng);
        let x: Vec<f64> = (0..7 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = net.forward(&x, 3).unwrap();
        for b in 0..3 {
            let o = oracle_forward(&net, &x[b * 7..(b + 1) * 7]);
            for (a, e) in y[b * 5..(b + 1) * 5].iter().zip(o) {
                assert!((a - e).abs() < 1e-12);
            }
        }
        assert_eq!(net.forward(&x, 3).unwrap(), y);
    }

    #[test]
    fn linear_derivative() {
        let net = Mlp::<f64>::from_parts(vec![1, 1], vec![0.7, 0.0]).unwrap();
        let mut tape = Tape::new();
        net.forward_recorded(&[2.0], 1, &mut tape).unwrap();
        let mut g = vec![0.0; 2];
        let dx = net.backward(&tape, &[1.0], &mut g).unwrap();
        assert_eq!(g, vec![2.0, 1.0]);
        assert_eq!(dx, vec![0.7]);
    }

    #[test]
    fn dead_relu_blocks_gradient() {
        // hidden pre-activation = -x < 0 for x > 0
        let net = Mlp::<f64>::from_parts(vec![1, 1, 1], vec![-1.0, 0.0, 3.0, 0.0]).unwrap();
        let mut tape = Tape::new();
        net.forward_recorded(&[1.0], 1, &mut tape).unwrap();
        let mut g = vec![0.0; 4];
        let dx = net.backward(&tape, &[1.0], &mut g).unwrap();
        assert_eq!(&g[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(g[3], 1.0);
        assert_eq!(dx, vec![0.0]);

        // exactly zero pre-activation also uses derivative 0
        let net = Mlp::<f64>::from_parts(vec![1, 1, 1], vec![1.0, 0.0, 3.0, 0.0]).unwrap();
        net.forward_recorded(&[0.0], 1, &mut tape).unwrap();
        let mut g = vec![0.0; 4];
        net.backward(&tape, &[1.0], &mut g).unwrap();
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn backward_without_forward() {
        let net = Mlp::<f64>::zeros(&[2, 3, 1]);
        let mut g = vec![0.0; net.num_params()];
        assert!(matches!(net.backward(&Tape::new(), &[1.0], &mut g), Err(Error::BackwardWithoutForward)));
    }

    #[test]
    fn dimension_mismatch() {
        let net = Mlp::<f64>::zeros(&[2, 3, 1]);
        assert!(matches!(net.forward(&[1.0; 3], 1), Err(Error::Dimension { .. })));
    }

    #[test]
    fn polyak_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Mlp::<f64>::init(&[2, 3, 1], 1.0, &mut rng);
        let mut b = Mlp::<f64>::init(&[2, 3, 1], 1.0, &mut rng);
        let before = b.clone();
        b.polyak_from(&a, 0.25);
        for ((t, s), p) in b.params().iter().zip(a.params()).zip(before.params()) {
            assert!((t - (0.25 * s + 0.75 * p)).abs() < 1e-12);
        }
        b.polyak_from(&a, 1.0);
        assert_eq!(b, a);
    }
}
