//! Small fully connected networks with exact reverse-mode gradients and an
//! Adam optimizer.
//!
//! Hidden layers use ReLU, the output layer is linear. Parameters live in one
//! flat vector, layer by layer: the weight matrix (row-major, one row per
//! output unit) followed by the bias.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

/// Feedforward network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    params: Vec<T>,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    /// Layer inputs; the last entry is the network output.
    activations: Vec<Vec<T>>,
}

impl<T> Tape<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("tape holds the input")
    }
}

/// Gradients of ⟨upstream, output⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrad<T> {
    /// Same layout as [`Mlp::params`].
    pub params: Vec<T>,
    pub input: Vec<T>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::Config(format!(
            "a network needs at least 2 layer sizes, got {}",
            sizes.len()
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::Config(format!("layer sizes must be positive: {sizes:?}")));
    }
    Ok(())
}

impl<T: Scalar> Mlp<T> {
    /// He-uniform weights in [−√(6/fan_in), √(6/fan_in)], zero biases.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        check_sizes(sizes)?;
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(T::lit(rng.random_range(-limit..=limit)));
            }
            params.extend(std::iter::repeat_n(T::zero(), fan_out));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    /// All-zero network of the given shape.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![T::zero(); param_count(sizes)],
        })
    }

    pub fn from_params(sizes: &[usize], params: Vec<T>) -> Result<Self> {
        check_sizes(sizes)?;
        if params.len() != param_count(sizes) {
            return Err(Error::Dimension(format!(
                "{} parameters for layer sizes {sizes:?}, expected {}",
                params.len(),
                param_count(sizes)
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            Activation::Linear
        } else {
            Activation::Relu
        }
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// (weights, bias) offsets of layer `l` into the flat parameter vector.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let start: usize = self.sizes[..=l]
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum();
        (start, start + self.sizes[l] * self.sizes[l + 1])
    }

    pub fn weights(&self, l: usize) -> &[T] {
        let (w, b) = self.offsets(l);
        &self.params[w..b]
    }

    pub fn bias(&self, l: usize) -> &[T] {
        let (_, b) = self.offsets(l);
        &self.params[b..b + self.sizes[l + 1]]
    }

    /// Name of the tensor holding flat parameter index `i`.
    pub fn tensor_name(&self, i: usize) -> String {
        for l in 0..self.num_layers() {
            let (_, b) = self.offsets(l);
            if i < b {
                return format!("layer {l} weights");
            }
            if i < b + self.sizes[l + 1] {
                return format!("layer {l} bias");
            }
        }
        format!("parameter {i}")
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_tape(x)?.activations.pop().expect("output"))
    }

    pub fn forward_tape(&self, x: &[T]) -> Result<Tape<T>> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(x.to_vec());
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, bias) = (self.weights(l), self.bias(l));
            let a = activations.last().expect("input pushed");
            let relu = self.activation(l) == Activation::Relu;
            let z: Vec<T> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let s = row.iter().zip(a).fold(bias[o], |acc, (&wi, &ai)| acc + wi * ai);
                    if relu {
                        s.max(T::zero())
                    } else {
                        s
                    }
                })
                .collect();
            activations.push(z);
        }
        Ok(Tape { activations })
    }

    /// Reverse pass over a tape recorded by [`Mlp::forward_tape`].
    pub fn backward(&self, tape: &Tape<T>, upstream: &[T]) -> Result<NetGrad<T>> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Dimension(format!(
                "upstream gradient has length {}, network output is {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let mut params = vec![T::zero(); self.params.len()];
        let mut delta = upstream.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if self.activation(l) == Activation::Relu {
                for (d, &a) in delta.iter_mut().zip(&tape.activations[l + 1]) {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                }
            }
            let input = &tape.activations[l];
            let (w_off, b_off) = self.offsets(l);
            for o in 0..n_out {
                let d = delta[o];
                let row = &mut params[w_off + o * n_in..w_off + (o + 1) * n_in];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g = d * a;
                }
                params[b_off + o] = d;
            }
            let w = self.weights(l);
            let mut prev = vec![T::zero(); n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                for (p, &wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p = *p + wi * d;
                }
            }
            delta = prev;
        }
        Ok(NetGrad {
            params,
            input: delta,
        })
    }

    pub fn grad(&self, x: &[T], upstream: &[T]) -> Result<NetGrad<T>> {
        let tape = self.forward_tape(x)?;
        self.backward(&tape, upstream)
    }

    /// θ′ ← τθ + (1−τ)θ′.
    pub fn soft_update_from(&mut self, source: &Self, tau: T) -> Result<()> {
        if source.sizes != self.sizes {
            return Err(Error::Dimension(format!(
                "soft update between shapes {:?} and {:?}",
                source.sizes, self.sizes
            )));
        }
        for (t, &s) in self.params.iter_mut().zip(&source.params) {
            *t = tau * s + (T::one() - tau) * *t;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct LayerRecord<T> {
    /// One inner array per output unit.
    weights: Vec<Vec<T>>,
    bias: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct MlpRecord<T> {
    layer_sizes: Vec<usize>,
    layers: Vec<LayerRecord<T>>,
}

impl<T: Scalar> Serialize for Mlp<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let layers = (0..self.num_layers())
            .map(|l| LayerRecord {
                weights: self
                    .weights(l)
                    .chunks(self.sizes[l])
                    .map(<[T]>::to_vec)
                    .collect(),
                bias: self.bias(l).to_vec(),
            })
            .collect();
        MlpRecord {
            layer_sizes: self.sizes.clone(),
            layers,
        }
        .serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Mlp<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = MlpRecord::<T>::deserialize(d)?;
        let sizes = rec.layer_sizes;
        if rec.layers.len() + 1 != sizes.len() {
            return Err(D::Error::custom(format!(
                "{} layers for {} layer sizes",
                rec.layers.len(),
                sizes.len()
            )));
        }
        let mut params = Vec::with_capacity(param_count(&sizes));
        for (l, layer) in rec.layers.into_iter().enumerate() {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            if layer.weights.len() != n_out
                || layer.weights.iter().any(|r| r.len() != n_in)
                || layer.bias.len() != n_out
            {
                return Err(D::Error::custom(format!(
                    "layer {l} does not match sizes {n_in}x{n_out}"
                )));
            }
            params.extend(layer.weights.into_iter().flatten());
            params.extend(layer.bias);
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(D::Error::custom("non-finite network parameter"));
        }
        Mlp::from_params(&sizes, params).map_err(D::Error::custom)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step_count: u64,
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: T, num_params: usize) -> Self {
        Self {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            step_count: 0,
            first_moment: vec![T::zero(); num_params],
            second_moment: vec![T::zero(); num_params],
        }
    }

    pub fn for_net(lr: T, net: &Mlp<T>) -> Self {
        Self::new(lr, net.params().len())
    }

    /// One update of `params` along `grads`; `name` maps an index to the
    /// tensor reported when a gradient is not finite.
    pub fn step_with(
        &mut self,
        params: &mut [T],
        grads: &[T],
        name: impl Fn(usize) -> String,
    ) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(Error::Dimension(format!(
                "optimizer holds {} moments, got {} parameters and {} gradients",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {}", name(i))));
        }
        self.step_count += 1;
        let k = i32::try_from(self.step_count).unwrap_or(i32::MAX);
        let c1 = T::one() - self.beta1.powi(k);
        let c2 = T::one() - self.beta2.powi(k);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            *m = self.beta1 * *m + (T::one() - self.beta1) * g;
            *v = self.beta2 * *v + (T::one() - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p = *p - self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }

    pub fn step(&mut self, net: &mut Mlp<T>, grads: &[T]) -> Result<()> {
        let names = net.clone();
        self.step_with(net.params_mut(), grads, |i| names.tensor_name(i))
    }
}
