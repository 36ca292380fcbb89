use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::ModelConfig;
use crate::scalar::Scalar;
use crate::ModelError;

/// Named dense tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor { name: name.into(), shape, data: vec![T::zero(); len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

const PER_LAYER: usize = 12;

pub(crate) const LN1_G: usize = 0;
pub(crate) const LN1_B: usize = 1;
pub(crate) const ATTN_W: usize = 2;
pub(crate) const ATTN_B: usize = 3;
pub(crate) const PROJ_W: usize = 4;
pub(crate) const PROJ_B: usize = 5;
pub(crate) const LN2_G: usize = 6;
pub(crate) const LN2_B: usize = 7;
pub(crate) const FC_W: usize = 8;
pub(crate) const FC_B: usize = 9;
pub(crate) const OUT_W: usize = 10;
pub(crate) const OUT_B: usize = 11;

const LAYER_NAMES: [&str; PER_LAYER] = [
    "ln1.gain", "ln1.bias", "attn.qkv.weight", "attn.qkv.bias", "attn.proj.weight", "attn.proj.bias", "ln2.gain",
    "ln2.bias", "mlp.fc.weight", "mlp.fc.bias", "mlp.out.weight", "mlp.out.bias",
];

/// Ordered tensor names and shapes for a configuration.
pub fn tensor_layout(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let (v, c, d) = (config.vocab_size, config.context_length, config.embed_dim);
    let mut out = vec![("tok_embed".to_string(), vec![v, d]), ("pos_embed".to_string(), vec![c, d])];
    for l in 0..config.layers {
        let shapes = [
            vec![d],
            vec![d],
            vec![d, 3 * d],
            vec![3 * d],
            vec![d, d],
            vec![d],
            vec![d],
            vec![d],
            vec![d, 4 * d],
            vec![4 * d],
            vec![4 * d, d],
            vec![d],
        ];
        for (name, shape) in LAYER_NAMES.iter().zip(shapes) {
            out.push((format!("layer{l}.{name}"), shape));
        }
    }
    out.push(("ln_f.gain".to_string(), vec![d]));
    out.push(("ln_f.bias".to_string(), vec![d]));
    out.push(("head.weight".to_string(), vec![d, v]));
    out
}

/// Model weights: the tensors of `tensor_layout`, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    pub config: ModelConfig,
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Parameters<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let tensors = tensor_layout(config).into_iter().map(|(n, s)| Tensor::zeros(n, s)).collect();
        Parameters { config: config.clone(), tensors }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config)
    }

    pub(crate) fn tok_embed(&self) -> &[T] {
        &self.tensors[0].data
    }

    pub(crate) fn pos_embed(&self) -> &[T] {
        &self.tensors[1].data
    }

    pub(crate) fn layer(&self, l: usize, which: usize) -> &[T] {
        &self.tensors[2 + l * PER_LAYER + which].data
    }

    pub(crate) fn layer_mut(&mut self, l: usize, which: usize) -> &mut [T] {
        &mut self.tensors[2 + l * PER_LAYER + which].data
    }

    pub(crate) fn final_index(&self) -> usize {
        2 + self.config.layers * PER_LAYER
    }

    pub(crate) fn lnf_gain(&self) -> &[T] {
        &self.tensors[self.final_index()].data
    }

    pub(crate) fn lnf_bias(&self) -> &[T] {
        &self.tensors[self.final_index() + 1].data
    }

    pub(crate) fn head(&self) -> &[T] {
        &self.tensors[self.final_index() + 2].data
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    /// Converts every element to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Parameters<U> {
        Parameters {
            config: self.config.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|x| U::of(x.f64())).collect(),
                })
                .collect(),
        }
    }

    /// self += alpha · other
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += alpha * *y;
            }
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for t in &mut self.tensors {
            for x in &mut t.data {
                *x *= alpha;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors.iter().flat_map(|t| &t.data).map(|x| x.f64() * x.f64()).sum::<f64>().sqrt()
    }
}

/// Weights ~ N(0, 0.02²) from the config seed, biases zero, layer-norm gains one.
pub fn init_params<T: Scalar>(config: &ModelConfig) -> Result<Parameters<T>, ModelError> {
    config.validate()?;
    let mut params = Parameters::zeros(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0f64, 0.02).expect("valid sigma");
    for t in &mut params.tensors {
        if t.name.ends_with(".gain") {
            t.data.fill(T::one());
        } else if t.name.ends_with(".bias") {
            continue;
        } else {
            for x in &mut t.data {
                *x = T::of(normal.sample(&mut rng));
            }
        }
    }
    Ok(params)
}

/// Deep copy; the result shares no storage with `src`.
pub fn clone_params<T: Scalar>(src: &Parameters<T>) -> Parameters<T> {
    src.clone()
}
