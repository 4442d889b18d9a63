use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Optimizer parameter group; each group has its own learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamGroup {
    Encoder,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named trainable tensors plus one gradient accumulator per tensor.
#[derive(Debug, Clone, Default)]
pub struct ParamRegistry {
    names: Vec<String>,
    groups: Vec<ParamGroup>,
    values: Vec<Tensor>,
    index: HashMap<String, usize>,
    pub grads: Gradients,
}

impl ParamRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, group: ParamGroup, value: Tensor) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::Config(format!("parameter {name} registered twice")));
        }
        let id = self.values.len();
        self.index.insert(name.to_string(), id);
        self.names.push(name.to_string());
        self.groups.push(group);
        self.grads.tensors.push(Tensor::zeros(value.shape()));
        self.values.push(value);
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn group(&self, id: ParamId) -> ParamGroup {
        self.groups[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn zero_grads(&mut self) {
        self.grads = Gradients::zeros_like(self);
    }

    /// Replaces the value of `name`, keeping its shape.
    pub fn load(&mut self, name: &str, value: Tensor) -> Result<()> {
        let id = self
            .id(name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown parameter {name}")))?;
        if self.values[id.0].shape() != value.shape() {
            return Err(Error::Checkpoint(format!(
                "parameter {name}: shape {:?} does not match {:?}",
                value.shape(),
                self.values[id.0].shape()
            )));
        }
        self.values[id.0] = value;
        Ok(())
    }
}

/// Gradient buffers laid out like a [`ParamRegistry`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamRegistry) -> Self {
        Gradients {
            tensors: params
                .values
                .iter()
                .map(|t| Tensor::zeros(t.shape()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().for_each(|t| t.scale(s));
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

pub fn init_uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

/// Scaled-uniform init for a `[fan_out, fan_in]` weight matrix.
pub fn init_weight(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let bound = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
    init_uniform(shape, bound, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicate_names_rejected() {
        let mut reg = ParamRegistry::new();
        reg.register("w", ParamGroup::Other, Tensor::zeros(&[2, 2]))
            .unwrap();
        assert!(reg
            .register("w", ParamGroup::Other, Tensor::zeros(&[1]))
            .is_err());
        assert_eq!(reg.num_scalars(), 4);
    }

    #[test]
    fn init_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = init_weight(&[4, 8], &mut rng);
        let bound = (6.0f64 / 12.0).sqrt();
        assert!(w.data().iter().all(|x| x.abs() <= bound));
        let e = init_uniform(&[10, 3], 0.1, &mut rng);
        assert!(e.max_abs() <= 0.1);
    }

    #[test]
    fn load_checks_shape() {
        let mut reg = ParamRegistry::new();
        reg.register("b", ParamGroup::Other, Tensor::zeros(&[3]))
            .unwrap();
        assert!(reg.load("b", Tensor::zeros(&[4])).is_err());
        assert!(reg.load("nope", Tensor::zeros(&[3])).is_err());
        reg.load("b", Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap())
            .unwrap();
        assert_eq!(reg.get(reg.id("b").unwrap()).data(), &[1.0, 2.0, 3.0]);
    }
}
