use std::path::Path;

use rand::Rng;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::store::{read_bundle, write_bundle, Array, Bundle};
use crate::tensor::{Gradients, Tape, Tensor, Var};

/// Index of a tensor in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Named, ordered parameter tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Records every parameter on `tape` as a gradient-requiring leaf.
    pub fn bind(&self, tape: &mut Tape) -> Result<Binding> {
        let vars = self.tensors.iter().map(|t| tape.param(t.clone())).collect::<Result<_>>()?;
        Ok(Binding { vars })
    }

    /// Records every parameter as a constant (inference).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Result<Binding> {
        let vars = self.tensors.iter().map(|t| tape.constant(t.clone())).collect::<Result<_>>()?;
        Ok(Binding { vars })
    }

    /// Gradients for every parameter, zeros where the loss does not reach.
    pub fn collect_grads(&self, binding: &Binding, grads: &Gradients) -> Vec<Tensor> {
        self.tensors
            .iter()
            .zip(&binding.vars)
            .map(|(t, &v)| grads.get(v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape().to_vec())))
            .collect()
    }

    /// Writes all tensors as `f64` arrays plus `meta` in a checkpoint bundle.
    pub fn save(&self, dir: &Path, meta: Value) -> Result<()> {
        let mut b = Bundle::new(meta);
        for (name, t) in self.names.iter().zip(&self.tensors) {
            b.insert(name, Array::f64(t.shape().to_vec(), t.data().to_vec()));
        }
        write_bundle(dir, "checkpoint", &b)
    }

    /// Reads a checkpoint into this store. Names and shapes must match exactly.
    pub fn load_into(&mut self, dir: &Path) -> Result<Value> {
        let mut b = read_bundle(dir, "checkpoint")?;
        if b.arrays.len() != self.len() {
            return Err(Error::Config(format!(
                "checkpoint holds {} tensors, the model has {}",
                b.arrays.len(),
                self.len()
            )));
        }
        for (name, t) in self.names.iter().zip(self.tensors.iter_mut()) {
            let (shape, data) = b
                .take_f64(name)
                .map_err(|_| Error::Config(format!("checkpoint lacks parameter {name}")))?;
            if shape != t.shape() {
                return Err(Error::Config(format!(
                    "parameter {name}: checkpoint shape {shape:?}, model shape {:?}",
                    t.shape()
                )));
            }
            *t = Tensor::new(shape, data)?;
        }
        Ok(b.meta)
    }
}

/// Tape handles for one forward pass.
#[derive(Clone, Debug)]
pub struct Binding {
    vars: Vec<Var>,
}

impl Binding {
    /// Handles in parameter order, for graphs built outside [`ParamStore::bind`].
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Self { vars }
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }
}

/// Dense layer `x W + b` on `[N, in]` rows.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    /// Weights drawn from `N(0, 1 / fan_in)`, zero bias.
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, bias: bool, rng: &mut impl Rng) -> Self {
        let std = (1.0 / fan_in.max(1) as f64).sqrt();
        let weight = store.add(format!("{name}.weight"), Tensor::randn([fan_in, fan_out], std, rng));
        let bias = bias.then(|| store.add(format!("{name}.bias"), Tensor::zeros([fan_out])));
        Self { weight, bias, fan_in, fan_out }
    }

    pub fn forward(&self, tape: &mut Tape, bind: &Binding, x: Var) -> Result<Var> {
        let y = tape.matmul(x, bind.var(self.weight))?;
        match self.bias {
            Some(b) => tape.add_bias(y, bind.var(b)),
            None => Ok(y),
        }
    }
}

/// Two dense layers with a GELU in between.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub first: Linear,
    pub second: Linear,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, dims: [usize; 3], rng: &mut impl Rng) -> Self {
        Self {
            first: Linear::new(store, &format!("{name}.0"), dims[0], dims[1], true, rng),
            second: Linear::new(store, &format!("{name}.1"), dims[1], dims[2], true, rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape, bind: &Binding, x: Var) -> Result<Var> {
        let h = self.first.forward(tape, bind, x)?;
        let h = tape.gelu(h)?;
        self.second.forward(tape, bind, h)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn checkpoint_round_trip_and_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::new();
        Mlp::new(&mut store, "head", [3, 4, 2], &mut rng);
        let dir = tempfile::tempdir().unwrap();
        store.save(dir.path(), serde_json::json!({"width": 4})).unwrap();

        let mut other = ParamStore::new();
        Mlp::new(&mut other, "head", [3, 4, 2], &mut ChaCha8Rng::seed_from_u64(1));
        assert_ne!(other, store);
        let meta = other.load_into(dir.path()).unwrap();
        assert_eq!(other, store);
        assert_eq!(meta["width"], 4);

        let mut wrong = ParamStore::new();
        Mlp::new(&mut wrong, "head", [3, 5, 2], &mut rng);
        assert!(matches!(wrong.load_into(dir.path()), Err(Error::Config(_))));
    }

    #[test]
    fn mlp_forward_matches_manual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", [2, 3, 1], &mut rng);
        let mut tape = Tape::new();
        let bind = store.bind(&mut tape).unwrap();
        let x = tape.constant(Tensor::new([1, 2], vec![0.5, -1.0]).unwrap()).unwrap();
        let y = mlp.forward(&mut tape, &bind, x).unwrap();
        let w1 = store.get(mlp.first.weight).data();
        let w2 = store.get(mlp.second.weight).data();
        let gelu = |v: f64| 0.5 * v * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (v + 0.044715 * v.powi(3))).tanh());
        let hidden: Vec<f64> = (0..3).map(|j| gelu(0.5 * w1[j] - w1[3 + j])).collect();
        let expected: f64 = (0..3).map(|j| hidden[j] * w2[j]).sum();
        assert!((tape.value(y).data()[0] - expected).abs() < 1e-12);
    }
}
