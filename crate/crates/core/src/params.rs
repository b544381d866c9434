//! Named parameter tensors, their JSON form, and the Adam optimizer.
//!
//! Serialized form is a flat JSON object `{ "<name>": [f64, ...], ... }` whose
//! keys appear in registration order. Each array is the row-major flattening
//! of the tensor (`out × in` for affine weights).

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    tensors: Vec<Tensor>,
}

pub enum Init {
    Zeros,
    Constant(f64),
    /// Normal with the given standard deviation.
    Normal(f64),
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<R: Rng + ?Sized>(&mut self, name: &str, len: usize, init: Init, rng: &mut R) -> ParamId {
        assert!(
            self.tensors.iter().all(|t| t.name != name),
            "duplicate parameter {name}"
        );
        let data = match init {
            Init::Zeros => vec![0.0; len],
            Init::Constant(c) => vec![c; len],
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).expect("finite std");
                (0..len).map(|_| dist.sample(rng)).collect()
            }
        };
        self.tensors.push(Tensor {
            name: name.to_string(),
            data,
        });
        ParamId(self.tensors.len() - 1)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.tensors[id.0].data
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.tensors[id.0].data
    }

    pub fn by_name(&self, name: &str) -> Option<&[f64]> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.data.as_slice())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    /// Replaces values from `other`, which must have the same names and
    /// lengths in the same order.
    pub fn load(&mut self, other: &ParamSet) -> Result<()> {
        if other.tensors.len() != self.tensors.len() {
            return Err(Error::validation(
                "params",
                format!(
                    "expected {} tensors, found {}",
                    self.tensors.len(),
                    other.tensors.len()
                ),
            ));
        }
        for (dst, src) in self.tensors.iter_mut().zip(&other.tensors) {
            if dst.name != src.name {
                return Err(Error::validation(
                    format!("params.{}", src.name),
                    format!("expected tensor {}", dst.name),
                ));
            }
            if dst.data.len() != src.data.len() {
                return Err(Error::validation(
                    format!("params.{}", src.name),
                    format!("expected {} values, found {}", dst.data.len(), src.data.len()),
                ));
            }
            if let Some(bad) = src.data.iter().position(|v| !v.is_finite()) {
                return Err(Error::validation(
                    format!("params.{}[{bad}]", src.name),
                    "non-finite value",
                ));
            }
            dst.data.clone_from(&src.data);
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

impl Serialize for ParamSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.tensors.len()))?;
        for t in &self.tensors {
            map.serialize_entry(&t.name, &t.data)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for ParamSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct Visitor;
        impl<'de> serde::de::Visitor<'de> for Visitor {
            type Value = ParamSet;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map of parameter names to float arrays")
            }
            fn visit_map<A: serde::de::MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<ParamSet, A::Error> {
                let mut set = ParamSet::new();
                while let Some((name, data)) = access.next_entry::<String, Vec<f64>>()? {
                    if set.tensors.iter().any(|t| t.name == name) {
                        return Err(serde::de::Error::custom(format!(
                            "duplicate parameter {name}"
                        )));
                    }
                    set.tensors.push(Tensor { name, data });
                }
                Ok(set)
            }
        }
        deserializer.deserialize_map(Visitor)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params
            .tensors()
            .iter()
            .map(|t| vec![0.0; t.data.len()])
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn update(&mut self, params: &mut ParamSet, grads: &[Vec<f64>]) {
        assert_eq!(grads.len(), params.len(), "gradient count");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, tensor) in params.tensors.iter_mut().enumerate() {
            let g = &grads[k];
            let m = &mut self.first[k];
            let v = &mut self.second[k];
            for i in 0..tensor.data.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                tensor.data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}
