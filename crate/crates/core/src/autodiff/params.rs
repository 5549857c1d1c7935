use std::collections::BTreeMap;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One trainable weight plus its optimizer state.
#[derive(Clone, Debug)]
pub struct Parameter<T> {
    pub value: Tensor<T>,
    pub grad: Option<Tensor<T>>,
    pub first_moment: Tensor<T>,
    pub second_moment: Tensor<T>,
    pub steps: u64,
}

impl<T: Scalar> Parameter<T> {
    fn new(value: Tensor<T>) -> Self {
        let shape = value.shape().to_vec();
        Parameter {
            value,
            grad: None,
            first_moment: Tensor::zeros(shape.clone()),
            second_moment: Tensor::zeros(shape),
            steps: 0,
        }
    }
}

/// Named trainable weights, keyed by dotted path such as `gen.lstm_en.w_ih`.
///
/// Iteration is in lexicographic name order.
#[derive(Clone, Debug, Default)]
pub struct ParameterStore<T> {
    entries: BTreeMap<String, Parameter<T>>,
}

impl<T: Scalar> ParameterStore<T> {
    pub fn new() -> Self {
        ParameterStore {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::contract(format!("parameter `{name}` registered twice")));
        }
        self.entries.insert(name, Parameter::new(value));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Parameter<T>> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Parameter<T>> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn value(&self, name: &str) -> Result<&Tensor<T>> {
        Ok(&self.get(name)?.value)
    }

    /// Replaces a parameter's value, keeping its shape.
    pub fn set_value(&mut self, name: &str, value: Tensor<T>) -> Result<()> {
        let p = self.get_mut(name)?;
        if p.value.shape() != value.shape() {
            return Err(Error::dim("set_value", p.value.shape(), value.shape()));
        }
        p.value = value;
        Ok(())
    }

    pub fn grad(&self, name: &str) -> Result<Option<&Tensor<T>>> {
        Ok(self.get(name)?.grad.as_ref())
    }

    pub fn accumulate_grad(&mut self, name: &str, grad: &Tensor<T>) -> Result<()> {
        let p = self.get_mut(name)?;
        if p.value.shape() != grad.shape() {
            return Err(Error::dim("accumulate_grad", p.value.shape(), grad.shape()));
        }
        match &mut p.grad {
            Some(g) => g.add_assign(grad),
            slot @ None => *slot = Some(grad.clone()),
        }
        Ok(())
    }

    pub fn clear_grads(&mut self) {
        for p in self.entries.values_mut() {
            p.grad = None;
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Parameter<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalar weights.
    pub fn numel(&self) -> usize {
        self.entries.values().map(|p| p.value.numel()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParameterStore::<f64>::new();
        s.insert("a.w", Tensor::zeros(vec![2])).unwrap();
        assert!(s.insert("a.w", Tensor::zeros(vec![2])).is_err());
        assert!(matches!(s.get("missing"), Err(Error::UnknownParameter(_))));
    }

    #[test]
    fn grads_accumulate_until_cleared() {
        let mut s = ParameterStore::<f64>::new();
        s.insert("w", Tensor::zeros(vec![2])).unwrap();
        let g = Tensor::vector(vec![1.0, 2.0]);
        s.accumulate_grad("w", &g).unwrap();
        s.accumulate_grad("w", &g).unwrap();
        assert_eq!(s.grad("w").unwrap().unwrap().data(), &[2.0, 4.0]);
        s.clear_grads();
        assert!(s.grad("w").unwrap().is_none());
    }

    #[test]
    fn names_are_sorted() {
        let mut s = ParameterStore::<f64>::new();
        for n in ["gen.b", "disc.a", "enc.z"] {
            s.insert(n, Tensor::zeros(vec![1])).unwrap();
        }
        assert_eq!(s.names().collect::<Vec<_>>(), vec!["disc.a", "enc.z", "gen.b"]);
    }
}
