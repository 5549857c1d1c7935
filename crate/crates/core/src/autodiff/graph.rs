use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use super::ops::{backward_rule, Op};
use super::params::ParameterStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Index of a node inside one [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

pub(crate) struct Node<T> {
    pub(crate) op: Op<T>,
    pub(crate) inputs: Vec<NodeId>,
    pub(crate) value: Tensor<T>,
    pub(crate) requires_grad: bool,
    pub(crate) grad: Option<Tensor<T>>,
}

/// Append-only record of a forward computation.
///
/// Inputs of every node precede it, so reverse append order is a valid
/// topological order for the backward sweep. One graph is built per training
/// step; trainable weights live in a [`ParameterStore`] and are bound into the
/// graph by name.
pub struct Graph<T: Scalar> {
    nodes: RefCell<Vec<Node<T>>>,
    bound: RefCell<HashMap<String, NodeId>>,
    frozen_bound: RefCell<HashMap<String, NodeId>>,
    frozen_prefixes: RefCell<Vec<String>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: RefCell::new(Vec::new()),
            bound: RefCell::new(HashMap::new()),
            frozen_bound: RefCell::new(HashMap::new()),
            frozen_prefixes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor<T>) -> Value<'_, T> {
        self.leaf(value, false)
    }

    /// Leaf that accumulates a gradient during [`Graph::backward`].
    pub fn variable(&self, value: Tensor<T>) -> Value<'_, T> {
        self.leaf(value, true)
    }

    pub fn scalar(&self, value: T) -> Value<'_, T> {
        self.constant(Tensor::scalar(value))
    }

    fn leaf(&self, value: Tensor<T>, requires_grad: bool) -> Value<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        let id = NodeId(nodes.len());
        nodes.push(Node {
            op: Op::Leaf,
            inputs: Vec::new(),
            value,
            requires_grad,
            grad: None,
        });
        Value { graph: self, id }
    }

    /// Binds the named parameter into this graph. Repeated lookups of the same
    /// name return the same node, so weight sharing across timesteps sums the
    /// gradient contributions. The value is copied at first lookup; later
    /// changes to the store are not seen by this graph.
    pub fn param(&self, store: &ParameterStore<T>, name: &str) -> Result<Value<'_, T>> {
        let frozen = self
            .frozen_prefixes
            .borrow()
            .iter()
            .any(|p| name.starts_with(p.as_str()));
        let table = if frozen {
            &self.frozen_bound
        } else {
            &self.bound
        };
        if let Some(&id) = table.borrow().get(name) {
            return Ok(Value { graph: self, id });
        }
        let tensor = store.value(name)?.clone();
        let v = self.leaf(tensor, !frozen);
        table.borrow_mut().insert(name.to_string(), v.id);
        Ok(v)
    }

    /// Runs `f` with parameters under `prefix` bound as constants, so the
    /// computation inside contributes no gradient to them.
    pub fn with_frozen<R>(&self, prefix: &str, f: impl FnOnce() -> R) -> R {
        self.frozen_prefixes.borrow_mut().push(prefix.to_string());
        let out = f();
        self.frozen_prefixes.borrow_mut().pop();
        out
    }

    pub(crate) fn record(&self, op: Op<T>, inputs: &[NodeId], value: Tensor<T>) -> Result<Value<'_, T>> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op.name() });
        }
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = inputs.iter().any(|i| nodes[i.0].requires_grad);
        let id = NodeId(nodes.len());
        nodes.push(Node {
            op,
            inputs: inputs.to_vec(),
            value,
            requires_grad,
            grad: None,
        });
        Ok(Value { graph: self, id })
    }

    pub(crate) fn with_value<R>(&self, id: NodeId, f: impl FnOnce(&Tensor<T>) -> R) -> R {
        f(&self.nodes.borrow()[id.0].value)
    }

    pub(crate) fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes.borrow()[id.0].requires_grad
    }

    pub fn grad_of(&self, id: NodeId) -> Option<Tensor<T>> {
        self.nodes.borrow()[id.0].grad.clone()
    }

    /// Reverse sweep from a scalar root. Gradients are added to whatever the
    /// requires-grad ancestors already hold.
    pub fn backward(&self, root: Value<'_, T>) -> Result<()> {
        let nodes = self.nodes.borrow();
        let root_node = &nodes[root.id.0];
        if root_node.value.numel() != 1 {
            return Err(Error::contract(format!(
                "backward root must be scalar, got shape {:?}",
                root_node.value.shape()
            )));
        }
        let mut adjoint: Vec<Option<Tensor<T>>> = vec![None; root.id.0 + 1];
        adjoint[root.id.0] = Some(Tensor::ones(root_node.value.shape().to_vec()));

        for idx in (0..=root.id.0).rev() {
            let node = &nodes[idx];
            if !node.requires_grad || node.inputs.is_empty() {
                continue;
            }
            let Some(upstream) = adjoint[idx].as_ref() else {
                continue;
            };
            let inputs: Vec<&Tensor<T>> = node.inputs.iter().map(|i| &nodes[i.0].value).collect();
            let needs: Vec<bool> = node.inputs.iter().map(|i| nodes[i.0].requires_grad).collect();
            let grads = backward_rule(&node.op, &inputs, &node.value, upstream, &needs);
            for (input, grad) in node.inputs.iter().zip(grads) {
                let Some(grad) = grad else { continue };
                match &mut adjoint[input.0] {
                    Some(acc) => acc.add_assign(&grad),
                    slot @ None => *slot = Some(grad),
                }
            }
        }
        drop(nodes);

        let mut nodes = self.nodes.borrow_mut();
        for (idx, adj) in adjoint.into_iter().enumerate() {
            let Some(adj) = adj else { continue };
            let node = &mut nodes[idx];
            if !node.requires_grad {
                continue;
            }
            match &mut node.grad {
                Some(g) => g.add_assign(&adj),
                slot @ None => *slot = Some(adj),
            }
        }
        Ok(())
    }

    /// Adds `scale` times the gradient of every bound parameter into the store.
    /// A parameter bound but unreached by backward receives an explicit zero.
    pub fn accumulate_param_grads(&self, store: &mut ParameterStore<T>, scale: T) -> Result<()> {
        let nodes = self.nodes.borrow();
        for (name, id) in self.bound.borrow().iter() {
            let node = &nodes[id.0];
            let grad = match &node.grad {
                Some(g) => g.map(|x| x * scale),
                None => Tensor::zeros(node.value.shape().to_vec()),
            };
            store.accumulate_grad(name, &grad)?;
        }
        Ok(())
    }

    /// Names of parameters bound as trainable in this graph.
    pub fn bound_parameters(&self) -> Vec<String> {
        let mut names: Vec<String> = self.bound.borrow().keys().cloned().collect();
        names.sort();
        names
    }
}

/// Handle to a node of a [`Graph`]. Cheap to copy; all ops return new handles.
#[derive(Clone, Copy)]
pub struct Value<'g, T: Scalar> {
    pub(crate) graph: &'g Graph<T>,
    pub(crate) id: NodeId,
}

impl<'g, T: Scalar> Value<'g, T> {
    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn graph(&self) -> &'g Graph<T> {
        self.graph
    }

    pub fn tensor(&self) -> Tensor<T> {
        self.graph.with_value(self.id, Tensor::clone)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.with_value(self.id, |t| t.shape().to_vec())
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.graph.with_value(self.id, |t| t.data().to_vec())
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.graph.with_value(self.id, Tensor::to_f64_vec)
    }

    /// The single value of a one-element node.
    pub fn item(&self) -> T {
        self.graph.with_value(self.id, |t| t.data()[0])
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.requires_grad(self.id)
    }

    pub fn grad(&self) -> Option<Tensor<T>> {
        self.graph.grad_of(self.id)
    }

    /// Copy of this value as a constant leaf; gradients stop here.
    pub fn detach(&self) -> Value<'g, T> {
        self.graph.constant(self.tensor())
    }

    pub fn backward(&self) -> Result<()> {
        self.graph.backward(*self)
    }
}

impl<T: Scalar> fmt::Debug for Value<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.graph
            .with_value(self.id, |t| write!(f, "Value#{}{:?}", self.id.0, t.shape()))
    }
}
