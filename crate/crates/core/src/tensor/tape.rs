use std::cell::{Ref, RefCell};

use super::ops::{self, Op};
use super::{numeric_checks_enabled, Real, Tensor, TensorError};

pub(crate) struct Node<T> {
    pub value: Tensor<T>,
    pub op: Op<T>,
    pub needs_grad: bool,
}

pub(crate) struct Inner<T> {
    pub nodes: Vec<Node<T>>,
    leaf_grads: Vec<Option<Vec<T>>>,
    consumed: bool,
}

/// Ordered record of executed operations. Nodes are appended in execution
/// order, so every node's inputs precede it and the reverse sweep is a plain
/// backwards walk.
pub struct Tape<T: Real> {
    pub(crate) inner: RefCell<Inner<T>>,
}

/// Handle to a value recorded on a [`Tape`].
pub struct Var<'t, T: Real> {
    pub(crate) tape: &'t Tape<T>,
    pub(crate) id: usize,
}

impl<T: Real> Clone for Var<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<T: Real> Copy for Var<'_, T> {}

impl<T: Real> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).finish()
    }
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            inner: RefCell::new(Inner {
                nodes: Vec::new(),
                leaf_grads: Vec::new(),
                consumed: false,
            }),
        }
    }

    pub fn leaf(&self, value: Tensor<T>, requires_grad: bool) -> Var<'_, T> {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: requires_grad,
        });
        inner.leaf_grads.push(None);
        Var {
            tape: self,
            id: inner.nodes.len() - 1,
        }
    }

    /// Leaf that receives a gradient on backward.
    pub fn param(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf(value, true)
    }

    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf(value, false)
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gradient accumulated into a leaf by the last backward pass.
    pub fn grad(&self, var: Var<'_, T>) -> Option<Tensor<T>> {
        let inner = self.inner.borrow();
        let node = &inner.nodes[var.id];
        inner.leaf_grads[var.id].as_ref().map(|g| Tensor {
            shape: node.value.shape.clone(),
            data: g.clone(),
        })
    }

    pub(crate) fn push(
        &self,
        op_name: &'static str,
        value: Tensor<T>,
        op: Op<T>,
    ) -> Result<Var<'_, T>, TensorError> {
        if numeric_checks_enabled() && !value.is_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        let mut inner = self.inner.borrow_mut();
        let needs_grad = op.inputs().iter().any(|&i| inner.nodes[i].needs_grad);
        inner.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        inner.leaf_grads.push(None);
        Ok(Var {
            tape: self,
            id: inner.nodes.len() - 1,
        })
    }

    fn run_backward(&self, loss: usize, retain: bool) -> Result<(), TensorError> {
        let mut inner = self.inner.borrow_mut();
        if inner.consumed {
            return Err(TensorError::Consumed);
        }
        let shape = inner.nodes[loss].value.shape.clone();
        if inner.nodes[loss].value.numel() != 1 {
            return Err(TensorError::NonScalar(shape));
        }

        let mut grads: Vec<Option<Vec<T>>> = (0..=loss).map(|_| None).collect();
        grads[loss] = Some(vec![T::one()]);
        let mut leaf_updates: Vec<(usize, Vec<T>)> = Vec::new();
        {
            let nodes = &inner.nodes;
            for id in (0..=loss).rev() {
                let Some(g) = grads[id].take() else { continue };
                let node = &nodes[id];
                if !node.needs_grad {
                    continue;
                }
                if let Op::Leaf = node.op {
                    leaf_updates.push((id, g));
                    continue;
                }
                let needs = |i: usize| nodes[i].needs_grad;
                for (input, gi) in ops::vjp(nodes, id, &g, &needs) {
                    match &mut grads[input] {
                        Some(acc) => acc.iter_mut().zip(&gi).for_each(|(a, b)| *a = *a + *b),
                        slot => *slot = Some(gi),
                    }
                }
            }
        }
        for (id, g) in leaf_updates {
            match &mut inner.leaf_grads[id] {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a = *a + *b),
                slot => *slot = Some(g),
            }
        }
        if !retain {
            inner.consumed = true;
        }
        Ok(())
    }
}

impl<'t, T: Real> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Tensor<T>> {
        Ref::map(self.tape.inner.borrow(), |inner| &inner.nodes[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape.clone()
    }

    pub fn to_tensor(&self) -> Tensor<T> {
        self.value().clone()
    }

    pub fn item(&self) -> T {
        self.value().data[0]
    }

    /// Reverse sweep from this scalar. Consumes the tape: a second call fails
    /// with [`TensorError::Consumed`].
    pub fn backward(&self) -> Result<(), TensorError> {
        self.tape.run_backward(self.id, false)
    }

    /// Reverse sweep that leaves the tape usable for another pass. Leaf
    /// gradients accumulate across passes.
    pub fn backward_retain(&self) -> Result<(), TensorError> {
        self.tape.run_backward(self.id, true)
    }

    pub fn grad(&self) -> Option<Tensor<T>> {
        self.tape.grad(*self)
    }
}
