use rand::Rng;

use super::mlp::{Activation, Mlp, MlpSpec};
use crate::autodiff::{Graph, ParameterStore, Value};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Soft attention of each pedestrian over the cells of the encoded scene grid.
///
/// A small MLP scores every (cell, pedestrian) pair from the concatenation of
/// the cell features and the pedestrian encoding; a softmax over cells turns the
/// scores into weights, and the context is the weighted sum of cell features.
#[derive(Clone, Debug)]
pub struct PhysicalAttention {
    scorer: Mlp,
    cell_dim: usize,
    query_dim: usize,
}

impl PhysicalAttention {
    pub fn new(prefix: &str, cell_dim: usize, query_dim: usize, hidden: usize) -> Result<Self> {
        let scorer = Mlp::new(
            prefix,
            MlpSpec::new(vec![cell_dim + query_dim, hidden, 1], Activation::Tanh, Activation::None),
        )?;
        Ok(PhysicalAttention {
            scorer,
            cell_dim,
            query_dim,
        })
    }

    pub fn scorer(&self) -> &Mlp {
        &self.scorer
    }

    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, store: &mut ParameterStore<T>, rng: &mut R) -> Result<()> {
        self.scorer.init(store, rng)
    }

    /// Attention weights `[N, K]` for `cells: [K, C]` and `queries: [N, D]`.
    pub fn weights<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        cells: Value<'g, T>,
        queries: Value<'g, T>,
    ) -> Result<Value<'g, T>> {
        let cs = cells.shape();
        let qs = queries.shape();
        if cs.len() != 2 || cs[1] != self.cell_dim || cs[0] == 0 {
            return Err(Error::dim("physical_attention", &cs, &[self.cell_dim]));
        }
        if qs.len() != 2 || qs[1] != self.query_dim {
            return Err(Error::dim("physical_attention", &qs, &[self.query_dim]));
        }
        let (k, n) = (cs[0], qs[0]);
        // pair row i * K + k holds [cell k || query i]
        let cell_idx: Vec<usize> = (0..n).flat_map(|_| 0..k).collect();
        let query_idx: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat(i).take(k)).collect();
        let pairs = Value::concat(&[cells.gather_rows(&cell_idx)?, queries.gather_rows(&query_idx)?], 1)?;
        let scores = self.scorer.forward(g, store, pairs)?.reshape(&[n, k])?;
        scores.softmax(1)
    }

    /// Context vectors `[N, C]`.
    pub fn forward<'g, T: Scalar>(
        &self,
        g: &'g Graph<T>,
        store: &ParameterStore<T>,
        cells: Value<'g, T>,
        queries: Value<'g, T>,
    ) -> Result<Value<'g, T>> {
        self.weights(g, store, cells, queries)?.matmul(cells)
    }
}
