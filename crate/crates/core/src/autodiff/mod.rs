//! Reverse-mode automatic differentiation over dense arrays.

mod checkpoint;
mod gradcheck;
mod graph;
mod ops;
mod params;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, MAGIC};
pub use gradcheck::{check_parameters, gradient_check, GradCheckReport, ParamCheckOptions, DEFAULT_FLOOR};
pub use graph::{Graph, NodeId, Value};
pub use params::{Parameter, ParameterStore};
pub use tensor::Tensor;
