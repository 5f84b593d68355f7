//! Graph representation for convolutional networks targeting crossbar
//! accelerators.
//!
//! A model is loaded from the JSON model format ([`parse_model`]), shapes are
//! inferred ([`infer_shapes`]) and the graph is brought into canonical form
//! ([`canonicalize`]): batch normalization folded into the preceding base
//! layer, padding and bias split out of convolutions, and every node tagged as
//! a base (crossbar) or non-base (vector unit) operation.

mod canon;
mod error;
mod fold;
mod graph;
mod infer;
pub mod interp;
mod parse;
mod shape;

pub use canon::{canonicalize, canonicalize_with, CanonicalizeOptions, DEFAULT_QUANT_BITS};
pub use error::{IrError, Result};
pub use fold::fold_batchnorm;
pub use graph::{
    ActivationFn, ConcatAxis, DuplicateOf, LayerNode, NNGraph, Op, OpKind, Params, Role,
};
pub use infer::infer_shapes;
pub use parse::{load_model, load_weights, parse_model, write_model};
pub use shape::{KernelSpec, PadAmounts, Padding, PoolSpec, TensorShape};
