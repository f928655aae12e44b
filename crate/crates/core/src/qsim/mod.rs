//! Dense complex linear algebra and pure-state simulation.

pub mod gates;
mod matrix;
mod state;

pub use matrix::{ComplexMatrix, C64};
pub use state::{
    dense_from_product, dense_from_product_with_limit, qubit_bit, BornSampler, ProductState,
    PureState, DEFAULT_DENSE_LIMIT,
};

pub(crate) use matrix::{ONE, ZERO};
pub(crate) use state::apply_local_gate;
