pub mod nn;
pub mod tape;
pub use tape::{GradStore, ParamStore, Tape, TensorData, Var};
