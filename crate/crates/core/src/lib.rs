//! Reference interpreter for the quantum lambda calculus Q*.

pub mod computation;
pub mod harness;
pub mod mixed;
pub mod quantum;
pub mod reduction;
pub mod syntax;
pub mod wellform;
