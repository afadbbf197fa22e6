//! Compiles the book chapters as documentation so that `cargo test` runs
//! their code samples.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/exponential_sums.md")]
pub mod exponential_sums {}

#[doc = include_str!("../../../book/src/oscillations.md")]
pub mod oscillations {}

#[doc = include_str!("../../../book/src/holder.md")]
pub mod holder {}

#[doc = include_str!("../../../book/src/diophantine.md")]
pub mod diophantine {}

#[doc = include_str!("../../../book/src/cantor.md")]
pub mod cantor {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
