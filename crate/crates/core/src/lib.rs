// SPDX-License-Identifier: MIT OR Apache-2.0

pub mod clustering;
pub mod encoding;
pub mod error;
pub mod evolution;
pub mod explanation;
pub mod llm;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod segmentation;
pub mod synthgen;

pub use error::{Error, Result};

/// The guide's chapters; their snippets run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/segmentation.md")]
    mod segmentation {}
    #[doc = include_str!("../../../book/src/routines.md")]
    mod routines {}
    #[doc = include_str!("../../../book/src/evolution.md")]
    mod evolution {}
    #[doc = include_str!("../../../book/src/masses.md")]
    mod masses {}
    #[doc = include_str!("../../../book/src/explanations.md")]
    mod explanations {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
