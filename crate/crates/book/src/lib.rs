//! mdbook can't run listings that need this workspace's crates, so each
//! chapter is pulled in as a module doc and `cargo test --doc` runs them.
//! One module per chapter, so a failure names its file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}
#[doc = include_str!("../../../book/src/skeptic.md")]
pub mod skeptic {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
#[doc = include_str!("../../../book/src/sessions.md")]
pub mod sessions {}
