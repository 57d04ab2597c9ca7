// Each chapter becomes the doc comment of an empty module, so
// `cargo test --doc -p tsvd-book` runs every listing in the guide.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/weights.md")]
pub mod weights {}
#[doc = include_str!("src/location-scale.md")]
pub mod location_scale {}
#[doc = include_str!("src/regression.md")]
pub mod regression {}
#[doc = include_str!("src/total-svd.md")]
pub mod total_svd {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
