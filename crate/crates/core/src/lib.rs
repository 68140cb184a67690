//! Conditioning inputs for Gaussian-guided object editing in driving video.
//!
//! A scene layout (cameras and 3D box tracks) is edited with reposition,
//! insert or delete commands. For each edit the crate renders the object's
//! Gaussian asset, depth-aware boxes and box wireframes, builds inpainting
//! masks and a reference image, and writes a conditioning bundle. Detections
//! on edited clips are scored with longitudinal-error-tolerant metrics.
//!
//! The guide under `book/` walks through each stage; its code blocks are
//! compiled and run as doctests of this crate.

pub mod gaussians;
pub mod geometry;
pub mod layout;
pub mod raster;
pub mod dataprep;
pub mod evalkit;
pub mod editing;
pub mod formats;
pub mod pipeline;
pub mod demo;

// Keeps the guide's snippets compiling against the current API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/conventions.md")]
    mod conventions {}
    #[doc = include_str!("../../../book/src/gaussians.md")]
    mod gaussians {}
    #[doc = include_str!("../../../book/src/layout.md")]
    mod layout {}
    #[doc = include_str!("../../../book/src/editing.md")]
    mod editing {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
