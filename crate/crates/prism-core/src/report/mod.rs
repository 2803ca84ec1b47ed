//! Report rendering: indented rule-tree text, fixed-width estimate tables,
//! and static SVG plots.

mod svg;
mod text;

pub use svg::{render_forest_svg, render_posterior_svg, render_study_svg, LinearScale};
pub use text::{render_estimates_text, render_tree_text};
