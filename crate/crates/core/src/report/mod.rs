//! Tables and plots written by the command-line tool.

mod radial;
mod tables;

pub use radial::{radial_plot_svg, RADIAL_PALETTE};
pub use tables::{
    feature_change_csv, feature_pairs_csv, format_value, raw_metrics_csv, scaled_metrics_csv, NA,
};
