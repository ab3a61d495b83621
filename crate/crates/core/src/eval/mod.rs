//! Segmentation metrics and the evaluation document.

mod confusion;
mod metrics;
#[cfg(test)]
mod tests;

pub use confusion::{AbsentClasses, ConfusionMatrix};
pub use metrics::{BinMetrics, DistanceBins, Evaluator, Metrics, ScopeCounts, Scope};
