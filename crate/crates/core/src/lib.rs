//! Prioritized metric embeddings with exact arithmetic and exhaustive audits.

pub mod audit;
pub mod bound;
pub mod embedding;
pub mod fold;
pub mod frechet;
pub mod generate;
pub mod graph;
pub mod metric;
pub mod petal;
pub mod priority;
pub mod scalar;
pub mod separator;
pub mod tree;
pub mod tree_embed;
pub mod ultrametric;

pub use audit::{dimension_report, distortion_report, DimensionReport, DistortionReport, Extended};
pub use bound::{BoundSpec, BoundVars};
pub use embedding::Embedding;
pub use frechet::{embed_linf_dimension, embed_linf_distortion, FrechetEmbedding, SampleConfig};
pub use graph::{shortest_path_metric, WeightedGraph};
pub use metric::{linf_distance, validate_metric, MetricSpace};
pub use priority::{default_priority_function, validate_priority_function, PriorityFunction, PriorityOrdering};
pub use petal::{petal_decomposition_spanning_tree, SpanningTree};
pub use scalar::Scalar;
pub use tree::WeightedTree;
pub use tree_embed::{prioritized_tree_embedding, TreeEmbedding};
pub use ultrametric::{build_ultrametric, UltrametricTree};
