//! Scoring a generated spec against a reference: graph edit distance for
//! structure, embedded attribute serializations for content.

pub mod embed;
pub mod ged;
pub mod graph;
pub mod score;

pub use embed::{cosine, Embedder, EmbedderUnavailable, ExternalEmbedder, FallbackEmbedder, EMBED_DIM};
pub use ged::{ged, EditPath, GedResult, DEFAULT_GED_TIMEOUT};
pub use graph::{build_graph, ResourceGraph};
pub use score::{attribute_score, score_specs, serialize_node, structure_score, ScoreReport};
