//! Structure-activity relationship extraction from chemistry documents.
//!
//! Documents arrive as page images plus layout regions. Molecule regions go
//! through structure recognition and identifier recognition, table regions are
//! screened and converted to HTML, and the alignment stage links identifiers to
//! table rows to produce [`domain::SarRecord`]s.

pub mod align;
pub mod api;
pub mod backends;
pub mod domain;
pub mod export;
pub mod fixtures;
pub mod metrics;
pub mod pipeline;
pub mod smiles;
pub mod stats;
pub mod tableparse;
