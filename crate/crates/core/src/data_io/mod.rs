//! Corpus ingestion, basal preprocessing and chain persistence.

pub mod archive;
pub mod basal;
pub mod checkpoint;
pub mod codec;
pub mod container;
pub mod corpus;

pub use archive::{read_archive, write_archive, Archive, ArchiveHeader, ArchiveWriter};
pub use basal::{apply_basal, centered_moving_average, remove_basal, DEFAULT_BASAL_WINDOW};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, RunInfo};
pub use corpus::{load_corpus, load_metadata, save_corpus, save_metadata};
