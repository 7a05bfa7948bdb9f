//! Dataset layout, per-machine configuration, and train/score/search/export
//! orchestration.

mod bundle;
mod config;
mod dataset;
mod export;
mod metadata;
mod scores;
mod search;
mod train;

pub use bundle::{Bundle, Manifest, SectionEntry, MANIFEST_FILE};
pub use config::{
    section_seed, smote_seed, GmmSettings, MachineConfig, MachineOverrides, PipelineConfig,
    SmoteConfig, FALLBACK_R,
};
pub use dataset::{
    list_wavs, load_split, load_split_map, split_dir, Clip, LoadedSplit, SkippedFile,
};
pub use export::{
    export_distances, DistanceExport, DistanceRow, RowKind, DISTANCES_FILE, ROWS_FILE,
};
pub use metadata::{parse_filename, ClipMetadata, ClipName, Domain, Label, MachineType, Split};
pub use scores::{group_scores, read_scores, sort_records, write_scores, ScoreRecord};
pub use search::{default_grid, grid_search_r, SearchResult, SearchRow};
pub use train::{
    featurize, rank_clip, rank_clips, score_clips, score_featured, train_from_vectors,
    train_machine, train_section, twfr_vectors, FeaturedClip, RankedClip, SectionInfo,
    SectionModel,
};
