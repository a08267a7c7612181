//! Trip cleaning, feature engineering, table assembly, and preprocessing.

pub mod assemble;
pub mod cleaning;
pub mod features;
pub mod preprocess;
pub mod table;

pub use assemble::{assemble, assemble_with, RadiiConfig};
pub use cleaning::{clean_routed, clean_trips, CleaningRules, RemovalBucket, RemovalReport};
pub use preprocess::{fit_preprocess, preprocess, FittedPreprocess, TransformLog};
pub use table::{load_table, save_table, ColumnDef, FeatureGroup, FeatureTable, RowKey};
