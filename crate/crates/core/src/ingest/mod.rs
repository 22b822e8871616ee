//! Kenneth French data-library files: parsing, dataset registry, cache.

mod cache;
mod parse;
mod registry;

pub use cache::{dataset_dir, download, fetch, load_path, load_vintage, store, vintages, Fetched};
pub use parse::{from_panel, parse_french_csv, serialize_sections, to_panel, RawSection};
pub use registry::{
    canonical_panel, portfolio_label, select_monthly, DatasetId, DatasetKind, Region, BASE_URL,
};
