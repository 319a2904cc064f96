//! Detection and automatic repair of lithography weakpoints that appear where
//! standard cells abut in a row-based placement.
//!
//! The crate models a single-height standard-cell placement on an integer
//! site/row grid ([`placement`]), matches known-bad layout geometries against
//! windows of that placement ([`patterns`]), and repairs the matches with a
//! randomized sequence of cell flips and one-site shifts that is re-verified
//! after every pass ([`autofix`]). Synthetic cell libraries, placements, and
//! pattern libraries for benchmarking come from [`synth`]; the text file
//! formats and reports live in [`formats`].
//!
//! All coordinates are integer database units (DBU). Geometry comparison is
//! exact: layer shapes are reduced to a canonical slab decomposition
//! ([`geom::canonicalize`]) so that equality of `Vec<Rect>` is equality of the
//! covered region.

pub mod autofix;
pub mod formats;
pub mod geom;
pub mod patterns;
pub mod placement;
pub mod synth;

pub use autofix::{
    available_ops, decide, execute, fix_loop, identify, profile, CellAttrs, ExecOutcome,
    FixConfig, FixError, FixOperation, FixReport, FixStatus, IdentifiedPair, OpLogEntry, Profile,
    SkipReason, VerifyMode,
};
pub use formats::{
    dbu_to_um, parse_design, parse_iteration_report, parse_patterns, serialize_design,
    serialize_patterns, write_iteration_report, write_markers, write_op_log, ParseError,
    ParseErrorKind,
};
pub use geom::{
    canonicalize, canonicalize_map, clip_translate, mirror_x, transform_rect, Dbu, GeomError,
    LayerGeometry, LayerMap, Orientation, Rect,
};
pub use patterns::{
    match_at, scan_boundaries, scan_full, ErrorMarker, Pattern, PatternError, PatternLibrary,
};
pub use placement::{
    CellMaster, GridSpec, Instance, MasterId, Placement, PlacementError, Violation,
};
pub use synth::{derive_patterns, gen_masters, gen_placement, PlantedAnchor, SynthConfig, SynthError};
