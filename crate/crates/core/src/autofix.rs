//! The repair flow: identify the cells under a marker, profile their
//! surroundings, pick one of the applicable local edits at random, apply it,
//! and re-verify — repeating until the design scans clean or an iteration
//! budget is exhausted.
//!
//! Every edit preserves placement legality by construction: flips keep the
//! row-parity class of the orientation, and shifts go through
//! [`Placement::move_x`], which rejects overlaps and out-of-row moves. A
//! rejected edit is recorded as skipped and consumes that marker's turn for
//! the pass.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::{Dbu, Orientation, Rect};
use crate::patterns::{scan_boundaries, scan_full, ErrorMarker, PatternLibrary};
use crate::placement::{Placement, PlacementError};

/// The one or two cells a marker is attributed to. `left` is always present;
/// when both are present `left` is the lower-x cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentifiedPair {
    pub left: String,
    pub right: Option<String>,
}

/// Snapshot of one cell's placement state, as printed in the operation log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellAttrs {
    pub name: String,
    pub bbox: Rect,
    pub orient: Orientation,
}

/// Everything the decision step looks at for one marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    pub marker: ErrorMarker,
    pub left: CellAttrs,
    pub right: Option<CellAttrs>,
    /// free sites to the left of the left cell
    pub gap_left_of_left: u32,
    /// free sites to the right of the right cell (of the single cell when
    /// there is no right cell)
    pub gap_right_of_right: u32,
}

/// One local edit. Flips mirror a cell in place about its own vertical axis;
/// shifts move a cell by exactly one site away from the boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixOperation {
    FlipLeft { cell: String },
    FlipRight { cell: String },
    FlipBoth { left: String, right: String },
    ShiftLeftCellLeft { cell: String },
    ShiftRightCellRight { cell: String },
}

impl FixOperation {
    pub fn label(&self) -> &'static str {
        match self {
            FixOperation::FlipLeft { .. } => "Flip left cell",
            FixOperation::FlipRight { .. } => "Flip right cell",
            FixOperation::FlipBoth { .. } => "Flip both cells",
            FixOperation::ShiftLeftCellLeft { .. } => "Shift left cell",
            FixOperation::ShiftRightCellRight { .. } => "Shift right cell",
        }
    }

    /// Cells the operation touches, left first.
    pub fn targets(&self) -> Vec<&str> {
        match self {
            FixOperation::FlipLeft { cell }
            | FixOperation::FlipRight { cell }
            | FixOperation::ShiftLeftCellLeft { cell }
            | FixOperation::ShiftRightCellRight { cell } => vec![cell],
            FixOperation::FlipBoth { left, right } => vec![left, right],
        }
    }
}

/// Why an operation was rejected instead of applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    Overlap,
    OutOfBounds,
    IllegalOrientation,
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SkipReason::Overlap => "overlap",
            SkipReason::OutOfBounds => "out of bounds",
            SkipReason::IllegalOrientation => "illegal orientation",
        })
    }
}

/// Result of applying one operation. `Applied` carries before/after snapshots
/// of the touched cells (in [`FixOperation::targets`] order); `Skipped` means
/// the placement is unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecOutcome {
    Applied { before: Vec<CellAttrs>, after: Vec<CellAttrs> },
    Skipped { reason: SkipReason },
}

/// One line of the fix history: what was done about one marker in one pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpLogEntry {
    /// 1-based fix pass this operation belongs to
    pub iteration: u32,
    pub marker: ErrorMarker,
    pub op: FixOperation,
    pub outcome: ExecOutcome,
}

/// Which scan re-verification runs between fix passes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VerifyMode {
    #[default]
    Full,
    Boundaries,
}

impl std::fmt::Display for VerifyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VerifyMode::Full => "full",
            VerifyMode::Boundaries => "boundaries",
        })
    }
}

impl std::str::FromStr for VerifyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<VerifyMode, String> {
        match s {
            "full" => Ok(VerifyMode::Full),
            "boundaries" => Ok(VerifyMode::Boundaries),
            other => Err(format!("unknown verify mode `{other}` (expected `full` or `boundaries`)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixConfig {
    pub seed: u64,
    pub max_iterations: u32,
    pub verify_mode: VerifyMode,
}

impl Default for FixConfig {
    fn default() -> FixConfig {
        FixConfig { seed: 0, max_iterations: 10, verify_mode: VerifyMode::Full }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixStatus {
    Clean,
    MaxIterationsReached,
}

impl std::fmt::Display for FixStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FixStatus::Clean => "clean",
            FixStatus::MaxIterationsReached => "max_iterations_reached",
        })
    }
}

/// Outcome of a whole [`fix_loop`] run.
///
/// `iteration_counts[0]` is the marker count of the initial scan; each later
/// entry is the count after one more fix pass. The final entry is `0` exactly
/// when `status` is [`FixStatus::Clean`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixReport {
    pub iteration_counts: Vec<usize>,
    pub log: Vec<OpLogEntry>,
    pub status: FixStatus,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FixError {
    #[error("orphan marker: `{pattern}` window ({llx},{lly})-({urx},{ury}) in row {row} intersects no instances")]
    OrphanMarker { pattern: String, row: u32, llx: Dbu, lly: Dbu, urx: Dbu, ury: Dbu },
    #[error("invalid fix configuration: {0}")]
    Config(String),
    #[error("placement has legality violations before fixing")]
    IllegalPlacement,
    #[error(transparent)]
    Placement(#[from] PlacementError),
}

fn cell_attrs(placement: &Placement, name: &str) -> Result<CellAttrs, FixError> {
    let inst = placement
        .instance(name)
        .ok_or_else(|| PlacementError::UnknownInstance(name.to_string()))?;
    Ok(CellAttrs {
        name: inst.name.clone(),
        bbox: placement.placed_bbox(inst),
        orient: inst.orient,
    })
}

/// Attribute a marker to the placed cell pair responsible for it.
///
/// With two or more instances under the marker, the two nearest the marker
/// center are taken (ties broken toward lower `x_site`). With exactly one,
/// the marker is widened toward the cell edge nearer its center (ties toward
/// the left) and the abutting neighbor on that side, if any, is recruited.
/// A marker over no instances at all is an error.
pub fn identify(placement: &Placement, marker: &ErrorMarker) -> Result<IdentifiedPair, FixError> {
    let cands: Vec<_> = placement
        .instances_intersecting(marker.bbox)
        .into_iter()
        .filter(|i| i.row == marker.anchor_row)
        .collect();
    if cands.is_empty() {
        return Err(FixError::OrphanMarker {
            pattern: marker.pattern_name.clone(),
            row: marker.anchor_row,
            llx: marker.bbox.llx,
            lly: marker.bbox.lly,
            urx: marker.bbox.urx,
            ury: marker.bbox.ury,
        });
    }
    // doubled coordinates keep the center exact in integers
    let center2 = marker.bbox.llx + marker.bbox.urx;
    let dist2 = |bbox: Rect| -> Dbu {
        if center2 < 2 * bbox.llx {
            2 * bbox.llx - center2
        } else if center2 > 2 * bbox.urx {
            center2 - 2 * bbox.urx
        } else {
            0
        }
    };
    if cands.len() >= 2 {
        let mut ranked: Vec<_> = cands
            .iter()
            .map(|i| (dist2(placement.placed_bbox(i)), i.x_site, *i))
            .collect();
        ranked.sort_unstable_by_key(|&(d, x, _)| (d, x));
        let (a, b) = (ranked[0].2, ranked[1].2);
        let (l, r) = if a.x_site < b.x_site { (a, b) } else { (b, a) };
        return Ok(IdentifiedPair { left: l.name.clone(), right: Some(r.name.clone()) });
    }
    let only = cands[0];
    let bbox = placement.placed_bbox(only);
    let d_left = (center2 - 2 * bbox.llx).abs();
    let d_right = (2 * bbox.urx - center2).abs();
    if d_left <= d_right {
        if placement.gap_left(&only.name)? == 0 {
            if let Some(n) = placement.neighbor_left(&only.name)? {
                return Ok(IdentifiedPair {
                    left: n.name.clone(),
                    right: Some(only.name.clone()),
                });
            }
        }
    } else if placement.gap_right(&only.name)? == 0 {
        if let Some(n) = placement.neighbor_right(&only.name)? {
            return Ok(IdentifiedPair {
                left: only.name.clone(),
                right: Some(n.name.clone()),
            });
        }
    }
    Ok(IdentifiedPair { left: only.name.clone(), right: None })
}

/// Gather the cell attributes and outer gaps the decision step needs.
pub fn profile(
    placement: &Placement,
    pair: &IdentifiedPair,
    marker: &ErrorMarker,
) -> Result<Profile, FixError> {
    let left = cell_attrs(placement, &pair.left)?;
    let right = match &pair.right {
        Some(name) => Some(cell_attrs(placement, name)?),
        None => None,
    };
    let rightmost = pair.right.as_deref().unwrap_or(&pair.left);
    Ok(Profile {
        marker: marker.clone(),
        left,
        right,
        gap_left_of_left: placement.gap_left(&pair.left)?,
        gap_right_of_right: placement.gap_right(rightmost)?,
    })
}

/// Operations applicable to a profile, in fixed declaration order: flip left,
/// flip right, flip both, shift left cell left, shift right cell right.
/// Flips are always offered; a shift is offered only when the corresponding
/// outer gap has at least one free site. For a single-cell profile that cell
/// plays both roles and only its own flip and shifts apply.
pub fn available_ops(prof: &Profile) -> Vec<FixOperation> {
    let mut ops = Vec::with_capacity(5);
    let left = &prof.left.name;
    match &prof.right {
        Some(right) => {
            ops.push(FixOperation::FlipLeft { cell: left.clone() });
            ops.push(FixOperation::FlipRight { cell: right.name.clone() });
            ops.push(FixOperation::FlipBoth { left: left.clone(), right: right.name.clone() });
            if prof.gap_left_of_left >= 1 {
                ops.push(FixOperation::ShiftLeftCellLeft { cell: left.clone() });
            }
            if prof.gap_right_of_right >= 1 {
                ops.push(FixOperation::ShiftRightCellRight { cell: right.name.clone() });
            }
        }
        None => {
            ops.push(FixOperation::FlipLeft { cell: left.clone() });
            if prof.gap_left_of_left >= 1 {
                ops.push(FixOperation::ShiftLeftCellLeft { cell: left.clone() });
            }
            if prof.gap_right_of_right >= 1 {
                ops.push(FixOperation::ShiftRightCellRight { cell: left.clone() });
            }
        }
    }
    ops
}

/// Pick one applicable operation uniformly at random.
pub fn decide<R: Rng + ?Sized>(prof: &Profile, rng: &mut R) -> FixOperation {
    let mut ops = available_ops(prof);
    let i = rng.random_range(0..ops.len());
    ops.swap_remove(i)
}

fn skip_reason(err: &PlacementError) -> Option<SkipReason> {
    match err {
        PlacementError::Overlap { .. } => Some(SkipReason::Overlap),
        PlacementError::OutOfBounds { .. } => Some(SkipReason::OutOfBounds),
        PlacementError::IllegalOrientation { .. } => Some(SkipReason::IllegalOrientation),
        _ => None,
    }
}

/// Apply one operation to the placement.
///
/// Geometric rejections (overlap, out of row, illegal orientation) come back
/// as [`ExecOutcome::Skipped`] with the placement untouched; naming a cell
/// that does not exist is an error. `FlipBoth` is atomic: if the second flip
/// is rejected the first is rolled back.
pub fn execute(placement: &mut Placement, op: &FixOperation) -> Result<ExecOutcome, FixError> {
    let before: Vec<CellAttrs> = op
        .targets()
        .iter()
        .map(|name| cell_attrs(placement, name))
        .collect::<Result<_, _>>()?;

    fn flip(placement: &mut Placement, cell: &str) -> Result<(), PlacementError> {
        let orient = placement.instance(cell).expect("snapshotted target exists").orient;
        placement.set_orientation(cell, orient.flip_h())
    }

    let result: Result<(), PlacementError> = match op {
        FixOperation::FlipLeft { cell } | FixOperation::FlipRight { cell } => flip(placement, cell),
        FixOperation::FlipBoth { left, right } => match flip(placement, left) {
            Err(e) => Err(e),
            Ok(()) => match flip(placement, right) {
                Ok(()) => Ok(()),
                Err(e) => {
                    flip(placement, left).expect("rollback of a just-applied flip");
                    Err(e)
                }
            },
        },
        FixOperation::ShiftLeftCellLeft { cell } => {
            let x = placement.instance(cell).expect("target exists").x_site;
            match x.checked_sub(1) {
                Some(nx) => placement.move_x(cell, nx),
                None => Err(PlacementError::OutOfBounds {
                    inst: cell.clone(),
                    x_site: 0,
                    width_sites: 0,
                    row_len_sites: placement.grid().row_len_sites,
                }),
            }
        }
        FixOperation::ShiftRightCellRight { cell } => {
            let x = placement.instance(cell).expect("target exists").x_site;
            placement.move_x(cell, x + 1)
        }
    };

    match result {
        Ok(()) => {
            let after = op
                .targets()
                .iter()
                .map(|name| cell_attrs(placement, name))
                .collect::<Result<_, _>>()?;
            Ok(ExecOutcome::Applied { before, after })
        }
        Err(e) => match skip_reason(&e) {
            Some(reason) => Ok(ExecOutcome::Skipped { reason }),
            None => Err(e.into()),
        },
    }
}

/// Scan, then repeatedly repair and re-scan until clean or out of budget.
///
/// Each pass walks the current marker list in order, re-identifying every
/// marker against the live placement (earlier operations in the same pass are
/// visible to later markers). The RNG is seeded from `config.seed`, so the
/// whole run is a pure function of its inputs.
pub fn fix_loop(
    placement: &mut Placement,
    library: &PatternLibrary,
    config: &FixConfig,
) -> Result<FixReport, FixError> {
    if config.max_iterations == 0 {
        return Err(FixError::Config("max_iterations must be at least 1".into()));
    }
    if !placement.check_legality().is_empty() {
        return Err(FixError::IllegalPlacement);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut iteration_counts = Vec::new();
    let mut log = Vec::new();
    let mut iteration: u32 = 0;
    let status = loop {
        let markers = match config.verify_mode {
            VerifyMode::Full => scan_full(placement, library),
            VerifyMode::Boundaries => scan_boundaries(placement, library),
        };
        iteration_counts.push(markers.len());
        if markers.is_empty() {
            break FixStatus::Clean;
        }
        if iteration == config.max_iterations {
            break FixStatus::MaxIterationsReached;
        }
        iteration += 1;
        for marker in &markers {
            let pair = identify(placement, marker)?;
            let prof = profile(placement, &pair, marker)?;
            let op = decide(&prof, &mut rng);
            let outcome = execute(placement, &op)?;
            debug_assert!(placement.check_legality().is_empty());
            log.push(OpLogEntry { iteration, marker: marker.clone(), op, outcome });
        }
    };
    Ok(FixReport { iteration_counts, log, status })
}
