//! Exact matching of known-bad layout geometries against placement windows.
//!
//! A pattern is a full-row-height window of canonical layer geometry. A
//! window of the placement matches a pattern when its extracted geometry is
//! exactly equal to the pattern's (or, if the library matches mirrored
//! variants, to the pattern mirrored about the window's vertical axis).

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{canonicalize_map, mirror_x, Dbu, LayerMap, Rect};
use crate::placement::Placement;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("invalid pattern `{pattern}`: {reason}")]
    Invalid { pattern: String, reason: String },
    #[error("duplicate pattern `{0}`")]
    Duplicate(String),
}

/// A weakpoint geometry to search for, in window-local coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    name: String,
    window_w: Dbu,
    window_h: Dbu,
    geometry: LayerMap,
}

impl Pattern {
    /// Window width must be positive and even (windows are centered on site
    /// boundaries); all geometry must lie inside the window.
    pub fn new(
        name: impl Into<String>,
        window_w: Dbu,
        window_h: Dbu,
        geometry: impl IntoIterator<Item = (String, Vec<Rect>)>,
    ) -> Result<Pattern, PatternError> {
        let name = name.into();
        let invalid = |reason: &str| PatternError::Invalid {
            pattern: name.clone(),
            reason: reason.to_string(),
        };
        if name.is_empty() || name.chars().any(|c| c.is_whitespace()) {
            return Err(PatternError::Invalid {
                pattern: name.clone(),
                reason: "name must be non-empty and free of whitespace".into(),
            });
        }
        if window_w <= 0 || window_h <= 0 {
            return Err(invalid("window must have positive size"));
        }
        if window_w % 2 != 0 {
            return Err(invalid("window width must be even"));
        }
        let geometry = canonicalize_map(geometry);
        let bounds = Rect::new(0, 0, window_w, window_h);
        for rects in geometry.values() {
            for r in rects {
                if !bounds.contains_rect(*r) {
                    return Err(invalid("geometry extends outside the window"));
                }
            }
        }
        Ok(Pattern { name, window_w, window_h, geometry })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn window_w(&self) -> Dbu {
        self.window_w
    }

    pub fn window_h(&self) -> Dbu {
        self.window_h
    }

    /// Canonical window-local geometry.
    pub fn geometry(&self) -> &LayerMap {
        &self.geometry
    }

    /// The pattern mirrored about the window's vertical axis, canonical.
    pub fn mirrored_geometry(&self) -> LayerMap {
        canonicalize_map(
            self.geometry
                .iter()
                .map(|(layer, rects)| (layer.clone(), mirror_x(rects, self.window_w))),
        )
    }
}

/// A set of uniquely named patterns plus the matching policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternLibrary {
    patterns: Vec<Pattern>,
    match_mirrored: bool,
}

impl PatternLibrary {
    pub fn new(patterns: Vec<Pattern>, match_mirrored: bool) -> Result<PatternLibrary, PatternError> {
        let mut seen = std::collections::HashSet::new();
        for p in &patterns {
            if !seen.insert(p.name.clone()) {
                return Err(PatternError::Duplicate(p.name.clone()));
            }
        }
        Ok(PatternLibrary { patterns, match_mirrored })
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn match_mirrored(&self) -> bool {
        self.match_mirrored
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }
}

/// A reported weakpoint: the matched window in design coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ErrorMarker {
    pub anchor_row: u32,
    pub bbox: Rect,
    pub pattern_name: String,
}

impl ErrorMarker {
    /// Horizontal center of the marker window (the anchor the scan matched at).
    pub fn anchor_x(&self) -> Dbu {
        (self.bbox.llx + self.bbox.urx) / 2
    }
}

/// Test one pattern at one anchor. The window spans `window_w` centered on
/// `anchor_x` and the full height of `row`; returns a marker on exact
/// geometric equality (or mirrored equality when `mirrored` is set). Returns
/// `None` when the window does not fit inside the row.
pub fn match_at(
    placement: &Placement,
    pattern: &Pattern,
    anchor_x: Dbu,
    row: u32,
    mirrored: bool,
) -> Option<ErrorMarker> {
    let grid = placement.grid();
    if row >= grid.num_rows || pattern.window_h != grid.row_h {
        return None;
    }
    let window = window_at(placement, pattern.window_w, anchor_x, row)?;
    let got = placement.window_geometry(window);
    if got == pattern.geometry || (mirrored && got == pattern.mirrored_geometry()) {
        Some(ErrorMarker {
            anchor_row: row,
            bbox: window,
            pattern_name: pattern.name.clone(),
        })
    } else {
        None
    }
}

fn window_at(placement: &Placement, window_w: Dbu, anchor_x: Dbu, row: u32) -> Option<Rect> {
    let grid = placement.grid();
    let half = window_w / 2;
    let row_rect = grid.row_rect(row);
    let llx = anchor_x - half;
    let urx = anchor_x + half;
    if llx < row_rect.llx || urx > row_rect.urx {
        return None;
    }
    Some(Rect::new(llx, row_rect.lly, urx, row_rect.ury))
}

/// Patterns of one window size, indexed by canonical geometry for O(1)
/// lookup of every pattern a window matches.
struct SizeGroup<'a> {
    window_w: Dbu,
    /// canonical geometry -> pattern names that match it, sorted and deduped
    lookup: HashMap<LayerMap, Vec<&'a str>>,
}

fn build_size_groups(row_h: Dbu, library: &PatternLibrary) -> Vec<SizeGroup<'_>> {
    let mut groups: Vec<SizeGroup<'_>> = Vec::new();
    for p in library.patterns() {
        if p.window_h != row_h {
            // a pattern for a different row height can never match
            continue;
        }
        let group = match groups.iter_mut().find(|g| g.window_w == p.window_w) {
            Some(g) => g,
            None => {
                groups.push(SizeGroup { window_w: p.window_w, lookup: HashMap::new() });
                groups.last_mut().unwrap()
            }
        };
        group.lookup.entry(p.geometry.clone()).or_default().push(p.name.as_str());
        if library.match_mirrored() {
            group.lookup.entry(p.mirrored_geometry()).or_default().push(p.name.as_str());
        }
    }
    for g in &mut groups {
        for names in g.lookup.values_mut() {
            names.sort_unstable();
            names.dedup();
        }
    }
    groups.sort_by_key(|g| g.window_w);
    groups
}

/// Match every pattern of every applicable size group at one anchor,
/// appending `(anchor_x, pattern_name, window_w)` hits.
fn match_groups_at<'a>(
    placement: &Placement,
    groups: &[SizeGroup<'a>],
    anchor_x: Dbu,
    row: u32,
    hits: &mut Vec<(Dbu, &'a str, Dbu)>,
) {
    for g in groups {
        let Some(window) = window_at(placement, g.window_w, anchor_x, row) else {
            continue;
        };
        let got = placement.window_geometry(window);
        if let Some(names) = g.lookup.get(&got) {
            hits.extend(names.iter().map(|&n| (anchor_x, n, g.window_w)));
        }
    }
}

fn markers_from_hits(placement: &Placement, row: u32, mut hits: Vec<(Dbu, &str, Dbu)>) -> Vec<ErrorMarker> {
    // (anchor_x, name) orders the result; the width is a function of the name
    hits.sort_unstable();
    hits.dedup();
    hits.into_iter()
        .map(|(x, name, w)| ErrorMarker {
            anchor_row: row,
            bbox: window_at(placement, w, x, row).expect("hit window fits"),
            pattern_name: name.to_string(),
        })
        .collect()
}

/// Scan every site-grid anchor of every row against the whole library.
///
/// Markers are sorted by `(row, anchor x, pattern name)`; a window matching
/// several patterns yields one marker per pattern, and duplicates are
/// reported once.
pub fn scan_full(placement: &Placement, library: &PatternLibrary) -> Vec<ErrorMarker> {
    let grid = placement.grid();
    let groups = build_size_groups(grid.row_h, library);
    if groups.is_empty() {
        return Vec::new();
    }
    let rows: Vec<u32> = (0..grid.num_rows).collect();
    let per_row: Vec<Vec<ErrorMarker>> = rows
        .par_iter()
        .map(|&row| {
            let mut hits: Vec<(Dbu, &str, Dbu)> = Vec::new();
            for k in 0..=grid.row_len_sites {
                match_groups_at(placement, &groups, grid.site_x(k), row, &mut hits);
            }
            markers_from_hits(placement, row, hits)
        })
        .collect();
    per_row.into_iter().flatten().collect()
}

/// Scan only zero-gap abutment boundaries. The result is always a subset of
/// [`scan_full`], in the same order.
pub fn scan_boundaries(placement: &Placement, library: &PatternLibrary) -> Vec<ErrorMarker> {
    let grid = placement.grid();
    let groups = build_size_groups(grid.row_h, library);
    if groups.is_empty() {
        return Vec::new();
    }
    let anchors = placement.abutment_anchors();
    // group anchors by row for parallel scanning
    let mut by_row: Vec<Vec<u32>> = vec![Vec::new(); grid.num_rows as usize];
    for (row, x_site) in anchors {
        by_row[row as usize].push(x_site);
    }
    let indexed: Vec<(u32, Vec<u32>)> = by_row
        .into_iter()
        .enumerate()
        .map(|(r, xs)| (r as u32, xs))
        .filter(|(_, xs)| !xs.is_empty())
        .collect();
    let per_row: Vec<Vec<ErrorMarker>> = indexed
        .par_iter()
        .map(|(row, xs)| {
            let mut hits: Vec<(Dbu, &str, Dbu)> = Vec::new();
            for &x_site in xs {
                match_groups_at(placement, &groups, grid.site_x(x_site), *row, &mut hits);
            }
            markers_from_hits(placement, *row, hits)
        })
        .collect();
    per_row.into_iter().flatten().collect()
}
