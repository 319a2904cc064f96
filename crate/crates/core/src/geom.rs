//! Integer rectangle geometry: orientations, rectangle transforms, and the
//! canonical slab decomposition used for exact region equality.

use std::collections::BTreeMap;

use thiserror::Error;

/// Database unit. All geometry in this crate is integer DBU.
pub type Dbu = i64;

/// Map from layer name to the canonical rectangle list covering that layer.
///
/// Values are always canonical ([`canonicalize`]) and non-empty; a layer with
/// no shapes is absent from the map. Two `LayerMap`s are equal exactly when
/// they cover the same region on the same layers.
pub type LayerMap = BTreeMap<String, Vec<Rect>>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeomError {
    #[error("degenerate rectangle ({llx},{lly})-({urx},{ury})")]
    EmptyRect { llx: Dbu, lly: Dbu, urx: Dbu, ury: Dbu },
    #[error("rectangle ({llx},{lly})-({urx},{ury}) outside cell bounds {w}x{h}")]
    OutsideBounds {
        llx: Dbu,
        lly: Dbu,
        urx: Dbu,
        ury: Dbu,
        w: Dbu,
        h: Dbu,
    },
}

/// Axis-aligned rectangle with strictly positive area: `llx < urx`, `lly < ury`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    pub llx: Dbu,
    pub lly: Dbu,
    pub urx: Dbu,
    pub ury: Dbu,
}

impl Rect {
    /// Panics if the rectangle would be empty; use [`Rect::try_new`] for
    /// unvalidated input.
    pub fn new(llx: Dbu, lly: Dbu, urx: Dbu, ury: Dbu) -> Rect {
        assert!(llx < urx && lly < ury, "empty rect ({llx},{lly})-({urx},{ury})");
        Rect { llx, lly, urx, ury }
    }

    pub fn try_new(llx: Dbu, lly: Dbu, urx: Dbu, ury: Dbu) -> Result<Rect, GeomError> {
        if llx < urx && lly < ury {
            Ok(Rect { llx, lly, urx, ury })
        } else {
            Err(GeomError::EmptyRect { llx, lly, urx, ury })
        }
    }

    pub fn width(self) -> Dbu {
        self.urx - self.llx
    }

    pub fn height(self) -> Dbu {
        self.ury - self.lly
    }

    pub fn area(self) -> i128 {
        self.width() as i128 * self.height() as i128
    }

    pub fn translate(self, dx: Dbu, dy: Dbu) -> Rect {
        Rect {
            llx: self.llx + dx,
            lly: self.lly + dy,
            urx: self.urx + dx,
            ury: self.ury + dy,
        }
    }

    /// Intersection with positive area, or `None` if the rectangles are
    /// disjoint or merely share an edge or corner.
    pub fn intersect(self, other: Rect) -> Option<Rect> {
        let llx = self.llx.max(other.llx);
        let lly = self.lly.max(other.lly);
        let urx = self.urx.min(other.urx);
        let ury = self.ury.min(other.ury);
        if llx < urx && lly < ury {
            Some(Rect { llx, lly, urx, ury })
        } else {
            None
        }
    }

    /// True if `other` overlaps or touches this rectangle (closed intervals).
    pub fn touches(self, other: Rect) -> bool {
        self.llx <= other.urx && other.llx <= self.urx && self.lly <= other.ury && other.lly <= self.ury
    }

    pub fn contains_rect(self, other: Rect) -> bool {
        self.llx <= other.llx && self.lly <= other.lly && other.urx <= self.urx && other.ury <= self.ury
    }
}

/// Placement orientation of a cell instance.
///
/// `R0` is the master as drawn, `MY` mirrors about the vertical axis, `MX`
/// about the horizontal axis, and `R180` is both (a 180-degree rotation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    R0,
    R180,
    MX,
    MY,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::R0,
        Orientation::R180,
        Orientation::MX,
        Orientation::MY,
    ];

    /// Composition with a mirror about the vertical axis. Swaps `R0 <-> MY`
    /// and `MX <-> R180`; applying it twice is the identity. Crucially it
    /// never changes which horizontal row-parity class the orientation
    /// belongs to, so an in-place flip is always placement-legal.
    pub fn flip_h(self) -> Orientation {
        match self {
            Orientation::R0 => Orientation::MY,
            Orientation::MY => Orientation::R0,
            Orientation::MX => Orientation::R180,
            Orientation::R180 => Orientation::MX,
        }
    }

    /// Composition with a mirror about the horizontal axis:
    /// `R0 <-> MX`, `MY <-> R180`.
    pub fn flip_v(self) -> Orientation {
        match self {
            Orientation::R0 => Orientation::MX,
            Orientation::MX => Orientation::R0,
            Orientation::MY => Orientation::R180,
            Orientation::R180 => Orientation::MY,
        }
    }

    /// True if the orientation mirrors about the horizontal axis (upside-down
    /// cell): `MX` and `R180`.
    pub fn flips_y(self) -> bool {
        matches!(self, Orientation::MX | Orientation::R180)
    }

    /// True if the orientation mirrors about the vertical axis: `MY` and `R180`.
    pub fn flips_x(self) -> bool {
        matches!(self, Orientation::MY | Orientation::R180)
    }

    pub fn index(self) -> usize {
        match self {
            Orientation::R0 => 0,
            Orientation::R180 => 1,
            Orientation::MX => 2,
            Orientation::MY => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::R0 => "R0",
            Orientation::R180 => "R180",
            Orientation::MX => "MX",
            Orientation::MY => "MY",
        }
    }
}

impl std::fmt::Display for Orientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Orientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Orientation, String> {
        match s {
            "R0" => Ok(Orientation::R0),
            "R180" => Ok(Orientation::R180),
            "MX" => Ok(Orientation::MX),
            "MY" => Ok(Orientation::MY),
            other => Err(format!("unknown orientation `{other}` (expected R0, R180, MX, or MY)")),
        }
    }
}

/// Shapes of one layer inside a cell master, in master-local coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LayerGeometry {
    pub layer: String,
    pub rects: Vec<Rect>,
}

/// Transform a master-local rectangle into the local frame of a `w x h` cell
/// placed with orientation `orient`. The result stays inside `[0,w] x [0,h]`.
///
/// Errors if the input rectangle is not inside the master bounds.
pub fn transform_rect(r: Rect, orient: Orientation, w: Dbu, h: Dbu) -> Result<Rect, GeomError> {
    if r.llx < 0 || r.lly < 0 || r.urx > w || r.ury > h {
        return Err(GeomError::OutsideBounds {
            llx: r.llx,
            lly: r.lly,
            urx: r.urx,
            ury: r.ury,
            w,
            h,
        });
    }
    let (llx, urx) = if orient.flips_x() {
        (w - r.urx, w - r.llx)
    } else {
        (r.llx, r.urx)
    };
    let (lly, ury) = if orient.flips_y() {
        (h - r.ury, h - r.lly)
    } else {
        (r.lly, r.ury)
    };
    Ok(Rect { llx, lly, urx, ury })
}

/// Mirror rectangles about the vertical axis of a cell of width `w`
/// (`x -> w - x`). The output is not canonicalized.
pub fn mirror_x(rects: &[Rect], w: Dbu) -> Vec<Rect> {
    rects
        .iter()
        .map(|r| Rect {
            llx: w - r.urx,
            lly: r.lly,
            urx: w - r.llx,
            ury: r.ury,
        })
        .collect()
}

/// Reduce an arbitrary rectangle list to the canonical maximal-horizontal-slab
/// decomposition of the region it covers.
///
/// The result partitions the covered region into non-overlapping slabs such
/// that two rectangle lists cover the same region if and only if their
/// canonical forms are equal as sequences. Slabs are maximal horizontally,
/// then merged vertically when adjacent bands have identical x-interval sets,
/// and sorted by `(lly, llx)`.
pub fn canonicalize(rects: &[Rect]) -> Vec<Rect> {
    if rects.is_empty() {
        return Vec::new();
    }
    let mut ys: Vec<Dbu> = Vec::with_capacity(rects.len() * 2);
    for r in rects {
        ys.push(r.lly);
        ys.push(r.ury);
    }
    ys.sort_unstable();
    ys.dedup();

    let mut out: Vec<Rect> = Vec::new();
    // x-intervals of the slab group currently open, and the y it started at
    let mut open: Vec<(Dbu, Dbu)> = Vec::new();
    let mut open_y: Dbu = ys[0];
    let mut band: Vec<(Dbu, Dbu)> = Vec::new();

    for w in ys.windows(2) {
        let (y0, y1) = (w[0], w[1]);
        band.clear();
        for r in rects {
            if r.lly <= y0 && r.ury >= y1 {
                band.push((r.llx, r.urx));
            }
        }
        band.sort_unstable();
        // merge overlapping or abutting intervals into maximal disjoint ones
        let mut merged: Vec<(Dbu, Dbu)> = Vec::with_capacity(band.len());
        for &(a, b) in &band {
            match merged.last_mut() {
                Some((_, e)) if *e >= a => *e = (*e).max(b),
                _ => merged.push((a, b)),
            }
        }
        if merged != open {
            for &(a, b) in &open {
                out.push(Rect { llx: a, lly: open_y, urx: b, ury: y0 });
            }
            open = merged;
            open_y = y0;
        }
    }
    let top = *ys.last().unwrap();
    for &(a, b) in &open {
        out.push(Rect { llx: a, lly: open_y, urx: b, ury: top });
    }
    // emission order is already (lly, llx); keep the sort as a cheap guarantee
    out.sort_unstable_by_key(|r| (r.lly, r.llx));
    out
}

/// Clip rectangles to `window`, translate so the window's lower-left corner
/// becomes the origin, and canonicalize. Rectangles wholly outside the window
/// (or touching it only along an edge) vanish.
pub fn clip_translate(rects: &[Rect], window: Rect) -> Vec<Rect> {
    let clipped: Vec<Rect> = rects
        .iter()
        .filter_map(|r| r.intersect(window))
        .map(|r| r.translate(-window.llx, -window.lly))
        .collect();
    canonicalize(&clipped)
}

/// Canonicalize every layer of a map, dropping layers that end up empty.
pub fn canonicalize_map(map: impl IntoIterator<Item = (String, Vec<Rect>)>) -> LayerMap {
    let mut out = LayerMap::new();
    for (layer, rects) in map {
        let canon = canonicalize(&rects);
        if !canon.is_empty() {
            out.insert(layer, canon);
        }
    }
    out
}
