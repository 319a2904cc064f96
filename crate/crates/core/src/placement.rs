//! Row-based standard-cell placement on an integer site grid: masters,
//! instances, legality rules, neighbor/gap queries, and window extraction.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::geom::{
    canonicalize_map, transform_rect, Dbu, GeomError, LayerGeometry, LayerMap, Orientation, Rect,
};

/// Site/row grid of the placement region.
///
/// Rows are indexed from 0 at `origin.1` upward; sites from 0 at `origin.0`
/// rightward. Row parity encodes the alternation of supply rails: rails are
/// shared between vertically adjacent rows, so every other row is placed
/// upside down. Even rows accept `R0`/`MY`, odd rows accept `MX`/`R180`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub dbu_per_um: u32,
    pub site_w: Dbu,
    pub row_h: Dbu,
    pub num_rows: u32,
    pub row_len_sites: u32,
    pub origin: (Dbu, Dbu),
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), PlacementError> {
        if self.dbu_per_um == 0 {
            return Err(PlacementError::InvalidGrid("dbu_per_micron must be positive".into()));
        }
        if self.site_w <= 0 || self.row_h <= 0 {
            return Err(PlacementError::InvalidGrid("site width and row height must be positive".into()));
        }
        if self.num_rows == 0 || self.row_len_sites == 0 {
            return Err(PlacementError::InvalidGrid("grid must have at least one row and one site".into()));
        }
        Ok(())
    }

    pub fn site_x(&self, x_site: u32) -> Dbu {
        self.origin.0 + x_site as Dbu * self.site_w
    }

    pub fn row_y(&self, row: u32) -> Dbu {
        self.origin.1 + row as Dbu * self.row_h
    }

    pub fn row_rect(&self, row: u32) -> Rect {
        Rect::new(
            self.origin.0,
            self.row_y(row),
            self.origin.0 + self.row_len_sites as Dbu * self.site_w,
            self.row_y(row) + self.row_h,
        )
    }

    /// Bounding box of the whole placement region.
    pub fn extent(&self) -> Rect {
        Rect::new(
            self.origin.0,
            self.origin.1,
            self.origin.0 + self.row_len_sites as Dbu * self.site_w,
            self.origin.1 + self.num_rows as Dbu * self.row_h,
        )
    }

    /// The two orientations legal in `row`, determined by row parity.
    pub fn legal_orients(&self, row: u32) -> Result<[Orientation; 2], PlacementError> {
        if row >= self.num_rows {
            return Err(PlacementError::RowOutOfRange { row, num_rows: self.num_rows });
        }
        Ok(if row % 2 == 0 {
            [Orientation::R0, Orientation::MY]
        } else {
            [Orientation::MX, Orientation::R180]
        })
    }
}

/// A library cell: an integer number of sites wide, one row high, with
/// master-local layer shapes inside `[0, width] x [0, row_h]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMaster {
    pub name: String,
    pub width_sites: u32,
    pub geometry: Vec<LayerGeometry>,
}

impl CellMaster {
    pub fn width_dbu(&self, grid: &GridSpec) -> Dbu {
        self.width_sites as Dbu * grid.site_w
    }
}

/// Index of a master in its placement's library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MasterId(pub usize);

/// A placed cell. `x_site`/`row` give the lower-left corner in grid units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub master: MasterId,
    pub x_site: u32,
    pub row: u32,
    pub orient: Orientation,
}

/// One legality failure found by [`Placement::check_legality`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Overlap { a: String, b: String, row: u32 },
    IllegalOrientation { inst: String, row: u32, orient: Orientation },
    OutOfBounds { inst: String, row: u32, x_site: u32, width_sites: u32 },
    BrokenIndex { detail: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Overlap { a, b, row } => {
                write!(f, "overlap: `{a}` and `{b}` in row {row}")
            }
            Violation::IllegalOrientation { inst, row, orient } => {
                write!(f, "illegal orientation: `{inst}` is {orient} in row {row}")
            }
            Violation::OutOfBounds { inst, row, x_site, width_sites } => {
                write!(
                    f,
                    "out of bounds: `{inst}` at site {x_site} width {width_sites} in row {row}"
                )
            }
            Violation::BrokenIndex { detail } => write!(f, "broken occupancy index: {detail}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlacementError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid master `{master}`: {reason}")]
    InvalidMaster { master: String, reason: String },
    #[error("master `{master}` has geometry outside its cell bounds: {source}")]
    MasterGeometry { master: String, source: GeomError },
    #[error("duplicate master `{0}`")]
    DuplicateMaster(String),
    #[error("unknown master `{0}`")]
    UnknownMaster(String),
    #[error("duplicate instance `{0}`")]
    DuplicateInstance(String),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("invalid instance name `{0}`")]
    InvalidInstanceName(String),
    #[error("row {row} out of range (design has {num_rows} rows)")]
    RowOutOfRange { row: u32, num_rows: u32 },
    #[error("illegal orientation for row: `{inst}` cannot be {orient} in row {row}")]
    IllegalOrientation { inst: String, row: u32, orient: Orientation },
    #[error("overlap: `{inst}` would overlap `{other}`")]
    Overlap { inst: String, other: String },
    #[error("out of bounds: `{inst}` at site {x_site} width {width_sites} exceeds row length {row_len_sites}")]
    OutOfBounds { inst: String, x_site: u32, width_sites: u32, row_len_sites: u32 },
}

fn validate_name(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(|c| c.is_whitespace())
}

/// A legal placement: a grid, a master library, and non-overlapping
/// single-row instances. All mutation goes through [`Placement::set_orientation`]
/// and [`Placement::move_x`], which reject any change that would break
/// legality, so a `Placement` is legal at all times.
#[derive(Debug, Clone)]
pub struct Placement {
    grid: GridSpec,
    masters: Vec<CellMaster>,
    master_ids: HashMap<String, MasterId>,
    insts: Vec<Instance>,
    inst_ids: HashMap<String, usize>,
    /// per row: x_site -> index into `insts`
    rows: Vec<BTreeMap<u32, usize>>,
    /// per master, per [`Orientation::index`]: transformed layer shapes
    oriented: Vec<[Vec<LayerGeometry>; 4]>,
    /// per master: geometry is invariant under mirroring about the vertical axis
    mirror_symmetric: Vec<bool>,
}

impl Placement {
    pub fn new(grid: GridSpec, masters: Vec<CellMaster>) -> Result<Placement, PlacementError> {
        grid.validate()?;
        let mut master_ids = HashMap::with_capacity(masters.len());
        let mut oriented = Vec::with_capacity(masters.len());
        let mut mirror_symmetric = Vec::with_capacity(masters.len());
        for (i, m) in masters.iter().enumerate() {
            if !validate_name(&m.name) {
                return Err(PlacementError::InvalidMaster {
                    master: m.name.clone(),
                    reason: "name must be non-empty and free of whitespace".into(),
                });
            }
            if m.width_sites == 0 {
                return Err(PlacementError::InvalidMaster {
                    master: m.name.clone(),
                    reason: "width must be at least one site".into(),
                });
            }
            if m.width_sites > grid.row_len_sites {
                return Err(PlacementError::InvalidMaster {
                    master: m.name.clone(),
                    reason: format!(
                        "width {} exceeds row length {}",
                        m.width_sites, grid.row_len_sites
                    ),
                });
            }
            if master_ids.insert(m.name.clone(), MasterId(i)).is_some() {
                return Err(PlacementError::DuplicateMaster(m.name.clone()));
            }
            let w = m.width_dbu(&grid);
            let h = grid.row_h;
            let mut per_orient: [Vec<LayerGeometry>; 4] = Default::default();
            for o in Orientation::ALL {
                let mut layers = Vec::with_capacity(m.geometry.len());
                for lg in &m.geometry {
                    let mut rects = Vec::with_capacity(lg.rects.len());
                    for &r in &lg.rects {
                        let t = transform_rect(r, o, w, h).map_err(|source| {
                            PlacementError::MasterGeometry { master: m.name.clone(), source }
                        })?;
                        rects.push(t);
                    }
                    layers.push(LayerGeometry { layer: lg.layer.clone(), rects });
                }
                per_orient[o.index()] = layers;
            }
            let face = canonical_layer_map(&per_orient[Orientation::R0.index()]);
            let mirrored = canonical_layer_map(&per_orient[Orientation::MY.index()]);
            mirror_symmetric.push(face == mirrored);
            oriented.push(per_orient);
        }
        Ok(Placement {
            grid,
            masters,
            master_ids,
            insts: Vec::new(),
            inst_ids: HashMap::new(),
            rows: vec![BTreeMap::new(); grid.num_rows as usize],
            oriented,
            mirror_symmetric,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn masters(&self) -> &[CellMaster] {
        &self.masters
    }

    pub fn master(&self, id: MasterId) -> &CellMaster {
        &self.masters[id.0]
    }

    pub fn master_id(&self, name: &str) -> Option<MasterId> {
        self.master_ids.get(name).copied()
    }

    /// True if the master's shapes are unchanged by a mirror about its own
    /// vertical axis, i.e. flipping an instance of it is a geometric no-op.
    pub fn is_master_symmetric(&self, id: MasterId) -> bool {
        self.mirror_symmetric[id.0]
    }

    /// Master shapes pre-transformed for one orientation, cell-local.
    pub fn oriented_geometry(&self, id: MasterId, orient: Orientation) -> &[LayerGeometry] {
        &self.oriented[id.0][orient.index()]
    }

    pub fn instances(&self) -> &[Instance] {
        &self.insts
    }

    pub fn instance(&self, name: &str) -> Option<&Instance> {
        self.inst_ids.get(name).map(|&i| &self.insts[i])
    }

    fn resolve(&self, name: &str) -> Result<usize, PlacementError> {
        self.inst_ids
            .get(name)
            .copied()
            .ok_or_else(|| PlacementError::UnknownInstance(name.to_string()))
    }

    pub fn legal_orients(&self, row: u32) -> Result<[Orientation; 2], PlacementError> {
        self.grid.legal_orients(row)
    }

    /// Lower-left corner of an instance in design coordinates.
    pub fn inst_origin(&self, inst: &Instance) -> (Dbu, Dbu) {
        (self.grid.site_x(inst.x_site), self.grid.row_y(inst.row))
    }

    /// Full cell bounding box of an instance in design coordinates.
    pub fn placed_bbox(&self, inst: &Instance) -> Rect {
        let (x, y) = self.inst_origin(inst);
        let w = self.master(inst.master).width_dbu(&self.grid);
        Rect::new(x, y, x + w, y + self.grid.row_h)
    }

    pub fn add_instance(
        &mut self,
        name: &str,
        master: &str,
        x_site: u32,
        row: u32,
        orient: Orientation,
    ) -> Result<(), PlacementError> {
        if !validate_name(name) {
            return Err(PlacementError::InvalidInstanceName(name.to_string()));
        }
        if self.inst_ids.contains_key(name) {
            return Err(PlacementError::DuplicateInstance(name.to_string()));
        }
        let master_id = self
            .master_id(master)
            .ok_or_else(|| PlacementError::UnknownMaster(master.to_string()))?;
        if row >= self.grid.num_rows {
            return Err(PlacementError::RowOutOfRange { row, num_rows: self.grid.num_rows });
        }
        if !self.grid.legal_orients(row)?.contains(&orient) {
            return Err(PlacementError::IllegalOrientation { inst: name.to_string(), row, orient });
        }
        let w = self.masters[master_id.0].width_sites;
        if x_site.checked_add(w).is_none_or(|end| end > self.grid.row_len_sites) {
            return Err(PlacementError::OutOfBounds {
                inst: name.to_string(),
                x_site,
                width_sites: w,
                row_len_sites: self.grid.row_len_sites,
            });
        }
        if let Some(other) = self.overlap_in_row(row, x_site, w, usize::MAX) {
            return Err(PlacementError::Overlap {
                inst: name.to_string(),
                other: self.insts[other].name.clone(),
            });
        }
        let idx = self.insts.len();
        self.insts.push(Instance {
            name: name.to_string(),
            master: master_id,
            x_site,
            row,
            orient,
        });
        self.inst_ids.insert(name.to_string(), idx);
        self.rows[row as usize].insert(x_site, idx);
        Ok(())
    }

    /// First instance in `row` (other than `exclude`) overlapping sites
    /// `[x_site, x_site + width)`, if any.
    fn overlap_in_row(&self, row: u32, x_site: u32, width: u32, exclude: usize) -> Option<usize> {
        let map = &self.rows[row as usize];
        let end = x_site + width;
        if let Some((_, &idx)) = map.range(x_site..end).find(|&(_, &idx)| idx != exclude) {
            return Some(idx);
        }
        if let Some((&px, &idx)) = map.range(..x_site).next_back() {
            if idx != exclude {
                let pw = self.masters[self.insts[idx].master.0].width_sites;
                if px + pw > x_site {
                    return Some(idx);
                }
            }
        }
        None
    }

    /// Re-orient an instance in place. Rejects orientations that are illegal
    /// for the instance's row; on error the placement is unchanged.
    pub fn set_orientation(&mut self, name: &str, orient: Orientation) -> Result<(), PlacementError> {
        let idx = self.resolve(name)?;
        let row = self.insts[idx].row;
        if !self.grid.legal_orients(row)?.contains(&orient) {
            return Err(PlacementError::IllegalOrientation { inst: name.to_string(), row, orient });
        }
        self.insts[idx].orient = orient;
        Ok(())
    }

    /// Move an instance to a new site in its row. Rejects moves that would
    /// leave the row or overlap a neighbor; on error the placement is
    /// unchanged.
    pub fn move_x(&mut self, name: &str, new_x_site: u32) -> Result<(), PlacementError> {
        let idx = self.resolve(name)?;
        let (row, old_x) = (self.insts[idx].row, self.insts[idx].x_site);
        let w = self.masters[self.insts[idx].master.0].width_sites;
        if new_x_site.checked_add(w).is_none_or(|end| end > self.grid.row_len_sites) {
            return Err(PlacementError::OutOfBounds {
                inst: name.to_string(),
                x_site: new_x_site,
                width_sites: w,
                row_len_sites: self.grid.row_len_sites,
            });
        }
        if let Some(other) = self.overlap_in_row(row, new_x_site, w, idx) {
            return Err(PlacementError::Overlap {
                inst: name.to_string(),
                other: self.insts[other].name.clone(),
            });
        }
        let map = &mut self.rows[row as usize];
        map.remove(&old_x);
        map.insert(new_x_site, idx);
        self.insts[idx].x_site = new_x_site;
        Ok(())
    }

    /// Number of free sites between the instance and its left neighbor, or to
    /// the start of the row when it has none.
    pub fn gap_left(&self, name: &str) -> Result<u32, PlacementError> {
        let idx = self.resolve(name)?;
        let inst = &self.insts[idx];
        Ok(match self.prev_in_row(inst) {
            Some(p) => {
                let pw = self.masters[p.master.0].width_sites;
                inst.x_site - (p.x_site + pw)
            }
            None => inst.x_site,
        })
    }

    /// Number of free sites between the instance and its right neighbor, or to
    /// the end of the row when it has none.
    pub fn gap_right(&self, name: &str) -> Result<u32, PlacementError> {
        let idx = self.resolve(name)?;
        let inst = &self.insts[idx];
        let end = inst.x_site + self.masters[inst.master.0].width_sites;
        Ok(match self.next_in_row(inst) {
            Some(n) => n.x_site - end,
            None => self.grid.row_len_sites - end,
        })
    }

    fn prev_in_row(&self, inst: &Instance) -> Option<&Instance> {
        self.rows[inst.row as usize]
            .range(..inst.x_site)
            .next_back()
            .map(|(_, &i)| &self.insts[i])
    }

    fn next_in_row(&self, inst: &Instance) -> Option<&Instance> {
        self.rows[inst.row as usize]
            .range(inst.x_site + 1..)
            .next()
            .map(|(_, &i)| &self.insts[i])
    }

    pub fn neighbor_left(&self, name: &str) -> Result<Option<&Instance>, PlacementError> {
        let idx = self.resolve(name)?;
        Ok(self.prev_in_row(&self.insts[idx]))
    }

    pub fn neighbor_right(&self, name: &str) -> Result<Option<&Instance>, PlacementError> {
        let idx = self.resolve(name)?;
        Ok(self.next_in_row(&self.insts[idx]))
    }

    /// All instances whose placed bounding box intersects `bbox` under
    /// closed-interval semantics (edge and corner touches count), ordered by
    /// `(row, x_site)`.
    pub fn instances_intersecting(&self, bbox: Rect) -> Vec<&Instance> {
        let mut out = Vec::new();
        let (ox, oy) = self.grid.origin;
        let rh = self.grid.row_h;
        let sw = self.grid.site_w;
        let r_lo = (bbox.lly - oy).div_euclid(rh) - 1;
        let r_hi = (bbox.ury - oy).div_euclid(rh) + 1;
        for r in r_lo.max(0)..=r_hi.min(self.grid.num_rows as Dbu - 1) {
            let row = r as u32;
            if !self.grid.row_rect(row).touches(bbox) {
                continue;
            }
            let x_hi = (bbox.urx - ox).div_euclid(sw);
            if x_hi < 0 {
                continue;
            }
            let x_hi = x_hi.min(u32::MAX as Dbu) as u32;
            let mut hits: Vec<&Instance> = self.rows[row as usize]
                .range(..=x_hi)
                .rev()
                .map(|(_, &i)| &self.insts[i])
                .take_while(|inst| {
                    let end = ox + (inst.x_site + self.masters[inst.master.0].width_sites) as Dbu * sw;
                    end >= bbox.llx
                })
                .collect();
            hits.reverse();
            out.extend(hits);
        }
        out
    }

    /// Boundaries where two instances abut with zero gap, as
    /// `(row, x_site of the boundary)`, ordered by `(row, x_site)`.
    pub fn abutment_anchors(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for (row, map) in self.rows.iter().enumerate() {
            let mut prev_end: Option<u32> = None;
            for (&x, &idx) in map {
                if prev_end == Some(x) {
                    out.push((row as u32, x));
                }
                prev_end = Some(x + self.masters[self.insts[idx].master.0].width_sites);
            }
        }
        out
    }

    /// Extract the union of all instance shapes clipped to `window`, as
    /// canonical window-local geometry per layer. Shapes merely touching the
    /// window edge contribute nothing.
    pub fn window_geometry(&self, window: Rect) -> LayerMap {
        let mut acc: HashMap<&str, Vec<Rect>> = HashMap::new();
        let (ox, oy) = self.grid.origin;
        let rh = self.grid.row_h;
        let sw = self.grid.site_w;
        let r_lo = (window.lly - oy).div_euclid(rh);
        let r_hi = (window.ury - oy + rh - 1).div_euclid(rh) - 1;
        for r in r_lo.max(0)..=r_hi.min(self.grid.num_rows as Dbu - 1) {
            let row = r as u32;
            // sites whose cell could start left of the window's right edge
            let x_ub = (window.urx - ox + sw - 1).div_euclid(sw);
            if x_ub <= 0 {
                continue;
            }
            let x_ub = x_ub.min(u32::MAX as Dbu) as u32;
            for (_, &idx) in self.rows[row as usize].range(..x_ub).rev() {
                let inst = &self.insts[idx];
                let x0 = ox + inst.x_site as Dbu * sw;
                let end = x0 + self.masters[inst.master.0].width_sites as Dbu * sw;
                if end <= window.llx {
                    break;
                }
                let y0 = oy + r * rh;
                for lg in self.oriented_geometry(inst.master, inst.orient) {
                    let bucket = acc.entry(lg.layer.as_str()).or_default();
                    for &rect in &lg.rects {
                        if let Some(c) = rect.translate(x0, y0).intersect(window) {
                            bucket.push(c.translate(-window.llx, -window.lly));
                        }
                    }
                }
            }
        }
        canonicalize_map(acc.into_iter().map(|(k, v)| (k.to_string(), v)))
    }

    /// Total sites covered by instances.
    pub fn occupied_sites(&self) -> u64 {
        self.insts
            .iter()
            .map(|i| self.masters[i.master.0].width_sites as u64)
            .sum()
    }

    /// Total sites in the grid.
    pub fn site_capacity(&self) -> u64 {
        self.grid.num_rows as u64 * self.grid.row_len_sites as u64
    }

    /// Scan the whole placement for legality violations. A placement built
    /// and mutated only through this API reports none; this exists to verify
    /// that invariant and to diagnose hand-built inputs.
    pub fn check_legality(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for inst in &self.insts {
            let w = self.masters[inst.master.0].width_sites;
            match self.grid.legal_orients(inst.row) {
                Ok(legal) if legal.contains(&inst.orient) => {}
                _ => out.push(Violation::IllegalOrientation {
                    inst: inst.name.clone(),
                    row: inst.row,
                    orient: inst.orient,
                }),
            }
            if inst.x_site as u64 + w as u64 > self.grid.row_len_sites as u64 {
                out.push(Violation::OutOfBounds {
                    inst: inst.name.clone(),
                    row: inst.row,
                    x_site: inst.x_site,
                    width_sites: w,
                });
            }
        }
        let mut indexed = 0usize;
        for (row, map) in self.rows.iter().enumerate() {
            let mut prev: Option<(u32, usize)> = None;
            for (&x, &idx) in map {
                indexed += 1;
                let inst = &self.insts[idx];
                if inst.row as usize != row || inst.x_site != x {
                    out.push(Violation::BrokenIndex {
                        detail: format!("`{}` indexed at row {row} site {x}", inst.name),
                    });
                }
                if let Some((px, pidx)) = prev {
                    let p = &self.insts[pidx];
                    if px + self.masters[p.master.0].width_sites > x {
                        out.push(Violation::Overlap {
                            a: p.name.clone(),
                            b: inst.name.clone(),
                            row: row as u32,
                        });
                    }
                }
                prev = Some((x, idx));
            }
        }
        if indexed != self.insts.len() {
            out.push(Violation::BrokenIndex {
                detail: format!("{} instances but {indexed} index entries", self.insts.len()),
            });
        }
        out
    }
}

/// Canonical layer map of cell-local shapes, for geometry comparison.
fn canonical_layer_map(layers: &[LayerGeometry]) -> LayerMap {
    let mut grouped: BTreeMap<String, Vec<Rect>> = BTreeMap::new();
    for lg in layers {
        grouped.entry(lg.layer.clone()).or_default().extend_from_slice(&lg.rects);
    }
    canonicalize_map(grouped)
}
