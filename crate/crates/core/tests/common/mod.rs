//! Shared test infrastructure: a 1-DBU bitmap oracle that re-derives window
//! geometry pixel by pixel (independently of the library's rectangle
//! transforms), a brute-force occupancy oracle, and a generator for small
//! random designs on tiny grids where exhaustive bitmap comparison is cheap.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use abutfix_core::{
    CellMaster, Dbu, GridSpec, LayerGeometry, Pattern, PatternLibrary, Placement, Rect,
};
use rand::prelude::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A 1-DBU raster. Pixel `(x, y)` covers the unit square `[x, x+1) x [y, y+1)`.
#[derive(Clone, PartialEq, Eq)]
pub struct Bitmap {
    pub w: Dbu,
    pub h: Dbu,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(w: Dbu, h: Dbu) -> Bitmap {
        assert!(w >= 0 && h >= 0);
        Bitmap { w, h, bits: vec![false; (w * h) as usize] }
    }

    pub fn get(&self, x: Dbu, y: Dbu) -> bool {
        assert!(x >= 0 && x < self.w && y >= 0 && y < self.h);
        self.bits[(y * self.w + x) as usize]
    }

    pub fn set(&mut self, x: Dbu, y: Dbu) {
        assert!(x >= 0 && x < self.w && y >= 0 && y < self.h, "pixel ({x},{y}) outside {}x{}", self.w, self.h);
        self.bits[(y * self.w + x) as usize] = true;
    }

    /// Paint every pixel of `r` (clipped to the bitmap).
    pub fn paint_rect(&mut self, r: Rect) {
        for y in r.lly.max(0)..r.ury.min(self.h) {
            for x in r.llx.max(0)..r.urx.min(self.w) {
                self.set(x, y);
            }
        }
    }

    /// Mirror about the vertical centerline, pixel by pixel.
    pub fn flip_x(&self) -> Bitmap {
        let mut out = Bitmap::new(self.w, self.h);
        for y in 0..self.h {
            for x in 0..self.w {
                if self.get(x, y) {
                    out.set(self.w - 1 - x, y);
                }
            }
        }
        out
    }

    /// Mirror about the horizontal centerline, pixel by pixel.
    pub fn flip_y(&self) -> Bitmap {
        let mut out = Bitmap::new(self.w, self.h);
        for y in 0..self.h {
            for x in 0..self.w {
                if self.get(x, y) {
                    out.set(x, self.h - 1 - y);
                }
            }
        }
        out
    }

    /// Copy of the sub-window `r` (which must lie inside the bitmap).
    pub fn crop(&self, r: Rect) -> Bitmap {
        assert!(r.llx >= 0 && r.lly >= 0 && r.urx <= self.w && r.ury <= self.h);
        let mut out = Bitmap::new(r.width(), r.height());
        for y in 0..r.height() {
            for x in 0..r.width() {
                if self.get(r.llx + x, r.lly + y) {
                    out.set(x, y);
                }
            }
        }
        out
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|&b| b)
    }
}

impl std::fmt::Debug for Bitmap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Bitmap {}x{}", self.w, self.h)?;
        for y in (0..self.h).rev() {
            for x in 0..self.w {
                f.write_str(if self.get(x, y) { "#" } else { "." })?;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}

/// Rasterize a rect list into a `w x h` bitmap (rects clipped).
pub fn rasterize_rects(rects: &[Rect], w: Dbu, h: Dbu) -> Bitmap {
    let mut bm = Bitmap::new(w, h);
    for r in rects {
        bm.paint_rect(*r);
    }
    bm
}

/// Rasterize the whole placement at 1 DBU, one bitmap per layer, covering the
/// grid extent. Orientation is applied per pixel — a filled unit square at
/// `x` lands at `w - 1 - x` when mirrored — so this never goes through the
/// library's rectangle transform.
pub fn rasterize_placement(p: &Placement) -> BTreeMap<String, Bitmap> {
    let ext = p.grid().extent();
    let mut layers: BTreeMap<String, Bitmap> = BTreeMap::new();
    for inst in p.instances() {
        let master = p.master(inst.master);
        let w = master.width_sites as Dbu * p.grid().site_w;
        let h = p.grid().row_h;
        let ox = p.grid().site_x(inst.x_site) - ext.llx;
        let oy = p.grid().row_y(inst.row) - ext.lly;
        for lg in &master.geometry {
            let bm = layers
                .entry(lg.layer.clone())
                .or_insert_with(|| Bitmap::new(ext.width(), ext.height()));
            for r in &lg.rects {
                for y in r.lly..r.ury {
                    for x in r.llx..r.urx {
                        let px = if inst.orient.flips_x() { w - 1 - x } else { x };
                        let py = if inst.orient.flips_y() { h - 1 - y } else { y };
                        bm.set(ox + px, oy + py);
                    }
                }
            }
        }
    }
    layers
}

/// Pattern geometry rasterized per layer into its window.
pub fn rasterize_pattern(pat: &Pattern) -> BTreeMap<String, Bitmap> {
    pat.geometry()
        .iter()
        .map(|(layer, rects)| (layer.clone(), rasterize_rects(rects, pat.window_w(), pat.window_h())))
        .collect()
}

fn window_equals(
    design: &BTreeMap<String, Bitmap>,
    window: Rect, // extent-relative
    pattern: &BTreeMap<String, Bitmap>,
    mirrored: bool,
) -> bool {
    let layers: BTreeSet<&String> = design.keys().chain(pattern.keys()).collect();
    for layer in layers {
        let got = design.get(layer).map(|bm| {
            let crop = bm.crop(window);
            if mirrored { crop.flip_x() } else { crop }
        });
        let want = pattern.get(layer);
        match (got, want) {
            (Some(g), Some(w)) => {
                if g != *w {
                    return false;
                }
            }
            (Some(g), None) => {
                if g.any() {
                    return false;
                }
            }
            (None, Some(w)) => {
                if w.any() {
                    return false;
                }
            }
            (None, None) => {}
        }
    }
    true
}

/// Exhaustive matcher oracle: every site-boundary anchor of every row is
/// checked against every pattern by bitmap comparison. Returns the matches as
/// `(row, anchor_x, pattern_name)`, the same key the scanner's markers reduce
/// to.
pub fn oracle_scan(p: &Placement, library: &PatternLibrary) -> BTreeSet<(u32, Dbu, String)> {
    let grid = p.grid();
    let ext = grid.extent();
    let design = rasterize_placement(p);
    let rasters: Vec<(usize, BTreeMap<String, Bitmap>)> = library
        .patterns()
        .iter()
        .enumerate()
        .map(|(i, pat)| (i, rasterize_pattern(pat)))
        .collect();
    let mut hits = BTreeSet::new();
    for row in 0..grid.num_rows {
        let row_rect = grid.row_rect(row);
        for k in 0..=grid.row_len_sites {
            let anchor_x = grid.site_x(k);
            for (i, raster) in &rasters {
                let pat = &library.patterns()[*i];
                if pat.window_h() != grid.row_h {
                    continue;
                }
                let half = pat.window_w() / 2;
                if anchor_x - half < row_rect.llx || anchor_x + half > row_rect.urx {
                    continue;
                }
                let window = Rect::new(
                    anchor_x - half - ext.llx,
                    row_rect.lly - ext.lly,
                    anchor_x + half - ext.llx,
                    row_rect.ury - ext.lly,
                );
                let direct = window_equals(&design, window, raster, false);
                let mirrored =
                    library.match_mirrored() && window_equals(&design, window, raster, true);
                if direct || mirrored {
                    hits.insert((row, anchor_x, pat.name().to_string()));
                }
            }
        }
    }
    hits
}

/// Per-site occupancy rebuilt instance by instance; panics on double
/// occupancy.
pub fn brute_force_occupancy(p: &Placement) -> Vec<Vec<bool>> {
    let grid = p.grid();
    let mut occ = vec![vec![false; grid.row_len_sites as usize]; grid.num_rows as usize];
    for inst in p.instances() {
        let w = p.master(inst.master).width_sites;
        for s in inst.x_site..inst.x_site + w {
            let slot = &mut occ[inst.row as usize][s as usize];
            assert!(!*slot, "site ({}, {s}) occupied twice", inst.row);
            *slot = true;
        }
    }
    occ
}

/// A random design on a deliberately tiny grid (a few DBU per site) so the
/// bitmap oracle stays cheap. Pure function of the seed.
pub fn tiny_design(seed: u64) -> Placement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let site_w = *[2, 3, 4].choose(&mut rng).unwrap() as Dbu;
    let row_h = *[8, 10, 13].choose(&mut rng).unwrap() as Dbu;
    let grid = GridSpec {
        dbu_per_um: 10,
        site_w,
        row_h,
        num_rows: rng.random_range(2..=3),
        row_len_sites: rng.random_range(12..=20),
        origin: (rng.random_range(-5..=5), rng.random_range(-5..=5)),
    };
    let n_masters = rng.random_range(2..=4usize);
    let mut masters = Vec::new();
    for i in 0..n_masters {
        let width_sites = rng.random_range(1..=3u32);
        let w = width_sites as Dbu * site_w;
        let n_rects = rng.random_range(1..=3usize);
        let mut geometry: Vec<LayerGeometry> = Vec::new();
        for _ in 0..n_rects {
            let layer = *["A", "B"].choose(&mut rng).unwrap();
            let llx = rng.random_range(0..w);
            let urx = rng.random_range(llx + 1..=w);
            let lly = rng.random_range(0..row_h);
            let ury = rng.random_range(lly + 1..=row_h);
            let rect = Rect::new(llx, lly, urx, ury);
            match geometry.iter_mut().find(|lg| lg.layer == layer) {
                Some(lg) => lg.rects.push(rect),
                None => geometry.push(LayerGeometry { layer: layer.into(), rects: vec![rect] }),
            }
        }
        masters.push(CellMaster { name: format!("m{i}"), width_sites, geometry });
    }
    let mut p = Placement::new(grid, masters.clone()).unwrap();
    for row in 0..grid.num_rows {
        let legal = p.legal_orients(row).unwrap();
        let mut x = 0u32;
        while x < grid.row_len_sites {
            if rng.random_bool(0.3) {
                x += 1;
                continue;
            }
            let fitting: Vec<&CellMaster> = masters
                .iter()
                .filter(|m| x + m.width_sites <= grid.row_len_sites)
                .collect();
            let Some(m) = fitting.choose(&mut rng) else {
                break;
            };
            let orient = *legal.choose(&mut rng).unwrap();
            p.add_instance(&format!("c{row}_{x}"), &m.name, x, row, orient).unwrap();
            x += m.width_sites;
        }
    }
    p
}

/// A pattern library sampled from real windows of `p` (so scans are
/// non-vacuous), plus a couple of synthetic windows that may match nowhere.
pub fn tiny_library(seed: u64, p: &Placement, n: usize, match_mirrored: bool) -> PatternLibrary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let grid = p.grid();
    let mut patterns = Vec::new();
    for i in 0..n {
        let half_sites = rng.random_range(1..=2u32);
        let row = rng.random_range(0..grid.num_rows);
        let k = rng.random_range(half_sites..=grid.row_len_sites - half_sites);
        let row_rect = grid.row_rect(row);
        let half = half_sites as Dbu * grid.site_w;
        let anchor_x = grid.site_x(k);
        let window = Rect::new(anchor_x - half, row_rect.lly, anchor_x + half, row_rect.ury);
        let geometry = p.window_geometry(window);
        patterns.push(Pattern::new(format!("pat{i}"), 2 * half, grid.row_h, geometry).unwrap());
    }
    // a synthetic pattern that most likely matches nothing
    let w = 2 * grid.site_w;
    patterns.push(
        Pattern::new(
            "synthetic",
            w,
            grid.row_h,
            [("A".to_string(), vec![Rect::new(0, 0, 1, 1), Rect::new(w - 1, grid.row_h - 1, w, grid.row_h)])],
        )
        .unwrap(),
    );
    PatternLibrary::new(patterns, match_mirrored).unwrap()
}

/// Marker list reduced to comparable `(row, anchor_x, name)` keys.
pub fn marker_keys(markers: &[abutfix_core::ErrorMarker]) -> BTreeSet<(u32, Dbu, String)> {
    markers
        .iter()
        .map(|m| (m.anchor_row, m.anchor_x(), m.pattern_name.clone()))
        .collect()
}
