//! Synthetic cell libraries, placements, and pattern libraries for
//! benchmarking the scanner and the fix loop at realistic scale.
//!
//! Generation is a pure function of [`SynthConfig`]: masters, placement, and
//! patterns each derive their own RNG stream from the config seed, so any of
//! the three can be regenerated independently and reproducibly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{canonicalize, mirror_x, Dbu, LayerGeometry, Rect};
use crate::patterns::{Pattern, PatternError, PatternLibrary};
use crate::placement::{CellMaster, GridSpec, Placement, PlacementError};

/// Fixed technology shape of every generated design.
pub const DBU_PER_UM: u32 = 1000;
pub const SITE_W: Dbu = 152;
pub const ROW_H: Dbu = 1672;
/// Height of the VDD/VSS rail strip along the bottom and top of every cell.
pub const RAIL_H: Dbu = 152;
pub const LAYER: &str = "M1";
/// Derived pattern windows span this many sites on each side of an abutment.
pub const WINDOW_HALF_SITES: u32 = 3;

/// Probability that a cell boundary receives whitespace when distributing the
/// row's free sites.
const P_GAP: f64 = 0.5;
/// Minimum interior shape dimension, and the grid its coordinates snap to.
const MIN_FEATURE: Dbu = 40;
const FEATURE_STEP: Dbu = 8;
/// Cells per row the generator aims for when sizing the grid.
const CELLS_PER_ROW: u32 = 200;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("invalid synthesis config: {0}")]
    Config(String),
    #[error("design has {available} usable abutments but {requested} patterns were requested")]
    TooFewAbutments { available: usize, requested: u32 },
    #[error("design has only {distinct} distinct abutment windows but {requested} patterns were requested")]
    TooFewDistinctWindows { distinct: usize, requested: u32 },
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

/// Knobs for one synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_masters: u32,
    /// inclusive `[min, max]` cell width in sites
    pub master_width_range: [u32; 2],
    /// probability that a master's geometry is mirror-symmetric
    pub p_symmetric: f64,
    pub n_cells: u32,
    /// target fraction of sites covered by cells, in `(0, 1]`
    pub utilization: f64,
    pub n_patterns: u32,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            seed: 1,
            n_masters: 16,
            master_width_range: [2, 8],
            p_symmetric: 0.15,
            n_cells: 2000,
            utilization: 0.75,
            n_patterns: 10,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_masters == 0 {
            return Err(SynthError::Config("n_masters must be at least 1".into()));
        }
        let [lo, hi] = self.master_width_range;
        if lo == 0 || lo > hi {
            return Err(SynthError::Config(format!(
                "master_width_range [{lo}, {hi}] must satisfy 1 <= min <= max"
            )));
        }
        if hi > 1024 {
            return Err(SynthError::Config("master widths above 1024 sites are not supported".into()));
        }
        if !(0.0..=1.0).contains(&self.p_symmetric) {
            return Err(SynthError::Config("p_symmetric must be in [0, 1]".into()));
        }
        if self.n_cells == 0 {
            return Err(SynthError::Config("n_cells must be at least 1".into()));
        }
        if !(self.utilization > 0.0 && self.utilization <= 1.0) {
            return Err(SynthError::Config("utilization must be in (0, 1]".into()));
        }
        Ok(())
    }

    fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// The grid every generated placement lives on; only the row count and row
/// length depend on the config.
pub fn synth_grid(num_rows: u32, row_len_sites: u32) -> GridSpec {
    GridSpec {
        dbu_per_um: DBU_PER_UM,
        site_w: SITE_W,
        row_h: ROW_H,
        num_rows,
        row_len_sites,
        origin: (0, 0),
    }
}

/// One boundary the pattern library was derived from. Scanning the design it
/// came from is guaranteed to produce a marker for `pattern` at this anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedAnchor {
    pub pattern: String,
    pub row: u32,
    pub anchor_x: Dbu,
}

/// Generate the cell library: every master gets full-width VDD/VSS rail
/// strips plus a few random interior shapes, the first two of which are tabs
/// touching the left and right cell edges so that abutment windows carry
/// master-specific geometry. With probability `p_symmetric` the interior is
/// symmetrized by union with its own mirror image.
pub fn gen_masters(cfg: &SynthConfig) -> Result<Vec<CellMaster>, SynthError> {
    cfg.validate()?;
    let mut rng = cfg.stream(1);
    let mut out = Vec::with_capacity(cfg.n_masters as usize);
    for i in 0..cfg.n_masters {
        let width_sites = rng.random_range(cfg.master_width_range[0]..=cfg.master_width_range[1]);
        let w = width_sites as Dbu * SITE_W;
        let mut rects = vec![
            Rect::new(0, 0, w, RAIL_H),
            Rect::new(0, ROW_H - RAIL_H, w, ROW_H),
        ];
        let n_interior = rng.random_range(2..=6u32);
        for j in 0..n_interior {
            let r = random_interior_rect(&mut rng, w, j);
            rects.push(r);
        }
        let symmetric = rng.random_bool(cfg.p_symmetric);
        if symmetric {
            let mirrored = mirror_x(&rects, w);
            rects.extend(mirrored);
        }
        out.push(CellMaster {
            name: format!("m{i:03}"),
            width_sites,
            geometry: vec![LayerGeometry { layer: LAYER.into(), rects: canonicalize(&rects) }],
        });
    }
    Ok(out)
}

/// A random rectangle between the rails, snapped to an 8-DBU grid. The first
/// two shapes of a master anchor to the left and right cell edges.
fn random_interior_rect(rng: &mut ChaCha8Rng, w: Dbu, index: u32) -> Rect {
    let y_lo = RAIL_H;
    let y_hi = ROW_H - RAIL_H;
    let lly = y_lo + rng.random_range(0..=(y_hi - y_lo - MIN_FEATURE) / FEATURE_STEP) * FEATURE_STEP;
    let ury = lly + MIN_FEATURE + rng.random_range(0..=(y_hi - lly - MIN_FEATURE) / FEATURE_STEP) * FEATURE_STEP;
    let (llx, urx) = match index {
        0 => {
            // tab on the left cell edge
            let urx = MIN_FEATURE + rng.random_range(0..=(w - MIN_FEATURE).min(w / 2) / FEATURE_STEP) * FEATURE_STEP;
            (0, urx)
        }
        1 => {
            // tab on the right cell edge
            let llx = w - MIN_FEATURE - rng.random_range(0..=(w - MIN_FEATURE).min(w / 2) / FEATURE_STEP) * FEATURE_STEP;
            (llx, w)
        }
        _ => {
            let llx = rng.random_range(0..=(w - MIN_FEATURE) / FEATURE_STEP) * FEATURE_STEP;
            let urx = llx + MIN_FEATURE + rng.random_range(0..=(w - llx - MIN_FEATURE) / FEATURE_STEP) * FEATURE_STEP;
            (llx, urx)
        }
    };
    Rect::new(llx, lly, urx.min(w), ury.min(ROW_H - RAIL_H))
}

fn master_is_symmetric(m: &CellMaster, site_w: Dbu) -> bool {
    let w = m.width_sites as Dbu * site_w;
    m.geometry.iter().all(|lg| {
        let direct = canonicalize(&lg.rects);
        let mirrored = canonicalize(&mirror_x(&lg.rects, w));
        direct == mirrored
    })
}

/// Generate a legal placement of `n_cells` random instances at the target
/// utilization (achieved within a fraction of a percent whenever the row
/// length is large enough for rounding to be negligible).
///
/// Two invariants shape the whitespace distribution: mirror-symmetric masters
/// are never abutted directly against each other (such a boundary cannot be
/// changed by any flip, so it gets a mandatory one-site gap), and the
/// remaining free sites are scattered over randomly chosen cell boundaries.
pub fn gen_placement(masters: &[CellMaster], cfg: &SynthConfig) -> Result<Placement, SynthError> {
    cfg.validate()?;
    if masters.is_empty() {
        return Err(SynthError::Config("master library is empty".into()));
    }
    let mut rng = cfg.stream(2);
    let symmetric: Vec<bool> = masters.iter().map(|m| master_is_symmetric(m, SITE_W)).collect();

    // pick a master for every cell
    let picks: Vec<usize> = (0..cfg.n_cells)
        .map(|_| rng.random_range(0..masters.len()))
        .collect();

    // balance cells over rows: each cell goes to the currently least-filled row
    let num_rows = cfg.n_cells.div_ceil(CELLS_PER_ROW).max(2);
    let mut row_width = vec![0u64; num_rows as usize];
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); num_rows as usize];
    for (cell, &pick) in picks.iter().enumerate() {
        let row = (0..num_rows as usize)
            .min_by_key(|&r| (row_width[r], r))
            .expect("at least one row");
        row_width[row] += masters[pick].width_sites as u64;
        rows[row].push(cell);
    }
    for row in &mut rows {
        row.shuffle(&mut rng);
    }
    // break up symmetric|symmetric adjacencies where an asymmetric cell can
    // be swapped in; boundaries that stay symmetric get a mandatory gap below
    for row in &mut rows {
        for i in 1..row.len() {
            if symmetric[picks[row[i - 1]]] && symmetric[picks[row[i]]] {
                if let Some(j) = (i + 1..row.len()).find(|&j| !symmetric[picks[row[j]]]) {
                    row.swap(i, j);
                }
            }
        }
    }
    let mandatory_gaps = |row: &[usize]| -> u64 {
        row.windows(2)
            .filter(|w| symmetric[picks[w[0]]] && symmetric[picks[w[1]]])
            .count() as u64
    };

    let total_width: u64 = row_width.iter().sum();
    let ideal = total_width as f64 / (num_rows as f64 * cfg.utilization);
    let mut row_len = (ideal.round() as u64).max(1);
    for (r, row) in rows.iter().enumerate() {
        row_len = row_len.max(row_width[r] + mandatory_gaps(row));
    }
    let row_len: u32 = row_len
        .try_into()
        .map_err(|_| SynthError::Config("design too wide for a 32-bit site index".into()))?;

    let mut placement = Placement::new(synth_grid(num_rows, row_len), masters.to_vec())?;
    for (r, row) in rows.iter().enumerate() {
        // gaps[i] sits before cell i; gaps[len] trails the row
        let mut gaps = vec![0u32; row.len() + 1];
        let mut eligible = vec![false; row.len() + 1];
        for i in 0..row.len() + 1 {
            let mandatory = i >= 1
                && i < row.len()
                && symmetric[picks[row[i - 1]]]
                && symmetric[picks[row[i]]];
            if mandatory {
                gaps[i] = 1;
            }
            eligible[i] = mandatory || rng.random_bool(P_GAP);
        }
        // the trailing slot always absorbs leftovers so distribution never stalls
        eligible[row.len()] = true;
        let slots: Vec<usize> = (0..row.len() + 1).filter(|&i| eligible[i]).collect();
        let assigned: u32 = gaps.iter().sum();
        let free = row_len as u64 - row_width[r] - assigned as u64;
        for _ in 0..free {
            gaps[slots[rng.random_range(0..slots.len())]] += 1;
        }
        let legal = placement.grid().legal_orients(r as u32)?;
        let mut x = 0u32;
        for (i, &cell) in row.iter().enumerate() {
            x += gaps[i];
            let master = &masters[picks[cell]];
            let orient = legal[rng.random_range(0..2usize)];
            placement.add_instance(&format!("c{cell:06}"), &master.name, x, r as u32, orient)?;
            x += master.width_sites;
        }
    }
    debug_assert!(placement.check_legality().is_empty());
    Ok(placement)
}

/// Derive a pattern library from the design itself: sample `n_patterns`
/// abutment boundaries whose window geometries are pairwise distinct and turn
/// each window into a pattern. Returns the library plus the sampled anchors;
/// scanning the same design finds a marker at every one of them.
///
/// Only boundaries between two *asymmetric* cells are sampled. Flipping a
/// mirror-symmetric cell is a geometric no-op, so a pattern containing one
/// could only ever be repaired through its other member — and wherever that
/// member sits walled in between symmetric neighbors with zero gaps, each
/// flip merely slides the match to the cell's opposite boundary and the
/// random walk cycles forever. Restricting the sample keeps every planted
/// pattern escapable at every site it happens to match.
pub fn derive_patterns(
    placement: &Placement,
    cfg: &SynthConfig,
) -> Result<(PatternLibrary, Vec<PlantedAnchor>), SynthError> {
    cfg.validate()?;
    let mut rng = cfg.stream(3);
    let grid = *placement.grid();
    let window_w = 2 * WINDOW_HALF_SITES as Dbu * grid.site_w;
    let half_sites = WINDOW_HALF_SITES;
    let both_asymmetric = |row: u32, x_site: u32| {
        let ax = grid.site_x(x_site);
        let y = grid.row_y(row);
        placement
            .instances_intersecting(Rect::new(ax - 1, y, ax + 1, y + grid.row_h))
            .iter()
            .all(|inst| !placement.is_master_symmetric(inst.master))
    };
    let mut candidates: Vec<(u32, u32)> = placement
        .abutment_anchors()
        .into_iter()
        .filter(|&(_, x)| x >= half_sites && x + half_sites <= grid.row_len_sites)
        .filter(|&(row, x)| both_asymmetric(row, x))
        .collect();
    if candidates.len() < cfg.n_patterns as usize {
        return Err(SynthError::TooFewAbutments {
            available: candidates.len(),
            requested: cfg.n_patterns,
        });
    }
    candidates.shuffle(&mut rng);
    let mut chosen: Vec<(u32, u32)> = Vec::with_capacity(cfg.n_patterns as usize);
    let mut seen = std::collections::HashSet::new();
    for (row, x_site) in candidates {
        if chosen.len() == cfg.n_patterns as usize {
            break;
        }
        let anchor_x = grid.site_x(x_site);
        let window = Rect::new(
            anchor_x - window_w / 2,
            grid.row_y(row),
            anchor_x + window_w / 2,
            grid.row_y(row) + grid.row_h,
        );
        let geometry = placement.window_geometry(window);
        if seen.insert(geometry.clone()) {
            chosen.push((row, x_site));
        }
    }
    if chosen.len() < cfg.n_patterns as usize {
        return Err(SynthError::TooFewDistinctWindows {
            distinct: seen.len(),
            requested: cfg.n_patterns,
        });
    }
    chosen.sort_unstable();
    let mut patterns = Vec::with_capacity(chosen.len());
    let mut anchors = Vec::with_capacity(chosen.len());
    for (i, &(row, x_site)) in chosen.iter().enumerate() {
        let name = format!("p{i:03}");
        let anchor_x = grid.site_x(x_site);
        let window = Rect::new(
            anchor_x - window_w / 2,
            grid.row_y(row),
            anchor_x + window_w / 2,
            grid.row_y(row) + grid.row_h,
        );
        patterns.push(Pattern::new(&name, window_w, grid.row_h, placement.window_geometry(window))?);
        anchors.push(PlantedAnchor { pattern: name, row, anchor_x });
    }
    Ok((PatternLibrary::new(patterns, true)?, anchors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::scan_full;

    fn cfg() -> SynthConfig {
        SynthConfig { n_cells: 300, n_patterns: 6, ..SynthConfig::default() }
    }

    #[test]
    fn masters_are_deterministic_and_well_formed() {
        let a = gen_masters(&cfg()).unwrap();
        let b = gen_masters(&cfg()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 16);
        for m in &a {
            assert!(m.width_sites >= 2 && m.width_sites <= 8);
            let w = m.width_sites as Dbu * SITE_W;
            // rails present: geometry covers the full cell width at y = 0
            let rects = &m.geometry[0].rects;
            assert!(rects.iter().any(|r| r.lly == 0 && r.llx == 0 && r.urx == w));
            assert!(rects.iter().any(|r| r.ury == ROW_H && r.llx == 0 && r.urx == w));
            // left and right tabs touch the edges between the rails
            assert!(rects.iter().any(|r| r.llx == 0 && r.lly > 0));
            assert!(rects.iter().any(|r| r.urx == w && r.ury < ROW_H));
        }
        let different_seed = gen_masters(&SynthConfig { seed: 2, ..cfg() }).unwrap();
        assert_ne!(a, different_seed);
    }

    #[test]
    fn p_symmetric_one_makes_every_master_symmetric() {
        let all_sym = gen_masters(&SynthConfig { p_symmetric: 1.0, ..cfg() }).unwrap();
        assert!(all_sym.iter().all(|m| master_is_symmetric(m, SITE_W)));
        let none_sym = gen_masters(&SynthConfig { p_symmetric: 0.0, ..cfg() }).unwrap();
        // rails alone are symmetric, but random tabs essentially never are
        assert!(none_sym.iter().filter(|m| !master_is_symmetric(m, SITE_W)).count() >= 14);
    }

    #[test]
    fn placement_is_legal_and_hits_utilization() {
        let cfg = cfg();
        let masters = gen_masters(&cfg).unwrap();
        let p = gen_placement(&masters, &cfg).unwrap();
        assert!(p.check_legality().is_empty());
        assert_eq!(p.instances().len(), 300);
        let achieved = p.occupied_sites() as f64 / p.site_capacity() as f64;
        assert!(
            (achieved - cfg.utilization).abs() <= 0.01,
            "achieved {achieved}, target {}",
            cfg.utilization
        );
    }

    #[test]
    fn placement_never_abuts_two_symmetric_masters() {
        // stress the invariant with a symmetry-heavy library
        let cfg = SynthConfig { p_symmetric: 0.6, n_cells: 500, ..cfg() };
        let masters = gen_masters(&cfg).unwrap();
        let p = gen_placement(&masters, &cfg).unwrap();
        for (row, x) in p.abutment_anchors() {
            let probe = Rect::new(
                p.grid().site_x(x) - 1,
                p.grid().row_y(row) + 1,
                p.grid().site_x(x) + 1,
                p.grid().row_y(row) + 2,
            );
            let pair: Vec<_> = p
                .instances_intersecting(probe)
                .into_iter()
                .filter(|i| i.row == row)
                .collect();
            assert_eq!(pair.len(), 2);
            let both_sym = pair
                .iter()
                .all(|i| master_is_symmetric(p.master(i.master), p.grid().site_w));
            assert!(!both_sym, "symmetric cells abut at row {row} site {x}");
        }
    }

    #[test]
    fn derived_patterns_mark_their_planted_anchors() {
        let cfg = cfg();
        let masters = gen_masters(&cfg).unwrap();
        let p = gen_placement(&masters, &cfg).unwrap();
        let (lib, planted) = derive_patterns(&p, &cfg).unwrap();
        assert_eq!(lib.len(), 6);
        assert_eq!(planted.len(), 6);
        let markers = scan_full(&p, &lib);
        for a in &planted {
            assert!(
                markers
                    .iter()
                    .any(|m| m.pattern_name == a.pattern
                        && m.anchor_row == a.row
                        && m.anchor_x() == a.anchor_x),
                "planted anchor {a:?} not re-found"
            );
        }
        // derivation is deterministic
        let (lib2, planted2) = derive_patterns(&p, &cfg).unwrap();
        assert_eq!(lib, lib2);
        assert_eq!(planted, planted2);
    }

    #[test]
    fn derive_patterns_rejects_unreachable_requests() {
        let cfg = SynthConfig { n_cells: 4, n_patterns: 50, ..SynthConfig::default() };
        let masters = gen_masters(&cfg).unwrap();
        let p = gen_placement(&masters, &cfg).unwrap();
        assert!(matches!(
            derive_patterns(&p, &cfg),
            Err(SynthError::TooFewAbutments { .. })
        ));
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        assert!(SynthConfig { n_masters: 0, ..cfg() }.validate().is_err());
        assert!(SynthConfig { master_width_range: [3, 2], ..cfg() }.validate().is_err());
        assert!(SynthConfig { master_width_range: [0, 2], ..cfg() }.validate().is_err());
        assert!(SynthConfig { p_symmetric: 1.5, ..cfg() }.validate().is_err());
        assert!(SynthConfig { utilization: 0.0, ..cfg() }.validate().is_err());
        assert!(SynthConfig { utilization: 1.2, ..cfg() }.validate().is_err());
        assert!(SynthConfig { n_cells: 0, ..cfg() }.validate().is_err());
        assert!(cfg().validate().is_ok());
    }
}
