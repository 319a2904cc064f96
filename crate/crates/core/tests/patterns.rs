//! The scanner against the exhaustive bitmap oracle on randomized designs.

mod common;

use abutfix_core::{match_at, scan_boundaries, scan_full};
use common::{marker_keys, oracle_scan, tiny_design, tiny_library};
use std::collections::BTreeSet;

#[test]
fn full_scan_equals_bitmap_oracle() {
    let mut total_hits = 0usize;
    for seed in 0..60 {
        let p = tiny_design(seed);
        let lib = tiny_library(seed, &p, 4, seed % 2 == 0);
        let got = marker_keys(&scan_full(&p, &lib));
        let want = oracle_scan(&p, &lib);
        assert_eq!(got, want, "seed {seed}");
        total_hits += got.len();
    }
    assert!(total_hits > 100, "suspiciously few matches ({total_hits}); the fixture is too weak");
}

#[test]
fn boundary_scan_is_a_subset_anchored_at_abutments() {
    for seed in 0..60 {
        let p = tiny_design(seed);
        let lib = tiny_library(seed, &p, 4, true);
        let full = marker_keys(&scan_full(&p, &lib));
        let bound = marker_keys(&scan_boundaries(&p, &lib));
        assert!(bound.is_subset(&full), "seed {seed}");
        let anchors: BTreeSet<(u32, i64)> = p
            .abutment_anchors()
            .into_iter()
            .map(|(row, k)| (row, p.grid().site_x(k)))
            .collect();
        for (row, x, _) in &bound {
            assert!(anchors.contains(&(*row, *x)), "seed {seed}: marker at non-abutment ({row}, {x})");
        }
        // and every full-scan marker at an abutment anchor is found
        for key in &full {
            if anchors.contains(&(key.0, key.1)) {
                assert!(bound.contains(key), "seed {seed}: boundary scan missed {key:?}");
            }
        }
    }
}

#[test]
fn match_at_agrees_with_the_scanner() {
    for seed in 0..30 {
        let p = tiny_design(seed);
        let lib = tiny_library(seed, &p, 4, true);
        let full = marker_keys(&scan_full(&p, &lib));
        let grid = p.grid();
        for pat in lib.patterns() {
            for row in 0..grid.num_rows {
                for k in 0..=grid.row_len_sites {
                    let anchor_x = grid.site_x(k);
                    let hit = match_at(&p, pat, anchor_x, row, lib.match_mirrored());
                    let key = (row, anchor_x, pat.name().to_string());
                    assert_eq!(hit.is_some(), full.contains(&key), "seed {seed} {key:?}");
                    if let Some(m) = hit {
                        assert_eq!(m.anchor_row, row);
                        assert_eq!(m.anchor_x(), anchor_x);
                        assert_eq!(m.bbox.width(), pat.window_w());
                        assert_eq!(m.bbox, grid.row_rect(row).intersect(m.bbox).unwrap());
                    }
                }
            }
        }
    }
}

#[test]
fn markers_come_out_sorted_and_deduplicated() {
    for seed in 0..40 {
        let p = tiny_design(seed);
        let lib = tiny_library(seed, &p, 5, true);
        let markers = scan_full(&p, &lib);
        let keys: Vec<_> = markers
            .iter()
            .map(|m| (m.anchor_row, m.anchor_x(), m.pattern_name.clone()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(keys, sorted, "seed {seed}: scan output not sorted/deduped");
    }
}
