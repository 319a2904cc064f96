//! Shared fixtures for the criterion benchmarks.

use abutfix_core::{derive_patterns, gen_masters, gen_placement, PatternLibrary, Placement, SynthConfig};

/// A deterministic benchmark design with its derived pattern library.
pub fn fixture(n_cells: u32, n_patterns: u32, seed: u64) -> (Placement, PatternLibrary) {
    let cfg = SynthConfig { seed, n_cells, n_patterns, ..SynthConfig::default() };
    let masters = gen_masters(&cfg).expect("benchmark masters");
    let placement = gen_placement(&masters, &cfg).expect("benchmark placement");
    let (library, _) = derive_patterns(&placement, &cfg).expect("benchmark patterns");
    (placement, library)
}
