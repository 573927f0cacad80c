//! Random system sampling, used by the property suites and for experiments
//! with randomized translations.

use rand::Rng;

use crate::presets;
use crate::system::BaranskiSystem;

/// Samples a general system: random strip sizes, a random nonempty pattern
/// and uniform random translations inside the admissible box.
pub fn random_system<R: Rng>(rng: &mut R, max_columns: usize, max_rows: usize) -> BaranskiSystem {
    let m = rng.random_range(2..=max_columns.max(2));
    let n = rng.random_range(2..=max_rows.max(2));

    let widths = random_partition(rng, m);
    let heights = random_partition(rng, n);

    let mut pattern: Vec<(usize, usize)> = Vec::new();
    for i in 1..=m {
        for j in 1..=n {
            if rng.random_bool(0.5) {
                pattern.push((i, j));
            }
        }
    }
    if pattern.is_empty() {
        pattern.push((rng.random_range(1..=m), rng.random_range(1..=n)));
    }

    let max_w = widths.iter().copied().fold(0.0, f64::max);
    let max_h = heights.iter().copied().fold(0.0, f64::max);
    let col_t: Vec<(usize, f64)> = (1..=m)
        .map(|i| (i, rng.random_range(0.0..=(1.0 - max_w))))
        .collect();
    let row_t: Vec<(usize, f64)> = (1..=n)
        .map(|j| (j, rng.random_range(0.0..=(1.0 - max_h))))
        .collect();

    presets::from_reals(&widths, &heights, &pattern, &col_t, &row_t)
        .expect("sampled system is valid by construction")
}

/// Samples a Bedford-McMullen-type system on an integer grid with
/// `width_reciprocal` in `2..=5`, `height_reciprocal` in `3..=7` and
/// `height_reciprocal > width_reciprocal`, with canonical translations.
pub fn random_bm_system<R: Rng>(rng: &mut R) -> BaranskiSystem {
    let m = rng.random_range(2..=5usize);
    let n = rng.random_range((m + 1).max(3)..=7usize);

    let mut pattern: Vec<(usize, usize)> = Vec::new();
    for i in 1..=m {
        for j in 1..=n {
            if rng.random_bool(0.45) {
                pattern.push((i, j));
            }
        }
    }
    if pattern.is_empty() {
        pattern.push((rng.random_range(1..=m), rng.random_range(1..=n)));
    }

    presets::uniform_grid_with_pattern(m, n, &pattern)
        .expect("sampled uniform grid is valid by construction")
}

/// Random strip sizes bounded away from zero, normalized to sum exactly to
/// one in floating point.
fn random_partition<R: Rng>(rng: &mut R, parts: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..parts).map(|_| rng.random_range(0.25..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let mut out: Vec<f64> = raw.iter().map(|v| v / sum).collect();
    // Force an exact unit sum so validation never trips on the last ulp.
    let partial: f64 = out[..parts - 1].iter().sum();
    out[parts - 1] = 1.0 - partial;
    out
}
