//! Ready-made example systems and convenience constructors.
//!
//! The named systems here are the ones used throughout the documentation,
//! tests and benches. All of them carry exact rational parameters so the
//! overlap diagnostics can run on them.

use std::collections::BTreeMap;

use crate::numeric::Scalar;
use crate::system::{BaranskiSystem, SystemDefinition, ValidationError};

/// Builds a system from double-precision parts.
pub fn from_reals(
    widths: &[f64],
    heights: &[f64],
    pattern: &[(usize, usize)],
    column_translations: &[(usize, f64)],
    row_translations: &[(usize, f64)],
) -> Result<BaranskiSystem, ValidationError> {
    BaranskiSystem::validate(SystemDefinition {
        column_widths: widths.iter().map(|&v| Scalar::Real(v)).collect(),
        row_heights: heights.iter().map(|&v| Scalar::Real(v)).collect(),
        pattern: pattern.to_vec(),
        column_translations: column_translations
            .iter()
            .map(|&(i, v)| (i, Scalar::Real(v)))
            .collect(),
        row_translations: row_translations
            .iter()
            .map(|&(j, v)| (j, Scalar::Real(v)))
            .collect(),
    })
}

/// Builds a system from exact rational parts given as `(numer, denom)` pairs.
pub fn from_ratios(
    widths: &[(i64, i64)],
    heights: &[(i64, i64)],
    pattern: &[(usize, usize)],
    column_translations: &[(usize, (i64, i64))],
    row_translations: &[(usize, (i64, i64))],
) -> Result<BaranskiSystem, ValidationError> {
    let scalar = |(n, d): (i64, i64)| Scalar::ratio(n, d);
    BaranskiSystem::validate(SystemDefinition {
        column_widths: widths.iter().copied().map(scalar).collect(),
        row_heights: heights.iter().copied().map(scalar).collect(),
        pattern: pattern.to_vec(),
        column_translations: column_translations
            .iter()
            .map(|&(i, r)| (i, scalar(r)))
            .collect(),
        row_translations: row_translations
            .iter()
            .map(|&(j, r)| (j, scalar(r)))
            .collect(),
    })
}

/// The three-cell carpet on the 2x3 grid with cells (1,1), (2,1), (2,2) in
/// their canonical non-overlapping positions. Its Hausdorff and box
/// dimensions differ (roughly 1.3497 vs 1.3691).
pub fn bm_three_cell() -> BaranskiSystem {
    from_ratios(
        &[(1, 2), (1, 2)],
        &[(1, 3), (1, 3), (1, 3)],
        &[(1, 1), (2, 1), (2, 2)],
        &[(1, (0, 1)), (2, (1, 2))],
        &[(1, (0, 1)), (2, (1, 3))],
    )
    .expect("canonical three-cell system is valid")
}

/// Variant of the three-cell carpet whose two columns occupy disjoint rows
/// covering the full height: cells (1,1), (2,2), (2,3). Merging its columns
/// produces a single full column.
pub fn bm_three_cell_full_column_variant() -> BaranskiSystem {
    from_ratios(
        &[(1, 2), (1, 2)],
        &[(1, 3), (1, 3), (1, 3)],
        &[(1, 1), (2, 2), (2, 3)],
        &[(1, (0, 1)), (2, (1, 2))],
        &[(1, (0, 1)), (2, (1, 3)), (3, (2, 3))],
    )
    .expect("full-column variant is valid")
}

/// The eight-cell third-subdivision carpet (3x3 grid minus the centre cell)
/// in canonical position; its dimension is log 8 / log 3.
pub fn third_subdivision_eight_cell() -> BaranskiSystem {
    let thirds = [(1i64, 3i64); 3];
    let pattern: Vec<(usize, usize)> = (1..=3)
        .flat_map(|i| (1..=3).map(move |j| (i, j)))
        .filter(|&(i, j)| !(i == 2 && j == 2))
        .collect();
    let translations: Vec<(usize, (i64, i64))> =
        (1..=3).map(|i| (i, ((i as i64 - 1), 3))).collect();
    from_ratios(&thirds, &thirds, &pattern, &translations, &translations)
        .expect("eight-cell system is valid")
}

/// The full `m x n` uniform grid in canonical position; its attractor is the
/// unit square.
pub fn full_uniform_grid(m: usize, n: usize) -> BaranskiSystem {
    let widths: Vec<(i64, i64)> = (0..m).map(|_| (1, m as i64)).collect();
    let heights: Vec<(i64, i64)> = (0..n).map(|_| (1, n as i64)).collect();
    let pattern: Vec<(usize, usize)> = (1..=m).flat_map(|i| (1..=n).map(move |j| (i, j))).collect();
    let col_t: Vec<(usize, (i64, i64))> =
        (1..=m).map(|i| (i, ((i as i64 - 1), m as i64))).collect();
    let row_t: Vec<(usize, (i64, i64))> =
        (1..=n).map(|j| (j, ((j as i64 - 1), n as i64))).collect();
    from_ratios(&widths, &heights, &pattern, &col_t, &row_t).expect("full uniform grid is valid")
}

/// A uniform-grid system with an arbitrary pattern and canonical translations.
pub fn uniform_grid_with_pattern(
    m: usize,
    n: usize,
    pattern: &[(usize, usize)],
) -> Result<BaranskiSystem, ValidationError> {
    let widths: Vec<(i64, i64)> = (0..m).map(|_| (1, m as i64)).collect();
    let heights: Vec<(i64, i64)> = (0..n).map(|_| (1, n as i64)).collect();
    let col_t: Vec<(usize, (i64, i64))> =
        (1..=m).map(|i| (i, ((i as i64 - 1), m as i64))).collect();
    let row_t: Vec<(usize, (i64, i64))> =
        (1..=n).map(|j| (j, ((j as i64 - 1), n as i64))).collect();
    from_ratios(&widths, &heights, pattern, &col_t, &row_t)
}

/// Replaces the translations of a system built by [`uniform_grid_with_pattern`]
/// with explicit rational values, keeping grid and pattern.
pub fn with_translations(
    system: &BaranskiSystem,
    column_translations: &[(usize, (i64, i64))],
    row_translations: &[(usize, (i64, i64))],
) -> Result<BaranskiSystem, ValidationError> {
    let mut def = system.to_definition();
    def.column_translations = column_translations
        .iter()
        .map(|&(i, (n, d))| (i, Scalar::ratio(n, d)))
        .collect::<BTreeMap<_, _>>();
    def.row_translations = row_translations
        .iter()
        .map(|&(j, (n, d))| (j, Scalar::ratio(n, d)))
        .collect::<BTreeMap<_, _>>();
    BaranskiSystem::validate(def)
}
