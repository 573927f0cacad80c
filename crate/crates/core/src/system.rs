//! Carpet systems: validation, axis projections and classification.
//!
//! A system divides the unit square into `m` vertical strips of widths `a_i`
//! and `n` horizontal strips of heights `b_j`, keeps a pattern of cells
//! `(i, j)`, and translates every cell in column `i` by `t_i` horizontally and
//! every cell in row `j` by `tau_j` vertically. Cells in the same column or
//! row stay aligned, which is what the dimension formulas exploit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::Scalar;

/// Absolute tolerance for real-valued sum and range checks.
pub const REAL_TOLERANCE: f64 = 1e-12;

/// A 1-based grid cell: column `col`, row `row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub fn new(col: usize, row: usize) -> Self {
        Cell { col, row }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.col, self.row)
    }
}

/// The on-disk form of a system, as deserialized from JSON.
///
/// `pattern` holds 1-based `[col, row]` pairs; translation maps are keyed by
/// the 1-based column/row index and must cover every occupied column/row.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDefinition {
    pub column_widths: Vec<Scalar>,
    pub row_heights: Vec<Scalar>,
    pub pattern: Vec<(usize, usize)>,
    pub column_translations: BTreeMap<usize, Scalar>,
    pub row_translations: BTreeMap<usize, Scalar>,
}

/// One violated invariant found during validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("{axis} entries must sum to 1, got {sum}")]
    SumNotOne { axis: Axis, sum: f64 },
    #[error("{axis} entry {index} must lie strictly inside (0,1), got {value}")]
    StripOutOfRange {
        axis: Axis,
        index: usize,
        value: f64,
    },
    #[error("translation for {axis} {index} is {value} but must lie in [0, {max}]")]
    TranslationOutOfRange {
        axis: Axis,
        index: usize,
        value: f64,
        max: f64,
    },
    #[error("pattern is empty")]
    EmptyPattern,
    #[error("pattern cell {cell} is outside the {columns}x{rows} grid")]
    IndexOutOfBounds {
        cell: Cell,
        columns: usize,
        rows: usize,
    },
    #[error("translation key {index} is outside the valid {axis} range 1..={count}")]
    TranslationIndexOutOfBounds {
        axis: Axis,
        index: usize,
        count: usize,
    },
    #[error("missing translation for occupied {axis} {index}")]
    MissingTranslation { axis: Axis, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Column,
    Row,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Column => f.write_str("column"),
            Axis::Row => f.write_str("row"),
        }
    }
}

/// Validation failure listing every violated invariant, not just the first.
#[derive(Debug, Clone, Error, PartialEq)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid system: ")?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Non-fatal findings reported alongside a valid system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SystemWarning {
    /// The pattern fills the whole grid; formulas stay well defined but the
    /// carpet degenerates to the unit square under canonical translations.
    FullPattern,
}

impl fmt::Display for SystemWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemWarning::FullPattern => {
                f.write_str("pattern fills the entire grid (every cell is occupied)")
            }
        }
    }
}

/// Axis projections of a pattern: occupied columns/rows and per-fibre cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternProjections {
    pub occupied_columns: Vec<usize>,
    pub occupied_rows: Vec<usize>,
    pub by_column: BTreeMap<usize, Vec<Cell>>,
    pub by_row: BTreeMap<usize, Vec<Cell>>,
}

impl PatternProjections {
    fn from_cells(cells: &[Cell]) -> Self {
        let mut by_column: BTreeMap<usize, Vec<Cell>> = BTreeMap::new();
        let mut by_row: BTreeMap<usize, Vec<Cell>> = BTreeMap::new();
        for &c in cells {
            by_column.entry(c.col).or_default().push(c);
            by_row.entry(c.row).or_default().push(c);
        }
        PatternProjections {
            occupied_columns: by_column.keys().copied().collect(),
            occupied_rows: by_row.keys().copied().collect(),
            by_column,
            by_row,
        }
    }

    pub fn column_size(&self, col: usize) -> usize {
        self.by_column.get(&col).map_or(0, Vec::len)
    }

    pub fn row_size(&self, row: usize) -> usize {
        self.by_row.get(&row).map_or(0, Vec::len)
    }
}

/// Classification of a validated system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemClass {
    pub kind: CarpetKind,
    pub uniform_vertical_fibres: bool,
    pub uniform_horizontal_fibres: bool,
}

/// `BedfordMcMullenType` means all occupied columns share width `1/width_reciprocal`
/// and all occupied rows share height `1/height_reciprocal`, with
/// `height_reciprocal > width_reciprocal > 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum CarpetKind {
    GeneralBaranski,
    BedfordMcMullenType {
        width_reciprocal: f64,
        height_reciprocal: f64,
    },
}

/// A validated carpet system. Immutable after construction and safe to share
/// across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct BaranskiSystem {
    widths: Vec<Scalar>,
    heights: Vec<Scalar>,
    cells: Vec<Cell>,
    column_translations: BTreeMap<usize, Scalar>,
    row_translations: BTreeMap<usize, Scalar>,
    widths_f: Vec<f64>,
    heights_f: Vec<f64>,
    projections: PatternProjections,
}

impl BaranskiSystem {
    /// Validates a raw definition, reporting every violated invariant.
    pub fn validate(def: SystemDefinition) -> Result<Self, ValidationError> {
        let mut violations = Vec::new();

        check_strips(&def.column_widths, Axis::Column, &mut violations);
        check_strips(&def.row_heights, Axis::Row, &mut violations);

        let m = def.column_widths.len();
        let n = def.row_heights.len();

        let mut cell_set: BTreeSet<Cell> = BTreeSet::new();
        for &(col, row) in &def.pattern {
            let cell = Cell::new(col, row);
            if col == 0 || col > m || row == 0 || row > n {
                violations.push(Violation::IndexOutOfBounds {
                    cell,
                    columns: m,
                    rows: n,
                });
            } else {
                cell_set.insert(cell);
            }
        }
        if cell_set.is_empty() {
            violations.push(Violation::EmptyPattern);
        }

        let cells: Vec<Cell> = cell_set.into_iter().collect();
        let projections = PatternProjections::from_cells(&cells);

        let max_width = def
            .column_widths
            .iter()
            .map(Scalar::to_f64)
            .fold(0.0, f64::max);
        let max_height = def
            .row_heights
            .iter()
            .map(Scalar::to_f64)
            .fold(0.0, f64::max);

        let column_translations = check_translations(
            &def.column_translations,
            &projections.occupied_columns,
            m,
            1.0 - max_width,
            Axis::Column,
            &mut violations,
        );
        let row_translations = check_translations(
            &def.row_translations,
            &projections.occupied_rows,
            n,
            1.0 - max_height,
            Axis::Row,
            &mut violations,
        );

        if !violations.is_empty() {
            return Err(ValidationError { violations });
        }

        let widths_f = def.column_widths.iter().map(Scalar::to_f64).collect();
        let heights_f = def.row_heights.iter().map(Scalar::to_f64).collect();

        Ok(BaranskiSystem {
            widths: def.column_widths,
            heights: def.row_heights,
            cells,
            column_translations,
            row_translations,
            widths_f,
            heights_f,
            projections,
        })
    }

    /// Non-fatal diagnostics for a valid system.
    pub fn warnings(&self) -> Vec<SystemWarning> {
        let mut w = Vec::new();
        if self.cells.len() == self.num_columns() * self.num_rows() {
            w.push(SystemWarning::FullPattern);
        }
        w
    }

    pub fn num_columns(&self) -> usize {
        self.widths.len()
    }

    pub fn num_rows(&self) -> usize {
        self.heights.len()
    }

    /// Pattern cells in ascending `(col, row)` order.
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn projections(&self) -> &PatternProjections {
        &self.projections
    }

    /// Width of column `col` (1-based).
    pub fn width(&self, col: usize) -> f64 {
        self.widths_f[col - 1]
    }

    /// Height of row `row` (1-based).
    pub fn height(&self, row: usize) -> f64 {
        self.heights_f[row - 1]
    }

    pub fn width_scalar(&self, col: usize) -> &Scalar {
        &self.widths[col - 1]
    }

    pub fn height_scalar(&self, row: usize) -> &Scalar {
        &self.heights[row - 1]
    }

    /// Horizontal translation of an occupied column.
    pub fn column_translation(&self, col: usize) -> f64 {
        self.column_translations[&col].to_f64()
    }

    /// Vertical translation of an occupied row.
    pub fn row_translation(&self, row: usize) -> f64 {
        self.row_translations[&row].to_f64()
    }

    pub fn column_translation_scalar(&self, col: usize) -> &Scalar {
        &self.column_translations[&col]
    }

    pub fn row_translation_scalar(&self, row: usize) -> &Scalar {
        &self.row_translations[&row]
    }

    /// Widths of the occupied columns, in column order.
    pub fn occupied_widths(&self) -> Vec<f64> {
        self.projections
            .occupied_columns
            .iter()
            .map(|&i| self.width(i))
            .collect()
    }

    /// Heights of the occupied rows, in row order.
    pub fn occupied_heights(&self) -> Vec<f64> {
        self.projections
            .occupied_rows
            .iter()
            .map(|&j| self.height(j))
            .collect()
    }

    /// Detects Bedford-McMullen-type structure and fibre uniformity. Only
    /// occupied columns and rows are inspected; empty strips may have
    /// arbitrary sizes.
    pub fn classify(&self) -> SystemClass {
        let proj = &self.projections;
        let col_sizes: Vec<usize> = proj
            .occupied_columns
            .iter()
            .map(|&i| proj.column_size(i))
            .collect();
        let row_sizes: Vec<usize> = proj
            .occupied_rows
            .iter()
            .map(|&j| proj.row_size(j))
            .collect();
        let uniform_vertical_fibres = col_sizes.windows(2).all(|w| w[0] == w[1]);
        let uniform_horizontal_fibres = row_sizes.windows(2).all(|w| w[0] == w[1]);

        let widths = self.occupied_widths();
        let heights = self.occupied_heights();
        let equal = |xs: &[f64]| xs.windows(2).all(|w| (w[0] - w[1]).abs() <= REAL_TOLERANCE);

        let mut kind = CarpetKind::GeneralBaranski;
        if equal(&widths) && equal(&heights) {
            let width_reciprocal = 1.0 / widths[0];
            let height_reciprocal = 1.0 / heights[0];
            if height_reciprocal > width_reciprocal + REAL_TOLERANCE && width_reciprocal > 1.0 {
                kind = CarpetKind::BedfordMcMullenType {
                    width_reciprocal,
                    height_reciprocal,
                };
            }
        }

        SystemClass {
            kind,
            uniform_vertical_fibres,
            uniform_horizontal_fibres,
        }
    }

    /// Round-trips the validated system back into its file form.
    pub fn to_definition(&self) -> SystemDefinition {
        SystemDefinition {
            column_widths: self.widths.clone(),
            row_heights: self.heights.clone(),
            pattern: self.cells.iter().map(|c| (c.col, c.row)).collect(),
            column_translations: self.column_translations.clone(),
            row_translations: self.row_translations.clone(),
        }
    }
}

fn check_strips(entries: &[Scalar], axis: Axis, violations: &mut Vec<Violation>) {
    for (idx, e) in entries.iter().enumerate() {
        let v = e.to_f64();
        if !(v > 0.0 && v < 1.0) {
            violations.push(Violation::StripOutOfRange {
                axis,
                index: idx + 1,
                value: v,
            });
        }
    }
    if entries.is_empty() {
        violations.push(Violation::SumNotOne { axis, sum: 0.0 });
        return;
    }
    if entries.iter().all(Scalar::is_exact) {
        let sum: BigRational = entries.iter().filter_map(Scalar::exact).sum();
        if !sum.is_one() {
            violations.push(Violation::SumNotOne {
                axis,
                sum: crate::numeric::rational_to_f64(&sum),
            });
        }
    } else {
        let sum: f64 = entries.iter().map(Scalar::to_f64).sum();
        if (sum - 1.0).abs() > REAL_TOLERANCE {
            violations.push(Violation::SumNotOne { axis, sum });
        }
    }
}

fn check_translations(
    given: &BTreeMap<usize, Scalar>,
    occupied: &[usize],
    strip_count: usize,
    max_allowed: f64,
    axis: Axis,
    violations: &mut Vec<Violation>,
) -> BTreeMap<usize, Scalar> {
    let mut kept = BTreeMap::new();
    for (&idx, value) in given {
        if idx == 0 || idx > strip_count {
            violations.push(Violation::TranslationIndexOutOfBounds {
                axis,
                index: idx,
                count: strip_count,
            });
            continue;
        }
        let v = value.to_f64();
        if v < -REAL_TOLERANCE || v > max_allowed + REAL_TOLERANCE {
            violations.push(Violation::TranslationOutOfRange {
                axis,
                index: idx,
                value: v,
                max: max_allowed,
            });
        }
        if occupied.contains(&idx) {
            kept.insert(idx, value.clone());
        }
    }
    for &idx in occupied {
        if !kept.contains_key(&idx) {
            violations.push(Violation::MissingTranslation { axis, index: idx });
        }
    }
    kept
}
