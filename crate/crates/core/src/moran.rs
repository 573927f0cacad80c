//! Moran-type equation solvers for the axis and box exponents, plus the
//! Bedford-McMullen closed forms and the pressure-bound base.
//!
//! All solvers use bisection on strictly decreasing maps: guaranteed
//! convergence and these solves take microseconds anyway. Powers are
//! evaluated in the log domain to avoid underflow with many cells.

use thiserror::Error;

use crate::system::{BaranskiSystem, CarpetKind};

/// Bisection stops when the bracket is narrower than this.
pub const EXPONENT_TOLERANCE: f64 = 1e-12;
const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum MoranError {
    #[error("ratio list is empty")]
    EmptyInput,
    #[error("ratio {0} is outside (0,1)")]
    RatioOutOfRange(f64),
    #[error("system is not of Bedford-McMullen type")]
    NotBmType,
    #[error("solver inequality violated: max(D_A,D_B)={max_box} exceeds t_A+t_B={axis_sum}")]
    InternalInequalityViolation { max_box: f64, axis_sum: f64 },
}

/// Which side plays the long-side role in the box equation: `WidthMajor`
/// pairs the x-axis exponent with widths, `HeightMajor` the y-axis exponent
/// with heights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    WidthMajor,
    HeightMajor,
}

/// The four Moran exponents of a system. The box (and packing) dimension of
/// the carpet is `max` of the two box exponents away from the exceptional
/// translation set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MoranExponents {
    /// Root of `sum a_i^t = 1` over occupied columns.
    pub x_axis_exponent: f64,
    /// Root of `sum b_j^t = 1` over occupied rows.
    pub y_axis_exponent: f64,
    /// Root of `sum a_i^tA b_j^(D - tA) = 1` over the pattern.
    pub width_major_exponent: f64,
    /// Root of `sum b_j^tB a_i^(D - tB) = 1` over the pattern.
    pub height_major_exponent: f64,
}

impl MoranExponents {
    pub fn box_dimension(&self) -> f64 {
        self.width_major_exponent.max(self.height_major_exponent)
    }
}

/// Closed-form dimensions of a Bedford-McMullen-type system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmDimensions {
    pub hausdorff: f64,
    pub box_counting: f64,
}

/// Bisection for the root of a strictly decreasing function with f(0) >= 0.
/// The upper bracket starts at 1 and doubles until the function goes
/// negative.
fn bisect_decreasing(f: impl Fn(f64) -> f64) -> f64 {
    let f0 = f(0.0);
    debug_assert!(f0 >= -EXPONENT_TOLERANCE, "no root at or above 0");
    if f0 <= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    while f(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e9 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..MAX_BISECTION_STEPS {
        if hi - lo <= EXPONENT_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `sum r_i^t = 1` for the unique `t >= 0`.
pub fn solve_axis_exponent(ratios: &[f64]) -> Result<f64, MoranError> {
    if ratios.is_empty() {
        return Err(MoranError::EmptyInput);
    }
    for &r in ratios {
        if !(r > 0.0 && r < 1.0) {
            return Err(MoranError::RatioOutOfRange(r));
        }
    }
    let logs: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    Ok(bisect_decreasing(|t| {
        logs.iter().map(|&l| (t * l).exp()).sum::<f64>() - 1.0
    }))
}

/// Solves the box equation for one orientation. The matching axis exponent
/// is solved first; the summand is strictly decreasing in the box exponent.
pub fn solve_box_exponent(
    system: &BaranskiSystem,
    orientation: Orientation,
) -> Result<f64, MoranError> {
    let (long_logs, short_logs, axis) = orientation_logs(system, orientation)?;
    Ok(solve_box_with_axis(&long_logs, &short_logs, axis))
}

fn solve_box_with_axis(long_logs: &[f64], short_logs: &[f64], axis: f64) -> f64 {
    bisect_decreasing(|d| {
        long_logs
            .iter()
            .zip(short_logs)
            .map(|(&ll, &sl)| (axis * ll + (d - axis) * sl).exp())
            .sum::<f64>()
            - 1.0
    })
}

/// Per-cell log contraction of the long and short side for an orientation,
/// plus the solved axis exponent.
fn orientation_logs(
    system: &BaranskiSystem,
    orientation: Orientation,
) -> Result<(Vec<f64>, Vec<f64>, f64), MoranError> {
    let cells = system.cells();
    let (long, short): (Vec<f64>, Vec<f64>) = match orientation {
        Orientation::WidthMajor => cells
            .iter()
            .map(|c| (system.width(c.col).ln(), system.height(c.row).ln()))
            .unzip(),
        Orientation::HeightMajor => cells
            .iter()
            .map(|c| (system.height(c.row).ln(), system.width(c.col).ln()))
            .unzip(),
    };
    let axis_ratios = match orientation {
        Orientation::WidthMajor => system.occupied_widths(),
        Orientation::HeightMajor => system.occupied_heights(),
    };
    let axis = solve_axis_exponent(&axis_ratios)?;
    Ok((long, short, axis))
}

/// Solves all four exponents and checks `max(D_A, D_B) <= t_A + t_B` before
/// returning; a violation signals a solver bug, not bad input.
pub fn box_dimension_analytic(system: &BaranskiSystem) -> Result<MoranExponents, MoranError> {
    let x_axis = solve_axis_exponent(&system.occupied_widths())?;
    let y_axis = solve_axis_exponent(&system.occupied_heights())?;
    let width_major = solve_box_exponent(system, Orientation::WidthMajor)?;
    let height_major = solve_box_exponent(system, Orientation::HeightMajor)?;

    let exps = MoranExponents {
        x_axis_exponent: x_axis,
        y_axis_exponent: y_axis,
        width_major_exponent: width_major,
        height_major_exponent: height_major,
    };
    let axis_sum = x_axis + y_axis;
    if exps.box_dimension() > axis_sum + 1e-9 {
        return Err(MoranError::InternalInequalityViolation {
            max_box: exps.box_dimension(),
            axis_sum,
        });
    }
    Ok(exps)
}

/// Closed-form Hausdorff and box dimensions for a Bedford-McMullen-type
/// system: the fibre-count entropy formula and the column-count formula.
pub fn bm_closed_form(system: &BaranskiSystem) -> Result<BmDimensions, MoranError> {
    let class = system.classify();
    let CarpetKind::BedfordMcMullenType {
        width_reciprocal: m,
        height_reciprocal: n,
    } = class.kind
    else {
        return Err(MoranError::NotBmType);
    };

    let proj = system.projections();
    let gamma = m.ln() / n.ln();
    let fibre_sum: f64 = proj
        .occupied_columns
        .iter()
        .map(|&i| (proj.column_size(i) as f64).powf(gamma))
        .sum();
    let hausdorff = fibre_sum.ln() / m.ln();

    let cols = proj.occupied_columns.len() as f64;
    let cells = system.cells().len() as f64;
    let box_counting = cols.ln() / m.ln() + (cells / cols).ln() / n.ln();

    Ok(BmDimensions {
        hausdorff,
        box_counting,
    })
}

/// The per-letter base of the pressure bound: the max of the two orientation
/// sums at exponent `s`. Strictly decreasing in `s`, equal to 1 exactly at
/// `s = max(D_A, D_B)`.
pub fn pressure_base(system: &BaranskiSystem, exponents: &MoranExponents, s: f64) -> f64 {
    let t_a = exponents.x_axis_exponent;
    let t_b = exponents.y_axis_exponent;
    let mut width_sum = 0.0;
    let mut height_sum = 0.0;
    for c in system.cells() {
        let la = system.width(c.col).ln();
        let lb = system.height(c.row).ln();
        width_sum += (t_a * la + (s - t_a) * lb).exp();
        height_sum += (t_b * lb + (s - t_b) * la).exp();
    }
    width_sum.max(height_sum)
}
