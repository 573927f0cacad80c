//! The entropy-ratio functional on the probability simplex whose maximum is
//! the Hausdorff dimension, its analytic gradient, and a multi-start
//! exponentiated-gradient maximizer.
//!
//! The functional is piecewise: which branch applies depends on whether the
//! weight-averaged log column width dominates the weight-averaged log row
//! height. Both branches agree on the dividing boundary, so the functional is
//! continuous. Conventions: `0 log 0 = 0` and empty-fibre terms are skipped.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::{map_indexed, ExecMode};
use crate::moran::bm_closed_form;
use crate::system::{BaranskiSystem, CarpetKind};

/// Simplex membership tolerance.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;
/// Two branch evaluations on the region boundary must agree this closely.
pub const BOUNDARY_AGREEMENT: f64 = 1e-9;
/// |weighted log width - weighted log height| below this counts as boundary.
pub const REGION_BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum VariationalError {
    #[error("weights are not on the simplex: {0}")]
    NotOnSimplex(String),
    #[error("weight vector length {got} does not match pattern size {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("gradient requires strictly interior weights (coordinate {index} is {value})")]
    BoundaryPoint { index: usize, value: f64 },
    #[error("system is not of Bedford-McMullen type")]
    NotBmType,
}

/// Cell weights on the probability simplex, indexed like
/// [`BaranskiSystem::cells`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityWeights(Vec<f64>);

impl ProbabilityWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self, VariationalError> {
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(VariationalError::NotOnSimplex(format!(
                "negative or non-finite coordinate in {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(VariationalError::NotOnSimplex(format!(
                "coordinates sum to {sum}"
            )));
        }
        Ok(ProbabilityWeights(weights))
    }

    /// Uniform weights over `len` cells.
    pub fn uniform(len: usize) -> Self {
        ProbabilityWeights(vec![1.0 / len as f64; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Marginal mass per occupied column and row.
#[derive(Debug, Clone)]
pub struct MarginalSums {
    /// Mass per column, indexed 1-based; zero for unoccupied columns.
    pub by_column: Vec<f64>,
    /// Mass per row, indexed 1-based; zero for unoccupied rows.
    pub by_row: Vec<f64>,
}

/// Which branch of the functional applies at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Region {
    /// Weighted log width dominates: cells are typically wider than tall.
    WidthMajor,
    /// Weighted log height dominates.
    HeightMajor,
    /// The two weighted log contractions agree within tolerance.
    Boundary,
}

/// Region of a point together with the two defining dot products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionTag {
    pub region: Region,
    /// `sum_i R_i log a_i`.
    pub log_width_rate: f64,
    /// `sum_j S_j log b_j`.
    pub log_height_rate: f64,
}

/// Gradient projected onto the simplex tangent space (mean-centered over the
/// support).
#[derive(Debug, Clone)]
pub struct SimplexGradient {
    pub components: Vec<f64>,
    /// True when the point sits on the region boundary; the active
    /// (width-major) branch was differentiated.
    pub at_region_boundary: bool,
}

impl SimplexGradient {
    pub fn norm(&self) -> f64 {
        self.components.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

fn check_len(system: &BaranskiSystem, p: &ProbabilityWeights) -> Result<(), VariationalError> {
    if p.len() != system.cells().len() {
        return Err(VariationalError::LengthMismatch {
            got: p.len(),
            expected: system.cells().len(),
        });
    }
    let sum: f64 = p.as_slice().iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE || p.as_slice().iter().any(|&w| w < 0.0) {
        return Err(VariationalError::NotOnSimplex(format!(
            "coordinates sum to {sum}"
        )));
    }
    Ok(())
}

/// Column and row marginals of a weight vector.
pub fn marginals(system: &BaranskiSystem, p: &ProbabilityWeights) -> MarginalSums {
    let mut by_column = vec![0.0; system.num_columns() + 1];
    let mut by_row = vec![0.0; system.num_rows() + 1];
    for (cell, &w) in system.cells().iter().zip(p.as_slice()) {
        by_column[cell.col] += w;
        by_row[cell.row] += w;
    }
    MarginalSums { by_column, by_row }
}

fn region_tag(system: &BaranskiSystem, m: &MarginalSums) -> RegionTag {
    let log_width_rate: f64 = m
        .by_column
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &r)| r > 0.0)
        .map(|(i, &r)| r * system.width(i).ln())
        .sum();
    let log_height_rate: f64 = m
        .by_row
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &s)| s > 0.0)
        .map(|(j, &s)| s * system.height(j).ln())
        .sum();
    let region = if (log_width_rate - log_height_rate).abs() <= REGION_BOUNDARY_TOLERANCE {
        Region::Boundary
    } else if log_width_rate > log_height_rate {
        Region::WidthMajor
    } else {
        Region::HeightMajor
    };
    RegionTag {
        region,
        log_width_rate,
        log_height_rate,
    }
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Width-major branch: column entropy over log width plus within-column
/// conditional entropy over log height.
fn branch_width_major(
    system: &BaranskiSystem,
    p: &[f64],
    m: &MarginalSums,
    tag: &RegionTag,
) -> f64 {
    let column_entropy: f64 = m.by_column.iter().map(|&r| xlogx(r)).sum();
    let mut conditional = 0.0;
    for (cell, &w) in system.cells().iter().zip(p) {
        let r = m.by_column[cell.col];
        if w > 0.0 && r > 0.0 {
            conditional += w * (w / r).ln();
        }
    }
    column_entropy / tag.log_width_rate + conditional / tag.log_height_rate
}

fn branch_height_major(
    system: &BaranskiSystem,
    p: &[f64],
    m: &MarginalSums,
    tag: &RegionTag,
) -> f64 {
    let row_entropy: f64 = m.by_row.iter().map(|&s| xlogx(s)).sum();
    let mut conditional = 0.0;
    for (cell, &w) in system.cells().iter().zip(p) {
        let s = m.by_row[cell.row];
        if w > 0.0 && s > 0.0 {
            conditional += w * (w / s).ln();
        }
    }
    row_entropy / tag.log_height_rate + conditional / tag.log_width_rate
}

/// Evaluates the functional and reports the active region. At the boundary
/// both branches are evaluated and must agree within [`BOUNDARY_AGREEMENT`].
pub fn eval_g(
    system: &BaranskiSystem,
    p: &ProbabilityWeights,
) -> Result<(f64, RegionTag), VariationalError> {
    check_len(system, p)?;
    let m = marginals(system, p);
    let tag = region_tag(system, &m);
    let value = match tag.region {
        Region::WidthMajor => branch_width_major(system, p.as_slice(), &m, &tag),
        Region::HeightMajor => branch_height_major(system, p.as_slice(), &m, &tag),
        Region::Boundary => {
            let a = branch_width_major(system, p.as_slice(), &m, &tag);
            let b = branch_height_major(system, p.as_slice(), &m, &tag);
            assert!(
                (a - b).abs() <= BOUNDARY_AGREEMENT,
                "branches disagree on the boundary: {a} vs {b}"
            );
            a
        }
    };
    Ok((value, tag))
}

/// Analytic gradient of the active branch, mean-centered onto the simplex
/// tangent space. Needs strictly interior weights.
pub fn grad_g(
    system: &BaranskiSystem,
    p: &ProbabilityWeights,
) -> Result<SimplexGradient, VariationalError> {
    check_len(system, p)?;
    for (index, &value) in p.as_slice().iter().enumerate() {
        if value <= 0.0 {
            return Err(VariationalError::BoundaryPoint { index, value });
        }
    }
    let m = marginals(system, p);
    let tag = region_tag(system, &m);
    let mut components = raw_gradient(system, p.as_slice(), &m, &tag);
    let mean = components.iter().sum::<f64>() / components.len() as f64;
    for g in &mut components {
        *g -= mean;
    }
    Ok(SimplexGradient {
        components,
        at_region_boundary: tag.region == Region::Boundary,
    })
}

/// Raw partial derivatives of the active branch with respect to each cell
/// weight. Quotient rule on both entropy ratios.
fn raw_gradient(system: &BaranskiSystem, p: &[f64], m: &MarginalSums, tag: &RegionTag) -> Vec<f64> {
    let la = tag.log_width_rate;
    let lb = tag.log_height_rate;
    let width_major = tag.region != Region::HeightMajor;

    if width_major {
        let column_entropy: f64 = m.by_column.iter().map(|&r| xlogx(r)).sum();
        let conditional: f64 = system
            .cells()
            .iter()
            .zip(p)
            .map(|(cell, &w)| w * (w / m.by_column[cell.col]).ln())
            .sum();
        system
            .cells()
            .iter()
            .zip(p)
            .map(|(cell, &w)| {
                let r = m.by_column[cell.col];
                let log_a = system.width(cell.col).ln();
                let log_b = system.height(cell.row).ln();
                let first = ((r.ln() + 1.0) * la - column_entropy * log_a) / (la * la);
                let second = ((w / r).ln() * lb - conditional * log_b) / (lb * lb);
                first + second
            })
            .collect()
    } else {
        let row_entropy: f64 = m.by_row.iter().map(|&s| xlogx(s)).sum();
        let conditional: f64 = system
            .cells()
            .iter()
            .zip(p)
            .map(|(cell, &w)| w * (w / m.by_row[cell.row]).ln())
            .sum();
        system
            .cells()
            .iter()
            .zip(p)
            .map(|(cell, &w)| {
                let s = m.by_row[cell.row];
                let log_a = system.width(cell.col).ln();
                let log_b = system.height(cell.row).ln();
                let first = ((s.ln() + 1.0) * lb - row_entropy * log_b) / (lb * lb);
                let second = ((w / s).ln() * la - conditional * log_a) / (la * la);
                first + second
            })
            .collect()
    }
}

/// Options for [`maximize_g`].
#[derive(Debug, Clone)]
pub struct MaximizeOptions {
    /// Number of random simplex starts on top of the deterministic ones.
    pub random_starts: usize,
    pub max_iters: usize,
    /// Relative value-change convergence threshold.
    pub tol: f64,
    pub seed: u64,
    pub mode: ExecMode,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        MaximizeOptions {
            random_starts: 16,
            max_iters: 600,
            tol: 1e-12,
            seed: 0,
            mode: ExecMode::Parallel,
        }
    }
}

/// Result of the maximization. `value` is the functional evaluated at
/// `weights`, hence always a certified lower bound for the maximum.
#[derive(Debug, Clone)]
pub struct MaximizeOutcome {
    pub weights: ProbabilityWeights,
    pub value: f64,
    /// False when some start hit the iteration cap before its value settled.
    pub converged: bool,
}

/// Multi-start exponentiated-gradient ascent. Deterministic for a fixed seed:
/// starts are generated up front and the best outcome is chosen by value with
/// index tie-breaking, whether or not the starts ran in parallel.
pub fn maximize_g(
    system: &BaranskiSystem,
    options: &MaximizeOptions,
) -> Result<MaximizeOutcome, VariationalError> {
    let d = system.cells().len();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    starts.push(vec![1.0 / d as f64; d]);
    starts.push(column_uniform(system));
    starts.push(row_uniform(system));
    if matches!(
        system.classify().kind,
        CarpetKind::BedfordMcMullenType { .. }
    ) {
        starts.push(bm_optimal_weights(system)?.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for _ in 0..options.random_starts {
        starts.push(dirichlet_uniform(&mut rng, d));
    }

    let runs = map_indexed(options.mode, starts.len(), |idx| {
        ascend(system, &starts[idx], options)
    });

    let mut best: Option<(f64, usize, Vec<f64>, bool)> = None;
    for (idx, run) in runs.into_iter().enumerate() {
        let (value, weights, converged) = run;
        let better = match &best {
            None => true,
            Some((best_value, _, _, _)) => value > *best_value,
        };
        if better {
            best = Some((value, idx, weights, converged));
        }
    }
    let (value, _, weights, converged) = best.expect("at least one start");
    Ok(MaximizeOutcome {
        weights: ProbabilityWeights(weights),
        value,
        converged,
    })
}

/// Equal mass per occupied column, uniform within the column.
fn column_uniform(system: &BaranskiSystem) -> Vec<f64> {
    let proj = system.projections();
    let cols = proj.occupied_columns.len() as f64;
    system
        .cells()
        .iter()
        .map(|c| 1.0 / (cols * proj.column_size(c.col) as f64))
        .collect()
}

fn row_uniform(system: &BaranskiSystem) -> Vec<f64> {
    let proj = system.projections();
    let rows = proj.occupied_rows.len() as f64;
    system
        .cells()
        .iter()
        .map(|c| 1.0 / (rows * proj.row_size(c.row) as f64))
        .collect()
}

/// A uniform draw from the simplex (normalized unit exponentials).
fn dirichlet_uniform<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    let mut draw: Vec<f64> = (0..d)
        .map(|_| (-(1.0 - rng.random::<f64>()).ln()).max(1e-300))
        .collect();
    let sum: f64 = draw.iter().sum();
    for w in &mut draw {
        *w /= sum;
    }
    draw
}

/// Single-start ascent: multiplicative update `p <- p * exp(step * grad)`
/// with renormalization and backtracking on the step size. Iterates stay in
/// the open simplex; coordinates may underflow to zero and then simply stay
/// dead (their multiplicative factor cannot revive them).
fn ascend(
    system: &BaranskiSystem,
    start: &[f64],
    options: &MaximizeOptions,
) -> (f64, Vec<f64>, bool) {
    let p = ProbabilityWeights(start.to_vec());
    let (mut value, _) = eval_g(system, &p).expect("start lies on the simplex");
    let mut point = p.0;
    let mut converged = false;
    let mut step = 1.0;

    for _ in 0..options.max_iters {
        let m = marginals(system, &ProbabilityWeights(point.clone()));
        let tag = region_tag(system, &m);
        let mut grad = raw_gradient_supported(system, &point, &m, &tag);
        center_on_support(&point, &mut grad);

        let grad_norm: f64 = grad.iter().map(|g| g * g).sum::<f64>();
        if grad_norm.sqrt() < 1e-13 {
            converged = true;
            break;
        }

        let mut improved = false;
        let mut trial_step = step;
        for _ in 0..60 {
            let candidate = multiplicative_update(&point, &grad, trial_step);
            let cand_value = eval_g(system, &ProbabilityWeights(candidate.clone()))
                .expect("update stays on the simplex")
                .0;
            if cand_value > value {
                let gain = cand_value - value;
                point = candidate;
                value = cand_value;
                improved = true;
                step = (trial_step * 2.0).min(16.0);
                if gain < options.tol * value.abs().max(1.0) {
                    converged = true;
                }
                break;
            }
            trial_step *= 0.5;
            if trial_step < 1e-14 {
                break;
            }
        }
        if !improved {
            // No ascent direction at any step size: first-order stationary.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    (value, point, converged)
}

/// Gradient that treats dead coordinates (w = 0) as removed from the system:
/// their component is forced to zero and they are excluded from centering.
fn raw_gradient_supported(
    system: &BaranskiSystem,
    p: &[f64],
    m: &MarginalSums,
    tag: &RegionTag,
) -> Vec<f64> {
    let mut grad = vec![0.0; p.len()];
    let la = tag.log_width_rate;
    let lb = tag.log_height_rate;
    let width_major = tag.region != Region::HeightMajor;

    let column_entropy: f64 = m.by_column.iter().map(|&r| xlogx(r)).sum();
    let row_entropy: f64 = m.by_row.iter().map(|&s| xlogx(s)).sum();
    let conditional: f64 = system
        .cells()
        .iter()
        .zip(p)
        .filter(|(_, &w)| w > 0.0)
        .map(|(cell, &w)| {
            let base = if width_major {
                m.by_column[cell.col]
            } else {
                m.by_row[cell.row]
            };
            w * (w / base).ln()
        })
        .sum();

    for ((cell, &w), g) in system.cells().iter().zip(p).zip(&mut grad) {
        if w <= 0.0 {
            continue;
        }
        let log_a = system.width(cell.col).ln();
        let log_b = system.height(cell.row).ln();
        *g = if width_major {
            let r = m.by_column[cell.col];
            ((r.ln() + 1.0) * la - column_entropy * log_a) / (la * la)
                + ((w / r).ln() * lb - conditional * log_b) / (lb * lb)
        } else {
            let s = m.by_row[cell.row];
            ((s.ln() + 1.0) * lb - row_entropy * log_b) / (lb * lb)
                + ((w / s).ln() * la - conditional * log_a) / (la * la)
        };
    }
    grad
}

fn center_on_support(p: &[f64], grad: &mut [f64]) {
    let support: Vec<usize> = p
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(i, _)| i)
        .collect();
    if support.is_empty() {
        return;
    }
    let mean: f64 = support.iter().map(|&i| grad[i]).sum::<f64>() / support.len() as f64;
    for &i in &support {
        grad[i] -= mean;
    }
}

fn multiplicative_update(p: &[f64], grad: &[f64], step: f64) -> Vec<f64> {
    let mut next: Vec<f64> = p
        .iter()
        .zip(grad)
        .map(|(&w, &g)| {
            if w > 0.0 {
                w * (step * g).clamp(-700.0, 700.0).exp()
            } else {
                0.0
            }
        })
        .collect();
    let sum: f64 = next.iter().sum();
    for w in &mut next {
        *w /= sum;
    }
    next
}

/// The optimal weights of a Bedford-McMullen-type system:
/// `p_ij = |I_i|^(gamma - 1) / m^s` with `gamma = log m / log n` and `s` the
/// closed-form Hausdorff dimension. Sums to one by construction (asserted).
pub fn bm_optimal_weights(system: &BaranskiSystem) -> Result<ProbabilityWeights, VariationalError> {
    let CarpetKind::BedfordMcMullenType {
        width_reciprocal: m,
        height_reciprocal: n,
    } = system.classify().kind
    else {
        return Err(VariationalError::NotBmType);
    };
    let s = bm_closed_form(system)
        .expect("classification checked above")
        .hausdorff;
    let gamma = m.ln() / n.ln();
    let proj = system.projections();
    let scale = m.powf(s);
    let mut weights: Vec<f64> = system
        .cells()
        .iter()
        .map(|c| (proj.column_size(c.col) as f64).powf(gamma - 1.0) / scale)
        .collect();
    let sum: f64 = weights.iter().sum();
    assert!(
        (sum - 1.0).abs() < 1e-9,
        "optimal weights must sum to 1, got {sum}"
    );
    for w in &mut weights {
        *w /= sum;
    }
    let last = weights.len() - 1;
    let partial: f64 = weights[..last].iter().sum();
    weights[last] = 1.0 - partial;
    Ok(ProbabilityWeights(weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{bm_three_cell, full_uniform_grid, uniform_grid_with_pattern};

    fn closed_hausdorff(system: &BaranskiSystem) -> f64 {
        bm_closed_form(system).unwrap().hausdorff
    }

    #[test]
    fn eval_at_optimal_weights_matches_closed_form() {
        let sys = bm_three_cell();
        let p = bm_optimal_weights(&sys).unwrap();
        let (value, tag) = eval_g(&sys, &p).unwrap();
        assert_eq!(tag.region, Region::WidthMajor);
        assert!((value - closed_hausdorff(&sys)).abs() < 1e-9);
        assert!((value - 1.349684).abs() < 1e-6);
    }

    #[test]
    fn optimal_weights_match_direct_formula() {
        let sys = bm_three_cell();
        let p = bm_optimal_weights(&sys).unwrap();
        // gamma = log2/log3, s = closed-form dimension; first cell sits alone
        // in its column.
        let gamma = 2f64.ln() / 3f64.ln();
        let s = closed_hausdorff(&sys);
        let expected0 = 1.0f64.powf(gamma - 1.0) / 2f64.powf(s);
        let expected1 = 2.0f64.powf(gamma - 1.0) / 2f64.powf(s);
        assert!((p.as_slice()[0] - expected0).abs() < 1e-12);
        assert!((p.as_slice()[1] - expected1).abs() < 1e-12);
        assert!((p.as_slice()[2] - expected1).abs() < 1e-9);
        let sum: f64 = p.as_slice().iter().sum();
        assert_eq!(sum, 1.0);
    }

    #[test]
    fn uniform_vertical_fibre_weights_are_uniform() {
        let sys = uniform_grid_with_pattern(2, 3, &[(1, 1), (2, 2)]).unwrap();
        let p = bm_optimal_weights(&sys).unwrap();
        assert!((p.as_slice()[0] - 0.5).abs() < 1e-12);
        assert!((p.as_slice()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn full_grid_uniform_weights_give_two() {
        let sys = full_uniform_grid(2, 3);
        let p = ProbabilityWeights::uniform(6);
        let (value, tag) = eval_g(&sys, &p).unwrap();
        assert_eq!(tag.region, Region::WidthMajor);
        assert!((value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn concentrated_weights_give_zero() {
        let sys = bm_three_cell();
        let p = ProbabilityWeights::new(vec![1.0, 0.0, 0.0]).unwrap();
        let (value, _) = eval_g(&sys, &p).unwrap();
        assert_eq!(value, 0.0);
    }

    #[test]
    fn off_simplex_weights_are_rejected() {
        let sys = bm_three_cell();
        assert!(matches!(
            eval_g(&sys, &ProbabilityWeights(vec![0.5, 0.5, 0.5])),
            Err(VariationalError::NotOnSimplex(_))
        ));
        assert!(ProbabilityWeights::new(vec![1.2, -0.2, 0.0]).is_err());
    }

    /// Independent oracle: direct transcription of the two branch formulas,
    /// evaluated without going through the library marginal machinery.
    fn g_oracle(system: &BaranskiSystem, p: &[f64]) -> f64 {
        let m = system.num_columns();
        let n = system.num_rows();
        let mut r = vec![0.0; m + 1];
        let mut s = vec![0.0; n + 1];
        for (cell, &w) in system.cells().iter().zip(p) {
            r[cell.col] += w;
            s[cell.row] += w;
        }
        let da: f64 = (1..=m)
            .filter(|&i| r[i] > 0.0)
            .map(|i| r[i] * system.width(i).ln())
            .sum();
        let db: f64 = (1..=n)
            .filter(|&j| s[j] > 0.0)
            .map(|j| s[j] * system.height(j).ln())
            .sum();
        let xl = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
        if da >= db {
            let top: f64 = (1..=m).map(|i| xl(r[i])).sum();
            let cond: f64 = system
                .cells()
                .iter()
                .zip(p)
                .filter(|(_, &w)| w > 0.0)
                .map(|(c, &w)| w * (w / r[c.col]).ln())
                .sum();
            top / da + cond / db
        } else {
            let top: f64 = (1..=n).map(|j| xl(s[j])).sum();
            let cond: f64 = system
                .cells()
                .iter()
                .zip(p)
                .filter(|(_, &w)| w > 0.0)
                .map(|(c, &w)| w * (w / s[c.row]).ln())
                .sum();
            top / db + cond / da
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let h = 1e-6;
        for trial in 0..50 {
            let sys = crate::sampling::random_system(&mut rng, 3, 3);
            let d = sys.cells().len();
            let p = dirichlet_uniform(&mut rng, d);
            // Keep clear of the simplex boundary and the region boundary.
            if p.iter().any(|&w| w < 1e-3) {
                continue;
            }
            let weights = ProbabilityWeights::new(p.clone()).unwrap();
            let m = marginals(&sys, &weights);
            let tag = region_tag(&sys, &m);
            // A finite-difference step must not cross the region boundary.
            if (tag.log_width_rate - tag.log_height_rate).abs() < 1e-4 {
                continue;
            }
            let grad = grad_g(&sys, &weights).unwrap();
            let mut fd: Vec<f64> = (0..d)
                .map(|i| {
                    let mut hi = p.clone();
                    let mut lo = p.clone();
                    hi[i] += h;
                    lo[i] -= h;
                    (g_oracle(&sys, &hi) - g_oracle(&sys, &lo)) / (2.0 * h)
                })
                .collect();
            let mean: f64 = fd.iter().sum::<f64>() / d as f64;
            for v in &mut fd {
                *v -= mean;
            }
            for (i, (&a, &b)) in grad.components.iter().zip(&fd).enumerate() {
                assert!(
                    (a - b).abs() < 1e-5,
                    "trial {trial}: coordinate {i}: analytic {a} vs fd {b}"
                );
            }
        }
    }

    #[test]
    fn gradient_respects_pattern_symmetry() {
        // Swapping the two diagonal cells is a symmetry of this system.
        let sys = uniform_grid_with_pattern(2, 2, &[(1, 1), (2, 2)]).unwrap();
        let p = ProbabilityWeights::new(vec![0.5, 0.5]).unwrap();
        let grad = grad_g(&sys, &p).unwrap();
        assert!((grad.components[0] - grad.components[1]).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_bm_optimum() {
        let sys = bm_three_cell();
        let p = bm_optimal_weights(&sys).unwrap();
        let grad = grad_g(&sys, &p).unwrap();
        assert!(
            grad.norm() < 1e-6,
            "projected gradient norm {}",
            grad.norm()
        );
    }

    #[test]
    fn gradient_requires_interior_point() {
        let sys = bm_three_cell();
        let p = ProbabilityWeights::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            grad_g(&sys, &p),
            Err(VariationalError::BoundaryPoint { .. })
        ));
    }

    #[test]
    fn maximize_recovers_bm_closed_form() {
        let sys = bm_three_cell();
        let out = maximize_g(&sys, &MaximizeOptions::default()).unwrap();
        assert!((out.value - closed_hausdorff(&sys)).abs() < 1e-5);
        assert!((out.value - 1.349681).abs() < 1e-5);
    }

    #[test]
    fn maximize_full_grid_reaches_two() {
        let sys = full_uniform_grid(2, 3);
        let out = maximize_g(&sys, &MaximizeOptions::default()).unwrap();
        assert!((out.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn maximize_single_cell_is_zero() {
        let sys = uniform_grid_with_pattern(2, 3, &[(1, 2)]).unwrap();
        let out = maximize_g(&sys, &MaximizeOptions::default()).unwrap();
        assert!(out.value.abs() < 1e-12);
    }

    #[test]
    fn maximize_dominates_arbitrary_test_points() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let sys = bm_three_cell();
        let out = maximize_g(&sys, &MaximizeOptions::default()).unwrap();
        for _ in 0..200 {
            let q = ProbabilityWeights::new(dirichlet_uniform(&mut rng, 3)).unwrap();
            let (v, _) = eval_g(&sys, &q).unwrap();
            assert!(out.value >= v - 1e-9);
        }
    }

    #[test]
    fn sequential_and_parallel_maximize_agree() {
        let sys = bm_three_cell();
        let seq = maximize_g(
            &sys,
            &MaximizeOptions {
                mode: ExecMode::Sequential,
                ..MaximizeOptions::default()
            },
        )
        .unwrap();
        let par = maximize_g(&sys, &MaximizeOptions::default()).unwrap();
        assert_eq!(seq.value, par.value);
        assert_eq!(seq.weights.as_slice(), par.weights.as_slice());
    }

    #[test]
    fn branches_agree_near_region_boundary() {
        // Blend a width-major point towards a height-major one until the dot
        // products cross, then check branch agreement at the crossing. The
        // strips must be non-uniform, otherwise the dot products are constant.
        let sys = crate::presets::from_reals(
            &[0.7, 0.3],
            &[0.6, 0.4],
            &[(1, 1), (1, 2), (2, 1), (2, 2)],
            &[(1, 0.0), (2, 0.3)],
            &[(1, 0.0), (2, 0.4)],
        )
        .unwrap();
        let wide = [0.5, 0.5, 0.0, 0.0];
        let tall = [0.0, 0.0, 1.0, 0.0];
        let rate_gap = |p: &[f64]| {
            let m = marginals(&sys, &ProbabilityWeights(p.to_vec()));
            let tag = region_tag(&sys, &m);
            tag.log_width_rate - tag.log_height_rate
        };
        // All weights induce the same gap sign on a uniform grid unless the
        // pattern breaks symmetry; search the blend for a sign change.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let blend = |t: f64| -> Vec<f64> {
            wide.iter()
                .zip(&tall)
                .map(|(&a, &b)| (1.0 - t) * a + t * b)
                .collect()
        };
        if rate_gap(&blend(0.0)) * rate_gap(&blend(1.0)) < 0.0 {
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if rate_gap(&blend(lo)) * rate_gap(&blend(mid)) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let p = blend(0.5 * (lo + hi));
            let m = marginals(&sys, &ProbabilityWeights(p.clone()));
            let tag = region_tag(&sys, &m);
            let a = branch_width_major(&sys, &p, &m, &tag);
            let b = branch_height_major(&sys, &p, &m, &tag);
            assert!(
                (a - b).abs() <= BOUNDARY_AGREEMENT,
                "width branch {a} vs height branch {b}"
            );
        } else {
            panic!("expected a region crossing along the blend");
        }
    }
}
