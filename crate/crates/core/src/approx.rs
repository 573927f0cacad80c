//! Constructive approximations: uniform-fibre word systems built from a
//! weight vector, their dimension convergents, and strongly separated
//! subsystem extraction for homogeneous 1-D systems.
//!
//! Replacing every cell by a fixed multiset of letters produces a system
//! whose columns all hold the same number of words (and likewise rows); its
//! word counts are multinomials, kept in the log domain via summed
//! log-factorials so that large levels stay cheap and overflow-free.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use thiserror::Error;

use crate::moran::{box_dimension_analytic, MoranError};
use crate::overlap::{AffineMap1D, Ifs1D, OverlapError};
use crate::system::{BaranskiSystem, Cell};
use crate::variational::{ProbabilityWeights, VariationalError};

#[derive(Debug, Error, PartialEq)]
pub enum ApproxError {
    #[error("contraction logs degenerate (log m_k = {0}); the system is malformed")]
    DegenerateLogs(f64),
    #[error("all letters must share one contraction ratio")]
    NonHomogeneous,
    #[error("selection bound not met: kept {achieved} intervals, bound requires {required}")]
    BoundNotMet { achieved: usize, required: f64 },
    #[error("enumeration budget exceeded: {words} words requested, budget {budget}")]
    BudgetExceeded { words: u128, budget: u64 },
    #[error(transparent)]
    Moran(#[from] MoranError),
    #[error(transparent)]
    Overlap(#[from] OverlapError),
    #[error(transparent)]
    Variational(#[from] VariationalError),
}

/// A level-k uniform-fibre approximation: each cell `(i,j)` occurs
/// `ceil(k * p_ij)` times in every word.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformApproximation {
    pub level: usize,
    /// Per-cell multiplicities, aligned with [`BaranskiSystem::cells`].
    pub counts: Vec<usize>,
    /// Word length `theta(k)`, the sum of the multiplicities.
    pub total_length: usize,
    /// `log m_k`: minus the summed log widths.
    pub log_width_reciprocal: f64,
    /// `log n_k`: minus the summed log heights.
    pub log_height_reciprocal: f64,
    /// Log of the word count (a multinomial).
    pub log_word_count: f64,
    /// Log of the count of distinct column projections.
    pub log_column_projection_count: f64,
    /// Log of the count of distinct row projections.
    pub log_row_projection_count: f64,
    /// The Hausdorff-flavoured convergent for the weights used to build this
    /// approximation.
    pub s_k_value: f64,
}

fn log_factorial_table(n: usize) -> Vec<f64> {
    let mut table = vec![0.0; n + 1];
    let mut acc = 0.0;
    for (i, slot) in table.iter_mut().enumerate().skip(1) {
        acc += (i as f64).ln();
        *slot = acc;
    }
    table
}

/// Builds the level-k approximation for a weight vector: multiplicities,
/// contraction logs and log-multinomial cardinalities.
pub fn build_uniform_approx(
    system: &BaranskiSystem,
    weights: &ProbabilityWeights,
    level: usize,
) -> UniformApproximation {
    assert!(level >= 1, "approximation level must be at least 1");
    let cells = system.cells();
    let counts: Vec<usize> = weights
        .as_slice()
        .iter()
        .map(|&w| (level as f64 * w).ceil() as usize)
        .collect();
    let total_length: usize = counts.iter().sum();

    let mut log_m = 0.0;
    let mut log_n = 0.0;
    let mut column_sums = vec![0usize; system.num_columns() + 1];
    let mut row_sums = vec![0usize; system.num_rows() + 1];
    for (cell, &c) in cells.iter().zip(&counts) {
        log_m += c as f64 * -system.width(cell.col).ln();
        log_n += c as f64 * -system.height(cell.row).ln();
        column_sums[cell.col] += c;
        row_sums[cell.row] += c;
    }

    let lf = log_factorial_table(total_length);
    let log_word_count = lf[total_length] - counts.iter().map(|&c| lf[c]).sum::<f64>();
    let log_column_projection_count =
        lf[total_length] - column_sums.iter().map(|&c| lf[c]).sum::<f64>();
    let log_row_projection_count = lf[total_length] - row_sums.iter().map(|&c| lf[c]).sum::<f64>();

    let s_k_value = hausdorff_convergent(
        log_m,
        log_n,
        log_word_count,
        log_column_projection_count,
        log_row_projection_count,
    );

    UniformApproximation {
        level,
        counts,
        total_length,
        log_width_reciprocal: log_m,
        log_height_reciprocal: log_n,
        log_word_count,
        log_column_projection_count,
        log_row_projection_count,
        s_k_value,
    }
}

/// Orientation-aware convergent: when heights contract at least as fast as
/// widths the column projection drives the first term, otherwise the roles
/// swap.
fn hausdorff_convergent(
    log_m: f64,
    log_n: f64,
    log_words: f64,
    log_columns: f64,
    log_rows: f64,
) -> f64 {
    if log_n >= log_m {
        log_columns / log_m + (log_words - log_columns) / log_n
    } else {
        log_rows / log_n + (log_words - log_rows) / log_m
    }
}

/// The Hausdorff-flavoured convergent of a built approximation.
pub fn s_k_hausdorff(approx: &UniformApproximation) -> Result<f64, ApproxError> {
    if approx.log_width_reciprocal <= 0.0 || approx.log_height_reciprocal <= 0.0 {
        return Err(ApproxError::DegenerateLogs(approx.log_width_reciprocal));
    }
    Ok(approx.s_k_value)
}

/// The box-flavoured convergent at level k: builds the approximation from the
/// box-optimal weights `a_i^tA * b_j^(DA - tA)` and evaluates
/// `tA + (log words - tA log m_k) / log n_k`, with the axes swapped when the
/// height-major exponent dominates.
pub fn s_k_box(system: &BaranskiSystem, level: usize) -> Result<f64, ApproxError> {
    let exps = box_dimension_analytic(system)?;
    let width_major = exps.width_major_exponent >= exps.height_major_exponent;

    let (axis, box_exp) = if width_major {
        (exps.x_axis_exponent, exps.width_major_exponent)
    } else {
        (exps.y_axis_exponent, exps.height_major_exponent)
    };

    let raw: Vec<f64> = system
        .cells()
        .iter()
        .map(|c| {
            let (long, short) = if width_major {
                (system.width(c.col), system.height(c.row))
            } else {
                (system.height(c.row), system.width(c.col))
            };
            (axis * long.ln() + (box_exp - axis) * short.ln()).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    let weights = ProbabilityWeights::new(raw.iter().map(|w| w / sum).collect())?;
    let approx = build_uniform_approx(system, &weights, level);

    if approx.log_width_reciprocal <= 0.0 || approx.log_height_reciprocal <= 0.0 {
        return Err(ApproxError::DegenerateLogs(approx.log_width_reciprocal));
    }
    Ok(if width_major {
        axis + (approx.log_word_count - axis * approx.log_width_reciprocal)
            / approx.log_height_reciprocal
    } else {
        axis + (approx.log_word_count - axis * approx.log_height_reciprocal)
            / approx.log_width_reciprocal
    })
}

/// A strongly separated subsystem selected from the level-`len` words of a
/// homogeneous 1-D system.
#[derive(Debug, Clone, PartialEq)]
pub struct SscSelection {
    /// The selected words over the system's letters.
    pub words: Vec<Vec<usize>>,
    /// Exact left endpoints of the kept cylinder intervals, ascending.
    pub left_endpoints: Vec<BigRational>,
    /// Common exact interval length `ratio^len`.
    pub interval_length: BigRational,
    /// The dimension estimate used in the count bound.
    pub alpha: f64,
    /// `3^(-alpha) * ratio^(-len (alpha - epsilon))`.
    pub required_bound: f64,
}

impl SscSelection {
    pub fn kept(&self) -> usize {
        self.words.len()
    }
}

/// Greedy selection of pairwise strictly disjoint level-`len` cylinders:
/// sort intervals by left endpoint and keep each interval starting strictly
/// after the last kept interval ends. For same-length intervals this
/// maximizes the number kept. Touching endpoints are rejected: the selected
/// subsystem must be strongly separated, not merely non-overlapping.
pub fn extract_ssc_subsystem(
    ifs: &Ifs1D,
    len: usize,
    epsilon: f64,
    alpha: Option<f64>,
    word_budget: u64,
) -> Result<SscSelection, ApproxError> {
    if !ifs.is_homogeneous() {
        return Err(ApproxError::NonHomogeneous);
    }
    let letters = ifs.len();
    let total = (letters as u128).pow(len as u32);
    if total > word_budget as u128 {
        return Err(ApproxError::BudgetExceeded {
            words: total,
            budget: word_budget,
        });
    }

    let ratio = ifs.maps()[0].ratio.clone();
    let ratio_f = crate::numeric::rational_to_f64(&ratio);
    let alpha = alpha.unwrap_or_else(|| {
        let similarity = (letters as f64).ln() / -ratio_f.ln();
        similarity.min(1.0)
    });
    let required_bound = 3f64.powf(-alpha) * ratio_f.powf(-(len as f64) * (alpha - epsilon));

    // Enumerate all words with exact offsets.
    let mut entries: Vec<(BigRational, Vec<usize>)> = Vec::with_capacity(total as usize);
    let mut word = Vec::with_capacity(len);
    enumerate_offsets(ifs, len, &AffineMap1D::identity(), &mut word, &mut entries);
    entries.sort_by(|a, b| a.0.cmp(&b.0));

    let mut interval_length = BigRational::one();
    for _ in 0..len {
        interval_length *= &ratio;
    }

    let mut words = Vec::new();
    let mut left_endpoints = Vec::new();
    let mut last_end: Option<BigRational> = None;
    for (offset, w) in entries {
        let keep = match &last_end {
            None => true,
            Some(end) => &offset > end,
        };
        if keep {
            last_end = Some(&offset + &interval_length);
            left_endpoints.push(offset);
            words.push(w);
        }
    }

    let selection = SscSelection {
        words,
        left_endpoints,
        interval_length,
        alpha,
        required_bound,
    };
    if (selection.kept() as f64) < required_bound {
        return Err(ApproxError::BoundNotMet {
            achieved: selection.kept(),
            required: required_bound,
        });
    }
    Ok(selection)
}

fn enumerate_offsets(
    ifs: &Ifs1D,
    len: usize,
    acc: &AffineMap1D,
    word: &mut Vec<usize>,
    out: &mut Vec<(BigRational, Vec<usize>)>,
) {
    if word.len() == len {
        out.push((acc.offset.clone(), word.clone()));
        return;
    }
    for (letter, map) in ifs.maps().iter().enumerate() {
        word.push(letter);
        let next = acc.compose(map);
        enumerate_offsets(ifs, len, &next, word, out);
        word.pop();
    }
}

/// Result of lifting a row-projection selection back to 2-D words.
#[derive(Debug, Clone)]
pub struct RowSscLift {
    /// The selection over blocks of row projections.
    pub selection: SscSelection,
    /// The row-projection alphabet: each entry is a row sequence of length
    /// `theta(k)`.
    pub row_alphabet: Vec<Vec<usize>>,
    /// Number of 2-D words per row projection (the per-row count `J`).
    pub per_block_preimages: BigUint,
    /// Exact count of kept 2-D words: `kept * J^len`.
    pub count: BigUint,
    /// Log of the guaranteed lower bound `3^-1 n_k^(-len eps) |words|^len`.
    pub bound_log: f64,
    pub bound_met: bool,
    /// Materialized 2-D words (sequences of cells of length
    /// `theta(k) * len`), absent when over the materialization budget.
    pub words: Option<Vec<Vec<Cell>>>,
}

/// Applies the strongly separated extraction to the row projection of a
/// uniform-fibre approximation and lifts the kept blocks: every 2-D word
/// whose row projection is selected survives. Uniform fibres make the lifted
/// count an exact product.
pub fn lift_row_ssc(
    system: &BaranskiSystem,
    approx: &UniformApproximation,
    len: usize,
    epsilon: f64,
    word_budget: u64,
    materialize_budget: u64,
) -> Result<RowSscLift, ApproxError> {
    // Row multiplicities of one word.
    let mut row_counts = vec![0usize; system.num_rows() + 1];
    for (cell, &c) in system.cells().iter().zip(&approx.counts) {
        row_counts[cell.row] += c;
    }
    let occupied_rows: Vec<usize> = (1..=system.num_rows())
        .filter(|&j| row_counts[j] > 0)
        .collect();

    // Exact parameters of the row projection.
    let row_maps: Option<Vec<(BigRational, BigRational)>> = occupied_rows
        .iter()
        .map(|&j| {
            Some((
                system.height_scalar(j).exact()?.clone(),
                system.row_translation_scalar(j).exact()?.clone(),
            ))
        })
        .collect();
    let row_maps = row_maps.ok_or(OverlapError::NonRationalInput)?;

    // The row-projection alphabet: all distinct row sequences.
    let symbol_counts: Vec<usize> = occupied_rows.iter().map(|&j| row_counts[j]).collect();
    let alphabet_size = multinomial(&symbol_counts);
    if alphabet_size > BigUint::from(word_budget) {
        return Err(ApproxError::BudgetExceeded {
            words: alphabet_size.to_u128().unwrap_or(u128::MAX),
            budget: word_budget,
        });
    }
    let row_alphabet_local = multiset_permutations(&symbol_counts);
    let row_alphabet: Vec<Vec<usize>> = row_alphabet_local
        .iter()
        .map(|w| w.iter().map(|&s| occupied_rows[s]).collect())
        .collect();

    // One exact affine map per row sequence; homogeneous by construction.
    let maps: Vec<AffineMap1D> = row_alphabet_local
        .iter()
        .map(|word| {
            let mut acc = AffineMap1D::identity();
            for &s in word {
                let (r, t) = &row_maps[s];
                acc = acc.compose(&AffineMap1D {
                    ratio: r.clone(),
                    offset: t.clone(),
                });
            }
            acc
        })
        .collect();
    let ifs = Ifs1D::new(maps)?;

    let alpha_raw = log_biguint(&alphabet_size) / approx.log_height_reciprocal;
    let alpha = alpha_raw.min(1.0);
    let selection = extract_ssc_subsystem(&ifs, len, epsilon, Some(alpha), word_budget)?;

    // J = |words| / |row projections|, exact by uniform fibres.
    let word_count = multinomial(&approx.counts);
    let per_block_preimages = &word_count / &alphabet_size;
    debug_assert_eq!(&per_block_preimages * &alphabet_size, word_count);

    let count = BigUint::from(selection.kept()) * per_block_preimages.pow(len as u32);
    let bound_log = -(3f64.ln()) - (len as f64) * epsilon * approx.log_height_reciprocal
        + (len as f64) * approx.log_word_count;
    let bound_met = log_biguint(&count) >= bound_log - 1e-9;

    // Materialize the kept 2-D words when small enough.
    let words = if count <= BigUint::from(materialize_budget) {
        Some(materialize_lift(system, approx, &row_alphabet, &selection))
    } else {
        None
    };

    Ok(RowSscLift {
        selection,
        row_alphabet,
        per_block_preimages,
        count,
        bound_log,
        bound_met,
        words,
    })
}

fn materialize_lift(
    system: &BaranskiSystem,
    approx: &UniformApproximation,
    row_alphabet: &[Vec<usize>],
    selection: &SscSelection,
) -> Vec<Vec<Cell>> {
    // All 2-D words of the approximation, grouped by row projection.
    let cell_words = multiset_permutations(&approx.counts);
    let cells = system.cells();
    let mut by_projection: std::collections::BTreeMap<Vec<usize>, Vec<Vec<Cell>>> =
        std::collections::BTreeMap::new();
    for word in cell_words {
        let as_cells: Vec<Cell> = word.iter().map(|&s| cells[s]).collect();
        let projection: Vec<usize> = as_cells.iter().map(|c| c.row).collect();
        by_projection.entry(projection).or_default().push(as_cells);
    }

    let mut out = Vec::new();
    for block_word in &selection.words {
        // Cartesian product over blocks of the per-block preimages.
        let preimage_sets: Vec<&Vec<Vec<Cell>>> = block_word
            .iter()
            .map(|&b| &by_projection[&row_alphabet[b]])
            .collect();
        let mut stack: Vec<Vec<Cell>> = vec![Vec::new()];
        for set in preimage_sets {
            let mut next = Vec::with_capacity(stack.len() * set.len());
            for prefix in &stack {
                for block in set {
                    let mut word = prefix.clone();
                    word.extend_from_slice(block);
                    next.push(word);
                }
            }
            stack = next;
        }
        out.extend(stack);
    }
    out
}

/// Minimum of `sum_i N_i^exponent` over integer column distributions with
/// `0 <= N_i <= cap` and `sum_i N_i >= total`, for an exponent in (0, 1).
///
/// Concavity makes spreading mass expensive, so the minimum packs columns to
/// the cap: `floor(total / cap)` full columns plus one remainder column.
/// This is the worst-case column distribution entering the lifted-subsystem
/// dimension bound.
pub fn min_column_power_sum(cap: u64, total: u64, exponent: f64) -> f64 {
    assert!(cap >= 1, "column capacity must be positive");
    assert!(
        exponent > 0.0 && exponent < 1.0,
        "exponent must lie in (0, 1)"
    );
    let full = total / cap;
    let remainder = total - full * cap;
    let mut value = full as f64 * (cap as f64).powf(exponent);
    if remainder > 0 {
        value += (remainder as f64).powf(exponent);
    }
    value
}

/// Exact multinomial `(sum counts)! / prod counts!`.
pub fn multinomial(counts: &[usize]) -> BigUint {
    let total: usize = counts.iter().sum();
    let mut numerator = BigUint::one();
    for i in 2..=total {
        numerator *= BigUint::from(i);
    }
    let mut denominator = BigUint::one();
    for &c in counts {
        for i in 2..=c {
            denominator *= BigUint::from(i);
        }
    }
    numerator / denominator
}

/// All distinct arrangements of a multiset given per-symbol counts; symbols
/// are the indices into `counts`. Lexicographic order.
pub fn multiset_permutations(counts: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = counts.iter().sum();
    let mut out = Vec::new();
    let mut remaining = counts.to_vec();
    let mut word = Vec::with_capacity(total);
    permute_rec(&mut remaining, &mut word, total, &mut out);
    out
}

fn permute_rec(
    remaining: &mut [usize],
    word: &mut Vec<usize>,
    total: usize,
    out: &mut Vec<Vec<usize>>,
) {
    if word.len() == total {
        out.push(word.clone());
        return;
    }
    for s in 0..remaining.len() {
        if remaining[s] == 0 {
            continue;
        }
        remaining[s] -= 1;
        word.push(s);
        permute_rec(remaining, word, total, out);
        word.pop();
        remaining[s] += 1;
    }
}

fn log_biguint(n: &BigUint) -> f64 {
    crate::numeric::ln_rational_abs(&BigRational::from_integer(n.clone().into()))
}
