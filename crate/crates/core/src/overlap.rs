//! Exact-arithmetic overlap diagnostics for the projected 1-D systems.
//!
//! The minimum gap between distinct level-k cylinder offsets detects exact
//! overlaps (gap zero) and yields a decay-rate trace; super-exponential decay
//! is the obstruction the dimension theorems exclude. A limit statement can
//! never be confirmed at finite depth, so every verdict short of an exact
//! overlap is labelled heuristic.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::exec::{map_indexed, sort, ExecMode};
use crate::numeric::{format_rational, ln_rational_abs, Scalar};
use crate::system::BaranskiSystem;

#[derive(Debug, Error, PartialEq)]
pub enum OverlapError {
    #[error("contraction ratio {0} is outside (0,1)")]
    RatioOutOfRange(String),
    #[error("letter {0} is out of range for a {1}-map system")]
    LetterOutOfRange(usize, usize),
    #[error("system parameters must be exact rationals")]
    NonRationalInput,
    #[error("empty system")]
    EmptySystem,
}

/// A 1-D affine contraction `x -> ratio * x + offset` with exact rational
/// coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineMap1D {
    pub ratio: BigRational,
    pub offset: BigRational,
}

impl AffineMap1D {
    pub fn identity() -> Self {
        AffineMap1D {
            ratio: BigRational::one(),
            offset: BigRational::zero(),
        }
    }

    /// `self` applied after `other`: `(self ∘ other)(x)`.
    pub fn compose(&self, other: &AffineMap1D) -> AffineMap1D {
        AffineMap1D {
            ratio: &self.ratio * &other.ratio,
            offset: &self.offset + &self.ratio * &other.offset,
        }
    }
}

/// An exact 1-D iterated function system of affine contractions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ifs1D {
    maps: Vec<AffineMap1D>,
}

impl Ifs1D {
    pub fn new(maps: Vec<AffineMap1D>) -> Result<Self, OverlapError> {
        if maps.is_empty() {
            return Err(OverlapError::EmptySystem);
        }
        for m in &maps {
            if !(m.ratio > BigRational::zero() && m.ratio < BigRational::one()) {
                return Err(OverlapError::RatioOutOfRange(format_rational(&m.ratio)));
            }
        }
        Ok(Ifs1D { maps })
    }

    pub fn from_parts(parts: &[(BigRational, BigRational)]) -> Result<Self, OverlapError> {
        Self::new(
            parts
                .iter()
                .map(|(r, t)| AffineMap1D {
                    ratio: r.clone(),
                    offset: t.clone(),
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn maps(&self) -> &[AffineMap1D] {
        &self.maps
    }

    /// All maps share one contraction ratio.
    pub fn is_homogeneous(&self) -> bool {
        self.maps.windows(2).all(|w| w[0].ratio == w[1].ratio)
    }

    /// The x-axis projection `{a_i x + t_i}` over occupied columns, available
    /// only when the relevant parameters are exact.
    pub fn x_projection(system: &BaranskiSystem) -> Result<Ifs1D, OverlapError> {
        let proj = system.projections();
        let parts: Option<Vec<_>> = proj
            .occupied_columns
            .iter()
            .map(|&i| {
                let r = system.width_scalar(i).exact()?.clone();
                let t = system.column_translation_scalar(i).exact()?.clone();
                Some((r, t))
            })
            .collect();
        let parts = parts.ok_or(OverlapError::NonRationalInput)?;
        Ifs1D::from_parts(&parts)
    }

    /// The y-axis projection `{b_j y + tau_j}` over occupied rows.
    pub fn y_projection(system: &BaranskiSystem) -> Result<Ifs1D, OverlapError> {
        let proj = system.projections();
        let parts: Option<Vec<_>> = proj
            .occupied_rows
            .iter()
            .map(|&j| {
                let r = system.height_scalar(j).exact()?.clone();
                let t = system.row_translation_scalar(j).exact()?.clone();
                Some((r, t))
            })
            .collect();
        let parts = parts.ok_or(OverlapError::NonRationalInput)?;
        Ifs1D::from_parts(&parts)
    }
}

/// An exactly composed word of 1-D maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineWord1D {
    pub word: Vec<usize>,
    pub map: AffineMap1D,
}

/// Composes the maps of `word` left to right: the first letter is applied
/// last, matching cylinder nesting.
pub fn compose_word(ifs: &Ifs1D, word: &[usize]) -> Result<AffineWord1D, OverlapError> {
    let mut acc = AffineMap1D::identity();
    for &letter in word {
        let map = ifs
            .maps
            .get(letter)
            .ok_or(OverlapError::LetterOutOfRange(letter, ifs.len()))?;
        acc = acc.compose(map);
    }
    Ok(AffineWord1D {
        word: word.to_vec(),
        map: acc,
    })
}

/// Minimum distance between distinct level-k offsets, or `Infinite` when no
/// distinct pair of words exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GammaValue {
    Finite(BigRational),
    Infinite,
}

impl GammaValue {
    pub fn is_zero(&self) -> bool {
        matches!(self, GammaValue::Finite(g) if g.is_zero())
    }
}

impl fmt::Display for GammaValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaValue::Finite(g) => f.write_str(&format_rational(g)),
            GammaValue::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for GammaValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

/// One level of the gap sequence: the exact gap and the decay rate
/// `-log(gamma_k) / k` (infinite for a zero gap, absent when no pair exists).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaEntry {
    pub level: usize,
    pub gamma: GammaValue,
    pub decay_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaSequence {
    pub entries: Vec<GammaEntry>,
    /// True when the word budget stopped the enumeration early.
    pub truncated: bool,
}

impl GammaSequence {
    pub fn gamma(&self, level: usize) -> Option<&GammaValue> {
        self.entries.get(level - 1).map(|e| &e.gamma)
    }

    pub fn first_zero_level(&self) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.gamma.is_zero())
            .map(|e| e.level)
    }
}

#[derive(Debug, Clone)]
pub struct GammaOptions {
    /// Deepest level to enumerate.
    pub k_max: usize,
    /// Cap on the total number of words across all levels.
    pub word_budget: u64,
    /// Restrict pairs to words with equal ratio products. Guards against the
    /// shared-fixed-point artifact where inhomogeneous maps share an offset;
    /// the plain diagnostic compares offsets only.
    pub strict_ratio_pairs: bool,
    pub mode: ExecMode,
}

impl Default for GammaOptions {
    fn default() -> Self {
        GammaOptions {
            k_max: 10,
            word_budget: 20_000_000,
            strict_ratio_pairs: false,
            mode: ExecMode::Parallel,
        }
    }
}

/// Per-word state during level-by-level enumeration. The ratio component is
/// carried only in strict mode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct WordPoint {
    ratio: Option<BigRational>,
    offset: BigRational,
}

/// Enumerates all level-k offsets for k = 1..=k_max and records the minimum
/// adjacent gap after sorting (zero on duplicates). Exact output: the result
/// is independent of enumeration order.
pub fn gamma_sequence(ifs: &Ifs1D, options: &GammaOptions) -> GammaSequence {
    let letters = ifs.len();
    let mut entries = Vec::new();
    let mut truncated = false;

    let mut current: Vec<WordPoint> = vec![WordPoint {
        ratio: if options.strict_ratio_pairs {
            Some(BigRational::one())
        } else {
            None
        },
        offset: BigRational::zero(),
    }];
    let mut words_used: u64 = 0;

    for level in 1..=options.k_max {
        let next_count = (current.len() as u64).saturating_mul(letters as u64);
        if words_used.saturating_add(next_count) > options.word_budget {
            truncated = true;
            break;
        }
        words_used += next_count;

        // Partition by first letter: each map is applied to every shorter
        // word. Merging the per-letter blocks and sorting is order-free.
        let blocks = map_indexed(options.mode, letters, |li| {
            let map = &ifs.maps[li];
            current
                .iter()
                .map(|w| WordPoint {
                    ratio: w.ratio.as_ref().map(|r| r * &map.ratio),
                    offset: &map.offset + &map.ratio * &w.offset,
                })
                .collect::<Vec<_>>()
        });
        let mut next: Vec<WordPoint> = blocks.into_iter().flatten().collect();
        sort(options.mode, &mut next);

        entries.push(gap_entry(level, &next, options.strict_ratio_pairs));
        current = next;
    }

    GammaSequence { entries, truncated }
}

fn gap_entry(level: usize, sorted: &[WordPoint], strict: bool) -> GammaEntry {
    let mut min_gap: Option<BigRational> = None;
    for pair in sorted.windows(2) {
        if strict && pair[0].ratio != pair[1].ratio {
            continue;
        }
        let gap = (&pair[1].offset - &pair[0].offset).abs();
        let smaller = match &min_gap {
            None => true,
            Some(current) => &gap < current,
        };
        if smaller {
            if gap.is_zero() {
                min_gap = Some(gap);
                break;
            }
            min_gap = Some(gap);
        }
    }
    match min_gap {
        None => GammaEntry {
            level,
            gamma: GammaValue::Infinite,
            decay_rate: None,
        },
        Some(g) => {
            let rate = if g.is_zero() {
                f64::INFINITY
            } else {
                -ln_rational_abs(&g) / level as f64
            };
            GammaEntry {
                level,
                gamma: GammaValue::Finite(g),
                decay_rate: Some(rate),
            }
        }
    }
}

/// Verdict of the concentration diagnostic. Only `ExactOverlap` is exact;
/// the others summarize finite evidence about a limit statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SeccVerdict {
    /// Two distinct words of this length share an offset.
    ExactOverlap {
        level: usize,
    },
    /// The decay-rate trace is non-increasing over the deeper half: finite
    /// evidence against super-exponential concentration.
    BoundedRate,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeccReport {
    pub verdict: SeccVerdict,
    /// False only for `ExactOverlap`: rate verdicts cannot be confirmed at
    /// finite depth.
    pub heuristic: bool,
    pub trace: GammaSequence,
}

/// Runs the gap enumeration and classifies the decay behaviour.
pub fn secc_diagnostic(ifs: &Ifs1D, options: &GammaOptions) -> SeccReport {
    let trace = gamma_sequence(ifs, options);
    let verdict = classify_trace(&trace);
    SeccReport {
        verdict,
        heuristic: !matches!(verdict, SeccVerdict::ExactOverlap { .. }),
        trace,
    }
}

fn classify_trace(trace: &GammaSequence) -> SeccVerdict {
    if let Some(level) = trace.first_zero_level() {
        return SeccVerdict::ExactOverlap { level };
    }
    if trace.entries.is_empty() {
        return SeccVerdict::Inconclusive;
    }
    // A single-map system has no distinct pairs at any level.
    if trace
        .entries
        .iter()
        .all(|e| e.gamma == GammaValue::Infinite)
    {
        return SeccVerdict::BoundedRate;
    }
    let rates: Vec<f64> = trace.entries.iter().filter_map(|e| e.decay_rate).collect();
    if rates.len() < 2 {
        return SeccVerdict::Inconclusive;
    }
    let tail = &rates[rates.len() / 2..];
    let non_increasing = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    if non_increasing {
        SeccVerdict::BoundedRate
    } else {
        SeccVerdict::Inconclusive
    }
}

/// Outcome of checking one axis projection.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AxisStatus {
    #[serde(rename = "exact_overlap_at_k")]
    ExactOverlapAt {
        level: usize,
    },
    NoOverlapToDepth {
        depth: usize,
    },
    /// Parameters were not exact rationals; nothing was checked.
    NotChecked,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisDiagnostic {
    pub status: AxisStatus,
    pub secc: Option<SeccReport>,
}

/// A pair of occupied columns (or rows) sharing a translation value. With
/// equal contraction ratios this is a genuine level-1 exact overlap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HyperplaneHit {
    pub axis: ProjectionAxis,
    pub first: usize,
    pub second: usize,
    pub equal_ratio: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionAxis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExceptionalVerdict {
    /// No zero gap found on either axis to the requested depth.
    #[serde(rename = "likely_outside_E")]
    LikelyOutsideE,
    /// An exact overlap or an equal-ratio translation coincidence was found.
    #[serde(rename = "inside_E_candidate")]
    InsideECandidate,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

/// Membership report for the exceptional translation set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceptionalReport {
    pub x_axis: AxisDiagnostic,
    pub y_axis: AxisDiagnostic,
    pub hyperplane_hits: Vec<HyperplaneHit>,
    /// `|occupied columns| + |occupied rows| - 1`, the dimension of the
    /// exceptional parameter set.
    pub dim_e_constant: usize,
    pub verdict: ExceptionalVerdict,
}

impl Serialize for ExceptionalReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("ExceptionalReport", 5)?;
        st.serialize_field("x_axis", &self.x_axis)?;
        st.serialize_field("y_axis", &self.y_axis)?;
        st.serialize_field("hyperplane_hits", &self.hyperplane_hits)?;
        st.serialize_field("dim_e_constant", &self.dim_e_constant)?;
        st.serialize_field("verdict", &self.verdict)?;
        st.end()
    }
}

/// Runs the concentration diagnostic on both axis projections, detects
/// coincident translations, and aggregates a verdict. Axes with non-rational
/// parameters degrade to `NotChecked` rather than failing.
pub fn exceptional_report(system: &BaranskiSystem, options: &GammaOptions) -> ExceptionalReport {
    let x_axis = axis_diagnostic(Ifs1D::x_projection(system), options);
    let y_axis = axis_diagnostic(Ifs1D::y_projection(system), options);

    let proj = system.projections();
    let mut hits = Vec::new();
    collect_hits(
        &proj.occupied_columns,
        |i| system.column_translation_scalar(i),
        |i| system.width_scalar(i),
        ProjectionAxis::X,
        &mut hits,
    );
    collect_hits(
        &proj.occupied_rows,
        |j| system.row_translation_scalar(j),
        |j| system.height_scalar(j),
        ProjectionAxis::Y,
        &mut hits,
    );

    let overlap_found = matches!(x_axis.status, AxisStatus::ExactOverlapAt { .. })
        || matches!(y_axis.status, AxisStatus::ExactOverlapAt { .. })
        || hits.iter().any(|h| h.equal_ratio);
    let both_checked = matches!(x_axis.status, AxisStatus::NoOverlapToDepth { .. })
        && matches!(y_axis.status, AxisStatus::NoOverlapToDepth { .. });

    let verdict = if overlap_found {
        ExceptionalVerdict::InsideECandidate
    } else if both_checked {
        ExceptionalVerdict::LikelyOutsideE
    } else {
        ExceptionalVerdict::Inconclusive
    };

    let dim_e_constant = proj.occupied_columns.len() + proj.occupied_rows.len() - 1;

    ExceptionalReport {
        x_axis,
        y_axis,
        hyperplane_hits: hits,
        dim_e_constant,
        verdict,
    }
}

fn axis_diagnostic(ifs: Result<Ifs1D, OverlapError>, options: &GammaOptions) -> AxisDiagnostic {
    match ifs {
        Err(_) => AxisDiagnostic {
            status: AxisStatus::NotChecked,
            secc: None,
        },
        Ok(ifs) => {
            let report = secc_diagnostic(&ifs, options);
            let status = match report.verdict {
                SeccVerdict::ExactOverlap { level } => AxisStatus::ExactOverlapAt { level },
                _ if report.trace.entries.is_empty() => AxisStatus::NotChecked,
                _ => AxisStatus::NoOverlapToDepth {
                    depth: report.trace.entries.len(),
                },
            };
            AxisDiagnostic {
                status,
                secc: Some(report),
            }
        }
    }
}

fn collect_hits<'a>(
    indices: &[usize],
    translation: impl Fn(usize) -> &'a Scalar,
    ratio: impl Fn(usize) -> &'a Scalar,
    axis: ProjectionAxis,
    hits: &mut Vec<HyperplaneHit>,
) {
    for (pos, &first) in indices.iter().enumerate() {
        for &second in &indices[pos + 1..] {
            if translation(first).coincides(translation(second)) {
                hits.push(HyperplaneHit {
                    axis,
                    first,
                    second,
                    equal_ratio: ratio(first).coincides(ratio(second)),
                });
            }
        }
    }
}

/// Convenience constructor for exact homogeneous test systems
/// `{r x + t_l}` with a shared ratio.
pub fn homogeneous_ifs(ratio: (i64, i64), offsets: &[(i64, i64)]) -> Ifs1D {
    let r = BigRational::new(BigInt::from(ratio.0), BigInt::from(ratio.1));
    let parts: Vec<(BigRational, BigRational)> = offsets
        .iter()
        .map(|&(n, d)| {
            (
                r.clone(),
                BigRational::new(BigInt::from(n), BigInt::from(d)),
            )
        })
        .collect();
    Ifs1D::from_parts(&parts).expect("valid homogeneous system")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn dyadic_pair() -> Ifs1D {
        homogeneous_ifs((1, 2), &[(0, 1), (1, 2)])
    }

    #[test]
    fn empty_word_composes_to_identity() {
        let w = compose_word(&dyadic_pair(), &[]).unwrap();
        assert_eq!(w.map, AffineMap1D::identity());
    }

    #[test]
    fn two_letter_composition_by_hand() {
        // First map then second map: ratio 1/4, offset t0 + r0*t1 = 1/4.
        let w = compose_word(&dyadic_pair(), &[0, 1]).unwrap();
        assert_eq!(w.map.ratio, rational(1, 4));
        assert_eq!(w.map.offset, rational(1, 4));
    }

    #[test]
    fn composition_is_associative_on_random_words() {
        use rand::{Rng, SeedableRng};
        let ifs = homogeneous_ifs((1, 3), &[(0, 1), (1, 3), (2, 3)]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u: Vec<usize> = (0..rng.random_range(0..5))
                .map(|_| rng.random_range(0..3))
                .collect();
            let v: Vec<usize> = (0..rng.random_range(0..5))
                .map(|_| rng.random_range(0..3))
                .collect();
            let mut uv = u.clone();
            uv.extend(&v);
            let cu = compose_word(&ifs, &u).unwrap().map;
            let cv = compose_word(&ifs, &v).unwrap().map;
            let cuv = compose_word(&ifs, &uv).unwrap().map;
            assert_eq!(cuv, cu.compose(&cv));
        }
    }

    #[test]
    fn dyadic_gaps_are_exact_powers_of_two() {
        let seq = gamma_sequence(&dyadic_pair(), &GammaOptions::default());
        assert!(!seq.truncated);
        for entry in &seq.entries {
            let expected = BigRational::new(BigInt::one(), BigInt::from(2).pow(entry.level as u32));
            assert_eq!(entry.gamma, GammaValue::Finite(expected));
            let rate = entry.decay_rate.unwrap();
            assert!((rate - std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_quarter_system_has_level_two_overlap() {
        let ifs = homogeneous_ifs((1, 2), &[(0, 1), (1, 4), (1, 2)]);
        let seq = gamma_sequence(&ifs, &GammaOptions::default());
        assert_eq!(seq.gamma(1).unwrap(), &GammaValue::Finite(rational(1, 4)));
        assert!(seq.gamma(2).unwrap().is_zero());
        assert_eq!(seq.first_zero_level(), Some(2));
    }

    #[test]
    fn shared_fixed_point_gives_zero_at_level_one() {
        // Different ratios, both fixing 0: offsets coincide immediately.
        let ifs = Ifs1D::from_parts(&[
            (rational(1, 2), rational(0, 1)),
            (rational(1, 4), rational(0, 1)),
        ])
        .unwrap();
        let seq = gamma_sequence(&ifs, &GammaOptions::default());
        assert!(seq.gamma(1).unwrap().is_zero());

        // The strict variant ignores different-ratio pairs entirely here.
        let strict = GammaOptions {
            strict_ratio_pairs: true,
            ..GammaOptions::default()
        };
        let seq = gamma_sequence(&ifs, &strict);
        assert_eq!(seq.gamma(1).unwrap(), &GammaValue::Infinite);
    }

    #[test]
    fn zero_gap_persists_at_deeper_levels() {
        let ifs = homogeneous_ifs((1, 2), &[(0, 1), (1, 4), (1, 2)]);
        let seq = gamma_sequence(
            &ifs,
            &GammaOptions {
                k_max: 6,
                ..GammaOptions::default()
            },
        );
        let first = seq.first_zero_level().unwrap();
        for entry in &seq.entries[first - 1..] {
            assert!(entry.gamma.is_zero());
        }
    }

    #[test]
    fn budget_truncates_but_returns_prefix() {
        let ifs = homogeneous_ifs((1, 2), &[(0, 1), (1, 2)]);
        let seq = gamma_sequence(
            &ifs,
            &GammaOptions {
                k_max: 10,
                word_budget: 2 + 4 + 8,
                ..GammaOptions::default()
            },
        );
        assert!(seq.truncated);
        assert_eq!(seq.entries.len(), 3);
    }

    #[test]
    fn sequential_and_parallel_enumeration_agree() {
        let ifs = homogeneous_ifs((1, 3), &[(0, 1), (1, 3), (2, 3)]);
        let seq = gamma_sequence(
            &ifs,
            &GammaOptions {
                mode: ExecMode::Sequential,
                ..GammaOptions::default()
            },
        );
        let par = gamma_sequence(&ifs, &GammaOptions::default());
        assert_eq!(seq, par);
    }

    #[test]
    fn secc_verdicts() {
        let dyadic = secc_diagnostic(&dyadic_pair(), &GammaOptions::default());
        assert_eq!(dyadic.verdict, SeccVerdict::BoundedRate);
        assert!(dyadic.heuristic);

        let overlap = secc_diagnostic(
            &homogeneous_ifs((1, 2), &[(0, 1), (1, 4), (1, 2)]),
            &GammaOptions::default(),
        );
        assert_eq!(overlap.verdict, SeccVerdict::ExactOverlap { level: 2 });
        assert!(!overlap.heuristic);

        let single = secc_diagnostic(
            &homogeneous_ifs((1, 2), &[(0, 1)]),
            &GammaOptions::default(),
        );
        assert_eq!(single.verdict, SeccVerdict::BoundedRate);
    }

    #[test]
    fn slow_start_geometric_decay_reads_inconclusive() {
        // Gaps 17/24 * 4^(1-k): geometric, but the rate -log(gamma_k)/k
        // climbs toward log 4 from below, so the non-increasing-tail rule
        // cannot certify a bounded rate. The verdict stays heuristic and the
        // axis still counts as checked without overlap.
        let ifs = Ifs1D::from_parts(&[
            (rational(1, 2), rational(0, 1)),
            (rational(1, 4), rational(17, 24)),
        ])
        .unwrap();
        let report = secc_diagnostic(&ifs, &GammaOptions::default());
        assert_eq!(report.verdict, SeccVerdict::Inconclusive);
        assert!(report.heuristic);
        assert_eq!(
            report.trace.gamma(3).unwrap(),
            &GammaValue::Finite(rational(17, 384))
        );
        let rates: Vec<f64> = report
            .trace
            .entries
            .iter()
            .filter_map(|e| e.decay_rate)
            .collect();
        assert!(rates.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn canonical_three_cell_reports_likely_outside() {
        let sys = presets::bm_three_cell();
        let report = exceptional_report(&sys, &GammaOptions::default());
        assert_eq!(report.verdict, ExceptionalVerdict::LikelyOutsideE);
        assert!(matches!(
            report.x_axis.status,
            AxisStatus::NoOverlapToDepth { depth: 10 }
        ));
        assert_eq!(report.dim_e_constant, 3);
        assert!(report.hyperplane_hits.is_empty());
    }

    #[test]
    fn merged_columns_are_flagged_inside() {
        // Equal translations on equal-width columns.
        let sys = presets::with_translations(
            &presets::bm_three_cell(),
            &[(1, (0, 1)), (2, (0, 1))],
            &[(1, (0, 1)), (2, (1, 3))],
        )
        .unwrap();
        let report = exceptional_report(&sys, &GammaOptions::default());
        assert_eq!(report.verdict, ExceptionalVerdict::InsideECandidate);
        assert!(matches!(
            report.x_axis.status,
            AxisStatus::ExactOverlapAt { level: 1 }
        ));
        assert_eq!(
            report.hyperplane_hits,
            vec![HyperplaneHit {
                axis: ProjectionAxis::X,
                first: 1,
                second: 2,
                equal_ratio: true
            }]
        );
    }

    #[test]
    fn real_parameters_degrade_to_not_checked() {
        let sys = presets::from_reals(
            &[0.5, 0.5],
            &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            &[(1, 1), (2, 2)],
            &[(1, 0.0), (2, 0.5)],
            &[(1, 0.0), (2, 1.0 / 3.0)],
        )
        .unwrap();
        let report = exceptional_report(&sys, &GammaOptions::default());
        assert_eq!(report.x_axis.status, AxisStatus::NotChecked);
        assert_eq!(report.verdict, ExceptionalVerdict::Inconclusive);
    }

    #[test]
    fn verdict_is_monotone_in_depth() {
        let sys = presets::with_translations(
            &presets::bm_three_cell(),
            &[(1, (0, 1)), (2, (0, 1))],
            &[(1, (0, 1)), (2, (1, 3))],
        )
        .unwrap();
        let mut last_inside = false;
        for k_max in 1..=8 {
            let report = exceptional_report(
                &sys,
                &GammaOptions {
                    k_max,
                    ..GammaOptions::default()
                },
            );
            let inside = report.verdict == ExceptionalVerdict::InsideECandidate;
            assert!(!last_inside || inside, "verdict regressed at depth {k_max}");
            last_inside = inside;
        }
    }

    #[test]
    fn gamma_values_serialize_as_rational_strings() {
        let seq = gamma_sequence(
            &dyadic_pair(),
            &GammaOptions {
                k_max: 2,
                ..GammaOptions::default()
            },
        );
        let json = serde_json::to_string(&seq).unwrap();
        assert!(json.contains("\"1/2\""));
        assert!(json.contains("\"1/4\""));
    }
}
