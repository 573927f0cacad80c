//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Run with `cargo test -p carpetdim-cli --test acceptance -- --nocapture`.

use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use carpetdim::approx::{
    build_uniform_approx, extract_ssc_subsystem, lift_row_ssc, multinomial, s_k_box, s_k_hausdorff,
};
use carpetdim::boxcount::{
    count_boxes_at_scale, estimate_box_dimension, ExpandOptions, RegressionOptions,
};
use carpetdim::moran::{bm_closed_form, box_dimension_analytic, pressure_base};
use carpetdim::overlap::{
    exceptional_report, gamma_sequence, homogeneous_ifs, secc_diagnostic, ExceptionalVerdict,
    GammaOptions, GammaValue, SeccVerdict,
};
use carpetdim::sampling::{random_bm_system, random_system};
use carpetdim::system::CarpetKind;
use carpetdim::variational::{bm_optimal_weights, eval_g, maximize_g, MaximizeOptions};
use carpetdim::{presets, BaranskiSystem, ExecMode};

fn pass(criterion: u32, name: &str, detail: String) {
    println!("[acceptance] criterion {criterion} ({name}): PASS - {detail}");
}

/// Closed-form box exponents of a uniform-grid system.
fn bm_box_exponents(system: &BaranskiSystem) -> (f64, f64, f64, f64) {
    let CarpetKind::BedfordMcMullenType {
        width_reciprocal: m,
        height_reciprocal: n,
    } = system.classify().kind
    else {
        panic!("expected BM-type system");
    };
    let proj = system.projections();
    let cols = proj.occupied_columns.len() as f64;
    let rows = proj.occupied_rows.len() as f64;
    let cells = system.cells().len() as f64;
    let t_a = cols.ln() / m.ln();
    let t_b = rows.ln() / n.ln();
    let d_a = cols.ln() / m.ln() + (cells / cols).ln() / n.ln();
    let d_b = rows.ln() / n.ln() + (cells / rows).ln() / m.ln();
    (t_a, t_b, d_a, d_b)
}

#[test]
fn criterion_1_closed_form_consistency() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let sys = random_bm_system(&mut rng);
        let exps = box_dimension_analytic(&sys).expect("solvable");
        let (t_a, t_b, d_a, d_b) = bm_box_exponents(&sys);
        for (solver, oracle) in [
            (exps.x_axis_exponent, t_a),
            (exps.y_axis_exponent, t_b),
            (exps.width_major_exponent, d_a),
            (exps.height_major_exponent, d_b),
        ] {
            let err = (solver - oracle).abs();
            worst = worst.max(err);
            assert!(err <= 1e-9, "solver {solver} vs closed form {oracle}");
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "criterion 1 must finish within 1 s, took {elapsed:?}"
    );
    pass(
        1,
        "closed-form consistency",
        format!("20 systems, worst error {worst:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_2_variational_consistency() {
    let sys = presets::bm_three_cell();
    let outcome = maximize_g(&sys, &MaximizeOptions::default()).unwrap();
    assert!(
        (outcome.value - 1.349681).abs() <= 1e-5,
        "maximizer value {}",
        outcome.value
    );

    let closed = bm_closed_form(&sys).unwrap().hausdorff;
    let at_optimal = eval_g(&sys, &bm_optimal_weights(&sys).unwrap()).unwrap().0;
    assert!(
        (at_optimal - closed).abs() <= 1e-6,
        "eval at optimal weights {at_optimal} vs closed {closed}"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let sys = random_bm_system(&mut rng);
        let closed = bm_closed_form(&sys).unwrap().hausdorff;
        let value = maximize_g(&sys, &MaximizeOptions::default()).unwrap().value;
        let err = (value - closed).abs();
        worst = worst.max(err);
        assert!(err <= 1e-4, "maximizer {value} vs closed form {closed}");
    }
    pass(
        2,
        "variational consistency",
        format!("three-cell + 20 random systems, worst error {worst:.2e}"),
    );
}

#[test]
fn criterion_3_ordering_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for trial in 0..100 {
        let sys = random_system(&mut rng, 4, 4);
        let exps = box_dimension_analytic(&sys).expect("solvable");
        let dim_b = exps.box_dimension();
        let dim_h = maximize_g(&sys, &MaximizeOptions::default()).unwrap().value;
        let cap = (exps.x_axis_exponent + exps.y_axis_exponent).min(2.0);
        assert!(dim_h >= 0.0, "trial {trial}");
        assert!(dim_h <= dim_b + 1e-6, "trial {trial}: {dim_h} > {dim_b}");
        assert!(dim_b <= cap + 1e-6, "trial {trial}: {dim_b} > {cap}");
        let pressure = pressure_base(&sys, &exps, dim_b);
        assert!(
            (pressure - 1.0).abs() <= 1e-8,
            "trial {trial}: pressure {pressure}"
        );
    }
    pass(3, "ordering suite", "100 random systems".to_string());
}

#[test]
fn criterion_4_convergent_sequences() {
    let started = Instant::now();
    let sys = presets::bm_three_cell();
    let weights = bm_optimal_weights(&sys).unwrap();

    let h_fine = s_k_hausdorff(&build_uniform_approx(&sys, &weights, 100_000)).unwrap();
    let h_coarse = s_k_hausdorff(&build_uniform_approx(&sys, &weights, 100)).unwrap();
    let h_err = (h_fine - 1.349681).abs();
    assert!(h_err <= 0.02, "hausdorff convergent error {h_err}");
    assert!(h_err < (h_coarse - 1.349681).abs());

    let b_fine = s_k_box(&sys, 100_000).unwrap();
    let b_coarse = s_k_box(&sys, 100).unwrap();
    let b_err = (b_fine - 1.369070).abs();
    assert!(b_err <= 0.02, "box convergent error {b_err}");
    assert!(b_err < (b_coarse - 1.369070).abs());

    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "criterion 4 must finish within 5 s, took {elapsed:?}"
    );
    pass(
        4,
        "convergent sequences",
        format!("errors {h_err:.2e} / {b_err:.2e} at k = 1e5, {elapsed:?}"),
    );
}

#[test]
fn criterion_5_overlap_diagnostics() {
    // Exact dyadic gaps.
    let dyadic = homogeneous_ifs((1, 2), &[(0, 1), (1, 2)]);
    let seq = gamma_sequence(&dyadic, &GammaOptions::default());
    for k in 1..=10usize {
        let expected = BigRational::new(BigInt::from(1), BigInt::from(2).pow(k as u32));
        assert_eq!(
            seq.gamma(k).unwrap(),
            &GammaValue::Finite(expected),
            "gamma_{k}"
        );
    }

    // Exact overlap at level 2 for the quarter-shifted triple.
    let triple = homogeneous_ifs((1, 2), &[(0, 1), (1, 4), (1, 2)]);
    let report = secc_diagnostic(&triple, &GammaOptions::default());
    assert_eq!(report.verdict, SeccVerdict::ExactOverlap { level: 2 });

    // Merged columns are inside the exceptional candidate set.
    let merged = presets::with_translations(
        &presets::bm_three_cell(),
        &[(1, (0, 1)), (2, (0, 1))],
        &[(1, (0, 1)), (2, (1, 3))],
    )
    .unwrap();
    let exc = exceptional_report(&merged, &GammaOptions::default());
    assert_eq!(exc.verdict, ExceptionalVerdict::InsideECandidate);

    pass(
        5,
        "overlap diagnostics",
        "dyadic gaps exact to depth 10; overlap at level 2; merge flagged".to_string(),
    );
}

#[test]
fn criterion_6_dimension_drop_under_column_merge() {
    // Variant whose columns occupy disjoint rows covering the full height.
    let variant = presets::bm_three_cell_full_column_variant();
    let unmerged = bm_closed_form(&variant).unwrap().hausdorff;
    assert!((unmerged - 1.349681).abs() <= 1e-5);

    // Merging both columns yields one full column of three cells.
    let merged = presets::uniform_grid_with_pattern(2, 3, &[(1, 1), (1, 2), (1, 3)]).unwrap();
    let dropped = bm_closed_form(&merged).unwrap().hausdorff;
    assert!(
        (dropped - 1.0).abs() <= 1e-12,
        "merged dimension {dropped} should be exactly 1"
    );
    assert!(dropped < unmerged);
    pass(
        6,
        "dimension drop",
        format!("{unmerged:.6} drops to {dropped:.6} under the merge"),
    );
}

#[test]
fn criterion_7_empirical_slopes() {
    let eight = presets::third_subdivision_eight_cell();
    let started = Instant::now();
    let est = estimate_box_dimension(
        &eight,
        &RegressionOptions {
            q_min: 2,
            q_max: 8,
            base: 3.0,
            ..RegressionOptions::default()
        },
    )
    .unwrap();
    let eight_elapsed = started.elapsed();
    let target = 8f64.ln() / 3f64.ln();
    let eight_err = (est.slope - target).abs();
    assert!(eight_err <= 0.05, "slope {} vs {target}", est.slope);
    assert!(
        eight_elapsed.as_secs_f64() < 60.0,
        "eight-cell run took {eight_elapsed:?}"
    );

    let three = presets::bm_three_cell();
    let started = Instant::now();
    let est3 = estimate_box_dimension(
        &three,
        &RegressionOptions {
            q_min: 2,
            q_max: 8,
            base: 3.0,
            ..RegressionOptions::default()
        },
    )
    .unwrap();
    let three_elapsed = started.elapsed();
    let three_err = (est3.slope - 1.3691).abs();
    assert!(three_err <= 0.1, "slope {} vs 1.3691", est3.slope);
    assert!(
        three_elapsed.as_secs_f64() < 60.0,
        "three-cell run took {three_elapsed:?}"
    );

    pass(
        7,
        "empirical slopes",
        format!(
            "eight-cell {:.4} (err {eight_err:.4}, {eight_elapsed:?}); three-cell {:.4} (err {three_err:.4}, {three_elapsed:?})",
            est.slope, est3.slope
        ),
    );
}

#[test]
fn criterion_8_constructive_lemmas() {
    // Brute-force string enumeration equals the multinomial cardinals.
    let patterns: Vec<Vec<(usize, usize)>> = vec![
        vec![(1, 1), (2, 2)],
        vec![(1, 1), (2, 1), (2, 2)],
        vec![(1, 1), (1, 2), (2, 1), (2, 2)],
    ];
    for pattern in &patterns {
        let sys = presets::uniform_grid_with_pattern(2, 3, pattern).unwrap();
        let d = sys.cells().len();
        for k in 1..=4usize {
            let weights = carpetdim::ProbabilityWeights::uniform(d);
            let approx = build_uniform_approx(&sys, &weights, k);
            if approx.total_length > 10 {
                continue;
            }
            let words = enumerate_with_counts(d, &approx.counts);
            let expected = multinomial(&approx.counts);
            assert_eq!(BigUint::from(words.len()), expected, "{pattern:?} k={k}");
            assert!(
                (approx.log_word_count - (words.len() as f64).ln()).abs() < 1e-9,
                "log cardinality mismatch"
            );
        }
    }

    // Greedy extraction: strict disjointness and the count bound on the
    // three documented examples.
    let examples = [
        (homogeneous_ifs((1, 2), &[(0, 1), (1, 2)]), 3usize, 4usize),
        (homogeneous_ifs((1, 3), &[(0, 1), (2, 3)]), 2, 4),
        (homogeneous_ifs((1, 2), &[(0, 1), (1, 4)]), 4, 6),
    ];
    for (ifs, len, expected_kept) in examples {
        let sel = extract_ssc_subsystem(&ifs, len, 0.05, None, 1_000_000).unwrap();
        assert_eq!(sel.kept(), expected_kept);
        assert!(sel.kept() as f64 >= sel.required_bound);
        for pair in sel.left_endpoints.windows(2) {
            let gap = &pair[1] - (&pair[0] + &sel.interval_length);
            assert!(gap > BigRational::new(0.into(), 1.into()));
        }
    }

    // Lift: the exact product identity on enumerated small cases, counted
    // independently by filtering all block tuples.
    let sys = presets::full_uniform_grid(2, 2);
    let weights = carpetdim::ProbabilityWeights::uniform(4);
    let approx = build_uniform_approx(&sys, &weights, 1);
    let lift = lift_row_ssc(&sys, &approx, 2, 0.05, 10_000_000, 10_000_000).unwrap();
    let words = lift.words.as_ref().expect("materialized");
    assert_eq!(BigUint::from(words.len()), lift.count);
    let expected = BigUint::from(lift.selection.kept()) * lift.per_block_preimages.pow(2);
    assert_eq!(lift.count, expected);
    // Independent count: enumerate all pairs of level-1 words and filter by
    // selected row projection.
    let all_words = enumerate_with_counts(4, &approx.counts);
    let selected: std::collections::BTreeSet<Vec<usize>> = lift
        .selection
        .words
        .iter()
        .map(|bw| {
            bw.iter()
                .flat_map(|&b| lift.row_alphabet[b].clone())
                .collect()
        })
        .collect();
    let mut independent = 0u64;
    for left in &all_words {
        for right in &all_words {
            let mut projection: Vec<usize> = left.iter().map(|&s| sys.cells()[s].row).collect();
            projection.extend(right.iter().map(|&s| sys.cells()[s].row));
            if selected.contains(&projection) {
                independent += 1;
            }
        }
    }
    assert_eq!(BigUint::from(independent), lift.count);

    pass(
        8,
        "constructive lemmas",
        format!(
            "cardinals match to k=4; three selections meet bounds; lift identity {} = kept x J^l",
            lift.count
        ),
    );
}

#[test]
fn criterion_9_determinism() {
    // Library level: parallel and sequential box counts are exactly equal.
    let sys = presets::third_subdivision_eight_cell();
    for q in 2..=5 {
        let delta = 3f64.powi(-q);
        let seq =
            count_boxes_at_scale(&sys, delta, &ExpandOptions::default(), ExecMode::Sequential)
                .unwrap();
        let par = count_boxes_at_scale(&sys, delta, &ExpandOptions::default(), ExecMode::Parallel)
            .unwrap();
        assert_eq!(seq, par, "q = {q}");
    }

    // Binary level: byte-identical artifacts for a fixed seed.
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("sys.json");
    std::fs::write(
        &input,
        serde_json::to_string(&presets::bm_three_cell().to_definition()).unwrap(),
    )
    .unwrap();
    let input = input.to_str().unwrap().to_owned();
    let exe = env!("CARGO_BIN_EXE_carpetdim");

    let run = |args: &[&str]| {
        let out = std::process::Command::new(exe)
            .args(args)
            .output()
            .expect("binary runs");
        assert!(out.status.success(), "{:?}", out);
        out.stdout
    };
    let dims_args = [
        "dims", "--input", &input, "--format", "json", "--seed", "11",
    ];
    assert_eq!(run(&dims_args), run(&dims_args));
    let emp_args = [
        "empirical",
        "--input",
        &input,
        "--qmin",
        "1",
        "--qmax",
        "5",
        "--base",
        "3",
    ];
    assert_eq!(run(&emp_args), run(&emp_args));

    let pgm_a = dir.path().join("a.pgm");
    let pgm_b = dir.path().join("b.pgm");
    for path in [&pgm_a, &pgm_b] {
        run(&[
            "render",
            "--input",
            &input,
            "--resolution",
            "128",
            "--qmax",
            "7",
            "--output",
            path.to_str().unwrap(),
        ]);
    }
    assert_eq!(
        std::fs::read(&pgm_a).unwrap(),
        std::fs::read(&pgm_b).unwrap()
    );

    pass(
        9,
        "determinism",
        "equal parallel/sequential counts; byte-identical JSON, CSV, PGM".to_string(),
    );
}

/// Brute-force enumeration of all strings over `symbols` whose per-symbol
/// multiplicities match `counts`.
fn enumerate_with_counts(symbols: usize, counts: &[usize]) -> Vec<Vec<usize>> {
    let theta: usize = counts.iter().sum();
    let mut all: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..theta {
        let mut next = Vec::new();
        for w in &all {
            for (s, &limit) in counts.iter().enumerate().take(symbols) {
                if w.iter().filter(|&&x| x == s).count() < limit {
                    let mut v = w.clone();
                    v.push(s);
                    next.push(v);
                }
            }
        }
        all = next;
    }
    all
}
