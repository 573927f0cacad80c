//! The dimension report assembled by the `dims` command.

use anyhow::Result;
use serde::Serialize;

use carpetdim::moran::{bm_closed_form, box_dimension_analytic, MoranExponents};
use carpetdim::overlap::{exceptional_report, AxisStatus, ExceptionalVerdict, GammaOptions};
use carpetdim::system::{CarpetKind, SystemClass};
use carpetdim::variational::{maximize_g, MaximizeOptions};
use carpetdim::{BaranskiSystem, ExecMode};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HausdorffMethod {
    /// Exact fibre-count formula; available for Bedford-McMullen-type
    /// systems.
    ClosedForm,
    /// Simplex maximizer value: exact for closed-form systems, otherwise a
    /// certified lower bound.
    Variational,
}

#[derive(Debug, Clone, Serialize)]
pub struct HausdorffReport {
    pub value: f64,
    pub method: HausdorffMethod,
    /// True when some maximizer start hit the iteration cap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoxPackingReport {
    /// Box dimension; the packing dimension coincides with it.
    pub value: f64,
    #[serde(flatten)]
    pub exponents: MoranExponents,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExceptionalSummary {
    pub verdict: ExceptionalVerdict,
    pub x_axis: AxisStatus,
    pub y_axis: AxisStatus,
    pub dim_e_constant: usize,
    pub hyperplane_hits: usize,
}

/// Everything the `dims` command reports.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionReport {
    pub schema_version: u32,
    pub classification: SystemClass,
    pub hausdorff: HausdorffReport,
    pub box_packing: BoxPackingReport,
    pub exceptional: ExceptionalSummary,
}

impl DimensionReport {
    /// Internal consistency: the Hausdorff value may not exceed the box
    /// value beyond round-off, and planar dimensions live in [0, 2].
    pub fn check_invariants(&self) -> Result<(), String> {
        let h = self.hausdorff.value;
        let b = self.box_packing.value;
        if h > b + 1e-6 {
            return Err(format!("dim_H = {h} exceeds dim_B = {b}"));
        }
        for (name, v) in [("dim_H", h), ("dim_B", b)] {
            if !(0.0..=2.0).contains(&v) {
                return Err(format!("{name} = {v} is outside [0, 2]"));
            }
        }
        Ok(())
    }
}

pub struct ReportOptions {
    pub seed: u64,
    pub starts: usize,
    pub diagnostic_depth: usize,
    pub word_budget: u64,
    pub mode: ExecMode,
}

/// Computes the full report: closed form when the classification allows it,
/// the simplex maximizer otherwise, plus analytic box exponents and the
/// overlap diagnostics.
pub fn dimension_report(
    system: &BaranskiSystem,
    options: &ReportOptions,
) -> Result<DimensionReport> {
    let classification = system.classify();

    let hausdorff = match classification.kind {
        CarpetKind::BedfordMcMullenType { .. } => HausdorffReport {
            value: bm_closed_form(system)?.hausdorff,
            method: HausdorffMethod::ClosedForm,
            converged: None,
        },
        CarpetKind::GeneralBaranski => {
            let outcome = maximize_g(
                system,
                &MaximizeOptions {
                    random_starts: options.starts,
                    seed: options.seed,
                    mode: options.mode,
                    ..MaximizeOptions::default()
                },
            )?;
            HausdorffReport {
                value: outcome.value,
                method: HausdorffMethod::Variational,
                converged: Some(outcome.converged),
            }
        }
    };

    let exponents = box_dimension_analytic(system)?;
    let box_packing = BoxPackingReport {
        value: exponents.box_dimension(),
        exponents,
    };

    let exc = exceptional_report(
        system,
        &GammaOptions {
            k_max: options.diagnostic_depth,
            word_budget: options.word_budget,
            mode: options.mode,
            ..GammaOptions::default()
        },
    );
    let exceptional = ExceptionalSummary {
        verdict: exc.verdict,
        x_axis: exc.x_axis.status,
        y_axis: exc.y_axis.status,
        dim_e_constant: exc.dim_e_constant,
        hyperplane_hits: exc.hyperplane_hits.len(),
    };

    Ok(DimensionReport {
        schema_version: SCHEMA_VERSION,
        classification,
        hausdorff,
        box_packing,
        exceptional,
    })
}

pub fn verdict_label(verdict: ExceptionalVerdict) -> &'static str {
    match verdict {
        ExceptionalVerdict::LikelyOutsideE => "likely_outside_E",
        ExceptionalVerdict::InsideECandidate => "inside_E_candidate",
        ExceptionalVerdict::Inconclusive => "inconclusive",
    }
}

pub fn axis_label(status: &AxisStatus) -> String {
    match status {
        AxisStatus::ExactOverlapAt { level } => format!("exact_overlap_at_k={level}"),
        AxisStatus::NoOverlapToDepth { depth } => format!("no_overlap_to_depth={depth}"),
        AxisStatus::NotChecked => "not_checked".to_string(),
    }
}

/// Text rendering of the report.
pub fn render_text(system: &BaranskiSystem, report: &DimensionReport) -> String {
    let mut out = String::new();
    let kind = match report.classification.kind {
        CarpetKind::GeneralBaranski => "general".to_string(),
        CarpetKind::BedfordMcMullenType {
            width_reciprocal,
            height_reciprocal,
        } => format!("Bedford-McMullen type ({width_reciprocal:.6}, {height_reciprocal:.6})"),
    };
    out.push_str(&format!(
        "system: {} columns x {} rows, {} cells, {}\n",
        system.num_columns(),
        system.num_rows(),
        system.cells().len(),
        kind
    ));
    out.push_str(&format!(
        "fibres: uniform vertical = {}, uniform horizontal = {}\n",
        report.classification.uniform_vertical_fibres,
        report.classification.uniform_horizontal_fibres
    ));
    let method = match report.hausdorff.method {
        HausdorffMethod::ClosedForm => "closed_form",
        HausdorffMethod::Variational => "variational",
    };
    out.push_str(&format!(
        "dim_H = {:.6} ({method})\n",
        report.hausdorff.value
    ));
    out.push_str(&format!(
        "dim_B = dim_P = {:.6}\n",
        report.box_packing.value
    ));
    let e = &report.box_packing.exponents;
    out.push_str(&format!(
        "  t_A = {:.6}  t_B = {:.6}  D_A = {:.6}  D_B = {:.6}\n",
        e.x_axis_exponent, e.y_axis_exponent, e.width_major_exponent, e.height_major_exponent
    ));
    out.push_str(&format!(
        "exceptional: {} (x: {}, y: {}, dim E = {}, coincident translations = {})\n",
        verdict_label(report.exceptional.verdict),
        axis_label(&report.exceptional.x_axis),
        axis_label(&report.exceptional.y_axis),
        report.exceptional.dim_e_constant,
        report.exceptional.hyperplane_hits
    ));
    out
}
