//! Empirical box counting of the attractor and raster rendering.
//!
//! The attractor is covered by cylinder rectangles emitted as soon as their
//! longer side drops to the target scale; each such rectangle meets only a
//! bounded number of grid cells, so the grid count stays within a constant
//! factor of the true covering number and the log-log regression slope is
//! unaffected. Grid cells are half-open with the `x = 1` / `y = 1` boundary
//! clamped into the last cell, and a cell is marked when its closure meets a
//! rectangle. Expansion subtrees are independent work units merged by set
//! union, so parallel and sequential counts are identical.

use std::collections::HashSet;
use std::io::{self, Write};

use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::exec::ExecMode;
use crate::system::BaranskiSystem;

#[derive(Debug, Error, PartialEq)]
pub enum BoxcountError {
    #[error("scale {0} must lie in (0, 1]")]
    InvalidScale(f64),
    #[error("rectangle budget of {0} exceeded during expansion")]
    BudgetExceeded(u64),
    #[error("resolution must be at least 1")]
    ZeroResolution,
    #[error("scale ladder is empty (q_min {q_min} > q_max {q_max})")]
    EmptyLadder { q_min: u32, q_max: u32 },
    #[error("regression base {0} must exceed 1")]
    BadBase(f64),
}

/// A cylinder rectangle: the image of the unit square under a composed map.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderRect {
    /// Indices into [`BaranskiSystem::cells`], outermost letter first.
    pub word: Vec<u16>,
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

/// One scale sample of the count ladder.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoxCountSample {
    /// Ladder index: `delta = base^(-q)`.
    pub q: u32,
    pub delta: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct ExpandOptions {
    /// Cap on emitted rectangles.
    pub max_rects: u64,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        ExpandOptions {
            max_rects: 50_000_000,
        }
    }
}

/// Per-cell expansion step data: child rect of `(x0, y0, w, h)` through cell
/// `(i, j)` is `(x0 + w t_i, y0 + h tau_j, w a_i, h b_j)`.
struct StepTable {
    tx: Vec<f64>,
    ty: Vec<f64>,
    sx: Vec<f64>,
    sy: Vec<f64>,
}

impl StepTable {
    fn new(system: &BaranskiSystem) -> Self {
        let cells = system.cells();
        StepTable {
            tx: cells
                .iter()
                .map(|c| system.column_translation(c.col))
                .collect(),
            ty: cells
                .iter()
                .map(|c| system.row_translation(c.row))
                .collect(),
            sx: cells.iter().map(|c| system.width(c.col)).collect(),
            sy: cells.iter().map(|c| system.height(c.row)).collect(),
        }
    }

    fn len(&self) -> usize {
        self.sx.len()
    }
}

/// Depth-first expansion streaming every cylinder to `sink` exactly when its
/// longer side first drops to `delta` or below. The emitted rectangles cover
/// the attractor and each fits inside a 2x2 block of delta-cells.
pub fn expand_to_scale_with(
    system: &BaranskiSystem,
    delta: f64,
    options: &ExpandOptions,
    sink: &mut impl FnMut(CylinderRect),
) -> Result<u64, BoxcountError> {
    check_scale(delta)?;
    let steps = StepTable::new(system);
    let mut word: Vec<u16> = Vec::new();
    let mut emitted = 0u64;
    stream_rects(
        &steps,
        delta,
        0.0,
        0.0,
        1.0,
        1.0,
        &mut word,
        &mut emitted,
        options.max_rects,
        sink,
    )?;
    Ok(emitted)
}

/// Collecting wrapper around [`expand_to_scale_with`].
pub fn expand_to_scale(
    system: &BaranskiSystem,
    delta: f64,
    options: &ExpandOptions,
) -> Result<Vec<CylinderRect>, BoxcountError> {
    let mut out = Vec::new();
    expand_to_scale_with(system, delta, options, &mut |rect| out.push(rect))?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn stream_rects(
    steps: &StepTable,
    delta: f64,
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    word: &mut Vec<u16>,
    emitted: &mut u64,
    cap: u64,
    sink: &mut impl FnMut(CylinderRect),
) -> Result<(), BoxcountError> {
    if w.max(h) <= delta {
        if *emitted >= cap {
            return Err(BoxcountError::BudgetExceeded(cap));
        }
        *emitted += 1;
        sink(CylinderRect {
            word: word.clone(),
            x0,
            y0,
            width: w,
            height: h,
        });
        return Ok(());
    }
    for idx in 0..steps.len() {
        word.push(idx as u16);
        stream_rects(
            steps,
            delta,
            x0 + w * steps.tx[idx],
            y0 + h * steps.ty[idx],
            w * steps.sx[idx],
            h * steps.sy[idx],
            word,
            emitted,
            cap,
            sink,
        )?;
        word.pop();
    }
    Ok(())
}

/// Emissions are claimed from the shared counter in batches so the hot
/// expansion path carries no cross-thread traffic; a branch may therefore
/// overrun the cap by less than one batch per worker before the overrun is
/// detected, which only affects how soon the error surfaces.
const BUDGET_BATCH: u64 = 4096;

struct BudgetMeter<'a> {
    shared: &'a AtomicU64,
    cap: u64,
    unflushed: u64,
}

impl<'a> BudgetMeter<'a> {
    fn new(shared: &'a AtomicU64, cap: u64) -> Self {
        BudgetMeter {
            shared,
            cap,
            unflushed: 0,
        }
    }

    #[inline]
    fn tick(&mut self) -> Result<(), BoxcountError> {
        self.unflushed += 1;
        if self.unflushed >= BUDGET_BATCH {
            self.flush()?;
        }
        Ok(())
    }

    fn flush(&mut self) -> Result<(), BoxcountError> {
        if self.unflushed == 0 {
            return Ok(());
        }
        let before = self.shared.fetch_add(self.unflushed, Ordering::Relaxed);
        let total = before + self.unflushed;
        self.unflushed = 0;
        if total > self.cap {
            return Err(BoxcountError::BudgetExceeded(self.cap));
        }
        Ok(())
    }
}

/// Streaming variant used by the counting and rendering paths: no words, no
/// materialization.
#[allow(clippy::too_many_arguments)]
fn visit_rects<F: FnMut(f64, f64, f64, f64)>(
    steps: &StepTable,
    delta: f64,
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    meter: &mut BudgetMeter<'_>,
    f: &mut F,
) -> Result<(), BoxcountError> {
    if w.max(h) <= delta {
        meter.tick()?;
        f(x0, y0, w, h);
        return Ok(());
    }
    for idx in 0..steps.len() {
        visit_rects(
            steps,
            delta,
            x0 + w * steps.tx[idx],
            y0 + h * steps.ty[idx],
            w * steps.sx[idx],
            h * steps.sy[idx],
            meter,
            f,
        )?;
    }
    Ok(())
}

fn check_scale(delta: f64) -> Result<(), BoxcountError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(BoxcountError::InvalidScale(delta));
    }
    Ok(())
}

/// Occupied-cell set: dense bitset for small grids, hash set beyond.
#[derive(Debug)]
enum OccupancyGrid {
    Dense { side: u64, bits: Vec<u64> },
    Sparse { side: u64, set: HashSet<u64> },
}

const DENSE_LIMIT: u64 = 1 << 28;

impl OccupancyGrid {
    fn new(side: u64) -> Self {
        let cells = side.saturating_mul(side);
        if cells <= DENSE_LIMIT {
            OccupancyGrid::Dense {
                side,
                bits: vec![0u64; cells.div_ceil(64) as usize],
            }
        } else {
            OccupancyGrid::Sparse {
                side,
                set: HashSet::new(),
            }
        }
    }

    fn mark(&mut self, u: u64, v: u64) {
        match self {
            OccupancyGrid::Dense { side, bits } => {
                let idx = v * *side + u;
                bits[(idx / 64) as usize] |= 1u64 << (idx % 64);
            }
            OccupancyGrid::Sparse { side, set } => {
                set.insert(v * *side + u);
            }
        }
    }

    fn union(mut self, other: OccupancyGrid) -> OccupancyGrid {
        match (&mut self, other) {
            (
                OccupancyGrid::Dense { bits, .. },
                OccupancyGrid::Dense {
                    bits: other_bits, ..
                },
            ) => {
                for (a, b) in bits.iter_mut().zip(other_bits) {
                    *a |= b;
                }
                self
            }
            (OccupancyGrid::Sparse { set, .. }, OccupancyGrid::Sparse { set: other_set, .. }) => {
                set.extend(other_set);
                self
            }
            _ => unreachable!("grids of one counting run share a layout"),
        }
    }

    fn count(&self) -> u64 {
        match self {
            OccupancyGrid::Dense { bits, .. } => bits.iter().map(|w| w.count_ones() as u64).sum(),
            OccupancyGrid::Sparse { set, .. } => set.len() as u64,
        }
    }
}

/// Number of grid cells per side at scale `delta`.
fn grid_side(delta: f64) -> u64 {
    (1.0 / delta).ceil() as u64
}

/// Smallest cell index whose closure reaches coordinate `x`: the comparisons
/// define the touching convention, correcting any floor round-off.
fn first_touched(x: f64, delta: f64) -> i64 {
    let mut u = (x / delta).floor() as i64 - 2;
    while ((u + 1) as f64) * delta < x {
        u += 1;
    }
    u
}

/// Largest cell index whose closure reaches coordinate `x`.
fn last_touched(x: f64, delta: f64) -> i64 {
    let mut u = (x / delta).floor() as i64 + 2;
    while (u as f64) * delta > x {
        u -= 1;
    }
    u
}

fn mark_rect(grid: &mut OccupancyGrid, delta: f64, side: u64, x0: f64, y0: f64, w: f64, h: f64) {
    let clamp = |v: i64| -> u64 { v.clamp(0, side as i64 - 1) as u64 };
    let u_lo = clamp(first_touched(x0, delta));
    let u_hi = clamp(last_touched(x0 + w, delta));
    let v_lo = clamp(first_touched(y0, delta));
    let v_hi = clamp(last_touched(y0 + h, delta));
    for v in v_lo..=v_hi {
        for u in u_lo..=u_hi {
            grid.mark(u, v);
        }
    }
}

/// Marks every grid cell whose closure intersects one of `rects` and returns
/// the count. Duplicate rectangles cannot change the result.
pub fn count_boxes(rects: &[CylinderRect], delta: f64) -> u64 {
    let side = grid_side(delta);
    let mut grid = OccupancyGrid::new(side);
    for r in rects {
        mark_rect(&mut grid, delta, side, r.x0, r.y0, r.width, r.height);
    }
    grid.count()
}

/// Expansion and counting in one pass, without materializing rectangles.
/// In parallel mode the top-level branches are counted independently and the
/// cell sets merged by union.
pub fn count_boxes_at_scale(
    system: &BaranskiSystem,
    delta: f64,
    options: &ExpandOptions,
    mode: ExecMode,
) -> Result<u64, BoxcountError> {
    check_scale(delta)?;
    let steps = StepTable::new(system);
    let side = grid_side(delta);
    let emitted = AtomicU64::new(0);

    // The root rectangle qualifies immediately at coarse scales.
    if 1.0f64 <= delta {
        let mut grid = OccupancyGrid::new(side);
        mark_rect(&mut grid, delta, side, 0.0, 0.0, 1.0, 1.0);
        return Ok(grid.count());
    }

    let branch = |idx: usize| -> Result<OccupancyGrid, BoxcountError> {
        let mut grid = OccupancyGrid::new(side);
        let mut meter = BudgetMeter::new(&emitted, options.max_rects);
        visit_rects(
            &steps,
            delta,
            steps.tx[idx],
            steps.ty[idx],
            steps.sx[idx],
            steps.sy[idx],
            &mut meter,
            &mut |x0, y0, w, h| mark_rect(&mut grid, delta, side, x0, y0, w, h),
        )?;
        meter.flush()?;
        Ok(grid)
    };

    let grids: Result<Vec<OccupancyGrid>, BoxcountError> = match mode.effective() {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => (0..steps.len()).into_par_iter().map(branch).collect(),
        _ => (0..steps.len()).map(branch).collect(),
    };
    let merged = grids?
        .into_iter()
        .reduce(OccupancyGrid::union)
        .expect("pattern is nonempty");
    Ok(merged.count())
}

#[derive(Debug, Clone, Copy)]
pub struct RegressionOptions {
    pub q_min: u32,
    pub q_max: u32,
    /// Scale ladder base: `delta = base^(-q)`.
    pub base: f64,
    pub max_rects: u64,
    pub mode: ExecMode,
}

impl Default for RegressionOptions {
    fn default() -> Self {
        RegressionOptions {
            q_min: 2,
            q_max: 8,
            base: 3.0,
            max_rects: ExpandOptions::default().max_rects,
            mode: ExecMode::Parallel,
        }
    }
}

/// Least-squares estimate of the box dimension from a scale ladder.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BoxDimensionEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub samples: Vec<BoxCountSample>,
    /// Per-sample residuals of `log N` against the fitted line, in sample
    /// order (after any transient drop).
    pub residuals: Vec<f64>,
    /// True when the two coarsest samples were dropped because residuals
    /// exceeded the transient threshold.
    pub dropped_transient: bool,
}

const TRANSIENT_RESIDUAL_LIMIT: f64 = 0.05;

/// Counts at `delta = base^(-q)` for `q` in `[q_min, q_max]` and returns the
/// least-squares slope of `log N` against `-log delta`.
pub fn estimate_box_dimension(
    system: &BaranskiSystem,
    options: &RegressionOptions,
) -> Result<BoxDimensionEstimate, BoxcountError> {
    if options.base <= 1.0 {
        return Err(BoxcountError::BadBase(options.base));
    }
    if options.q_min > options.q_max {
        return Err(BoxcountError::EmptyLadder {
            q_min: options.q_min,
            q_max: options.q_max,
        });
    }
    let expand = ExpandOptions {
        max_rects: options.max_rects,
    };
    let mut samples = Vec::new();
    for q in options.q_min..=options.q_max {
        let delta = options.base.powi(-(q as i32));
        let count = count_boxes_at_scale(system, delta, &expand, options.mode)?;
        samples.push(BoxCountSample { q, delta, count });
    }

    let (slope, intercept, residuals) = fit(&samples);
    let max_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if max_residual > TRANSIENT_RESIDUAL_LIMIT && samples.len() >= 4 {
        let trimmed = samples[2..].to_vec();
        let (slope, intercept, residuals) = fit(&trimmed);
        return Ok(BoxDimensionEstimate {
            slope,
            intercept,
            samples,
            residuals,
            dropped_transient: true,
        });
    }
    Ok(BoxDimensionEstimate {
        slope,
        intercept,
        samples,
        residuals,
        dropped_transient: false,
    })
}

fn fit(samples: &[BoxCountSample]) -> (f64, f64, Vec<f64>) {
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| -s.delta.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| (s.count as f64).ln()).collect();
    if samples.len() == 1 {
        return (ys[0] / xs[0].max(f64::MIN_POSITIVE), 0.0, vec![0.0]);
    }
    let mean_x: f64 = xs.iter().sum::<f64>() / n;
    let mean_y: f64 = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(&ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residuals = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| y - (slope * x + intercept))
        .collect();
    (slope, intercept, residuals)
}

/// A deterministic grayscale raster of the covering rectangles. Pixel values
/// count covering rectangles, saturating at 255. Row 0 is the top of the
/// unit square.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayscaleRaster {
    pub resolution: usize,
    /// Row-major, top row first.
    pub pixels: Vec<u8>,
}

impl GrayscaleRaster {
    /// Binary PGM (P5), 8-bit, width = height = resolution.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.resolution, self.resolution)?;
        w.write_all(&self.pixels)
    }
}

/// Rasterizes the scale-`delta` covering onto a `resolution`-pixel grid.
/// Identical bytes for identical inputs, in either execution mode.
pub fn render_image(
    system: &BaranskiSystem,
    delta: f64,
    resolution: usize,
    options: &ExpandOptions,
    mode: ExecMode,
) -> Result<GrayscaleRaster, BoxcountError> {
    check_scale(delta)?;
    if resolution == 0 {
        return Err(BoxcountError::ZeroResolution);
    }
    let steps = StepTable::new(system);
    let emitted = AtomicU64::new(0);
    let res = resolution;

    let paint = |counts: &mut [u8], x0: f64, y0: f64, w: f64, h: f64| {
        let scale = res as f64;
        let px0 = ((x0 * scale).floor() as i64).clamp(0, res as i64 - 1) as usize;
        let py0 = ((y0 * scale).floor() as i64).clamp(0, res as i64 - 1) as usize;
        let px1 = (((x0 + w) * scale).ceil() as i64 - 1).clamp(px0 as i64, res as i64 - 1) as usize;
        let py1 = (((y0 + h) * scale).ceil() as i64 - 1).clamp(py0 as i64, res as i64 - 1) as usize;
        for py in py0..=py1 {
            for px in px0..=px1 {
                let slot = &mut counts[py * res + px];
                *slot = slot.saturating_add(1);
            }
        }
    };

    let counts: Vec<u8> = if 1.0f64 <= delta {
        let mut counts = vec![0u8; res * res];
        paint(&mut counts, 0.0, 0.0, 1.0, 1.0);
        counts
    } else {
        let branch = |idx: usize| -> Result<Vec<u8>, BoxcountError> {
            let mut counts = vec![0u8; res * res];
            let mut meter = BudgetMeter::new(&emitted, options.max_rects);
            visit_rects(
                &steps,
                delta,
                steps.tx[idx],
                steps.ty[idx],
                steps.sx[idx],
                steps.sy[idx],
                &mut meter,
                &mut |x0, y0, w, h| paint(&mut counts, x0, y0, w, h),
            )?;
            meter.flush()?;
            Ok(counts)
        };
        let partials: Result<Vec<Vec<u8>>, BoxcountError> = match mode.effective() {
            #[cfg(feature = "parallel")]
            ExecMode::Parallel => (0..steps.len()).into_par_iter().map(branch).collect(),
            _ => (0..steps.len()).map(branch).collect(),
        };
        partials?
            .into_iter()
            .reduce(|mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = x.saturating_add(y);
                }
                a
            })
            .expect("pattern is nonempty")
    };

    // Flip so row 0 shows the top of the square.
    let mut pixels = vec![0u8; res * res];
    for row in 0..res {
        let src = (res - 1 - row) * res;
        pixels[row * res..(row + 1) * res].copy_from_slice(&counts[src..src + res]);
    }
    Ok(GrayscaleRaster {
        resolution: res,
        pixels,
    })
}
